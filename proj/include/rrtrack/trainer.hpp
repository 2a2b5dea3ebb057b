#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rrtrack/checkpoint.hpp"
#include "rrtrack/network.hpp"
#include "rrtrack/optim.hpp"
#include "rrtrack/synthgen.hpp"

namespace rrtrack {

struct CurriculumStage {
  std::size_t unroll;
  std::size_t batch;
  double p_self;
  friend bool operator==(const CurriculumStage&, const CurriculumStage&) = default;
};

inline constexpr std::array<CurriculumStage, 5> kCurriculum{{
    {2, 64, 0.0},
    {4, 32, 0.25},
    {8, 16, 0.5},
    {16, 8, 0.75},
    {32, 4, 0.75},
}};

enum class CropMode { ground_truth, predicted };

/// One Bernoulli(p_self) draw; the result applies to a whole training sequence.
CropMode select_crop_source(double p_self, Rng& rng);

struct TrainingExample {
  CropWindow window;
  Tensor crop_prev;  // [3,S,S]
  Tensor crop_cur;   // [3,S,S]
  CropFrameBox target;
};

/// Frames 0..unroll of `seq`. The first window always comes from the true
/// initial box; in predicted mode later windows follow the network's own
/// decoded outputs.
std::vector<TrainingExample> build_training_sequence(const SyntheticSequence& seq, std::size_t unroll, CropMode mode,
                                                     const NetworkParams& params);

/// Batched variant used by the training loop. Row b of each step comes from
/// seqs[b] under modes[b].
std::vector<UnrollStep> build_training_batch(std::span<const SyntheticSequence> seqs, std::span<const CropMode> modes,
                                             std::size_t unroll, const NetworkParams& params);

struct PlateauOptions {
  std::size_t window = 500;
  double threshold = 0.01;
  // Forces a stage advance after this many iterations in one stage; 0 disables.
  std::size_t stage_cap = 10000;
};

/// `history` holds the losses of the current stage, oldest first. True when the
/// mean of the last `window` losses improves on the mean of the window before
/// it by less than `threshold` (relative), or when the stage cap is reached.
bool plateau_detect(std::span<const double> history, const PlateauOptions& options);

struct TrainConfig {
  NetworkConfig network = NetworkConfig::desk();
  SynthConfig synth;
  double lr_initial = 1e-3;
  double lr_final = 1e-4;
  double lr_drop_fraction = 0.2;
  PlateauOptions plateau;
  // When false p_self stays 0 at every stage.
  bool self_training = true;
  double mirror_probability = 0.5;
  // 0 writes only the initial and final checkpoints.
  std::size_t checkpoint_every = 1000;
  DType checkpoint_dtype = DType::f64;
  std::uint64_t seed = 1;
};

class SequenceSource {
 public:
  virtual ~SequenceSource() = default;
  /// A sequence of exactly `length` frames.
  virtual SyntheticSequence sample(std::size_t length, Rng& rng) = 0;
};

/// Freshly generated synthetic sequences.
class SyntheticSource : public SequenceSource {
 public:
  explicit SyntheticSource(SynthConfig config) : sampler_(std::move(config)) {}
  SyntheticSequence sample(std::size_t length, Rng& rng) override;

 private:
  SceneSampler sampler_;
};

/// Random sub-windows of pre-loaded sequences.
class DatasetSource : public SequenceSource {
 public:
  explicit DatasetSource(std::vector<SyntheticSequence> sequences);
  SyntheticSequence sample(std::size_t length, Rng& rng) override;
  std::size_t longest() const;

 private:
  std::vector<SyntheticSequence> sequences_;
};

struct TrainState {
  NetworkParams params;
  AdamState adam;
  std::size_t stage = 0;
  std::size_t iteration = 0;
  std::vector<double> stage_losses;
  Rng rng;
};

/// Moves to the next ladder stage and clears the stage loss history. Adam
/// moments are kept. Returns false (and changes nothing) at the final stage.
bool advance_stage(TrainState& state);

struct LossRecord {
  std::size_t iteration = 0;
  std::size_t stage = 0;
  std::size_t unroll = 0;
  std::size_t batch = 0;
  double p_self = 0.0;
  double lr = 0.0;
  double loss = 0.0;
};

inline constexpr const char* kLossCsvHeader = "iteration,stage,unroll,batch,p_self,lr,loss";
std::string format_loss_row(const LossRecord& record);

std::string checkpoint_filename(std::size_t iteration);

class Trainer {
 public:
  Trainer(TrainConfig config, SequenceSource& source, std::size_t total_iterations);

  /// One optimisation step. Throws NumericalError on a non-finite loss or
  /// gradient, leaving the parameters untouched.
  LossRecord step();

  double learning_rate(std::size_t iteration) const;
  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  SequenceSource& source_;
  std::size_t total_;
  TrainState state_;
};

struct TrainResult {
  NetworkParams params;
  std::vector<LossRecord> log;
  std::size_t final_stage = 0;
};

/// Runs `iterations` steps. With a non-empty `out_dir` writes ckpt_<iter>.re3
/// files (initial, periodic, final) and loss.csv. On a numerical failure a
/// diagnostic checkpoint diverged_<iter>.re3 is written before rethrowing.
TrainResult train(const TrainConfig& config, SequenceSource& source, std::size_t iterations,
                  const std::filesystem::path& out_dir = {},
                  const std::function<void(const LossRecord&)>& on_step = {});

}  // namespace rrtrack
