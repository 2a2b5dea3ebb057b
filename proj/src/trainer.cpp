#include "rrtrack/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

bool finite_box(const BoundingBox& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2);
}

double window_mean(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::vector<UnrollStep> build_batch(std::span<const SyntheticSequence> seqs, std::span<const CropMode> modes,
                                    std::size_t unroll, const NetworkParams& params,
                                    std::vector<std::vector<CropWindow>>* windows_out) {
  if (seqs.empty()) throw UsageError("training batch is empty");
  if (seqs.size() != modes.size()) throw UsageError("one crop mode per sequence required");
  if (unroll == 0) throw UsageError("unroll must be positive");
  for (const auto& s : seqs) {
    if (s.size() < unroll + 1 || s.truth.size() != s.size()) {
      throw UsageError(fmt::format("sequence of {} frames is too short for {} unrolls", s.size(), unroll));
    }
  }
  const std::size_t B = seqs.size();
  const std::size_t S = params.config().crop_size;
  const std::size_t per = 3 * S * S;

  std::vector<std::size_t> predicted_rows;
  for (std::size_t b = 0; b < B; ++b) {
    if (modes[b] == CropMode::predicted) predicted_rows.push_back(b);
  }
  const std::size_t P = predicted_rows.size();
  LstmState state;
  if (P > 0) state = LstmState::zeros(P, params.config().lstm_units);

  std::vector<BoundingBox> boxes(B);
  for (std::size_t b = 0; b < B; ++b) boxes[b] = seqs[b].truth[0];

  std::vector<UnrollStep> steps;
  steps.reserve(unroll);
  std::vector<CropWindow> windows(B);
  if (windows_out) windows_out->assign(B, {});
  for (std::size_t t = 1; t <= unroll; ++t) {
    UnrollStep step{Tensor::zeros({B, 3, S, S}), Tensor::zeros({B, 3, S, S}), Tensor()};
    std::vector<CropFrameBox> targets(B);
    auto prev = step.crops_prev.data();
    auto cur = step.crops_cur.data();
    for (std::size_t b = 0; b < B; ++b) {
      windows[b] = crop_window_for(boxes[b]);
      extract_crop_into(seqs[b].frames[t - 1], windows[b], S, prev.subspan(b * per, per));
      extract_crop_into(seqs[b].frames[t], windows[b], S, cur.subspan(b * per, per));
      targets[b] = encode_target(windows[b], seqs[b].truth[t]);
      if (windows_out) (*windows_out)[b].push_back(windows[b]);
      boxes[b] = seqs[b].truth[t];
    }
    step.target = target_tensor(targets);

    if (P > 0 && t < unroll) {
      Tensor sub_prev = Tensor::zeros({P, 3, S, S});
      Tensor sub_cur = Tensor::zeros({P, 3, S, S});
      for (std::size_t i = 0; i < P; ++i) {
        const std::size_t b = predicted_rows[i];
        std::copy_n(prev.begin() + b * per, per, sub_prev.data().begin() + i * per);
        std::copy_n(cur.begin() + b * per, per, sub_cur.data().begin() + i * per);
      }
      Graph g(false);
      auto out = forward_step(g, params, sub_prev, sub_cur, state);
      state = out.state;
      for (std::size_t i = 0; i < P; ++i) {
        const std::size_t b = predicted_rows[i];
        const auto decoded = decode_prediction(windows[b], crop_frame_row(out.pred, i)).box;
        boxes[b] = finite_box(decoded) ? decoded : seqs[b].truth[t];
      }
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

}  // namespace

std::vector<UnrollStep> build_training_batch(std::span<const SyntheticSequence> seqs, std::span<const CropMode> modes,
                                             std::size_t unroll, const NetworkParams& params) {
  return build_batch(seqs, modes, unroll, params, nullptr);
}

CropMode select_crop_source(double p_self, Rng& rng) {
  if (!(p_self >= 0.0 && p_self <= 1.0)) throw UsageError("p_self must lie in [0,1]");
  std::bernoulli_distribution draw(p_self);
  return draw(rng) ? CropMode::predicted : CropMode::ground_truth;
}

std::vector<TrainingExample> build_training_sequence(const SyntheticSequence& seq, std::size_t unroll, CropMode mode,
                                                     const NetworkParams& params) {
  const std::array<CropMode, 1> modes{mode};
  std::vector<std::vector<CropWindow>> windows;
  auto steps = build_batch(std::span(&seq, 1), modes, unroll, params, &windows);
  const std::size_t S = params.config().crop_size;
  std::vector<TrainingExample> out;
  out.reserve(unroll);
  for (auto& s : steps) {
    TrainingExample ex;
    ex.crop_prev = Tensor::from({3, S, S}, {s.crops_prev.data().begin(), s.crops_prev.data().end()});
    ex.crop_cur = Tensor::from({3, S, S}, {s.crops_cur.data().begin(), s.crops_cur.data().end()});
    ex.target = crop_frame_row(s.target, 0);
    ex.window = windows[0][out.size()];
    out.push_back(std::move(ex));
  }
  return out;
}

bool plateau_detect(std::span<const double> history, const PlateauOptions& options) {
  if (options.stage_cap > 0 && history.size() >= options.stage_cap) return true;
  const std::size_t k = options.window;
  if (k == 0 || history.size() < 2 * k) return false;
  const double last = window_mean(history.last(k));
  const double before = window_mean(history.subspan(history.size() - 2 * k, k));
  if (!(before > 0.0)) return true;
  return (before - last) / before < options.threshold;
}

bool advance_stage(TrainState& state) {
  if (state.stage + 1 >= kCurriculum.size()) return false;
  ++state.stage;
  state.stage_losses.clear();
  return true;
}

SyntheticSequence SyntheticSource::sample(std::size_t length, Rng& rng) {
  return generate_sequence(sampler_, length, rng());
}

DatasetSource::DatasetSource(std::vector<SyntheticSequence> sequences) : sequences_(std::move(sequences)) {
  if (sequences_.empty()) throw UsageError("dataset source has no sequences");
}

std::size_t DatasetSource::longest() const {
  std::size_t n = 0;
  for (const auto& s : sequences_) n = std::max(n, s.size());
  return n;
}

SyntheticSequence DatasetSource::sample(std::size_t length, Rng& rng) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    if (sequences_[i].size() >= length) usable.push_back(i);
  }
  if (usable.empty()) {
    throw UsageError(fmt::format("no training sequence has the {} frames the curriculum needs", length));
  }
  const auto& src = sequences_[usable[std::uniform_int_distribution<std::size_t>(0, usable.size() - 1)(rng)]];
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, src.size() - length)(rng);
  SyntheticSequence out;
  out.seed = src.seed;
  out.frames.assign(src.frames.begin() + start, src.frames.begin() + start + length);
  out.truth.assign(src.truth.begin() + start, src.truth.begin() + start + length);
  out.occluded.assign(src.occluded.begin() + start, src.occluded.begin() + start + length);
  return out;
}

std::string format_loss_row(const LossRecord& r) {
  return fmt::format("{},{},{},{},{},{},{}", r.iteration, r.stage, r.unroll, r.batch, r.p_self, r.lr, r.loss);
}

std::string checkpoint_filename(std::size_t iteration) { return fmt::format("ckpt_{}.re3", iteration); }

Trainer::Trainer(TrainConfig config, SequenceSource& source, std::size_t total_iterations)
    : config_(std::move(config)), source_(source), total_(total_iterations) {
  config_.network.validate();
  if (!(config_.mirror_probability >= 0.0 && config_.mirror_probability <= 1.0)) {
    throw UsageError("mirror probability must lie in [0,1]");
  }
  state_.params = NetworkParams::initialize(config_.network);
  state_.params.set_requires_grad(true);
  state_.adam.lr = config_.lr_initial;
  state_.rng.seed(config_.seed);
}

double Trainer::learning_rate(std::size_t iteration) const {
  const double drop_at = config_.lr_drop_fraction * static_cast<double>(total_);
  return static_cast<double>(iteration) < drop_at ? config_.lr_initial : config_.lr_final;
}

LossRecord Trainer::step() {
  const CurriculumStage stage = kCurriculum[state_.stage];
  const double p_self = config_.self_training ? stage.p_self : 0.0;
  auto& rng = state_.rng;

  std::vector<SyntheticSequence> seqs;
  std::vector<CropMode> modes;
  seqs.reserve(stage.batch);
  std::bernoulli_distribution mirror(config_.mirror_probability);
  for (std::size_t b = 0; b < stage.batch; ++b) {
    auto seq = source_.sample(stage.unroll + 1, rng);
    if (mirror(rng)) {
      auto [frames, truth] = mirror_track(seq.frames, seq.truth);
      seq.frames = std::move(frames);
      seq.truth = std::move(truth);
    }
    seqs.push_back(std::move(seq));
    modes.push_back(select_crop_source(p_self, rng));
  }

  auto steps = build_training_batch(seqs, modes, stage.unroll, state_.params);

  LossRecord rec;
  rec.iteration = state_.iteration + 1;
  rec.stage = state_.stage;
  rec.unroll = stage.unroll;
  rec.batch = stage.batch;
  rec.p_self = p_self;
  rec.lr = learning_rate(state_.iteration);

  auto& params = state_.params;
  params.zero_grad();
  Graph g;
  Tensor loss = unrolled_loss(g, params, steps, LstmState::zeros(stage.batch, config_.network.lstm_units));
  rec.loss = loss.item();
  if (!std::isfinite(rec.loss)) {
    throw NumericalError(fmt::format("non-finite training loss at iteration {}", rec.iteration));
  }
  g.backward(loss);
  auto tensors = params.tensors();
  state_.adam.lr = rec.lr;
  adam_step(tensors, state_.adam);

  ++state_.iteration;
  state_.stage_losses.push_back(rec.loss);
  if (plateau_detect(state_.stage_losses, config_.plateau)) advance_stage(state_);
  return rec;
}

TrainResult train(const TrainConfig& config, SequenceSource& source, std::size_t iterations,
                  const std::filesystem::path& out_dir, const std::function<void(const LossRecord&)>& on_step) {
  Trainer trainer(config, source, iterations);
  TrainResult result;
  std::ofstream log;
  const bool persist = !out_dir.empty();
  if (persist) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "loss.csv", std::ios::binary);
    if (!log) throw FormatError("cannot write " + (out_dir / "loss.csv").string());
    log << kLossCsvHeader << '\n';
    save_network(out_dir / checkpoint_filename(0), trainer.state().params, config.checkpoint_dtype);
  }
  for (std::size_t i = 0; i < iterations; ++i) {
    LossRecord rec;
    try {
      rec = trainer.step();
    } catch (const NumericalError&) {
      if (persist) {
        save_network(out_dir / fmt::format("diverged_{}.re3", trainer.state().iteration + 1), trainer.state().params,
                     DType::f64);
      }
      throw;
    }
    if (persist) {
      log << format_loss_row(rec) << '\n';
      log.flush();
      const bool last = i + 1 == iterations;
      if (last || (config.checkpoint_every > 0 && rec.iteration % config.checkpoint_every == 0)) {
        save_network(out_dir / checkpoint_filename(rec.iteration), trainer.state().params, config.checkpoint_dtype);
      }
    }
    if (on_step) on_step(rec);
    result.log.push_back(rec);
  }
  result.params = trainer.state().params;
  result.final_stage = trainer.state().stage;
  return result;
}

}  // namespace rrtrack
