#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrtrack/geometry.hpp"
#include "rrtrack/image.hpp"
#include "rrtrack/network.hpp"
#include "rrtrack/synthgen.hpp"
#include "rrtrack/tracker.hpp"

namespace rrtrack {

inline constexpr std::size_t kSuccessThresholds = 21;

/// 0.00, 0.05, ..., 1.00
std::array<double, kSuccessThresholds> success_thresholds();

struct SuccessCurve {
  std::array<double, kSuccessThresholds> fraction{};
  double auc = 0.0;
};

/// Fraction of IOUs >= each threshold and the trapezoid area under it.
/// Requires at least one value.
SuccessCurve success_curve(std::span<const double> ious);

inline constexpr double kDefaultRobustnessScale = 30.0;

/// exp(-scale * drops / frames)
double robustness_score(std::size_t drops, std::size_t frames, double scale = kDefaultRobustnessScale);

struct EvalResult {
  std::vector<double> ious;       // per evaluated frame
  std::vector<bool> occluded;     // aligned with ious
  std::vector<bool> scored;       // counted towards accuracy and curves
  bool has_occlusion_flags = false;
  std::size_t frames = 0;
  std::size_t drops = 0;
  double accuracy = 0.0;
  double robustness = 1.0;
  double average = 0.0;
  SuccessCurve success;
  std::optional<SuccessCurve> success_occluded;  // empty without occluded frames
};

/// One-pass scoring of aligned predictions. `occluded` may be empty when the
/// data carries no occlusion flags. A drop is counted at every frame where the
/// overlap falls to zero after being positive (or at the first frame).
EvalResult ope_evaluate(std::span<const BoundingBox> pred, std::span<const BoundingBox> truth,
                        std::span<const bool> occluded, double robustness_scale = kDefaultRobustnessScale);

/// Tracker interface for VOT-style runs with reinitialisation.
class SequenceTracker {
 public:
  virtual ~SequenceTracker() = default;
  virtual void init(std::size_t frame_index, const Image& frame, const BoundingBox& box) = 0;
  virtual BoundingBox step(std::size_t frame_index, const Image& frame) = 0;
};

class RecurrentSequenceTracker : public SequenceTracker {
 public:
  RecurrentSequenceTracker(const NetworkParams& params, TrackerOptions options = {}) : tracker_(params, options) {}
  void init(std::size_t, const Image& frame, const BoundingBox& box) override { tracker_.init(frame, box); }
  BoundingBox step(std::size_t, const Image& frame) override { return tracker_.step(frame); }

 private:
  Tracker tracker_;
};

/// Returns the initial box forever.
class StaticSequenceTracker : public SequenceTracker {
 public:
  void init(std::size_t, const Image&, const BoundingBox& box) override { box_ = box; }
  BoundingBox step(std::size_t, const Image&) override { return box_; }

 private:
  BoundingBox box_;
};

/// Replays the ground truth.
class PlaybackSequenceTracker : public SequenceTracker {
 public:
  explicit PlaybackSequenceTracker(std::vector<BoundingBox> truth) : truth_(std::move(truth)) {}
  void init(std::size_t, const Image&, const BoundingBox&) override {}
  BoundingBox step(std::size_t frame_index, const Image&) override { return truth_.at(frame_index); }

 private:
  std::vector<BoundingBox> truth_;
};

struct VotOptions {
  std::size_t reinit_gap = 5;
  double robustness_scale = kDefaultRobustnessScale;
};

/// Runs `tracker` over frames 1..N-1. When the overlap hits zero a drop is
/// recorded and the tracker is re-initialised from the truth `reinit_gap`
/// frames later. Skipped frames and re-init frames stay in `ious` (as 0 and 1)
/// but are excluded from accuracy and the curves; the failure frame itself
/// counts with its zero overlap.
EvalResult vot_evaluate(SequenceTracker& tracker, const SyntheticSequence& seq, bool has_occlusion_flags,
                        const VotOptions& options = {});

/// One-pass run of `tracker` from the first box.
EvalResult ope_run(SequenceTracker& tracker, const SyntheticSequence& seq, bool has_occlusion_flags,
                   double robustness_scale = kDefaultRobustnessScale);

std::vector<BoundingBox> baseline_static(std::span<const Image> frames, const BoundingBox& init_box);

/// Pools frames of several sequences into one result.
EvalResult aggregate(std::span<const EvalResult> results, double robustness_scale = kDefaultRobustnessScale);

struct NamedResult {
  std::string method;
  EvalResult result;
};

struct ComparisonReport {
  std::string summary_csv;
  std::string success_curve_csv;
};

/// Rows sorted by method name. Occluded-subset columns are written when
/// `include_occluded` is set and left empty for methods without occluded
/// frames.
ComparisonReport compare(std::vector<NamedResult> results, bool include_occluded);

}  // namespace rrtrack
