#include "rrtrack/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

void finish(EvalResult& r, double scale) {
  std::vector<double> scored, occluded;
  for (std::size_t i = 0; i < r.ious.size(); ++i) {
    if (!r.scored[i]) continue;
    scored.push_back(r.ious[i]);
    if (r.occluded[i]) occluded.push_back(r.ious[i]);
  }
  r.accuracy = 0.0;
  for (double v : scored) r.accuracy += v;
  if (!scored.empty()) r.accuracy /= static_cast<double>(scored.size());
  r.robustness = robustness_score(r.drops, r.frames, scale);
  r.average = 0.5 * (r.accuracy + r.robustness);
  r.success = scored.empty() ? SuccessCurve{} : success_curve(scored);
  r.success_occluded.reset();
  if (!occluded.empty()) r.success_occluded = success_curve(occluded);
}

std::string cell(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

std::array<double, kSuccessThresholds> success_thresholds() {
  std::array<double, kSuccessThresholds> t{};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / (kSuccessThresholds - 1);
  return t;
}

SuccessCurve success_curve(std::span<const double> ious) {
  if (ious.empty()) throw UsageError("success curve needs at least one frame");
  SuccessCurve c;
  const auto thresholds = success_thresholds();
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    std::size_t hits = 0;
    for (double v : ious) hits += v >= thresholds[k] ? 1 : 0;
    c.fraction[k] = static_cast<double>(hits) / static_cast<double>(ious.size());
  }
  double area = 0.5 * (c.fraction.front() + c.fraction.back());
  for (std::size_t k = 1; k + 1 < thresholds.size(); ++k) area += c.fraction[k];
  c.auc = area / static_cast<double>(kSuccessThresholds - 1);
  return c;
}

double robustness_score(std::size_t drops, std::size_t frames, double scale) {
  if (frames == 0) return 1.0;
  return std::exp(-scale * static_cast<double>(drops) / static_cast<double>(frames));
}

EvalResult ope_evaluate(std::span<const BoundingBox> pred, std::span<const BoundingBox> truth,
                        std::span<const bool> occluded, double robustness_scale) {
  if (pred.size() != truth.size()) {
    throw UsageError(fmt::format("{} predictions for {} ground-truth boxes", pred.size(), truth.size()));
  }
  if (!occluded.empty() && occluded.size() != truth.size()) throw UsageError("occlusion mask length mismatch");
  if (pred.empty()) throw UsageError("nothing to evaluate");
  EvalResult r;
  r.has_occlusion_flags = !occluded.empty();
  r.frames = pred.size();
  bool lost = false;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double v = iou(pred[i], truth[i]);
    r.ious.push_back(v);
    r.occluded.push_back(!occluded.empty() && occluded[i]);
    r.scored.push_back(true);
    if (v <= 0.0 && !lost) ++r.drops;
    lost = v <= 0.0;
  }
  finish(r, robustness_scale);
  return r;
}

EvalResult vot_evaluate(SequenceTracker& tracker, const SyntheticSequence& seq, bool has_occlusion_flags,
                        const VotOptions& options) {
  const std::size_t n = seq.size();
  if (n < 2 || seq.truth.size() != n) throw UsageError("evaluation needs at least two annotated frames");
  if (options.reinit_gap == 0) throw UsageError("reinit gap must be positive");
  EvalResult r;
  r.has_occlusion_flags = has_occlusion_flags;
  r.frames = n;
  tracker.init(0, seq.frames[0], seq.truth[0]);
  std::size_t resume_at = 0;  // frame index of a pending re-init, 0 when tracking
  for (std::size_t t = 1; t < n; ++t) {
    const bool occ = has_occlusion_flags && seq.occluded[t];
    if (resume_at != 0) {
      if (t < resume_at) {
        r.ious.push_back(0.0);
        r.occluded.push_back(occ);
        r.scored.push_back(false);
        continue;
      }
      tracker.init(t, seq.frames[t], seq.truth[t]);
      resume_at = 0;
      r.ious.push_back(1.0);
      r.occluded.push_back(occ);
      r.scored.push_back(false);
      continue;
    }
    const double v = iou(tracker.step(t, seq.frames[t]), seq.truth[t]);
    r.ious.push_back(v);
    r.occluded.push_back(occ);
    r.scored.push_back(true);
    if (v <= 0.0) {
      ++r.drops;
      resume_at = t + options.reinit_gap;
    }
  }
  finish(r, options.robustness_scale);
  return r;
}

EvalResult ope_run(SequenceTracker& tracker, const SyntheticSequence& seq, bool has_occlusion_flags,
                   double robustness_scale) {
  const std::size_t n = seq.size();
  if (n < 2 || seq.truth.size() != n) throw UsageError("evaluation needs at least two annotated frames");
  tracker.init(0, seq.frames[0], seq.truth[0]);
  std::vector<BoundingBox> pred;
  for (std::size_t t = 1; t < n; ++t) pred.push_back(tracker.step(t, seq.frames[t]));
  std::vector<BoundingBox> truth(seq.truth.begin() + 1, seq.truth.end());
  // std::vector<bool> is not contiguous, so the mask is widened for the span.
  const std::size_t m = has_occlusion_flags ? n - 1 : 0;
  std::unique_ptr<bool[]> flags(new bool[m]);
  for (std::size_t i = 0; i < m; ++i) flags[i] = seq.occluded[i + 1];
  return ope_evaluate(pred, truth, std::span<const bool>(flags.get(), m), robustness_scale);
}

std::vector<BoundingBox> baseline_static(std::span<const Image> frames, const BoundingBox& init_box) {
  if (frames.size() < 2) throw UsageError("tracking needs at least two frames");
  return std::vector<BoundingBox>(frames.size() - 1, init_box);
}

EvalResult aggregate(std::span<const EvalResult> results, double robustness_scale) {
  if (results.empty()) throw UsageError("nothing to aggregate");
  EvalResult r;
  r.has_occlusion_flags = std::all_of(results.begin(), results.end(), [](const auto& x) { return x.has_occlusion_flags; });
  for (const auto& x : results) {
    r.ious.insert(r.ious.end(), x.ious.begin(), x.ious.end());
    r.occluded.insert(r.occluded.end(), x.occluded.begin(), x.occluded.end());
    r.scored.insert(r.scored.end(), x.scored.begin(), x.scored.end());
    r.frames += x.frames;
    r.drops += x.drops;
  }
  if (!r.has_occlusion_flags) std::fill(r.occluded.begin(), r.occluded.end(), false);
  finish(r, robustness_scale);
  return r;
}

ComparisonReport compare(std::vector<NamedResult> results, bool include_occluded) {
  std::stable_sort(results.begin(), results.end(),
                   [](const NamedResult& a, const NamedResult& b) { return a.method < b.method; });
  ComparisonReport report;
  std::string& s = report.summary_csv;
  s += "# robustness = exp(-30*drops/frames); average = (accuracy+robustness)/2\n";
  s += include_occluded ? "method,accuracy,drops,robustness,average,auc,auc_occluded\n"
                        : "method,accuracy,drops,robustness,average,auc\n";
  for (const auto& [name, r] : results) {
    s += fmt::format("{},{},{},{},{},{}", name, cell(r.accuracy), r.drops, cell(r.robustness), cell(r.average),
                     cell(r.success.auc));
    if (include_occluded) s += "," + (r.success_occluded ? cell(r.success_occluded->auc) : std::string());
    s += '\n';
  }

  std::string& c = report.success_curve_csv;
  c += "threshold";
  for (const auto& nr : results) {
    c += "," + nr.method;
    if (include_occluded) c += "," + nr.method + ":occluded";
  }
  c += '\n';
  const auto thresholds = success_thresholds();
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    c += fmt::format("{:.2f}", thresholds[k]);
    for (const auto& nr : results) {
      c += "," + cell(nr.result.success.fraction[k]);
      if (include_occluded) {
        c += "," + (nr.result.success_occluded ? cell(nr.result.success_occluded->fraction[k]) : std::string());
      }
    }
    c += '\n';
  }
  return report;
}

}  // namespace rrtrack
