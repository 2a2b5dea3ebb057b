#include "rrtrack/tracker.hpp"

#include <cmath>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

Tensor crop_batch(const Image& image, const CropWindow& window, std::size_t size) {
  Tensor t = Tensor::zeros({1, 3, size, size});
  extract_crop_into(image, window, size, t.data());
  return t;
}

}  // namespace

Tracker::Tracker(const NetworkParams& params, TrackerOptions options) : params_(params), options_(options) {
  if (options_.reset_enabled && options_.reset_interval == 0) throw UsageError("reset interval must be positive");
}

void Tracker::init(const Image& frame, const BoundingBox& box) {
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) || !std::isfinite(box.x2) || !std::isfinite(box.y2)) {
    throw UsageError("initial box must be finite");
  }
  if (!box.valid()) throw UsageError("initial box must satisfy x1 < x2 and y1 < y2");
  const std::size_t S = params_.config().crop_size;
  const auto window = crop_window_for(box);
  const Tensor crop = crop_batch(frame, window, S);
  Graph g(false);
  auto out = forward_step(g, params_, crop, crop, LstmState::zeros(1, params_.config().lstm_units));
  snapshot_ = out.state.detached();
  state_ = snapshot_.detached();
  prev_box_ = box;
  prev_frame_ = frame;
  since_reset_ = 0;
  resets_ = 0;
  flagged_ = false;
  flagged_total_ = 0;
  initialized_ = true;
}

BoundingBox Tracker::step(const Image& frame) {
  if (!initialized_) throw UsageError("tracker stepped before init");
  const std::size_t S = params_.config().crop_size;
  const auto window = crop_window_for(prev_box_);
  Graph g(false);
  auto out = forward_step(g, params_, crop_batch(prev_frame_, window, S), crop_batch(frame, window, S), state_);

  bool finite = true;
  for (double v : out.pred.data()) finite = finite && std::isfinite(v);
  flagged_ = !finite;
  if (finite) {
    prev_box_ = decode_prediction(window, crop_frame_row(out.pred, 0)).box;
    state_ = out.state;
  } else {
    ++flagged_total_;
  }
  prev_frame_ = frame;

  ++since_reset_;
  if (options_.reset_enabled && since_reset_ == options_.reset_interval) {
    state_ = snapshot_.detached();
    since_reset_ = 0;
    ++resets_;
  }
  return prev_box_;
}

std::vector<BoundingBox> track_sequence(const NetworkParams& params, std::span<const Image> frames,
                                        const BoundingBox& init_box, TrackerOptions options) {
  if (frames.size() < 2) throw UsageError("tracking needs at least two frames");
  Tracker tracker(params, options);
  tracker.init(frames[0], init_box);
  std::vector<BoundingBox> out;
  out.reserve(frames.size() - 1);
  for (std::size_t i = 1; i < frames.size(); ++i) out.push_back(tracker.step(frames[i]));
  return out;
}

}  // namespace rrtrack
