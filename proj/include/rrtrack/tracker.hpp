#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rrtrack/geometry.hpp"
#include "rrtrack/image.hpp"
#include "rrtrack/network.hpp"

namespace rrtrack {

struct TrackerOptions {
  std::size_t reset_interval = 32;
  bool reset_enabled = true;
};

/// Streaming single-object tracker. Holds a reference to read-only parameters,
/// so several trackers may share one NetworkParams.
class Tracker {
 public:
  explicit Tracker(const NetworkParams& params, TrackerOptions options = {});

  /// First forward pass on (frame, frame) from a zero state; its resulting
  /// state becomes both the current state and the reset snapshot.
  void init(const Image& frame, const BoundingBox& box);

  /// Box for the next frame. A non-finite network output returns the previous
  /// box, leaves the recurrent state untouched and sets last_step_flagged().
  BoundingBox step(const Image& frame);

  bool initialized() const { return initialized_; }
  const BoundingBox& box() const { return prev_box_; }
  const LstmState& state() const { return state_; }
  const LstmState& snapshot() const { return snapshot_; }
  std::size_t frames_since_reset() const { return since_reset_; }
  std::size_t reset_count() const { return resets_; }
  bool last_step_flagged() const { return flagged_; }
  std::size_t flagged_count() const { return flagged_total_; }
  const TrackerOptions& options() const { return options_; }

 private:
  const NetworkParams& params_;
  TrackerOptions options_;
  bool initialized_ = false;
  LstmState state_;
  LstmState snapshot_;
  BoundingBox prev_box_;
  Image prev_frame_;
  std::size_t since_reset_ = 0;
  std::size_t resets_ = 0;
  bool flagged_ = false;
  std::size_t flagged_total_ = 0;
};

/// Initialises on frames[0] and returns one box per later frame.
std::vector<BoundingBox> track_sequence(const NetworkParams& params, std::span<const Image> frames,
                                        const BoundingBox& init_box, TrackerOptions options = {});

inline constexpr const char* kTrackCsvHeader = "frame_index,x1,y1,x2,y2";

}  // namespace rrtrack
