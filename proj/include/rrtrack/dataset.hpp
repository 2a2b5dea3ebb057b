#pragma once

// On-disk sequence layout: one directory per sequence holding frame_NNNNN.ppm
// files and annotations.txt with lines
//   frame_index x1 y1 x2 y2 occluded{0|1}
// The occluded column is optional on import.

#include <filesystem>
#include <string>
#include <vector>

#include "rrtrack/synthgen.hpp"

namespace rrtrack {

struct LoadedSequence {
  std::string name;
  SyntheticSequence seq;
  bool has_occlusion_flags = false;
};

std::string frame_filename(std::size_t index);

void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq);

LoadedSequence read_sequence(const std::filesystem::path& dir);

/// Sorted list of subdirectories of `root` that contain annotations.txt.
std::vector<std::filesystem::path> list_sequence_dirs(const std::filesystem::path& root);

/// Frames (*.ppm) of a directory in name order.
std::vector<Image> read_frames(const std::filesystem::path& dir);

}  // namespace rrtrack
