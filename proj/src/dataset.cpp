#include "rrtrack/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rrtrack/errors.hpp"

namespace rrtrack {

std::string frame_filename(std::size_t index) { return fmt::format("frame_{:05d}.ppm", index); }

void write_sequence(const std::filesystem::path& dir, const SyntheticSequence& seq) {
  std::filesystem::create_directories(dir);
  std::ofstream ann(dir / "annotations.txt", std::ios::binary);
  if (!ann) throw FormatError("cannot write annotations in " + dir.string());
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    write_ppm(dir / frame_filename(i), seq.frames[i]);
    const auto& b = seq.truth[i];
    ann << fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f} {}\n", i, b.x1, b.y1, b.x2, b.y2, seq.occluded[i] ? 1 : 0);
  }
}

std::vector<Image> read_frames(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Image> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(read_ppm(p));
  return frames;
}

LoadedSequence read_sequence(const std::filesystem::path& dir) {
  LoadedSequence out;
  out.name = dir.filename().string();
  std::ifstream ann(dir / "annotations.txt");
  if (!ann) throw FormatError("missing annotations.txt in " + dir.string());
  std::string line;
  std::size_t expected = 0;
  bool any_flags = false, all_flags = true;
  while (std::getline(ann, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::size_t index;
    BoundingBox b;
    if (!(is >> index >> b.x1 >> b.y1 >> b.x2 >> b.y2)) {
      throw FormatError(dir.string() + ": malformed annotation line '" + line + "'");
    }
    if (index != expected) throw FormatError(dir.string() + ": annotation frame indices must run 0,1,2,...");
    int flag = 0;
    if (is >> flag) {
      any_flags = true;
    } else {
      all_flags = false;
    }
    out.seq.truth.push_back(b);
    out.seq.occluded.push_back(flag != 0);
    ++expected;
  }
  if (any_flags && !all_flags) throw FormatError(dir.string() + ": occlusion flags present on some lines only");
  out.has_occlusion_flags = any_flags;
  out.seq.frames = read_frames(dir);
  if (out.seq.frames.size() != out.seq.truth.size()) {
    throw FormatError(dir.string() + ": " + std::to_string(out.seq.frames.size()) + " frames but " +
                      std::to_string(out.seq.truth.size()) + " annotations");
  }
  return out;
}

std::vector<std::filesystem::path> list_sequence_dirs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  if (!std::filesystem::is_directory(root)) return dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "annotations.txt")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace rrtrack
