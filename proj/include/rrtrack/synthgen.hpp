#pragma once

// Synthetic tracking sequences: an object patch and occluder patches cut from
// one source image move over that same image as background.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rrtrack/geometry.hpp"
#include "rrtrack/image.hpp"

namespace rrtrack {

using Rng = std::mt19937_64;

struct PatchSource {
  enum class Mode { procedural, image_directory };
  Mode mode = Mode::procedural;
  // Object patches cover at least this fraction of their source image.
  double min_area_fraction = 0.01;
  std::filesystem::path image_dir;
};

struct MotionDefaults {
  double speed_min = 0.0;
  double speed_max = 4.0;
  double sigma_speed = 0.5;
  double sigma_dir = 0.2;
  double sigma_aspect = 0.02;
  double sigma_scale = 0.02;
};

struct SynthConfig {
  int frame_width = 128;
  int frame_height = 128;
  PatchSource source;
  double max_area_fraction = 0.16;
  int min_occluders = 0;
  int max_occluders = 2;
  double occluder_min_area_fraction = 0.01;
  double occluder_max_area_fraction = 0.06;
  MotionDefaults motion;
  double min_extent = 8.0;  // px; the upper clamp is half the frame
  double occlusion_threshold = 0.5;
  int max_retries = 100;
};

struct Scene {
  Image background;  // frame-sized
  BoundingBox object_patch;
  std::vector<BoundingBox> occluder_patches;  // rects in background coords
};

struct EntityMotion {
  double speed = 0.0;      // px/frame
  double direction = 0.0;  // radians
  double aspect = 1.0;     // initial width/height stretch
};

struct MotionScript {
  std::vector<EntityMotion> entities;  // [0] is the tracked object
  double sigma_speed = 0.0;
  double sigma_dir = 0.0;
  double sigma_aspect = 0.0;
  double sigma_scale = 0.0;
};

struct SyntheticSequence {
  std::vector<Image> frames;
  std::vector<BoundingBox> truth;
  std::vector<bool> occluded;
  std::uint64_t seed = 0;

  std::size_t size() const { return frames.size(); }
};

/// Smoothed multi-octave colour noise.
Image procedural_image(int width, int height, Rng& rng);

/// Loads every *.ppm in a directory, sorted by name.
std::vector<Image> load_image_directory(const std::filesystem::path& dir);

class SceneSampler {
 public:
  explicit SceneSampler(SynthConfig config);
  Scene sample(Rng& rng) const;
  const SynthConfig& config() const { return config_; }

 private:
  SynthConfig config_;
  std::vector<Image> images_;
};

/// Object + occluder rects inside an image of the given size. Object area is
/// at least min_area_fraction of the image. Throws if no valid object fits.
BoundingBox sample_patch(int width, int height, double min_fraction, double max_fraction, int max_retries, Rng& rng);

MotionScript random_motion_script(const MotionDefaults& motion, std::size_t entities, Rng& rng);

SyntheticSequence simulate(const Scene& scene, const MotionScript& script, std::size_t length,
                           const SynthConfig& config, Rng& rng);

/// Scene + motion + simulation from one seed.
SyntheticSequence generate_sequence(const SceneSampler& sampler, std::size_t length, std::uint64_t seed);

/// Fraction of `object` covered by the union of `occluders`.
double coverage(const BoundingBox& object, std::span<const BoundingBox> occluders);

}  // namespace rrtrack
