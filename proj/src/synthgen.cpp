#include "rrtrack/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Bilinear read with clamp-to-edge, continuous pixel-centre coordinates.
double sample_clamped(const Image& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bot = (1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  return (1 - fy) * top + fy * bot;
}

Image resize(const Image& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  Image out(width, height);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = to_byte(sample_clamped(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5, c));
      }
    }
  }
  return out;
}

// Draws the `src_rect` region of `source` into `frame`, stretched onto `dest`.
void paste(Image& frame, const Image& source, const BoundingBox& src_rect, const BoundingBox& dest) {
  const int x_begin = std::max(0, static_cast<int>(std::ceil(dest.x1 - 0.5)));
  const int x_end = std::min(frame.width, static_cast<int>(std::ceil(dest.x2 - 0.5)));
  const int y_begin = std::max(0, static_cast<int>(std::ceil(dest.y1 - 0.5)));
  const int y_end = std::min(frame.height, static_cast<int>(std::ceil(dest.y2 - 0.5)));
  const double ratio_x = src_rect.width() / dest.width();
  const double ratio_y = src_rect.height() / dest.height();
  for (int y = y_begin; y < y_end; ++y) {
    const double sy = src_rect.y1 + (y + 0.5 - dest.y1) * ratio_y - 0.5;
    for (int x = x_begin; x < x_end; ++x) {
      const double sx = src_rect.x1 + (x + 0.5 - dest.x1) * ratio_x - 0.5;
      for (int c = 0; c < 3; ++c) frame.at(x, y, c) = to_byte(sample_clamped(source, sx, sy, c));
    }
  }
}

struct Entity {
  BoundingBox source;
  double cx, cy, w, h;
  double speed, direction;
};

}  // namespace

Image procedural_image(int width, int height, Rng& rng) {
  if (width <= 0 || height <= 0) throw UsageError("procedural_image: non-positive size");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> acc(static_cast<std::size_t>(width) * height * 3, 0.0);
  constexpr std::array<std::pair<int, double>, 4> octaves{{{32, 1.0}, {16, 0.6}, {8, 0.4}, {4, 0.25}}};
  for (const auto& [spacing, amplitude] : octaves) {
    const int gw = width / spacing + 2;
    const int gh = height / spacing + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh * 3);
    for (auto& v : lattice) v = unit(rng);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / spacing;
      const int gy = static_cast<int>(fy);
      const double ty = smoothstep(fy - gy);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / spacing;
        const int gx = static_cast<int>(fx);
        const double tx = smoothstep(fx - gx);
        for (int c = 0; c < 3; ++c) {
          auto L = [&](int i, int j) { return lattice[(static_cast<std::size_t>(j) * gw + i) * 3 + c]; };
          const double top = (1 - tx) * L(gx, gy) + tx * L(gx + 1, gy);
          const double bot = (1 - tx) * L(gx, gy + 1) + tx * L(gx + 1, gy + 1);
          acc[(static_cast<std::size_t>(y) * width + x) * 3 + c] += amplitude * ((1 - ty) * top + ty * bot);
        }
      }
    }
  }
  Image img(width, height);
  for (int c = 0; c < 3; ++c) {
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = c; i < acc.size(); i += 3) {
      lo = std::min(lo, acc[i]);
      hi = std::max(hi, acc[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    for (std::size_t i = c; i < acc.size(); i += 3) img.rgb[i] = to_byte(255.0 * (acc[i] - lo) / span);
  }
  return img;
}

std::vector<Image> load_image_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(read_ppm(p));
  if (images.empty()) throw FormatError("no .ppm images in " + dir.string());
  return images;
}

BoundingBox sample_patch(int width, int height, double min_fraction, double max_fraction, int max_retries,
                         Rng& rng) {
  constexpr int kMinPatch = 4;
  const double area = static_cast<double>(width) * height;
  const double min_area = min_fraction * area;
  const double hi = std::max(min_fraction, max_fraction);
  std::uniform_real_distribution<double> frac_dist(min_fraction, hi);
  std::uniform_real_distribution<double> log_aspect(-std::numbers::ln2, std::numbers::ln2);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    if (width < kMinPatch || height < kMinPatch) break;
    const double frac = hi > min_fraction ? frac_dist(rng) : min_fraction;
    const double aspect = std::exp(log_aspect(rng));
    int pw = std::clamp(static_cast<int>(std::lround(std::sqrt(frac * area * aspect))), kMinPatch, width);
    int ph = std::clamp(static_cast<int>(std::lround(std::sqrt(frac * area / aspect))), kMinPatch, height);
    if (pw * static_cast<double>(ph) < min_area) {
      ph = std::min(height, static_cast<int>(std::ceil(min_area / pw)));
      pw = std::min(width, static_cast<int>(std::ceil(min_area / ph)));
    }
    if (pw * static_cast<double>(ph) < min_area) continue;
    std::uniform_int_distribution<int> xd(0, width - pw);
    std::uniform_int_distribution<int> yd(0, height - ph);
    const double x = xd(rng);
    const double y = yd(rng);
    return {x, y, x + pw, y + ph};
  }
  throw std::runtime_error("sample_patch: no patch of area fraction >= " + std::to_string(min_fraction) + " fits a " +
                           std::to_string(width) + "x" + std::to_string(height) + " image");
}

SceneSampler::SceneSampler(SynthConfig config) : config_(std::move(config)) {
  if (config_.frame_width < 16 || config_.frame_height < 16) throw UsageError("frames must be at least 16x16");
  if (config_.source.mode == PatchSource::Mode::image_directory) images_ = load_image_directory(config_.source.image_dir);
}

Scene SceneSampler::sample(Rng& rng) const {
  Scene scene;
  for (int attempt = 0;; ++attempt) {
    Image source;
    if (images_.empty()) {
      source = procedural_image(config_.frame_width, config_.frame_height, rng);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
      source = images_[pick(rng)];
    }
    try {
      scene.object_patch = sample_patch(source.width, source.height, config_.source.min_area_fraction,
                                        config_.max_area_fraction, config_.max_retries, rng);
    } catch (const std::runtime_error&) {
      if (attempt + 1 >= config_.max_retries) throw;
      continue;
    }
    // Patches are expressed in background (frame) coordinates.
    const double sx = static_cast<double>(config_.frame_width) / source.width;
    const double sy = static_cast<double>(config_.frame_height) / source.height;
    scene.object_patch = {scene.object_patch.x1 * sx, scene.object_patch.y1 * sy, scene.object_patch.x2 * sx,
                          scene.object_patch.y2 * sy};
    scene.background = resize(source, config_.frame_width, config_.frame_height);
    break;
  }
  std::uniform_int_distribution<int> count(config_.min_occluders, std::max(config_.min_occluders, config_.max_occluders));
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    scene.occluder_patches.push_back(sample_patch(config_.frame_width, config_.frame_height,
                                                  config_.occluder_min_area_fraction,
                                                  config_.occluder_max_area_fraction, config_.max_retries, rng));
  }
  return scene;
}

MotionScript random_motion_script(const MotionDefaults& motion, std::size_t entities, Rng& rng) {
  MotionScript script;
  std::uniform_real_distribution<double> speed(motion.speed_min, std::max(motion.speed_min, motion.speed_max));
  std::uniform_real_distribution<double> dir(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> log_aspect(-0.2, 0.2);
  for (std::size_t i = 0; i < entities; ++i) {
    EntityMotion e;
    e.speed = speed(rng);
    e.direction = dir(rng);
    e.aspect = std::exp(log_aspect(rng));
    script.entities.push_back(e);
  }
  script.sigma_speed = motion.sigma_speed;
  script.sigma_dir = motion.sigma_dir;
  script.sigma_aspect = motion.sigma_aspect;
  script.sigma_scale = motion.sigma_scale;
  return script;
}

SyntheticSequence simulate(const Scene& scene, const MotionScript& script, std::size_t length,
                           const SynthConfig& config, Rng& rng) {
  if (length < 2) throw UsageError("simulate: length must be >= 2");
  if (script.entities.size() != 1 + scene.occluder_patches.size()) {
    throw UsageError("simulate: motion script needs one entry per entity");
  }
  const double fw = config.frame_width;
  const double fh = config.frame_height;
  const double min_w = std::min(config.min_extent, fw / 2), max_w = fw / 2;
  const double min_h = std::min(config.min_extent, fh / 2), max_h = fh / 2;

  std::vector<Entity> entities;
  for (std::size_t i = 0; i < script.entities.size(); ++i) {
    const auto& m = script.entities[i];
    const BoundingBox& src = i == 0 ? scene.object_patch : scene.occluder_patches[i - 1];
    Entity e;
    e.source = src;
    const double stretch = std::sqrt(std::max(m.aspect, 1e-6));
    e.w = std::clamp(src.width() * stretch, min_w, max_w);
    e.h = std::clamp(src.height() / stretch, min_h, max_h);
    // The tracked object starts in the central half of the frame.
    std::uniform_real_distribution<double> px(i == 0 ? 0.25 * fw : 0.0, i == 0 ? 0.75 * fw : fw);
    std::uniform_real_distribution<double> py(i == 0 ? 0.25 * fh : 0.0, i == 0 ? 0.75 * fh : fh);
    e.cx = px(rng);
    e.cy = py(rng);
    e.speed = m.speed;
    e.direction = m.direction;
    entities.push_back(e);
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  SyntheticSequence seq;
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) {
      for (auto& e : entities) {
        e.speed = std::max(0.0, e.speed + script.sigma_speed * unit(rng));
        e.direction += script.sigma_dir * unit(rng);
        const double ds = script.sigma_scale * unit(rng);
        const double da = script.sigma_aspect * unit(rng);
        e.w = std::clamp(e.w * std::exp(ds + 0.5 * da), min_w, max_w);
        e.h = std::clamp(e.h * std::exp(ds - 0.5 * da), min_h, max_h);
        e.cx += e.speed * std::cos(e.direction);
        e.cy += e.speed * std::sin(e.direction);
        // Reflect off the borders; the centre stays inside the frame, so at
        // least a quarter of the box is always visible.
        if (e.cx < 0.0) {
          e.cx = std::min(-e.cx, fw);
          e.direction = std::numbers::pi - e.direction;
        } else if (e.cx > fw) {
          e.cx = std::max(2.0 * fw - e.cx, 0.0);
          e.direction = std::numbers::pi - e.direction;
        }
        if (e.cy < 0.0) {
          e.cy = std::min(-e.cy, fh);
          e.direction = -e.direction;
        } else if (e.cy > fh) {
          e.cy = std::max(2.0 * fh - e.cy, 0.0);
          e.direction = -e.direction;
        }
      }
    }
    Image frame = scene.background;
    std::vector<BoundingBox> occluders;
    for (std::size_t i = 0; i < entities.size(); ++i) {
      const auto& e = entities[i];
      const BoundingBox box = BoundingBox::from_center(e.cx, e.cy, e.w, e.h);
      paste(frame, scene.background, e.source, box);
      if (i > 0) occluders.push_back(box);
    }
    const BoundingBox truth = BoundingBox::from_center(entities[0].cx, entities[0].cy, entities[0].w, entities[0].h);
    seq.frames.push_back(std::move(frame));
    seq.truth.push_back(truth);
    seq.occluded.push_back(coverage(truth, occluders) > config.occlusion_threshold);
  }
  return seq;
}

SyntheticSequence generate_sequence(const SceneSampler& sampler, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene = sampler.sample(rng);
  MotionScript script = random_motion_script(sampler.config().motion, 1 + scene.occluder_patches.size(), rng);
  SyntheticSequence seq = simulate(scene, script, length, sampler.config(), rng);
  seq.seed = seed;
  return seq;
}

double coverage(const BoundingBox& object, std::span<const BoundingBox> occluders) {
  if (!(object.area() > 0.0)) return 0.0;
  std::vector<BoundingBox> clipped;
  std::vector<double> xs{object.x1, object.x2};
  for (const auto& o : occluders) {
    BoundingBox c{std::max(o.x1, object.x1), std::max(o.y1, object.y1), std::min(o.x2, object.x2),
                  std::min(o.y2, object.y2)};
    if (c.x1 < c.x2 && c.y1 < c.y2) {
      clipped.push_back(c);
      xs.push_back(c.x1);
      xs.push_back(c.x2);
    }
  }
  if (clipped.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double covered = 0.0;
  std::vector<std::pair<double, double>> spans;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double xa = xs[i], xb = xs[i + 1];
    spans.clear();
    for (const auto& c : clipped) {
      if (c.x1 <= xa && c.x2 >= xb) spans.emplace_back(c.y1, c.y2);
    }
    if (spans.empty()) continue;
    std::sort(spans.begin(), spans.end());
    double len = 0.0, lo = spans[0].first, hi = spans[0].second;
    for (std::size_t k = 1; k < spans.size(); ++k) {
      if (spans[k].first > hi) {
        len += hi - lo;
        lo = spans[k].first;
        hi = spans[k].second;
      } else {
        hi = std::max(hi, spans[k].second);
      }
    }
    len += hi - lo;
    covered += len * (xb - xa);
  }
  return std::clamp(covered / object.area(), 0.0, 1.0);
}

}  // namespace rrtrack
