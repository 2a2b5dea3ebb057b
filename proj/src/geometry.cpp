#include "rrtrack/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "rrtrack/errors.hpp"

namespace rrtrack {
namespace {

// Smallest extent a decoded box may have before it is widened.
constexpr double kMinDecodedExtent = 1e-3;

inline double normalized(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

}  // namespace

CropWindow crop_window_for(const BoundingBox& box, double min_size) {
  double w = box.width();
  double h = box.height();
  bool clamped = false;
  if (!(w > min_size)) {
    w = min_size;
    clamped = true;
  }
  if (!(h > min_size)) {
    h = min_size;
    clamped = true;
  }
  return {box.cx(), box.cy(), kCropPadding * w, kCropPadding * h, clamped};
}

void extract_crop_into(const Image& image, const CropWindow& window, std::size_t out_size, std::span<double> out) {
  const std::size_t plane = out_size * out_size;
  if (out.size() != 3 * plane) throw ShapeError("extract_crop: destination must hold 3*S*S values");
  if (image.empty()) throw UsageError("extract_crop: empty image");
  const double step_x = window.w / static_cast<double>(out_size);
  const double step_y = window.h / static_cast<double>(out_size);
  const double x0 = window.x1();
  const double y0 = window.y1();

  // Per-column source indices and weights are shared across rows.
  std::vector<int> cols(out_size);
  std::vector<double> fx(out_size);
  for (std::size_t j = 0; j < out_size; ++j) {
    const double sx = x0 + (static_cast<double>(j) + 0.5) * step_x - 0.5;
    const double fl = std::floor(sx);
    cols[j] = static_cast<int>(fl);
    fx[j] = sx - fl;
  }
  auto pixel = [&](int x, int y, int c) -> double {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return 0.0;
    return normalized(image.at(x, y, c));
  };
  for (std::size_t i = 0; i < out_size; ++i) {
    const double sy = y0 + (static_cast<double>(i) + 0.5) * step_y - 0.5;
    const double fl = std::floor(sy);
    const int r = static_cast<int>(fl);
    const double wy = sy - fl;
    for (std::size_t j = 0; j < out_size; ++j) {
      const int c0 = cols[j];
      const double wx = fx[j];
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - wx) * pixel(c0, r, c) + wx * pixel(c0 + 1, r, c);
        const double bottom = (1.0 - wx) * pixel(c0, r + 1, c) + wx * pixel(c0 + 1, r + 1, c);
        out[static_cast<std::size_t>(c) * plane + i * out_size + j] = (1.0 - wy) * top + wy * bottom;
      }
    }
  }
}

Tensor extract_crop(const Image& image, const CropWindow& window, std::size_t out_size) {
  Tensor t = Tensor::zeros({3, out_size, out_size});
  extract_crop_into(image, window, out_size, t.data());
  return t;
}

CropFrameBox encode_target(const CropWindow& window, const BoundingBox& truth) {
  const double ox = window.x1();
  const double oy = window.y1();
  return {(truth.x1 - ox) / window.w, (truth.y1 - oy) / window.h, (truth.x2 - ox) / window.w,
          (truth.y2 - oy) / window.h};
}

DecodedBox decode_prediction(const CropWindow& window, const CropFrameBox& pred) {
  DecodedBox out;
  double x1 = pred.x1, y1 = pred.y1, x2 = pred.x2, y2 = pred.y2;
  if (x1 > x2) {
    std::swap(x1, x2);
    out.repaired = true;
  }
  if (y1 > y2) {
    std::swap(y1, y2);
    out.repaired = true;
  }
  const double ox = window.x1();
  const double oy = window.y1();
  out.box = {ox + x1 * window.w, oy + y1 * window.h, ox + x2 * window.w, oy + y2 * window.h};
  if (out.box.width() < kMinDecodedExtent) {
    const double c = out.box.cx();
    out.box.x1 = c - 0.5 * kMinDecodedExtent;
    out.box.x2 = c + 0.5 * kMinDecodedExtent;
    out.repaired = true;
  }
  if (out.box.height() < kMinDecodedExtent) {
    const double c = out.box.cy();
    out.box.y1 = c - 0.5 * kMinDecodedExtent;
    out.box.y2 = c + 0.5 * kMinDecodedExtent;
    out.repaired = true;
  }
  return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BoundingBox mirror_box(const BoundingBox& box, int image_width) {
  const double w = static_cast<double>(image_width);
  return {w - box.x2, box.y1, w - box.x1, box.y2};
}

std::pair<std::vector<Image>, std::vector<BoundingBox>> mirror_track(std::span<const Image> frames,
                                                                     std::span<const BoundingBox> boxes) {
  if (frames.size() != boxes.size()) throw ShapeError("mirror_track: frame and box counts differ");
  std::pair<std::vector<Image>, std::vector<BoundingBox>> out;
  out.first.reserve(frames.size());
  out.second.reserve(boxes.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.first.push_back(frames[i].flipped_horizontally());
    out.second.push_back(mirror_box(boxes[i], frames[i].width));
  }
  return out;
}

}  // namespace rrtrack
