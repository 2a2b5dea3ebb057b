#pragma once

// Box and crop geometry. Image coordinates are continuous: pixel (i, j)
// covers [i, i+1) x [j, j+1), so a W-pixel-wide image spans [0, W].

#include <span>
#include <utility>
#include <vector>

#include "rrtrack/autodiff.hpp"
#include "rrtrack/image.hpp"

namespace rrtrack {

struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  double area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2; }

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Search region: centred on a box, twice its extents. May leave the image.
struct CropWindow {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  bool clamped = false;  // source box was below the minimum extent

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  BoundingBox as_box() const { return BoundingBox::from_center(cx, cy, w, h); }
};

/// Box corners in crop-normalized coordinates; the crop spans [0,1]^2.
struct CropFrameBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;
};

inline constexpr double kMinBoxExtent = 2.0;
inline constexpr double kCropPadding = 2.0;

CropWindow crop_window_for(const BoundingBox& box, double min_size = kMinBoxExtent);

/// Bilinear warp of `window` to an out_size x out_size tensor [3,S,S] with
/// values in [-1,1]. Aspect ratio is not preserved. Samples outside the image
/// read as 0 (mid-gray).
Tensor extract_crop(const Image& image, const CropWindow& window, std::size_t out_size);

/// Same as extract_crop, writing 3*S*S values into `out`.
void extract_crop_into(const Image& image, const CropWindow& window, std::size_t out_size, std::span<double> out);

CropFrameBox encode_target(const CropWindow& window, const BoundingBox& truth);

struct DecodedBox {
  BoundingBox box;
  bool repaired = false;  // corners arrived inverted or collapsed
};

DecodedBox decode_prediction(const CropWindow& window, const CropFrameBox& pred);

double iou(const BoundingBox& a, const BoundingBox& b);

BoundingBox mirror_box(const BoundingBox& box, int image_width);

/// Flips every frame and reflects every box; all-or-nothing per track.
std::pair<std::vector<Image>, std::vector<BoundingBox>> mirror_track(std::span<const Image> frames,
                                                                     std::span<const BoundingBox> boxes);

}  // namespace rrtrack
