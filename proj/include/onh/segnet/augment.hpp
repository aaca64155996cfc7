#pragma once

#include <cmath>

#include "onh/image.hpp"
#include "onh/rng.hpp"

namespace onh::segnet {

/// Augmentation magnitudes for segmentation training: rotation +/-4 deg,
/// translations +/-10 px, horizontal flipping, a nonlinear gamma shift and
/// multiplicative speckle on the intensity image only.
struct SegAugmentConfig {
  double rotation_deg = 4.0;
  double translation_px = 10.0;
  bool horizontal_flip = true;
  double gamma_range = 0.3;  // gamma drawn from [1/(1+g), 1+g]
  double speckle = 0.15;

  void validate() const {
    if (rotation_deg < 0 || rotation_deg > 4.0)
      throw std::invalid_argument("augment: rotation_deg must be within [0,4]");
    if (translation_px < 0 || translation_px > 10.0)
      throw std::invalid_argument("augment: translation_px must be within [0,10]");
    if (gamma_range < 0 || speckle < 0)
      throw std::invalid_argument("augment: magnitudes must be non-negative");
  }
};

/// One concrete geometric transform, shared by the image and its label map.
struct GeoTransform {
  bool flip = false;
  double angle_deg = 0;
  double tx = 0;  // columns
  double ty = 0;  // rows
};

namespace detail {

// source coordinates for an output pixel: the forward map is flip, then
// rotation about the center, then translation
inline void source_coords(const GeoTransform& t, int H, int W, int y, int x, double& sy,
                          double& sx) {
  const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
  const double rad = t.angle_deg * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double dy = y - cy - t.ty, dx = x - cx - t.tx;
  sy = c * dy + s * dx + cy;
  sx = -s * dy + c * dx + cx;
  if (t.flip) sx = (W - 1) - sx;
}

inline double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace detail

/// Nearest-neighbor resampling with edge clamping; keeps class ids integral.
inline LabelMap transform_map(const LabelMap& m, const GeoTransform& t) {
  LabelMap out(m.height, m.width, m.classes);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      double sy, sx;
      detail::source_coords(t, m.height, m.width, y, x, sy, sx);
      const int iy = int(detail::clampd(std::round(sy), 0, m.height - 1));
      const int ix = int(detail::clampd(std::round(sx), 0, m.width - 1));
      out.at(y, x) = m.at(iy, ix);
    }
  return out;
}

/// Bilinear resampling with edge clamping.
inline IntensityImage transform_image(const IntensityImage& img, const GeoTransform& t) {
  IntensityImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double sy, sx;
      detail::source_coords(t, img.height, img.width, y, x, sy, sx);
      sy = detail::clampd(sy, 0, img.height - 1);
      sx = detail::clampd(sx, 0, img.width - 1);
      const int y0 = int(sy), x0 = int(sx);
      const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
      const double fy = sy - y0, fx = sx - x0;
      const double v = (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
                       fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
      out.at(y, x) = float(v);
    }
  return out;
}

inline GeoTransform draw_transform(const SegAugmentConfig& cfg, Rng& rng) {
  GeoTransform t;
  t.angle_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
  t.tx = rng.uniform(-cfg.translation_px, cfg.translation_px);
  t.ty = rng.uniform(-cfg.translation_px, cfg.translation_px);
  t.flip = cfg.horizontal_flip && rng.uniform() < 0.5;
  return t;
}

/// Applies one random augmentation: the identical geometric transform to
/// image and map, then gamma and speckle to the image alone.
inline std::pair<IntensityImage, LabelMap> augment_pair(const IntensityImage& img,
                                                        const LabelMap& map,
                                                        const SegAugmentConfig& cfg,
                                                        uint64_t seed) {
  if (img.height != map.height || img.width != map.width)
    throw std::invalid_argument("augment_pair: image and map dims differ");
  cfg.validate();
  Rng rng = Rng::stream(seed, 0x41756774);
  GeoTransform t = draw_transform(cfg, rng);
  IntensityImage out_img = transform_image(img, t);
  LabelMap out_map = transform_map(map, t);
  if (cfg.gamma_range > 0) {
    const double hi = 1.0 + cfg.gamma_range;
    const double gamma = std::pow(hi, rng.uniform(-1.0, 1.0));
    for (auto& v : out_img.data) v = std::pow(std::max(0.f, v), float(gamma));
  }
  if (cfg.speckle > 0) {
    const double sig = cfg.speckle;
    for (auto& v : out_img.data) {
      v *= float(std::exp(sig * rng.normal() - 0.5 * sig * sig));
      v = std::min(1.f, std::max(0.f, v));
    }
  }
  return {std::move(out_img), std::move(out_map)};
}

}  // namespace onh::segnet
