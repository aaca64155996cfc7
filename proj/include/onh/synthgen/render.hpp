#pragma once

#include <array>
#include <cmath>

#include "onh/image.hpp"
#include "onh/rng.hpp"

namespace onh::synthgen {

/// OCT-like degradation settings: multiplicative speckle, vessel shadows and
/// a smooth horizontal intensity ramp.
struct NoiseConfig {
  double speckle = 0.35;        // lognormal sigma; 0 disables
  int shadow_count = 3;         // vertical attenuation columns near the disc
  int shadow_width = 3;         // gaussian half-width of each shadow, px
  double shadow_depth = 0.55;   // peak attenuation fraction
  double inhomogeneity = 0.15;  // amplitude of the horizontal ramp
};

/// Per-study render profiles stand in for the paper's multi-center cohorts:
/// each synthetic study gets its own speckle/shadow/inhomogeneity mix.
inline NoiseConfig study_render_profile(int study_id) {
  NoiseConfig cfg;
  switch (study_id & 3) {
    case 0: cfg = {0.25, 2, 3, 0.45, 0.10}; break;
    case 1: cfg = {0.35, 3, 3, 0.55, 0.20}; break;
    case 2: cfg = {0.45, 4, 4, 0.60, 0.12}; break;
    default: cfg = {0.30, 3, 2, 0.50, 0.25}; break;
  }
  return cfg;
}

/// Mean reflectance per tissue class (RNFL and RPE bright, vitreous and
/// sub-scleral noise dark).
inline const std::array<float, kNumClasses>& class_reflectance() {
  static const std::array<float, kNumClasses> r = {0.04f, 0.85f, 0.45f, 0.55f, 0.95f,
                                                   0.62f, 0.75f, 0.70f, 0.12f};
  return r;
}

/// Renders a label map into an OCT-like intensity image. Deterministic for a
/// fixed seed; with an all-zero NoiseConfig the result is the per-class
/// constant image.
inline IntensityImage render_oct(const LabelMap& map, const NoiseConfig& cfg, uint64_t rng_seed) {
  const int H = map.height, W = map.width;
  Rng rng = Rng::stream(rng_seed, 0x52656e64);
  IntensityImage img(H, W);

  // disc span from the map itself: columns with no RPE
  int disc_l = -1, disc_r = -1;
  for (int x = 0; x < W; ++x) {
    bool has_rpe = false;
    for (int y = 0; y < H; ++y)
      if (map.at(y, x) == kRpe) {
        has_rpe = true;
        break;
      }
    if (!has_rpe) {
      if (disc_l < 0) disc_l = x;
      disc_r = x;
    }
  }
  if (disc_l < 0) {
    disc_l = W / 2;
    disc_r = W / 2;
  }

  // shadow columns cluster around the disc
  std::vector<double> attenuation(size_t(W), 1.0);
  const int band_lo = std::max(0, disc_l - 10), band_hi = std::min(W - 1, disc_r + 10);
  for (int s = 0; s < cfg.shadow_count; ++s) {
    const double xs = rng.uniform(double(band_lo), double(band_hi));
    for (int x = 0; x < W; ++x) {
      const double d = (x - xs) / std::max(1, cfg.shadow_width);
      attenuation[size_t(x)] *= 1.0 - cfg.shadow_depth * std::exp(-d * d);
    }
  }

  const double ramp_dir = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const auto& refl = class_reflectance();
  const double sig = cfg.speckle;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double v = refl[map.at(y, x)];
      if (sig > 0) v *= std::exp(sig * rng.normal() - 0.5 * sig * sig);
      v *= attenuation[size_t(x)];
      v *= 1.0 + cfg.inhomogeneity * ramp_dir * (2.0 * x / double(W - 1) - 1.0);
      img.at(y, x) = float(std::min(1.0, std::max(0.0, v)));
    }
  }
  return img;
}

}  // namespace onh::synthgen
