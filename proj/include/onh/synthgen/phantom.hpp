#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "onh/image.hpp"
#include "onh/rng.hpp"

namespace onh::synthgen {

enum class ClassLabel : int { kNonGlaucoma = 0, kGlaucoma = 1 };

/// Generative ONH cross-section parameters. All lengths are in pixels of a
/// nominal 100-row raster; scaled() adapts them to other raster heights.
struct PhantomParams {
  double disc_radius = 18;
  double mrw = 16;                 // minimum rim width
  double rnfl_thickness = 12;      // peripheral
  double gcl_ipl_thickness = 10;
  double orl_thickness = 10;
  double rpe_thickness = 4;
  double choroid_thickness = 10;
  double sclera_thickness = 8;
  double prelamina_thickness = 12;
  double prelamina_depth = 7;      // cup depth below the BMO line
  double lc_thickness = 6;
  double lc_depth = 19;            // below the BMO line; > prelamina_depth
  double scleral_bowing = 0.3;     // dimensionless curvature coefficient
  int study_id = 0;
  int subject_id = 0;
  ClassLabel class_label = ClassLabel::kNonGlaucoma;

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0)) throw std::invalid_argument(std::string("phantom: ") + name + " must be > 0");
    };
    pos(disc_radius, "disc_radius");
    pos(mrw, "mrw");
    pos(rnfl_thickness, "rnfl_thickness");
    pos(gcl_ipl_thickness, "gcl_ipl_thickness");
    pos(orl_thickness, "orl_thickness");
    pos(rpe_thickness, "rpe_thickness");
    pos(choroid_thickness, "choroid_thickness");
    pos(sclera_thickness, "sclera_thickness");
    pos(prelamina_thickness, "prelamina_thickness");
    pos(prelamina_depth, "prelamina_depth");
    pos(lc_thickness, "lc_thickness");
    pos(lc_depth, "lc_depth");
    if (!(lc_depth > prelamina_depth))
      throw std::invalid_argument("phantom: lc_depth must exceed prelamina_depth");
    if (scleral_bowing < 0) throw std::invalid_argument("phantom: scleral_bowing must be >= 0");
    if (study_id < 0 || study_id > 3) throw std::invalid_argument("phantom: study_id out of [0,3]");
  }

  PhantomParams scaled(double s) const {
    PhantomParams p = *this;
    p.disc_radius *= s;
    p.mrw *= s;
    p.rnfl_thickness *= s;
    p.gcl_ipl_thickness *= s;
    p.orl_thickness *= s;
    p.rpe_thickness *= s;
    p.choroid_thickness *= s;
    p.sclera_thickness *= s;
    p.prelamina_thickness *= s;
    p.prelamina_depth *= s;
    p.lc_thickness *= s;
    p.lc_depth *= s;
    return p;
  }
};

/// Class-conditional sampling ranges. The glaucoma regime shifts each marked
/// parameter by (1 - overlap) of its span, so the two regimes overlap by the
/// configured fraction and no single parameter separates the classes
/// trivially.
struct SamplerConfig {
  double overlap = 0.2;

  struct Range {
    double lo, hi;
    int direction;  // -1 smaller in glaucoma, +1 larger, 0 unaffected
  };
  Range disc_radius{16, 22, +1};
  Range mrw{14, 20, -1};
  Range rnfl{10, 14, -1};
  Range gcl_ipl{8, 12, -1};
  Range orl{8, 12, 0};
  Range rpe{3, 5, 0};
  Range choroid{8, 12, 0};
  Range sclera{7, 10, 0};
  Range prelamina_thickness{10, 14, -1};
  Range prelamina_depth{5, 10, +1};
  Range lc_thickness{5, 8, -1};
  Range bowing{0.1, 0.5, +1};
};

namespace detail {
inline double draw(Rng& rng, const SamplerConfig::Range& r, ClassLabel label, double overlap) {
  double lo = r.lo, hi = r.hi;
  if (label == ClassLabel::kGlaucoma && r.direction != 0) {
    const double shift = double(r.direction) * (1.0 - overlap) * (hi - lo);
    lo += shift;
    hi += shift;
  }
  return rng.uniform(lo, hi);
}
}  // namespace detail

/// Draws class-conditional phantom parameters; deterministic for a fixed
/// seed. lc_depth is derived as prelamina_depth + prelamina_thickness so the
/// cup floor, prelamina band and LC stay geometrically consistent.
inline PhantomParams sample_params(ClassLabel label, int study_id, uint64_t rng_seed,
                                   const SamplerConfig& cfg = {}) {
  if (study_id < 0 || study_id > 3)
    throw std::invalid_argument("sample_params: study_id must be in [0,3]");
  if (int(label) != 0 && int(label) != 1)
    throw std::invalid_argument("sample_params: bad class label");
  Rng rng = Rng::stream(rng_seed, uint64_t(int(label) * 16 + study_id));
  PhantomParams p;
  p.disc_radius = detail::draw(rng, cfg.disc_radius, label, cfg.overlap);
  p.mrw = detail::draw(rng, cfg.mrw, label, cfg.overlap);
  p.rnfl_thickness = detail::draw(rng, cfg.rnfl, label, cfg.overlap);
  p.gcl_ipl_thickness = detail::draw(rng, cfg.gcl_ipl, label, cfg.overlap);
  p.orl_thickness = detail::draw(rng, cfg.orl, label, cfg.overlap);
  p.rpe_thickness = detail::draw(rng, cfg.rpe, label, cfg.overlap);
  p.choroid_thickness = detail::draw(rng, cfg.choroid, label, cfg.overlap);
  p.sclera_thickness = detail::draw(rng, cfg.sclera, label, cfg.overlap);
  p.prelamina_thickness = detail::draw(rng, cfg.prelamina_thickness, label, cfg.overlap);
  p.prelamina_depth = detail::draw(rng, cfg.prelamina_depth, label, cfg.overlap);
  p.lc_thickness = detail::draw(rng, cfg.lc_thickness, label, cfg.overlap);
  p.scleral_bowing = detail::draw(rng, cfg.bowing, label, cfg.overlap);
  p.lc_depth = p.prelamina_depth + p.prelamina_thickness;
  p.study_id = study_id;
  p.subject_id = 0;
  p.class_label = label;
  p.validate();
  return p;
}

/// Smoothstep 3t^2 - 2t^3 on [0,1]; all boundary blends are built from it so
/// every curve is piecewise-cubic with matched slopes.
inline double smoothstep(double t) {
  t = std::min(1.0, std::max(0.0, t));
  return t * t * (3.0 - 2.0 * t);
}

/// Rasterizes the parametric geometry into a 9-class label map.
///
/// Outside the disc the tissue stack runs VH / RNFL / GCL+IPL / ORL / RPE /
/// choroid / sclera / noise, bent by the bowing term. Retinal layers 2-4 and
/// the choroid/sclera terminate at the disc margin; inside the canal the
/// inner surface descends to the cup floor, prelamina tissue (class 1) fills
/// down to the LC band, and noise lies below. In a blend zone just outside
/// the margin the inner surface and the class-1 band taper from peripheral
/// RNFL thickness to the rim width, so the minimum BMO-to-surface distance
/// tracks the mrw parameter.
inline LabelMap rasterize(const PhantomParams& p, int height, int width) {
  if (height < 64 || width < 128)
    throw std::invalid_argument("rasterize: raster must be at least 64x128");
  p.validate();
  if (!(p.disc_radius < width / 4.0))
    throw std::invalid_argument("rasterize: disc_radius must be < width/4");

  const double xc = (width - 1) / 2.0;
  const double retina_top = 0.10 * height;
  const double bow_px = height / 10.0;
  const double r_d = p.disc_radius;
  const double r_out = r_d + std::max(3.0, r_d / 3.0);

  LabelMap map(height, width);
  for (int x = 0; x < width; ++x) {
    const double dx = std::abs(x - xc);
    const double rel = (x - xc) / (width / 2.0);
    // quadratic sag plus a tilt term, so nonzero bowing is asymmetric about
    // the disc axis while zero bowing stays flat
    const double bow = p.scleral_bowing * (rel * rel + 0.5 * rel) * bow_px;

    const double y_ilm = retina_top + bow;
    const double b_rnfl = y_ilm + p.rnfl_thickness;
    const double b_gcl = b_rnfl + p.gcl_ipl_thickness;
    const double b_orl = b_gcl + p.orl_thickness;  // BMO plane / RPE top
    const double b_rpe = b_orl + p.rpe_thickness;
    const double b_cho = b_rpe + p.choroid_thickness;
    const double b_scl = b_cho + p.sclera_thickness;

    double surface, c1_bot;
    bool in_disc = dx < r_d;
    if (in_disc) {
      const double t = 1.0 - dx / r_d;  // 0 at margin, 1 at center
      const double rim_y = b_orl - p.mrw;
      const double cup_floor = b_orl + p.prelamina_depth;
      // the extra factor of t keeps the wall near rim level close to the
      // margin, so the closest inner-surface point to the BMO tracks mrw
      surface = rim_y + (cup_floor - rim_y) * smoothstep(t) * t;
      c1_bot = 0;  // unused inside the disc
    } else if (dx < r_out) {
      const double t = (r_out - dx) / (r_out - r_d);  // 1 at margin, 0 at r_out
      const double s = smoothstep(t);
      surface = y_ilm + (b_orl - p.mrw - y_ilm) * s;
      c1_bot = b_rnfl + s * (b_orl - b_rnfl);
    } else {
      surface = y_ilm;
      c1_bot = b_rnfl;
    }

    if (surface < 1.0) throw std::invalid_argument("rasterize: geometry overflow (surface above raster)");

    if (in_disc) {
      const double lc_top = b_orl + p.lc_depth;
      const double lc_bot = lc_top + p.lc_thickness;
      if (lc_bot > height - 1)
        throw std::invalid_argument("rasterize: geometry overflow (LC below raster)");
      for (int y = 0; y < height; ++y) {
        const double yc = y + 0.5;
        uint8_t cls;
        if (yc < surface)
          cls = kVitreous;
        else if (yc < lc_top)
          cls = kRnflPrelamina;
        else if (yc < lc_bot)
          cls = kLamina;
        else
          cls = kNoise;
        map.at(y, x) = cls;
      }
    } else {
      if (b_scl > height - 1)
        throw std::invalid_argument("rasterize: geometry overflow (stack exceeds raster)");
      const double t2 = std::max(c1_bot, b_gcl);
      for (int y = 0; y < height; ++y) {
        const double yc = y + 0.5;
        uint8_t cls;
        if (yc < surface)
          cls = kVitreous;
        else if (yc < c1_bot)
          cls = kRnflPrelamina;
        else if (yc < t2)
          cls = kGclIpl;
        else if (yc < b_orl)
          cls = kOrl;
        else if (yc < b_rpe)
          cls = kRpe;
        else if (yc < b_cho)
          cls = kChoroid;
        else if (yc < b_scl)
          cls = kSclera;
        else
          cls = kNoise;
        map.at(y, x) = cls;
      }
    }
  }
  return map;
}

}  // namespace onh::synthgen
