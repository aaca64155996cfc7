#pragma once

#include <cmath>
#include <optional>

#include "onh/image.hpp"

namespace onh::latent {

/// Pixel-counting structural readouts of a label map, in the vocabulary used
/// to describe PC effects. Features whose tissue class is absent from the
/// map are reported as absent, not zero.
struct PhenotypeFeatures {
  std::optional<double> rnfl_thickness;       // peripheral, class 1
  std::optional<double> gcl_ipl_thickness;    // peripheral, class 2
  std::optional<double> prelamina_thickness;  // class 1 band at disc center
  std::optional<double> prelamina_depth;      // cup floor below the BMO line
  std::optional<double> lc_thickness;
  std::optional<double> lc_depth;
  std::optional<double> disc_size;  // columns without RPE
  std::optional<double> mrw;        // min BMO-to-inner-surface distance
};

namespace probe_detail {

// longest contiguous run of class c in column x: {start_y, length}
inline std::pair<int, int> largest_run(const LabelMap& m, int x, uint8_t cls) {
  int best_start = -1, best_len = 0, start = -1, len = 0;
  for (int y = 0; y < m.height; ++y) {
    if (m.at(y, x) == cls) {
      if (len == 0) start = y;
      ++len;
      if (len > best_len) {
        best_len = len;
        best_start = start;
      }
    } else {
      len = 0;
    }
  }
  return {best_start, best_len};
}

inline bool has_class(const LabelMap& m, int x, uint8_t cls, int min_run = 2) {
  return largest_run(m, x, cls).second >= min_run;
}

// mean largest-run length of a class over a set of columns; absent when the
// class is missing from all of them
inline std::optional<double> mean_run(const LabelMap& m, const std::vector<int>& cols,
                                      uint8_t cls) {
  double sum = 0;
  int n = 0;
  for (int x : cols) {
    auto [start, len] = largest_run(m, x, cls);
    if (len >= 2) {
      sum += len;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// first non-vitreous pixel per column (the inner limiting surface)
inline int surface_y(const LabelMap& m, int x) {
  for (int y = 0; y < m.height; ++y)
    if (m.at(y, x) != kVitreous) return y;
  return m.height - 1;
}

}  // namespace probe_detail

inline PhenotypeFeatures phenotype_probe(const LabelMap& m) {
  namespace pd = probe_detail;
  PhenotypeFeatures f;
  const int W = m.width;

  // peripheral bands: outer 10% of columns on each side
  std::vector<int> band;
  const int bw = std::max(2, W / 10);
  for (int x = 0; x < bw; ++x) band.push_back(x);
  for (int x = W - bw; x < W; ++x) band.push_back(x);
  f.rnfl_thickness = pd::mean_run(m, band, kRnflPrelamina);
  f.gcl_ipl_thickness = pd::mean_run(m, band, kGclIpl);

  // the disc: the widest contiguous stretch of RPE-free columns
  int best_start = -1, best_len = 0, start = -1, len = 0;
  for (int x = 0; x < W; ++x) {
    if (!pd::has_class(m, x, kRpe)) {
      if (len == 0) start = x;
      ++len;
      if (len > best_len) {
        best_len = len;
        best_start = start;
      }
    } else {
      len = 0;
    }
  }
  if (best_len < 2 || best_start == 0 || best_start + best_len >= W) return f;  // no proper disc
  f.disc_size = best_len;
  const int xl = best_start - 1, xr = best_start + best_len;  // margin columns with RPE
  const double bmo_l = pd::largest_run(m, xl, kRpe).first;
  const double bmo_r = pd::largest_run(m, xr, kRpe).first;
  const double bmo_y = 0.5 * (bmo_l + bmo_r);

  // center-column readouts; the largest-run rule keeps them stable on
  // network-decoded maps with stray pixels
  const int xc = best_start + best_len / 2;
  {
    auto [s, l] = pd::largest_run(m, xc, kRnflPrelamina);
    if (l >= 2) {
      f.prelamina_thickness = l;
      f.prelamina_depth = s - bmo_y;
    }
  }
  {
    auto [s, l] = pd::largest_run(m, xc, kLamina);
    if (l >= 2) {
      f.lc_thickness = l;
      f.lc_depth = s - bmo_y;
    }
  }

  // minimum rim width: closest approach of the inner surface to either BMO
  // point
  auto side_mrw = [&](int xb, double yb) {
    double best = 1e300;
    for (int x = 0; x < W; ++x) {
      const double dy = pd::surface_y(m, x) - yb, dx = x - xb;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    return best;
  };
  f.mrw = std::min(side_mrw(xl, bmo_l), side_mrw(xr, bmo_r));
  return f;
}

}  // namespace onh::latent
