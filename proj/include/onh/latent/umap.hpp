#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "onh/latent/pca.hpp"
#include "onh/rng.hpp"

namespace onh::latent {

struct Embedding2D {
  std::vector<std::array<double, 2>> points;
  int k = 15;
  double min_dist = 0.1;
  uint64_t seed = 0;
};

namespace umap_detail {

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Least-squares fit of 1/(1 + a x^(2b)) to the fuzzy membership target
/// curve (1 below min_dist, exponential decay past it). Grid search with two
/// refinement passes; deterministic.
inline void fit_ab(double min_dist, double& a_out, double& b_out) {
  std::vector<double> xs, ys;
  for (int i = 1; i <= 300; ++i) {
    const double x = 3.0 * i / 300.0;
    xs.push_back(x);
    ys.push_back(x <= min_dist ? 1.0 : std::exp(-(x - min_dist)));
  }
  auto sse = [&](double a, double b) {
    double s = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double f = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b));
      s += (f - ys[i]) * (f - ys[i]);
    }
    return s;
  };
  double best_a = 1.0, best_b = 1.0, best = 1e300;
  double a_lo = 0.05, a_hi = 10.0, b_lo = 0.3, b_hi = 2.5;
  for (int pass = 0; pass < 3; ++pass) {
    for (int ia = 0; ia <= 60; ++ia) {
      const double a = a_lo * std::pow(a_hi / a_lo, ia / 60.0);
      for (int ib = 0; ib <= 60; ++ib) {
        const double b = b_lo + (b_hi - b_lo) * ib / 60.0;
        const double s = sse(a, b);
        if (s < best) {
          best = s;
          best_a = a;
          best_b = b;
        }
      }
    }
    a_lo = best_a * 0.8;
    a_hi = best_a * 1.25;
    b_lo = std::max(0.05, best_b - 0.1);
    b_hi = best_b + 0.1;
  }
  a_out = best_a;
  b_out = best_b;
}

struct Edge {
  int i, j;
  double w;
};

}  // namespace umap_detail

/// UMAP 2D embedding: exact k-nearest-neighbor graph, per-point bandwidth by
/// binary search to sum(memberships) = log2(k), probabilistic t-conorm
/// symmetrization, PCA initialization and sequential SGD on the fuzzy
/// cross-entropy with negative sampling. Deterministic for a fixed seed.
inline Embedding2D fit_umap(const std::vector<std::vector<double>>& coords, int k = 15,
                            double min_dist = 0.1, int epochs = 200, uint64_t seed = 0) {
  const int n = int(coords.size());
  if (n <= k) throw std::invalid_argument("fit_umap: need more samples than neighbors");

  // exact knn
  std::vector<std::vector<std::pair<double, int>>> knn;
  knn.resize(size_t(n));
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> ds;
    ds.reserve(size_t(n) - 1);
    for (int j = 0; j < n; ++j)
      if (j != i)
        ds.push_back({std::sqrt(umap_detail::sqdist(coords[size_t(i)], coords[size_t(j)])), j});
    std::partial_sort(ds.begin(), ds.begin() + k, ds.end());
    knn[size_t(i)].assign(ds.begin(), ds.begin() + k);
  }

  // fuzzy membership weights
  const double target = std::log2(double(k));
  std::map<std::pair<int, int>, double> w;
  for (int i = 0; i < n; ++i) {
    const double rho = knn[size_t(i)][0].first;
    double lo = 1e-8, hi = 1.0;
    auto mass = [&](double sigma) {
      double s = 0;
      for (auto& [d, j] : knn[size_t(i)]) s += std::exp(-std::max(0.0, d - rho) / sigma);
      return s;
    };
    while (mass(hi) < target && hi < 1e6) hi *= 2;
    for (int it = 0; it < 64; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mass(mid) < target ? lo : hi) = mid;
    }
    const double sigma = 0.5 * (lo + hi);
    for (auto& [d, j] : knn[size_t(i)])
      w[{i, j}] = std::exp(-std::max(0.0, d - rho) / sigma);
  }
  // symmetrize: w + w^T - w.w^T
  std::vector<umap_detail::Edge> edges;
  for (auto& [key, wij] : w) {
    auto [i, j] = key;
    if (j < i && w.count({j, i})) continue;  // handled from the smaller index
    const auto it = w.find({j, i});
    const double wji = it == w.end() ? 0.0 : it->second;
    const double sym = wij + wji - wij * wji;
    if (sym > 0) edges.push_back({std::min(i, j), std::max(i, j), sym});
  }

  // PCA init scaled to [-10, 10]
  Embedding2D emb;
  emb.k = k;
  emb.min_dist = min_dist;
  emb.seed = seed;
  emb.points.assign(size_t(n), {0.0, 0.0});
  {
    auto basis = fit_pca(coords);
    double mx = 1e-12;
    std::vector<std::array<double, 2>> init;
    init.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
      auto c = project(basis, coords[size_t(i)]);
      init[size_t(i)] = {c[0], c.size() > 1 ? c[1] : 0.0};
      mx = std::max({mx, std::abs(c[0]), c.size() > 1 ? std::abs(c[1]) : 0.0});
    }
    for (int i = 0; i < n; ++i)
      emb.points[size_t(i)] = {10.0 * init[size_t(i)][0] / mx, 10.0 * init[size_t(i)][1] / mx};
  }

  double a, b;
  umap_detail::fit_ab(min_dist, a, b);

  double max_w = 0;
  for (auto& e : edges) max_w = std::max(max_w, e.w);
  std::vector<double> epochs_per(edges.size()), next(edges.size());
  for (size_t e = 0; e < edges.size(); ++e) {
    epochs_per[e] = max_w / edges[e].w;
    next[e] = epochs_per[e];
  }

  Rng rng = Rng::stream(seed, 0x554d4150);
  const int negatives = 5;
  const double gamma = 1.0;
  auto clip = [](double v) { return std::min(4.0, std::max(-4.0, v)); };
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double alpha = 1.0 - double(epoch) / double(epochs + 1);
    for (size_t e = 0; e < edges.size(); ++e) {
      if (next[e] > epoch) continue;
      next[e] += epochs_per[e];
      auto& yi = emb.points[size_t(edges[e].i)];
      auto& yj = emb.points[size_t(edges[e].j)];
      double dx = yi[0] - yj[0], dy = yi[1] - yj[1];
      double dsq = dx * dx + dy * dy;
      if (dsq > 0) {
        const double coef = -2.0 * a * b * std::pow(dsq, b - 1.0) / (a * std::pow(dsq, b) + 1.0);
        const double gx = clip(coef * dx) * alpha, gy = clip(coef * dy) * alpha;
        yi[0] += gx;
        yi[1] += gy;
        yj[0] -= gx;
        yj[1] -= gy;
      }
      for (int s = 0; s < negatives; ++s) {
        const int jn = int(rng.below(uint64_t(n)));
        if (jn == edges[e].i) continue;
        auto& yn = emb.points[size_t(jn)];
        dx = yi[0] - yn[0];
        dy = yi[1] - yn[1];
        dsq = dx * dx + dy * dy;
        if (dsq == 0) continue;
        const double coef = 2.0 * gamma * b / ((0.001 + dsq) * (a * std::pow(dsq, b) + 1.0));
        yi[0] += clip(coef * dx) * alpha;
        yi[1] += clip(coef * dy) * alpha;
      }
    }
  }
  return emb;
}

/// Out-of-sample placement: inverse-distance weighted average of the k
/// nearest training points' embedded coordinates.
inline std::array<double, 2> embed_new(const std::vector<std::vector<double>>& train_coords,
                                       const Embedding2D& emb, const std::vector<double>& query) {
  if (train_coords.size() != emb.points.size())
    throw std::invalid_argument("embed_new: embedding does not match training data");
  std::vector<std::pair<double, int>> ds;
  for (size_t i = 0; i < train_coords.size(); ++i)
    ds.push_back({std::sqrt(umap_detail::sqdist(train_coords[i], query)), int(i)});
  const size_t kk = std::min<size_t>(size_t(emb.k), ds.size());
  std::partial_sort(ds.begin(), ds.begin() + long(kk), ds.end());
  double wx = 0, wy = 0, wsum = 0;
  for (size_t t = 0; t < kk; ++t) {
    const double wgt = 1.0 / (ds[t].first + 1e-8);
    wx += wgt * emb.points[size_t(ds[t].second)][0];
    wy += wgt * emb.points[size_t(ds[t].second)][1];
    wsum += wgt;
  }
  return {wx / wsum, wy / wsum};
}

}  // namespace onh::latent
