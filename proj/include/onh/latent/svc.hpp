#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "onh/metrics/classify.hpp"
#include "onh/metrics/folds.hpp"
#include "onh/rng.hpp"

namespace onh::latent {

/// Linear soft-margin SVC (hinge loss, L2 regularization, C = 1) trained by
/// deterministic full-batch subgradient descent on per-feature standardized
/// inputs. Standardization is refit on every fit() call, which makes the
/// learned decision rule invariant to positive rescaling of any feature.
class LinearSvc {
 public:
  explicit LinearSvc(double C = 1.0, int iterations = 4000) : c_(C), iters_(iterations) {}

  void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    const size_t n = x.size();
    if (n == 0 || y.size() != n) throw std::invalid_argument("svc: bad training data");
    const size_t d = x[0].size();
    bool pos = false, neg = false;
    for (int l : y) (l ? pos : neg) = true;
    if (!pos || !neg) throw std::invalid_argument("svc: both classes required");

    mean_.assign(d, 0.0);
    sd_.assign(d, 0.0);
    for (const auto& r : x)
      for (size_t j = 0; j < d; ++j) mean_[j] += r[j];
    for (double& m : mean_) m /= double(n);
    for (const auto& r : x)
      for (size_t j = 0; j < d; ++j) sd_[j] += (r[j] - mean_[j]) * (r[j] - mean_[j]);
    for (double& s : sd_) s = std::sqrt(s / double(n));
    for (double& s : sd_)
      if (s == 0.0) s = 1.0;

    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) xs[i][j] = (x[i][j] - mean_[j]) / sd_[j];

    w_.assign(d, 0.0);
    b_ = 0.0;
    const double lambda = 1.0 / (c_ * double(n));
    double lr = 0.5;
    for (int t = 0; t < iters_; ++t) {
      std::vector<double> gw(d, 0.0);
      double gb = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double yy = y[i] ? 1.0 : -1.0;
        double m = b_;
        for (size_t j = 0; j < d; ++j) m += w_[j] * xs[i][j];
        if (yy * m < 1.0) {
          for (size_t j = 0; j < d; ++j) gw[j] -= yy * xs[i][j];
          gb -= yy;
        }
      }
      const double step = lr / (1.0 + 0.01 * t);
      for (size_t j = 0; j < d; ++j) w_[j] -= step * (lambda * w_[j] + gw[j] / double(n));
      b_ -= step * gb / double(n);
    }
  }

  int predict(const std::vector<double>& x) const {
    double m = b_;
    for (size_t j = 0; j < x.size(); ++j) m += w_[j] * (x[j] - mean_[j]) / sd_[j];
    return m > 0 ? 1 : 0;
  }

  double accuracy(const std::vector<std::vector<double>>& x, const std::vector<int>& y) const {
    long ok = 0;
    for (size_t i = 0; i < x.size(); ++i) ok += (predict(x[i]) == y[i]);
    return double(ok) / double(x.size());
  }

 private:
  double c_;
  int iters_;
  std::vector<double> w_, mean_, sd_;
  double b_ = 0;
};

struct PcRankEntry {
  int pc = 0;  // 0-based index into the PC coordinates
  double acc_mean = 0, acc_sd = 0;
  double cum_mean = 0, cum_sd = 0;  // accuracy with PCs 0..pc together
};

struct PcRanking {
  std::vector<PcRankEntry> by_pc;   // indexed by PC
  std::vector<int> order;           // PCs sorted by single-feature accuracy
};

namespace detail {

inline std::vector<std::vector<size_t>> stratified_folds(const std::vector<int>& labels, int k,
                                                         uint64_t seed) {
  std::vector<metrics::SampleInfo> infos;
  for (size_t i = 0; i < labels.size(); ++i) infos.push_back({int(i), 0, labels[i]});
  auto plan = metrics::make_folds(infos, k, seed);
  std::vector<std::vector<size_t>> folds{size_t(k)};
  folds.assign(size_t(k), {});
  for (size_t i = 0; i < labels.size(); ++i)
    folds[size_t(plan.fold_of(int(i)))].push_back(i);
  return folds;
}

inline std::pair<double, double> cv_accuracy(const std::vector<std::vector<double>>& x,
                                             const std::vector<int>& y,
                                             const std::vector<std::vector<size_t>>& folds) {
  std::vector<double> accs;
  for (const auto& test : folds) {
    std::vector<std::vector<double>> xtr, xte;
    std::vector<int> ytr, yte;
    std::vector<char> in_test(y.size(), 0);
    for (size_t i : test) in_test[i] = 1;
    for (size_t i = 0; i < y.size(); ++i) {
      if (in_test[i]) {
        xte.push_back(x[i]);
        yte.push_back(y[i]);
      } else {
        xtr.push_back(x[i]);
        ytr.push_back(y[i]);
      }
    }
    LinearSvc svc;
    svc.fit(xtr, ytr);
    accs.push_back(svc.accuracy(xte, yte));
  }
  return metrics::mean_sd(accs);
}

}  // namespace detail

/// Per-PC diagnostic ranking: k-fold CV accuracy of a linear SVC on each
/// single PC coordinate, plus the cumulative accuracy using PCs 0..k.
inline PcRanking rank_pcs(const std::vector<std::vector<double>>& pc_coords,
                          const std::vector<int>& labels, int k_folds = 5, uint64_t seed = 0) {
  if (pc_coords.size() != labels.size() || pc_coords.empty())
    throw std::invalid_argument("rank_pcs: bad input");
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  if (!pos || !neg) throw std::invalid_argument("rank_pcs: both classes required");

  const size_t d = pc_coords[0].size();
  auto folds = detail::stratified_folds(labels, k_folds, seed);
  PcRanking rank;
  rank.by_pc.resize(d);
  for (size_t k = 0; k < d; ++k) {
    std::vector<std::vector<double>> single(pc_coords.size()), cumulative(pc_coords.size());
    for (size_t i = 0; i < pc_coords.size(); ++i) {
      single[i] = {pc_coords[i][k]};
      cumulative[i].assign(pc_coords[i].begin(), pc_coords[i].begin() + long(k) + 1);
    }
    PcRankEntry& e = rank.by_pc[k];
    e.pc = int(k);
    std::tie(e.acc_mean, e.acc_sd) = detail::cv_accuracy(single, labels, folds);
    std::tie(e.cum_mean, e.cum_sd) = detail::cv_accuracy(cumulative, labels, folds);
  }
  rank.order.resize(d);
  std::iota(rank.order.begin(), rank.order.end(), 0);
  std::stable_sort(rank.order.begin(), rank.order.end(), [&](int a, int b) {
    return rank.by_pc[size_t(a)].acc_mean > rank.by_pc[size_t(b)].acc_mean;
  });
  return rank;
}

}  // namespace onh::latent
