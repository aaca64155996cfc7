#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace onh::latent {

namespace detail {

// regularized incomplete beta via the standard continued fraction
inline double betacf(double a, double b, double x) {
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - ln_beta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

inline void mean_var(const std::vector<double>& v, double& mean, double& var) {
  mean = 0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= double(v.size() - 1);
}

}  // namespace detail

/// Two-sided Welch t-test p-value. Two identical constant samples get p = 1
/// by the exact-equality shortcut; distinct constants get p = 0.
inline double welch_p(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_p: need >= 2 per group");
  double ma, va, mb, vb;
  detail::mean_var(a, ma, va);
  detail::mean_var(b, mb, vb);
  const double sea = va / double(a.size()), seb = vb / double(b.size());
  if (sea + seb == 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(sea + seb);
  const double df = (sea + seb) * (sea + seb) /
                    (sea * sea / double(a.size() - 1) + seb * seb / double(b.size() - 1));
  return detail::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

/// Welch p-value per PC coordinate for a two-class population.
inline std::vector<double> group_stats(const std::vector<std::vector<double>>& pc_coords,
                                       const std::vector<int>& labels) {
  if (pc_coords.size() != labels.size())
    throw std::invalid_argument("group_stats: size mismatch");
  const size_t d = pc_coords.empty() ? 0 : pc_coords[0].size();
  std::vector<double> out;
  for (size_t k = 0; k < d; ++k) {
    std::vector<double> g0, g1;
    for (size_t i = 0; i < pc_coords.size(); ++i)
      (labels[i] ? g1 : g0).push_back(pc_coords[i][k]);
    if (g0.size() < 2 || g1.size() < 2)
      throw std::invalid_argument("group_stats: need >= 2 samples per class");
    out.push_back(welch_p(g0, g1));
  }
  return out;
}

/// Kendall rank correlation (tau-a) of a sequence against its index:
/// (concordant - discordant) / total pairs; ties contribute zero.
inline double kendall_tau(const std::vector<double>& xs) {
  const size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("kendall_tau: need >= 2 values");
  long num = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      if (xs[j] > xs[i])
        ++num;
      else if (xs[j] < xs[i])
        --num;
    }
  return double(num) / (double(n) * double(n - 1) / 2.0);
}

/// Mean silhouette score over all points, Euclidean distances, any number of
/// dimensions; labels must contain at least two clusters.
inline double silhouette(const std::vector<std::vector<double>>& points,
                         const std::vector<int>& labels) {
  const size_t n = points.size();
  if (n != labels.size() || n < 3) throw std::invalid_argument("silhouette: bad input");
  std::vector<int> classes;
  for (int l : labels) {
    bool seen = false;
    for (int c : classes) seen |= (c == l);
    if (!seen) classes.push_back(l);
  }
  if (classes.size() < 2) throw std::invalid_argument("silhouette: need >= 2 clusters");
  auto dist = [&](size_t i, size_t j) {
    double s = 0;
    for (size_t k = 0; k < points[i].size(); ++k) {
      const double d = points[i][k] - points[j][k];
      s += d * d;
    }
    return std::sqrt(s);
  };
  double total = 0;
  for (size_t i = 0; i < n; ++i) {
    double a = 0, b = 1e300;
    for (int c : classes) {
      double sum = 0;
      long cnt = 0;
      for (size_t j = 0; j < n; ++j) {
        if (j == i || labels[j] != c) continue;
        sum += dist(i, j);
        ++cnt;
      }
      if (cnt == 0) continue;
      if (c == labels[i])
        a = sum / double(cnt);
      else
        b = std::min(b, sum / double(cnt));
    }
    total += (b - a) / std::max(a, b);
  }
  return total / double(n);
}

}  // namespace onh::latent
