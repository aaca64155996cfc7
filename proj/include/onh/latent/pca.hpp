#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace onh::latent {

/// Full orthonormal principal basis (k = d) with non-increasing eigenvalues.
/// Eigenvalues are sample variances of the projected training data (n-1
/// divisor). Component signs follow a deterministic convention: the
/// largest-magnitude entry of each row is positive.
struct PCBasis {
  int d = 0;
  std::vector<double> mean;                     // d
  std::vector<std::vector<double>> components;  // k rows of length d
  std::vector<double> eigenvalues;              // k, non-increasing
};

/// Mean-centered PCA through a one-sided Jacobi singular value
/// decomposition of the data matrix; deterministic, no randomness.
/// Rank-deficient inputs simply produce zero eigenvalues.
inline PCBasis fit_pca(const std::vector<std::vector<double>>& rows) {
  const size_t n = rows.size();
  if (n < 2) throw std::invalid_argument("fit_pca: need at least 2 samples");
  const size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw std::invalid_argument("fit_pca: ragged input");

  PCBasis basis;
  basis.d = int(d);
  basis.mean.assign(d, 0.0);
  for (const auto& r : rows)
    for (size_t j = 0; j < d; ++j) basis.mean[j] += r[j];
  for (double& m : basis.mean) m /= double(n);

  // columns of the centered matrix, orthogonalized in place
  std::vector<std::vector<double>> col(d, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) col[j][i] = rows[i][j] - basis.mean[j];
  std::vector<std::vector<double>> v(d, std::vector<double>(d, 0.0));
  for (size_t j = 0; j < d; ++j) v[j][j] = 1.0;

  const double tol = 1e-13;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (size_t p = 0; p + 1 < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) {
        double app = 0, aqq = 0, apq = 0;
        for (size_t i = 0; i < n; ++i) {
          app += col[p][i] * col[p][i];
          aqq += col[q][i] * col[q][i];
          apq += col[p][i] * col[q][i];
        }
        if (std::abs(apq) <= tol * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (size_t i = 0; i < n; ++i) {
          const double xp = col[p][i], xq = col[q][i];
          col[p][i] = c * xp - s * xq;
          col[q][i] = s * xp + c * xq;
        }
        for (size_t j = 0; j < d; ++j) {
          const double vp = v[j][p], vq = v[j][q];
          v[j][p] = c * vp - s * vq;
          v[j][q] = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma2(d, 0.0);
  for (size_t j = 0; j < d; ++j)
    sigma2[j] = std::inner_product(col[j].begin(), col[j].end(), col[j].begin(), 0.0);
  std::vector<size_t> order(d);
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return sigma2[a] > sigma2[b]; });

  basis.components.assign(d, std::vector<double>(d));
  basis.eigenvalues.assign(d, 0.0);
  for (size_t k = 0; k < d; ++k) {
    const size_t j = order[k];
    basis.eigenvalues[k] = sigma2[j] / double(n - 1);
    for (size_t i = 0; i < d; ++i) basis.components[k][i] = v[i][j];
    // deterministic sign: make the largest-magnitude entry positive
    size_t arg = 0;
    for (size_t i = 1; i < d; ++i)
      if (std::abs(basis.components[k][i]) > std::abs(basis.components[k][arg])) arg = i;
    if (basis.components[k][arg] < 0)
      for (double& x : basis.components[k]) x = -x;
  }
  return basis;
}

inline std::vector<double> project(const PCBasis& basis, const std::vector<double>& z) {
  if (int(z.size()) != basis.d) throw std::invalid_argument("project: length mismatch");
  std::vector<double> coords(basis.components.size(), 0.0);
  for (size_t k = 0; k < basis.components.size(); ++k)
    for (size_t j = 0; j < z.size(); ++j)
      coords[k] += basis.components[k][j] * (z[j] - basis.mean[j]);
  return coords;
}

inline std::vector<double> inverse_project(const PCBasis& basis,
                                           const std::vector<double>& coords) {
  if (coords.size() != basis.components.size())
    throw std::invalid_argument("inverse_project: length mismatch");
  std::vector<double> z = basis.mean;
  for (size_t k = 0; k < coords.size(); ++k)
    for (size_t j = 0; j < z.size(); ++j) z[j] += coords[k] * basis.components[k][j];
  return z;
}

inline std::vector<std::vector<double>> project_all(const PCBasis& basis,
                                                    const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(project(basis, r));
  return out;
}

/// Flips components so that, along every PC with a class difference, the
/// non-glaucoma (label 0) group mean is the higher coordinate; decreasing a
/// PC then moves toward the glaucoma side.
inline void orient_for_classes(PCBasis& basis, const std::vector<std::vector<double>>& rows,
                               const std::vector<int>& labels) {
  auto coords = project_all(basis, rows);
  for (size_t k = 0; k < basis.components.size(); ++k) {
    double m0 = 0, m1 = 0;
    int n0 = 0, n1 = 0;
    for (size_t i = 0; i < coords.size(); ++i) {
      if (labels[i]) {
        m1 += coords[i][k];
        ++n1;
      } else {
        m0 += coords[i][k];
        ++n0;
      }
    }
    if (n0 == 0 || n1 == 0) return;
    if (m0 / n0 < m1 / n1)
      for (double& x : basis.components[k]) x = -x;
  }
}

}  // namespace onh::latent
