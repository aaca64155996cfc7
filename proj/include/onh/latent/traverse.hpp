#pragma once

#include <array>
#include <optional>

#include "onh/autoencoder/model.hpp"
#include "onh/latent/pca.hpp"
#include "onh/latent/umap.hpp"

namespace onh::latent {

/// Per-class mean and SD of each PC coordinate; drives the default traversal
/// endpoint.
struct ClassPcStats {
  std::vector<double> mean0, sd0;  // non-glaucoma
  std::vector<double> mean1, sd1;  // glaucoma
};

inline ClassPcStats class_pc_stats(const std::vector<std::vector<double>>& pc_coords,
                                   const std::vector<int>& labels) {
  if (pc_coords.size() != labels.size() || pc_coords.empty())
    throw std::invalid_argument("class_pc_stats: bad input");
  const size_t d = pc_coords[0].size();
  ClassPcStats st;
  st.mean0.assign(d, 0);
  st.mean1.assign(d, 0);
  st.sd0.assign(d, 0);
  st.sd1.assign(d, 0);
  long n0 = 0, n1 = 0;
  for (size_t i = 0; i < pc_coords.size(); ++i) {
    (labels[i] ? n1 : n0)++;
    for (size_t k = 0; k < d; ++k) (labels[i] ? st.mean1 : st.mean0)[k] += pc_coords[i][k];
  }
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("class_pc_stats: both classes required");
  for (size_t k = 0; k < d; ++k) {
    st.mean0[k] /= double(n0);
    st.mean1[k] /= double(n1);
  }
  for (size_t i = 0; i < pc_coords.size(); ++i)
    for (size_t k = 0; k < d; ++k) {
      const double dev = pc_coords[i][k] - (labels[i] ? st.mean1 : st.mean0)[k];
      (labels[i] ? st.sd1 : st.sd0)[k] += dev * dev;
    }
  for (size_t k = 0; k < d; ++k) {
    st.sd0[k] = std::sqrt(st.sd0[k] / double(n0));
    st.sd1[k] = std::sqrt(st.sd1[k] / double(n1));
  }
  return st;
}

/// One latent traversal: step 1 is exactly the seed latent; the chosen PC
/// coordinate then moves linearly to the endpoint with every other PC held
/// fixed, each step decoded and classified.
struct TraversalResult {
  int pc_index = 0;
  std::vector<double> pc_values;                   // traversed coordinate, one per step
  std::vector<autoencoder::LatentVector> latents;  // step 1 == seed
  std::vector<LabelMap> maps;                      // decoded argmax maps
  std::vector<std::array<float, 2>> class_probs;   // empty for unsupervised models
  std::vector<std::array<double, 2>> umap_points;  // empty when no embedding given
};

inline TraversalResult traverse_pc(const PCBasis& basis, const autoencoder::AeModel& model,
                                   const autoencoder::LatentVector& z0, int pc_index,
                                   const ClassPcStats& stats, int steps = 10,
                                   std::optional<double> end_coord = std::nullopt,
                                   const Embedding2D* emb = nullptr,
                                   const std::vector<std::vector<double>>* emb_train_coords =
                                       nullptr) {
  if (pc_index < 0 || pc_index >= int(basis.components.size()))
    throw std::invalid_argument("traverse_pc: pc_index out of range");
  if (steps < 2) throw std::invalid_argument("traverse_pc: need at least 2 steps");
  if (int(z0.size()) != basis.d) throw std::invalid_argument("traverse_pc: latent length mismatch");

  std::vector<double> z0d(z0.begin(), z0.end());
  std::vector<double> coords0 = project(basis, z0d);
  const double start = coords0[size_t(pc_index)];
  // default endpoint: two glaucoma-side SDs beyond the glaucoma class mean
  const double end =
      end_coord.value_or(stats.mean1[size_t(pc_index)] - 2.0 * stats.sd1[size_t(pc_index)]);

  TraversalResult res;
  res.pc_index = pc_index;
  for (int s = 0; s < steps; ++s) {
    const double v = start + (end - start) * double(s) / double(steps - 1);
    res.pc_values.push_back(v);
    autoencoder::LatentVector z;
    if (s == 0) {
      z = z0;
    } else {
      std::vector<double> coords = coords0;
      coords[size_t(pc_index)] = v;
      std::vector<double> zd = inverse_project(basis, coords);
      z.assign(zd.begin(), zd.end());
    }
    auto out = autoencoder::decode(model, z);
    res.maps.push_back(argmax_map(out.reconstruction));
    if (out.has_class) res.class_probs.push_back(out.class_probs);
    if (emb && emb_train_coords) {
      std::vector<double> coords = coords0;
      coords[size_t(pc_index)] = v;
      res.umap_points.push_back(embed_new(*emb_train_coords, *emb, coords));
    }
    res.latents.push_back(std::move(z));
  }
  return res;
}

}  // namespace onh::latent
