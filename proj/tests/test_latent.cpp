#include <doctest.h>

#include <cmath>

#include "onh/latent/pca.hpp"
#include "onh/latent/probe.hpp"
#include "onh/latent/stats.hpp"
#include "onh/latent/svc.hpp"
#include "onh/latent/traverse.hpp"
#include "onh/latent/umap.hpp"
#include "onh/rng.hpp"
#include "onh/segnet/augment.hpp"
#include "onh/synthgen/phantom.hpp"

using namespace onh;
using namespace onh::latent;

namespace {

std::vector<std::vector<double>> random_rows(size_t n, size_t d, uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  for (auto& r : rows)
    for (auto& v : r) v = rng.normal(0, sd);
  return rows;
}

}  // namespace

TEST_CASE("pca: axis-aligned toy data") {
  std::vector<std::vector<double>> pts{{1, 0}, {-1, 0}, {2, 0}, {-2, 0}};
  auto basis = fit_pca(pts);
  CHECK(std::abs(std::abs(basis.components[0][0]) - 1.0) < 1e-12);
  CHECK(std::abs(basis.components[0][1]) < 1e-12);
  CHECK(basis.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(basis.eigenvalues[0] == doctest::Approx(10.0 / 3.0));  // var of {1,-1,2,-2}, ddof 1
  CHECK_THROWS_AS(fit_pca({{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("pca: orthonormality, round-trip, eigen-variance match") {
  auto rows = random_rows(200, 54, 31);
  // give the data some anisotropy
  for (auto& r : rows) {
    r[0] *= 5;
    r[1] *= 2;
    r[2] += 0.5 * r[0];
  }
  auto basis = fit_pca(rows);
  // components . componentsT == identity within 1e-6
  for (size_t i = 0; i < basis.components.size(); ++i)
    for (size_t j = i; j < basis.components.size(); ++j) {
      double dot = 0;
      for (size_t k = 0; k < 54; ++k) dot += basis.components[i][k] * basis.components[j][k];
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
  // eigenvalues sorted non-increasing
  for (size_t k = 1; k < basis.eigenvalues.size(); ++k)
    CHECK(basis.eigenvalues[k] <= basis.eigenvalues[k - 1] + 1e-12);
  // projection round-trip recovers inputs within 1e-5
  double max_err = 0;
  for (const auto& r : rows) {
    auto z = inverse_project(basis, project(basis, r));
    for (size_t k = 0; k < r.size(); ++k) max_err = std::max(max_err, std::abs(z[k] - r[k]));
  }
  CHECK(max_err < 1e-5);
  // projected coordinates: zero mean, variance equal to eigenvalues
  auto coords = project_all(basis, rows);
  for (size_t k = 0; k < 54; ++k) {
    double mean = 0;
    for (auto& c : coords) mean += c[k];
    mean /= double(coords.size());
    CHECK(std::abs(mean) < 1e-5);
    double var = 0;
    for (auto& c : coords) var += (c[k] - mean) * (c[k] - mean);
    var /= double(coords.size() - 1);
    if (basis.eigenvalues[k] > 1e-9)
      CHECK(std::abs(var - basis.eigenvalues[k]) / basis.eigenvalues[k] < 1e-4);
  }
}

TEST_CASE("pca: projection anchors") {
  auto rows = random_rows(50, 8, 5);
  auto basis = fit_pca(rows);
  auto zero = project(basis, basis.mean);
  for (double v : zero) CHECK(std::abs(v) < 1e-9);
  // one unit along component 0 -> coords (1, 0, ..., 0)
  std::vector<double> z = basis.mean;
  for (size_t j = 0; j < z.size(); ++j) z[j] += basis.components[0][j];
  auto c = project(basis, z);
  CHECK(c[0] == doctest::Approx(1.0));
  for (size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-9);
  // random round-trips
  Rng rng(77);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> q(8);
    for (auto& v : q) v = rng.normal(0, 3);
    auto back = inverse_project(basis, project(basis, q));
    for (size_t k = 0; k < 8; ++k) worst = std::max(worst, std::abs(back[k] - q[k]));
  }
  CHECK(worst < 1e-5);
  CHECK_THROWS_AS(project(basis, std::vector<double>(7, 0.0)), std::invalid_argument);
}

TEST_CASE("orient_for_classes points every informative PC toward non-glaucoma") {
  Rng rng(3);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 120; ++i) {
    const int label = i % 2;
    std::vector<double> r(6);
    for (auto& v : r) v = rng.normal(0, 0.3);
    r[0] += label ? -2.0 : 2.0;  // class axis dominates variance
    rows.push_back(r);
    labels.push_back(label);
  }
  auto basis = fit_pca(rows);
  orient_for_classes(basis, rows, labels);
  auto coords = project_all(basis, rows);
  double m0 = 0, m1 = 0;
  for (size_t i = 0; i < coords.size(); ++i) (labels[i] ? m1 : m0) += coords[i][0];
  CHECK(m0 / 60 > m1 / 60);
}

TEST_CASE("svc ranking: constructed separable instance") {
  Rng rng(11);
  std::vector<std::vector<double>> coords;
  std::vector<int> labels;
  for (int i = 0; i < 160; ++i) {
    const int label = i % 2;
    std::vector<double> c(5);
    c[0] = label + rng.normal(0, 0.1);  // coordinate 0 carries the signal
    for (size_t k = 1; k < 5; ++k) c[k] = rng.normal(0, 1.0);
    coords.push_back(c);
    labels.push_back(label);
  }
  auto rank = rank_pcs(coords, labels, 5, 9);
  CHECK(rank.order[0] == 0);
  CHECK(rank.by_pc[0].acc_mean > 0.95);
  for (size_t k = 1; k < 5; ++k) CHECK(rank.by_pc[k].acc_mean < 0.75);
  // cumulative accuracy with all PCs stays high
  CHECK(rank.by_pc[4].cum_mean > 0.9);

  // ranking is invariant under positive rescaling of any single coordinate
  auto scaled = coords;
  for (auto& c : scaled) c[2] *= 7.0;
  auto rank2 = rank_pcs(scaled, labels, 5, 9);
  CHECK(rank2.order == rank.order);
  for (size_t k = 0; k < 5; ++k)
    CHECK(rank2.by_pc[k].acc_mean == doctest::Approx(rank.by_pc[k].acc_mean));

  // single-class input rejected
  std::vector<int> ones(labels.size(), 1);
  CHECK_THROWS_AS(rank_pcs(coords, ones, 5, 9), std::invalid_argument);
}

TEST_CASE("welch p-values: shortcuts, separation, permutation behavior") {
  // identical constant groups -> p = 1
  CHECK(welch_p({2, 2, 2}, {2, 2, 2}) == doctest::Approx(1.0));
  // well-separated gaussians -> p < 1e-9
  Rng rng(13);
  std::vector<double> a, b;
  for (int i = 0; i < 100; ++i) {
    a.push_back(rng.normal(0, 1));
    b.push_back(rng.normal(5, 1));
  }
  CHECK(welch_p(a, b) < 1e-9);
  // permuted labels on separable data -> p above 0.01 in >= 95% of trials
  std::vector<double> all = a;
  all.insert(all.end(), b.begin(), b.end());
  int benign = 0;
  Rng perm(17);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> pool = all;
    perm.shuffle(pool);
    std::vector<double> g0(pool.begin(), pool.begin() + 100);
    std::vector<double> g1(pool.begin() + 100, pool.end());
    if (welch_p(g0, g1) > 0.01) ++benign;
  }
  CHECK(benign >= 95);

  // group_stats wraps per-PC
  std::vector<std::vector<double>> coords;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    coords.push_back({rng.normal(i % 2 ? 3 : 0, 1), rng.normal(0, 1)});
    labels.push_back(i % 2);
  }
  auto ps = group_stats(coords, labels);
  CHECK(ps[0] < 1e-6);
  CHECK(ps[1] > 0.001);
}

TEST_CASE("kendall tau on monotone and tied sequences") {
  CHECK(kendall_tau({5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(kendall_tau({1, 2, 3, 4, 5}) == doctest::Approx(1.0));
  CHECK(kendall_tau({3, 3, 3}) == doctest::Approx(0.0));
  CHECK(kendall_tau({5, 5, 4, 4, 3}) < -0.5);
}

TEST_CASE("umap: blob separation, duplicates, determinism, rejection") {
  // two 54-D gaussian blobs separated by 10 sigma
  Rng rng(19);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 80; ++i) {
    std::vector<double> r(54);
    const int label = i % 2;
    for (auto& v : r) v = rng.normal(0, 1);
    r[0] += label ? 10.0 : 0.0;
    rows.push_back(r);
    labels.push_back(label);
  }
  auto emb = fit_umap(rows, 10, 0.1, 150, 4);
  REQUIRE(emb.points.size() == rows.size());
  std::vector<std::vector<double>> pts;
  for (auto& p : emb.points) pts.push_back({p[0], p[1]});
  CHECK(silhouette(pts, labels) > 0.5);

  // determinism
  auto emb2 = fit_umap(rows, 10, 0.1, 150, 4);
  CHECK(emb.points == emb2.points);

  // duplicated rows embed near-coincident relative to the spread
  auto rows_dup = rows;
  rows_dup[3] = rows_dup[2];
  auto emb3 = fit_umap(rows_dup, 10, 0.1, 150, 4);
  double diam = 0;
  for (auto& p : emb3.points)
    for (auto& q : emb3.points)
      diam = std::max(diam, std::hypot(p[0] - q[0], p[1] - q[1]));
  const double dd = std::hypot(emb3.points[2][0] - emb3.points[3][0],
                               emb3.points[2][1] - emb3.points[3][1]);
  CHECK(dd < 0.1 * diam);

  // out-of-sample placement lands near the right blob
  std::vector<double> q(54, 0.0);
  q[0] = 10.0;  // glaucoma-side blob
  auto at = embed_new(rows, emb, q);
  double best_d = 1e300;
  int best_i = -1;
  for (size_t i = 0; i < rows.size(); ++i) {
    const double d = std::hypot(at[0] - emb.points[i][0], at[1] - emb.points[i][1]);
    if (d < best_d) {
      best_d = d;
      best_i = int(i);
    }
  }
  CHECK(labels[size_t(best_i)] == 1);

  CHECK_THROWS_AS(fit_umap(random_rows(10, 4, 1), 15, 0.1, 50, 1), std::invalid_argument);
}

TEST_CASE("umap curve fit reproduces the reference constants for min_dist 0.1") {
  double a, b;
  umap_detail::fit_ab(0.1, a, b);
  CHECK(a == doctest::Approx(1.577).epsilon(0.08));
  CHECK(b == doctest::Approx(0.895).epsilon(0.08));
}

TEST_CASE("phenotype probe recovers generative parameters") {
  for (int s = 0; s < 10; ++s) {
    auto p = synthgen::sample_params(
        s % 2 ? synthgen::ClassLabel::kGlaucoma : synthgen::ClassLabel::kNonGlaucoma, s % 4,
        uint64_t(40 + s));
    LabelMap m = synthgen::rasterize(p, 100, 200);
    auto f = phenotype_probe(m);
    REQUIRE(f.rnfl_thickness.has_value());
    REQUIRE(f.gcl_ipl_thickness.has_value());
    REQUIRE(f.prelamina_thickness.has_value());
    REQUIRE(f.prelamina_depth.has_value());
    REQUIRE(f.lc_depth.has_value());
    REQUIRE(f.lc_thickness.has_value());
    REQUIRE(f.disc_size.has_value());
    REQUIRE(f.mrw.has_value());
    CHECK(std::abs(*f.rnfl_thickness - p.rnfl_thickness) <= 1.0);
    CHECK(std::abs(*f.gcl_ipl_thickness - p.gcl_ipl_thickness) <= 1.0);
    CHECK(std::abs(*f.prelamina_thickness - p.prelamina_thickness) <= 1.5);
    CHECK(std::abs(*f.prelamina_depth - p.prelamina_depth) <= 1.5);
    CHECK(std::abs(*f.lc_depth - p.lc_depth) <= 1.5);
    CHECK(std::abs(*f.lc_thickness - p.lc_thickness) <= 1.5);
    CHECK(std::abs(*f.disc_size - 2 * p.disc_radius) <= 3.0);
    // measured MRW is a minimum distance to the inner surface, so it sits at
    // or below the rim-height parameter; it must stay in a sane band and
    // respond monotonically (checked below)
    CHECK(*f.mrw <= p.mrw + 1.5);
    CHECK(*f.mrw >= 0.45 * p.mrw);

    // translation invariance: a 5 px shift changes thickness readouts <= 1 px
    segnet::GeoTransform shift;
    shift.tx = 5;
    auto fs = phenotype_probe(segnet::transform_map(m, shift));
    CHECK(std::abs(*fs.rnfl_thickness - *f.rnfl_thickness) <= 1.0);
    CHECK(std::abs(*fs.gcl_ipl_thickness - *f.gcl_ipl_thickness) <= 1.0);
    CHECK(std::abs(*fs.prelamina_thickness - *f.prelamina_thickness) <= 1.0);
  }

  // measured MRW rises with the generative rim width, other params fixed
  {
    auto p = synthgen::sample_params(synthgen::ClassLabel::kNonGlaucoma, 0, 2);
    auto thin = p, thick = p;
    thin.mrw = 10;
    thick.mrw = 18;
    auto f_thin = phenotype_probe(synthgen::rasterize(thin, 100, 200));
    auto f_thick = phenotype_probe(synthgen::rasterize(thick, 100, 200));
    CHECK(*f_thick.mrw > *f_thin.mrw);
  }

  // a map with no LC pixels reports the LC features as absent
  auto p = synthgen::sample_params(synthgen::ClassLabel::kNonGlaucoma, 0, 1);
  LabelMap m = synthgen::rasterize(p, 100, 200);
  for (auto& v : m.data)
    if (v == kLamina) v = kNoise;
  auto f = phenotype_probe(m);
  CHECK(!f.lc_thickness.has_value());
  CHECK(!f.lc_depth.has_value());
  CHECK(f.rnfl_thickness.has_value());
}

TEST_CASE("traversal: seed identity, collinearity in PC space, errors") {
  // synthetic latent population with a dominant class axis
  Rng rng(23);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> r(18);
    const int label = i % 2;
    for (auto& v : r) v = rng.normal(0, 0.4);
    r[0] += label ? -3.0 : 3.0;
    rows.push_back(r);
    labels.push_back(label);
  }
  auto basis = fit_pca(rows);
  orient_for_classes(basis, rows, labels);
  auto coords = project_all(basis, rows);
  auto stats = class_pc_stats(coords, labels);
  CHECK(stats.mean0[0] > stats.mean1[0]);

  auto model = autoencoder::build_autoencoder(2, 100, 200, true, 3);
  autoencoder::LatentVector z0(rows[0].begin(), rows[0].end());
  auto res = traverse_pc(basis, model, z0, 0, stats, 10);
  REQUIRE(res.latents.size() == 10);
  REQUIRE(res.maps.size() == 10);
  REQUIRE(res.class_probs.size() == 10);
  CHECK(res.latents[0] == z0);  // step 1 is exactly the seed
  CHECK(res.pc_values.front() == doctest::Approx(coords[0][0]));
  CHECK(res.pc_values.back() == doctest::Approx(stats.mean1[0] - 2 * stats.sd1[0]));

  // collinearity in PC space: pairwise coordinate differences live on the
  // traversed axis only
  std::vector<std::vector<double>> pc;
  for (auto& z : res.latents)
    pc.push_back(project(basis, std::vector<double>(z.begin(), z.end())));
  for (size_t i = 1; i < pc.size(); ++i)
    for (size_t j = i + 1; j < pc.size(); ++j) {
      double off = 0, total = 0;
      for (size_t k = 0; k < pc[i].size(); ++k) {
        const double d = pc[j][k] - pc[i][k];
        total += d * d;
        if (k != 0) off += d * d;
      }
      CHECK(std::sqrt(off) <= 1e-6 * std::sqrt(total) + 1e-9);
    }
  // step 1 -> step 2 difference dominated by the traversed axis (float cast)
  {
    double off = 0, total = 0;
    for (size_t k = 0; k < pc[0].size(); ++k) {
      const double d = pc[1][k] - pc[0][k];
      total += d * d;
      if (k != 0) off += d * d;
    }
    CHECK(std::sqrt(off) <= 1e-4 * std::sqrt(total));
  }

  CHECK_THROWS_AS(traverse_pc(basis, model, z0, 18, stats, 10), std::invalid_argument);
  CHECK_THROWS_AS(traverse_pc(basis, model, z0, -1, stats, 10), std::invalid_argument);
}
