#include <doctest.h>

#include <filesystem>
#include <set>

#include "onh/synthgen/dataset.hpp"
#include "onh/synthgen/phantom.hpp"
#include "onh/synthgen/render.hpp"

using namespace onh;
using namespace onh::synthgen;

namespace {

int class_count_in_column(const LabelMap& m, int x, uint8_t cls) {
  int n = 0;
  for (int y = 0; y < m.height; ++y) n += (m.at(y, x) == cls);
  return n;
}

bool column_has_class(const LabelMap& m, int x, uint8_t cls) {
  return class_count_in_column(m, x, cls) > 0;
}

}  // namespace

TEST_CASE("sample_params: determinism, regimes, rejection") {
  auto a = sample_params(ClassLabel::kGlaucoma, 0, 42);
  auto b = sample_params(ClassLabel::kGlaucoma, 0, 42);
  CHECK(a.rnfl_thickness == b.rnfl_thickness);
  CHECK(a.disc_radius == b.disc_radius);
  CHECK(a.lc_depth == b.lc_depth);
  CHECK(a.class_label == ClassLabel::kGlaucoma);
  CHECK(a.lc_depth == a.prelamina_depth + a.prelamina_thickness);

  CHECK_THROWS_AS(sample_params(ClassLabel::kGlaucoma, 5, 42), std::invalid_argument);
  CHECK_THROWS_AS(sample_params(ClassLabel::kGlaucoma, -1, 42), std::invalid_argument);
}

TEST_CASE("sample_params: Monte-Carlo class-conditional means follow the phenotype") {
  double ng_rnfl = 0, g_rnfl = 0, ng_mrw = 0, g_mrw = 0, ng_cup = 0, g_cup = 0, ng_disc = 0,
         g_disc = 0, ng_gcl = 0, g_gcl = 0, ng_pre = 0, g_pre = 0, ng_lc = 0, g_lc = 0;
  const int N = 1000;
  for (int s = 0; s < N; ++s) {
    auto ng = sample_params(ClassLabel::kNonGlaucoma, s % 4, uint64_t(s));
    auto g = sample_params(ClassLabel::kGlaucoma, s % 4, uint64_t(s));
    ng_rnfl += ng.rnfl_thickness;
    g_rnfl += g.rnfl_thickness;
    ng_mrw += ng.mrw;
    g_mrw += g.mrw;
    ng_cup += ng.prelamina_depth;
    g_cup += g.prelamina_depth;
    ng_disc += ng.disc_radius;
    g_disc += g.disc_radius;
    ng_gcl += ng.gcl_ipl_thickness;
    g_gcl += g.gcl_ipl_thickness;
    ng_pre += ng.prelamina_thickness;
    g_pre += g.prelamina_thickness;
    ng_lc += ng.lc_thickness;
    g_lc += g.lc_thickness;
  }
  // glaucoma: thinner RNFL/GCL+IPL/prelamina/LC and MRW, deeper cup, larger disc
  CHECK(ng_rnfl / N > g_rnfl / N);
  CHECK(ng_gcl / N > g_gcl / N);
  CHECK(ng_pre / N > g_pre / N);
  CHECK(ng_lc / N > g_lc / N);
  CHECK(ng_mrw / N > g_mrw / N);
  CHECK(ng_cup / N < g_cup / N);
  CHECK(ng_disc / N < g_disc / N);
}

TEST_CASE("sample_params: ranges overlap so no single parameter separates classes") {
  double ng_min_rnfl = 1e9, g_max_rnfl = 0;
  for (int s = 0; s < 500; ++s) {
    ng_min_rnfl = std::min(ng_min_rnfl,
                           sample_params(ClassLabel::kNonGlaucoma, 0, uint64_t(s)).rnfl_thickness);
    g_max_rnfl =
        std::max(g_max_rnfl, sample_params(ClassLabel::kGlaucoma, 0, uint64_t(s)).rnfl_thickness);
  }
  CHECK(ng_min_rnfl < g_max_rnfl);  // regimes overlap
}

TEST_CASE("rasterize: validity, symmetry, thickness recovery") {
  for (int s = 0; s < 20; ++s) {
    auto p = sample_params(s % 2 ? ClassLabel::kGlaucoma : ClassLabel::kNonGlaucoma, s % 4,
                           uint64_t(100 + s));
    LabelMap m = rasterize(p, 100, 200);
    std::string why;
    CHECK_MESSAGE(label_map_valid(m, &why), why);
    // determinism
    LabelMap m2 = rasterize(p, 100, 200);
    CHECK(m.data == m2.data);
    // peripheral RNFL thickness recovers the parameter within 1 px
    for (int x : {0, 1, 5, 194, 198, 199}) {
      CHECK(std::abs(class_count_in_column(m, x, kRnflPrelamina) - p.rnfl_thickness) <= 1.0);
      CHECK(std::abs(class_count_in_column(m, x, kGclIpl) - p.gcl_ipl_thickness) <= 1.0);
      CHECK(std::abs(class_count_in_column(m, x, kRpe) - p.rpe_thickness) <= 1.0);
    }
    // all 9 classes present
    std::set<uint8_t> present(m.data.begin(), m.data.end());
    CHECK(present.size() == 9);
  }

  // zero bowing -> symmetric about the vertical disc axis within 1 px
  // (the geometry is mirror-exact for mirrored columns)
  auto p = sample_params(ClassLabel::kNonGlaucoma, 0, 7);
  p.scleral_bowing = 1e-9;
  LabelMap m = rasterize(p, 100, 200);
  for (int x = 0; x < 100; ++x)
    for (int y = 0; y < 100; ++y) CHECK(m.at(y, x) == m.at(y, 199 - x));
}

TEST_CASE("rasterize: larger disc radius strictly widens the GCL-free gap") {
  auto p1 = sample_params(ClassLabel::kNonGlaucoma, 0, 11);
  auto p2 = p1;
  p2.disc_radius = p1.disc_radius + 4;
  LabelMap m1 = rasterize(p1, 100, 200), m2 = rasterize(p2, 100, 200);
  int gap1 = 0, gap2 = 0;
  for (int x = 0; x < 200; ++x) {
    gap1 += !column_has_class(m1, x, kGclIpl);
    gap2 += !column_has_class(m2, x, kGclIpl);
  }
  CHECK(gap2 > gap1);
}

TEST_CASE("rasterize: rejects bad rasters and overflowing geometry") {
  auto p = sample_params(ClassLabel::kNonGlaucoma, 0, 3);
  CHECK_THROWS_AS(rasterize(p, 40, 200), std::invalid_argument);
  CHECK_THROWS_AS(rasterize(p, 100, 100), std::invalid_argument);
  auto big = p;
  big.choroid_thickness = 80;
  CHECK_THROWS_AS(rasterize(big, 100, 200), std::invalid_argument);
  auto deep = p;
  deep.lc_depth = 95;
  CHECK_THROWS_AS(rasterize(deep, 100, 200), std::invalid_argument);
  auto wide = p;
  wide.disc_radius = 60;
  CHECK_THROWS_AS(rasterize(wide, 100, 200), std::invalid_argument);
  // full paper-scale raster works
  LabelMap big_map = rasterize(p.scaled(2.0), 200, 400);
  CHECK(label_map_valid(big_map));
}

TEST_CASE("render_oct: noiseless constancy, determinism, speckle variance") {
  auto p = sample_params(ClassLabel::kGlaucoma, 1, 5);
  LabelMap m = rasterize(p, 100, 200);

  NoiseConfig off{0.0, 0, 0, 0.0, 0.0};
  IntensityImage clean = render_oct(m, off, 9);
  std::map<uint8_t, float> seen;
  for (size_t i = 0; i < m.data.size(); ++i) {
    auto [it, fresh] = seen.emplace(m.data[i], clean.data[i]);
    CHECK(it->second == clean.data[i]);
  }

  NoiseConfig cfg;
  cfg.speckle = 0.5;
  IntensityImage a = render_oct(m, cfg, 12), b = render_oct(m, cfg, 12);
  CHECK(a.data == b.data);
  IntensityImage c = render_oct(m, cfg, 13);
  CHECK(a.data != c.data);
  for (float v : a.data) {
    CHECK(v >= 0.f);
    CHECK(v <= 1.f);
  }
  // per-class sample variance strictly positive for every class present
  for (int cls = 0; cls < 9; ++cls) {
    double sum = 0, sum2 = 0;
    long n = 0;
    for (size_t i = 0; i < m.data.size(); ++i)
      if (m.data[i] == cls) {
        sum += a.data[i];
        sum2 += double(a.data[i]) * a.data[i];
        ++n;
      }
    REQUIRE(n > 0);
    CHECK(sum2 / n - (sum / n) * (sum / n) > 0);
  }
}

TEST_CASE("make_dataset: balance arithmetic, manifest round-trip, unique subjects") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "onh_ds_test").string();
  fs::remove_all(dir);
  auto m = make_dataset(3, 100, 200, 77, dir);
  CHECK(m.records.size() == 24);  // 3 * 4 studies * 2 classes
  int per_class[2] = {0, 0}, per_study[4] = {0, 0, 0, 0};
  std::set<int> subjects;
  for (const auto& r : m.records) {
    per_class[int(r.class_label)]++;
    per_study[r.study_id]++;
    CHECK(subjects.insert(r.subject_id).second);  // one image per subject
  }
  CHECK(per_class[0] == 12);
  CHECK(per_class[1] == 12);
  for (int s = 0; s < 4; ++s) CHECK(per_study[s] == 6);

  // round-trip identity
  auto m2 = load_manifest((fs::path(dir) / "manifest.jsonl").string());
  REQUIRE(m2.records.size() == m.records.size());
  for (size_t i = 0; i < m.records.size(); ++i) {
    CHECK(m2.records[i].id == m.records[i].id);
    CHECK(m2.records[i].subject_id == m.records[i].subject_id);
    CHECK(m2.records[i].study_id == m.records[i].study_id);
    CHECK(m2.records[i].class_label == m.records[i].class_label);
    CHECK(m2.records[i].params.rnfl_thickness == m.records[i].params.rnfl_thickness);
    CHECK(m2.records[i].params.scleral_bowing == m.records[i].params.scleral_bowing);
    CHECK(m2.records[i].label_path == m.records[i].label_path);
  }
  // image files load and validate
  LabelMap map = load_record_map(m2, m2.records[0]);
  CHECK(label_map_valid(map));
  IntensityImage img = load_record_intensity(m2, m2.records[0]);
  CHECK(img.height == 100);
  CHECK(img.width == 200);

  // unwritable path -> I/O error
  CHECK_THROWS(make_dataset(1, 100, 200, 1, "/proc/nonexistent/out"));
  fs::remove_all(dir);
}

TEST_CASE("make_dataset is deterministic per seed") {
  namespace fs = std::filesystem;
  const std::string d1 = (fs::temp_directory_path() / "onh_ds_a").string();
  const std::string d2 = (fs::temp_directory_path() / "onh_ds_b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  auto a = make_dataset(1, 100, 200, 5, d1);
  auto b = make_dataset(1, 100, 200, 5, d2);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].params.rnfl_thickness == b.records[i].params.rnfl_thickness);
    CHECK(load_record_map(a, a.records[i]).data == load_record_map(b, b.records[i]).data);
    CHECK(load_record_intensity(a, a.records[i]).data ==
          load_record_intensity(b, b.records[i]).data);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}
