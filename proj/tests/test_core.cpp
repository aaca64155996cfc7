#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "onh/image.hpp"
#include "onh/metrics/classify.hpp"
#include "onh/metrics/dice.hpp"
#include "onh/metrics/folds.hpp"
#include "onh/rng.hpp"
#include "onh/tensor.hpp"

using namespace onh;

// ---------------------------------------------------------------------------
// Brute-force metric oracles, independent of the library implementations.
// ---------------------------------------------------------------------------

namespace oracle {

// AUC by exhaustive pair counting, ties 1/2.
double auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0;
  long pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j])
        num += 1;
      else if (s[i] == s[j])
        num += 0.5;
    }
  }
  return num / double(pairs);
}

// sensitivity at specificity by sweeping every candidate threshold,
// including one above all scores
double sens_at_spec(const std::vector<double>& s, const std::vector<int>& y, double spec) {
  std::vector<double> cand = s;
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  cand.push_back(mx + 1.0);
  double best = 0;
  long npos = 0, nneg = 0;
  for (int l : y) (l ? npos : nneg)++;
  for (double t : cand) {
    long tp = 0, tn = 0;
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t && y[i]) ++tp;
      if (s[i] < t && !y[i]) ++tn;
    }
    if (double(tn) / double(nneg) >= spec) best = std::max(best, double(tp) / double(npos));
  }
  return best;
}

// per-class dice by direct set counting
double dice_mean(const LabelMap& a, const LabelMap& b) {
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    long pa = 0, pb = 0, both = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
      if (a.data[i] == c) ++pa;
      if (b.data[i] == c) ++pb;
      if (a.data[i] == c && b.data[i] == c) ++both;
    }
    if (pa + pb == 0) continue;
    sum += 2.0 * double(both) / double(pa + pb);
    ++counted;
  }
  return sum / counted;
}

}  // namespace oracle

TEST_CASE("rng determinism and basic statistics") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  double mean = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.normal();
  mean /= n;
  CHECK(std::abs(mean) < 0.05);
  Rng d(9);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = d.below(13);
    CHECK(v < 13);
  }
}

TEST_CASE("rng streams are independent of each other") {
  Rng s0 = Rng::stream(5, 0), s1 = Rng::stream(5, 1);
  CHECK(s0.next_u64() != s1.next_u64());
  Rng s0b = Rng::stream(5, 0);
  s0 = Rng::stream(5, 0);
  CHECK(s0.next_u64() == s0b.next_u64());
}

TEST_CASE("tensor shape bookkeeping and finite guard") {
  Tensor t({2, 3, 4, 5});
  CHECK(t.numel() == 120);
  t.at4(1, 2, 3, 4) = 7.f;
  CHECK(t.data[119] == 7.f);
  CHECK(t.all_finite());
  t.data[5] = std::nanf("");
  CHECK(!t.all_finite());
  CHECK_THROWS(t.require_finite("t"));
}

TEST_CASE("label map and intensity files round-trip") {
  Rng rng(3);
  LabelMap m(20, 30);
  for (auto& v : m.data) v = uint8_t(rng.below(9));
  for (int x = 0; x < 30; ++x) {
    m.at(0, x) = kVitreous;
    m.at(19, x) = kNoise;
  }
  auto enc = encode_label_map(m);
  CHECK(enc.substr(0, 4) == "ONHL");
  CHECK(enc.size() == 9 + 20 * 30);
  LabelMap m2 = decode_label_map(enc);
  CHECK(m2.data == m.data);
  CHECK(m2.height == 20);
  CHECK(m2.classes == 9);

  IntensityImage img(11, 13);
  for (auto& v : img.data) v = float(rng.uniform());
  IntensityImage img2 = decode_intensity(encode_intensity(img));
  CHECK(img2.data == img.data);

  CHECK_THROWS(decode_label_map("bogus"));
  CHECK_THROWS(decode_intensity(enc));
}

TEST_CASE("label map validity scan") {
  LabelMap m(5, 6);
  for (int x = 0; x < 6; ++x) m.at(4, x) = kNoise;
  std::string why;
  CHECK(label_map_valid(m, &why));
  m.at(0, 2) = kRnflPrelamina;
  CHECK(!label_map_valid(m, &why));
  CHECK(why == "top row not vitreous");
}

TEST_CASE("dice: identical, disjoint and the 2x2 hand case") {
  LabelMap a(2, 2), b(2, 2);
  // hand case: pred class-1 at (0,0),(0,1); truth class-1 at (0,1),(1,1)
  a.at(0, 0) = 1;
  a.at(0, 1) = 1;
  b.at(0, 1) = 1;
  b.at(1, 1) = 1;
  auto r = metrics::dice(a, b);
  CHECK(r.per_class[1] == doctest::Approx(0.5));
  // class 0: pred {2}, truth {2}, inter (1,0) matches? pred0 at (1,0),(1,1); truth0 at (0,0),(1,0)
  CHECK(r.per_class[0] == doctest::Approx(0.5));
  CHECK(metrics::dice(a, a).mean == doctest::Approx(1.0));

  LabelMap c(1, 4, 9), d(1, 4, 9);
  c.data = {1, 1, 1, 1};
  d.data = {2, 2, 2, 2};
  CHECK(metrics::dice(c, d).mean == doctest::Approx(0.0));
  LabelMap e(1, 3, 9);
  CHECK_THROWS(metrics::dice(a, e));
}

TEST_CASE("dice is symmetric and bounded on random maps") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    LabelMap a(6, 7), b(6, 7);
    for (auto& v : a.data) v = uint8_t(rng.below(4));
    for (auto& v : b.data) v = uint8_t(rng.below(4));
    auto ab = metrics::dice(a, b), ba = metrics::dice(b, a);
    CHECK(ab.mean == ba.mean);
    CHECK(ab.mean >= 0.0);
    CHECK(ab.mean <= 1.0);
    CHECK(ab.mean == doctest::Approx(oracle::dice_mean(a, b)));
  }
}

TEST_CASE("roc_auc matches the stated examples") {
  CHECK(metrics::roc_auc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) == doctest::Approx(0.75));
  CHECK(metrics::roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(metrics::roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == doctest::Approx(0.5));
  CHECK_THROWS(metrics::roc_auc({0.5, 0.4}, {1, 1}));
}

TEST_CASE("roc_auc equals the pair-counting oracle on random instances") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 2 + rng.below(48);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool pos = false, neg = false;
    for (size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 8) / 8.0;  // force ties
      y[i] = int(rng.below(2));
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    CHECK(metrics::roc_auc(s, y) == doctest::Approx(oracle::auc(s, y)).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc invariant under strictly increasing transforms") {
  Rng rng(23);
  std::vector<double> s(30);
  std::vector<int> y(30);
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = int(rng.below(2));
  }
  y[0] = 1;
  y[1] = 0;
  std::vector<double> s2 = s;
  for (double& v : s2) v = std::exp(3 * v) + 1;
  CHECK(metrics::roc_auc(s, y) == metrics::roc_auc(s2, y));
}

TEST_CASE("sensitivity at specificity: examples and oracle equivalence") {
  CHECK(metrics::sensitivity_at_specificity({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) ==
        doctest::Approx(1.0));
  CHECK(metrics::sensitivity_at_specificity({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) ==
        doctest::Approx(0.0));
  Rng rng(29);
  // 20 positives near 1, 20 negatives near 0
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    s.push_back(rng.normal(1.0, 0.1));
    y.push_back(1);
    s.push_back(rng.normal(0.0, 0.1));
    y.push_back(0);
  }
  CHECK(metrics::sensitivity_at_specificity(s, y, 0.95) ==
        doctest::Approx(oracle::sens_at_spec(s, y, 0.95)).epsilon(1e-12));
  // random small instances
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 2 + rng.below(40);
    std::vector<double> ss(n);
    std::vector<int> yy(n);
    bool pos = false, neg = false;
    for (size_t i = 0; i < n; ++i) {
      ss[i] = std::round(rng.uniform() * 6) / 6.0;
      yy[i] = int(rng.below(2));
      (yy[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    for (double spec : {0.5, 0.8, 0.95, 1.0})
      CHECK(metrics::sensitivity_at_specificity(ss, yy, spec) ==
            doctest::Approx(oracle::sens_at_spec(ss, yy, spec)).epsilon(1e-12));
  }
}

TEST_CASE("sensitivity at specificity is monotone non-increasing in spec") {
  Rng rng(31);
  std::vector<double> s(40);
  std::vector<int> y(40);
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = int(rng.below(2));
  }
  y[0] = 1;
  y[1] = 0;
  double prev = 2;
  for (double spec : {0.0, 0.25, 0.5, 0.75, 0.9, 0.95, 1.0}) {
    double v = metrics::sensitivity_at_specificity(s, y, spec);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("confusion and accuracy") {
  auto cm = metrics::confusion({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
  CHECK(cm.tp == 2);
  CHECK(cm.tn == 2);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);
  CHECK(cm.accuracy() == doctest::Approx(1.0));
  // flipped labels complement accuracy (binary, no ties)
  auto cm2 = metrics::confusion({0.9, 0.8, 0.1, 0.2}, {0, 0, 1, 1});
  CHECK(cm2.accuracy() == doctest::Approx(0.0));
  // the paper's test-set counts: 349/391 glaucoma and 698/720 healthy correct
  metrics::ConfusionMatrix paper;
  paper.tp = 349;
  paper.fn = 391 - 349;
  paper.tn = 698;
  paper.fp = 720 - 698;
  CHECK(paper.sensitivity() == doctest::Approx(0.89).epsilon(0.005));
  CHECK(paper.specificity() == doctest::Approx(0.97).epsilon(0.005));
}

TEST_CASE("make_folds: disjoint, exhaustive, balanced") {
  std::vector<metrics::SampleInfo> samples;
  for (int study = 0; study < 4; ++study)
    for (int cls = 0; cls < 2; ++cls)
      for (int i = 0; i < 25; ++i)
        samples.push_back({int(samples.size()), study, cls});
  auto plan = metrics::make_folds(samples, 5, 99);
  CHECK(plan.fold_of_subject.size() == samples.size());
  std::vector<int> fold_sizes(5, 0);
  for (auto& [subj, fold] : plan.fold_of_subject) {
    CHECK(fold >= 0);
    CHECK(fold < 5);
    fold_sizes[size_t(fold)]++;
  }
  for (int f = 0; f < 5; ++f) CHECK(fold_sizes[size_t(f)] == 40);
  // per-cell balance within +/-1
  for (int study = 0; study < 4; ++study)
    for (int cls = 0; cls < 2; ++cls) {
      int lo = 1 << 30, hi = 0;
      for (int f = 0; f < 5; ++f) {
        auto it = plan.tallies[size_t(f)].find({study, cls});
        int n = it == plan.tallies[size_t(f)].end() ? 0 : it->second;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      CHECK(hi - lo <= 1);
    }
  // determinism
  auto plan2 = metrics::make_folds(samples, 5, 99);
  CHECK(plan2.fold_of_subject == plan.fold_of_subject);
  // 10 subjects, k=5 -> five disjoint folds of 2
  std::vector<metrics::SampleInfo> ten;
  for (int i = 0; i < 10; ++i) ten.push_back({i, 0, i % 2});
  auto plan10 = metrics::make_folds(ten, 5, 1);
  std::vector<int> sz(5, 0);
  for (auto& [s, f] : plan10.fold_of_subject) sz[size_t(f)]++;
  for (int f = 0; f < 5; ++f) CHECK(sz[size_t(f)] == 2);
}

TEST_CASE("balanced_split: ratios, class/study balance, leakage-free") {
  std::vector<metrics::SampleInfo> samples;
  for (int study = 0; study < 4; ++study)
    for (int cls = 0; cls < 2; ++cls)
      for (int i = 0; i < 25; ++i)
        samples.push_back({int(samples.size()), study, cls});
  auto split = metrics::balanced_split(samples, {0.70, 0.15, 0.15}, 7);
  REQUIRE(split.size() == samples.size());
  // per-split per-study class counts within +/-1 of each other
  for (int s = 0; s < 3; ++s)
    for (int study = 0; study < 4; ++study) {
      int c0 = 0, c1 = 0;
      for (size_t i = 0; i < samples.size(); ++i)
        if (split[i] == s && samples[i].study_id == study)
          (samples[i].class_label ? c1 : c0)++;
      CHECK(std::abs(c0 - c1) <= 1);
    }
  int n_train = 0;
  for (int s : split) n_train += (s == 0);
  CHECK(std::abs(n_train - 140) <= 1);
  // class missing from a study -> diagnostic
  std::vector<metrics::SampleInfo> bad;
  for (int i = 0; i < 10; ++i) bad.push_back({i, 0, 0});
  CHECK_THROWS_WITH_AS(metrics::balanced_split(bad, {0.7, 0.15, 0.15}, 1),
                       doctest::Contains("missing class"), std::invalid_argument);
}

TEST_CASE("mean_sd uses the population divisor") {
  auto [m, sd] = metrics::mean_sd({1, 2, 3, 4});
  CHECK(m == doctest::Approx(2.5));
  CHECK(sd == doctest::Approx(std::sqrt(1.25)));
}
