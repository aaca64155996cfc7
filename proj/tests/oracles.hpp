#pragma once

// Brute-force metric oracles shared by the unit tests and the acceptance
// suite. Each recomputes a metric from its definition, independent of the
// library implementations.

#include <algorithm>
#include <vector>

#include "onh/image.hpp"

namespace oracles {

// AUC by exhaustive pair counting, ties 1/2.
inline double auc(const std::vector<double>& s, const std::vector<int>& y) {
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
inline double sens_at_spec(const std::vector<double>& s, const std::vector<int>& y, double spec) {
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

// accuracy at the 0.5 threshold, counted directly
inline double accuracy(const std::vector<double>& p1, const std::vector<int>& y) {
  long ok = 0;
  for (size_t i = 0; i < p1.size(); ++i) ok += ((p1[i] >= 0.5 ? 1 : 0) == y[i]);
  return double(ok) / double(p1.size());
}

// mean dice by direct per-class set counting
inline double dice_mean(const onh::LabelMap& a, const onh::LabelMap& b) {
  double sum = 0;
  int counted = 0;
  const int C = std::max(a.classes, b.classes);
  for (int c = 0; c < C; ++c) {
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
  return counted ? sum / counted : 0.0;
}

}  // namespace oracles
