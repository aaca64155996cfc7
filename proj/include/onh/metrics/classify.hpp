#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace onh::metrics {

struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const { return total() ? double(tp + tn) / double(total()) : 0.0; }
  double sensitivity() const { return (tp + fn) ? double(tp) / double(tp + fn) : 0.0; }
  double specificity() const { return (tn + fp) ? double(tn) / double(tn + fp) : 0.0; }
};

inline void require_both_classes(const std::vector<int>& labels) {
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  if (!pos || !neg)
    throw std::invalid_argument("metric undefined: both classes must be present");
}

/// Area under the ROC curve in the Mann-Whitney formulation: the fraction of
/// (positive, negative) pairs ranked concordantly, ties counted 1/2.
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  require_both_classes(labels);
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // average ranks over tie groups
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * (double(i + 1) + double(j + 1));
    for (size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double rank_sum = 0;
  long npos = 0;
  for (size_t t = 0; t < n; ++t)
    if (labels[t]) {
      rank_sum += rank[t];
      ++npos;
    }
  const long nneg = long(n) - npos;
  return (rank_sum - double(npos) * double(npos + 1) / 2.0) / (double(npos) * double(nneg));
}

/// Maximal sensitivity over decision thresholds whose specificity is >= spec.
/// Thresholds sweep the unique score values (rule: positive iff score >= t),
/// plus the above-all threshold that predicts nothing positive.
inline double sensitivity_at_specificity(const std::vector<double>& scores,
                                         const std::vector<int>& labels, double spec = 0.95) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("sensitivity_at_specificity: size mismatch");
  require_both_classes(labels);
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  long npos = 0, nneg = 0;
  for (int l : labels) (l ? npos : nneg)++;
  double best = 0.0;  // the above-all threshold: sens 0, spec 1
  for (double t : thresholds) {
    long tp = 0, fp = 0;
    for (size_t k = 0; k < scores.size(); ++k)
      if (scores[k] >= t) (labels[k] ? tp : fp)++;
    const double specificity = double(nneg - fp) / double(nneg);
    if (specificity >= spec) best = std::max(best, double(tp) / double(npos));
  }
  return best;
}

/// Binary confusion counts from class-1 probabilities; the default decision
/// rule is the argmax (threshold 0.5 on p1).
inline ConfusionMatrix confusion(const std::vector<double>& prob_class1,
                                 const std::vector<int>& labels, double threshold = 0.5) {
  if (prob_class1.size() != labels.size()) throw std::invalid_argument("confusion: size mismatch");
  ConfusionMatrix cm;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool pred = prob_class1[i] >= threshold;
    if (pred && labels[i])
      ++cm.tp;
    else if (pred && !labels[i])
      ++cm.fp;
    else if (!pred && labels[i])
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

inline double accuracy(const std::vector<double>& prob_class1, const std::vector<int>& labels) {
  return confusion(prob_class1, labels).accuracy();
}

/// Mean and population standard deviation (n divisor).
inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0;
  for (double x : v) m += x;
  m /= double(v.size());
  double var = 0;
  for (double x : v) var += (x - m) * (x - m);
  return {m, std::sqrt(var / double(v.size()))};
}

}  // namespace onh::metrics
