#pragma once

#include <stdexcept>
#include <vector>

#include "onh/image.hpp"

namespace onh::metrics {

struct DiceResult {
  std::vector<double> per_class;   // -1 marks classes absent from both maps
  double mean = 0;
};

/// Per-class Dice 2|P∩M| / (|P|+|M|). Classes absent from both maps are
/// excluded from the mean rather than scored.
inline DiceResult dice(const LabelMap& pred, const LabelMap& truth) {
  if (pred.height != truth.height || pred.width != truth.width)
    throw std::invalid_argument("dice: dimension mismatch");
  const int C = std::max(pred.classes, truth.classes);
  std::vector<long> inter(size_t(C), 0), pc(size_t(C), 0), tc(size_t(C), 0);
  for (size_t i = 0; i < pred.data.size(); ++i) {
    ++pc[pred.data[i]];
    ++tc[truth.data[i]];
    if (pred.data[i] == truth.data[i]) ++inter[pred.data[i]];
  }
  DiceResult r;
  r.per_class.assign(size_t(C), -1.0);
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < C; ++c) {
    const long denom = pc[size_t(c)] + tc[size_t(c)];
    if (denom == 0) continue;
    r.per_class[size_t(c)] = 2.0 * double(inter[size_t(c)]) / double(denom);
    sum += r.per_class[size_t(c)];
    ++counted;
  }
  r.mean = counted ? sum / counted : 0.0;
  return r;
}

}  // namespace onh::metrics
