#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "onh/rng.hpp"

namespace onh::metrics {

/// The split machinery only needs these three fields of a dataset record.
struct SampleInfo {
  int subject_id = 0;
  int study_id = 0;
  int class_label = 0;  // 0 non-glaucoma, 1 glaucoma
};

/// Subject-keyed fold assignment; no subject ever appears in two folds.
struct FoldPlan {
  int k = 0;
  std::map<int, int> fold_of_subject;
  // tallies[fold][{study, class}] sample counts, for balance audits
  std::vector<std::map<std::pair<int, int>, int>> tallies;

  int fold_of(int subject_id) const {
    auto it = fold_of_subject.find(subject_id);
    if (it == fold_of_subject.end())
      throw std::invalid_argument("subject " + std::to_string(subject_id) + " not in fold plan");
    return it->second;
  }
};

namespace detail {

// subjects grouped by (study, class) cell, deterministically shuffled
inline std::map<std::pair<int, int>, std::vector<int>> cells_of(
    const std::vector<SampleInfo>& samples, Rng& rng) {
  std::map<std::pair<int, int>, std::vector<int>> cells;
  std::map<int, std::pair<int, int>> seen;
  for (const auto& s : samples) {
    auto key = std::make_pair(s.study_id, s.class_label);
    auto it = seen.find(s.subject_id);
    if (it == seen.end()) {
      seen[s.subject_id] = key;
      cells[key].push_back(s.subject_id);
    } else if (it->second != key) {
      throw std::invalid_argument("subject " + std::to_string(s.subject_id) +
                                  " appears with inconsistent study/class");
    }
  }
  for (auto& [key, subjects] : cells) {
    std::sort(subjects.begin(), subjects.end());
    rng.shuffle(subjects);
  }
  return cells;
}

inline void require_all_cells(const std::map<std::pair<int, int>, std::vector<int>>& cells) {
  std::map<int, int> classes_in_study;
  for (auto& [key, v] : cells)
    if (!v.empty()) classes_in_study[key.first] |= (key.second ? 2 : 1);
  for (auto& [study, mask] : classes_in_study)
    if (mask != 3)
      throw std::invalid_argument("balance impossible: study " + std::to_string(study) +
                                  " is missing class " + std::to_string(mask == 1 ? 1 : 0));
}

}  // namespace detail

/// k-fold assignment at subject level, balanced per (study, class) cell
/// within +/-1 by round-robin dealing.
inline FoldPlan make_folds(const std::vector<SampleInfo>& samples, int k, uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
  Rng rng = Rng::stream(seed, 0x466f6c64);
  auto cells = detail::cells_of(samples, rng);
  detail::require_all_cells(cells);
  FoldPlan plan;
  plan.k = k;
  plan.tallies.assign(size_t(k), {});
  int cell_index = 0;
  for (auto& [key, subjects] : cells) {
    for (size_t i = 0; i < subjects.size(); ++i) {
      const int fold = int((i + size_t(cell_index)) % size_t(k));
      plan.fold_of_subject[subjects[i]] = fold;
    }
    ++cell_index;
  }
  for (const auto& s : samples)
    plan.tallies[size_t(plan.fold_of(s.subject_id))][{s.study_id, s.class_label}]++;
  return plan;
}

/// Subject-level train/val/test assignment with per-cell largest-remainder
/// apportionment; returns the split id (0/1/2) of each input sample.
inline std::vector<int> balanced_split(const std::vector<SampleInfo>& samples,
                                       const std::vector<double>& ratios, uint64_t seed) {
  if (ratios.empty()) throw std::invalid_argument("balanced_split: no ratios");
  double rsum = 0;
  for (double r : ratios) rsum += r;
  if (std::abs(rsum - 1.0) > 1e-9) throw std::invalid_argument("balanced_split: ratios must sum to 1");
  Rng rng = Rng::stream(seed, 0x53706c69);
  auto cells = detail::cells_of(samples, rng);
  detail::require_all_cells(cells);
  // Sequential apportionment on cumulative targets: each subject goes to the
  // split furthest below its quota, so rounding errors cancel across cells
  // instead of compounding.
  std::map<int, int> split_of_subject;
  std::vector<double> actual(ratios.size(), 0.0);
  size_t total = 0;
  for (auto& [key, subjects] : cells) {
    for (int subject : subjects) {
      ++total;
      size_t pick = 0;
      double best = -1e18;
      for (size_t s = 0; s < ratios.size(); ++s) {
        const double deficit = ratios[s] * double(total) - actual[s];
        if (deficit > best + 1e-12) {
          best = deficit;
          pick = s;
        }
      }
      actual[pick] += 1.0;
      split_of_subject[subject] = int(pick);
    }
  }
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(split_of_subject.at(s.subject_id));
  return out;
}

}  // namespace onh::metrics
