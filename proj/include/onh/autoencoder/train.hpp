#pragma once

#include <iostream>
#include <set>

#include "onh/autoencoder/loss.hpp"
#include "onh/autoencoder/model.hpp"
#include "onh/metrics/classify.hpp"
#include "onh/metrics/dice.hpp"
#include "onh/metrics/folds.hpp"
#include "onh/segnet/augment.hpp"
#include "onh/traincore/fit.hpp"

namespace onh::autoencoder {

struct AeTrainOptions {
  traincore::TrainConfig train;
  bool supervised = true;
  bool augment = true;
  double rotation_deg = 4.0;    // the autoencoder uses rotation/translation only
  double translation_px = 10.0;
  std::vector<double> ratios{0.70, 0.15, 0.15};
  bool strict_balance = false;  // escalate unbalanced input to an error
};

struct AeReport {
  traincore::Checkpoint checkpoint;
  std::vector<traincore::EpochPoint> curve;
  int latent_dim = 0;
  std::vector<int> split;
  std::vector<size_t> test_indices;
  std::vector<double> test_dice;  // per test image, argmax reconstruction vs input map
  double mean_dice = 0;
  double sd_dice = 0;
  // supervised only, on the test split
  std::vector<double> test_prob_glaucoma;
  std::vector<int> test_labels;
  double accuracy = 0;
  double auc = 0;
  double sens95 = 0;
};

namespace detail {

class AeSource : public traincore::BatchSource {
 public:
  AeSource(const std::vector<LabelMap>* maps, const std::vector<int>* labels,
           std::vector<size_t> subset, bool supervised, bool augment, double rot, double trans)
      : maps_(maps),
        labels_(labels),
        subset_(std::move(subset)),
        supervised_(supervised),
        augment_(augment),
        rot_(rot),
        trans_(trans) {}

  size_t size() const override { return subset_.size(); }

  void fill(const std::vector<size_t>& idx, bool training, Rng& aug_rng,
            traincore::Batch& out) const override {
    const LabelMap& first = (*maps_)[subset_.at(0)];
    const int H = first.height, W = first.width;
    out.input = Tensor({int(idx.size()), H, W, kNumClasses});
    Tensor cls({int(idx.size()), 2});
    for (size_t k = 0; k < idx.size(); ++k) {
      const size_t g = subset_[idx[k]];
      if (training && augment_) {
        segnet::GeoTransform t;
        t.angle_deg = aug_rng.uniform(-rot_, rot_);
        t.tx = aug_rng.uniform(-trans_, trans_);
        t.ty = aug_rng.uniform(-trans_, trans_);
        LabelMap m = segnet::transform_map((*maps_)[g], t);
        one_hot_into(m, out.input, int(k));
      } else {
        one_hot_into((*maps_)[g], out.input, int(k));
      }
      cls.at2(int(k), (*labels_)[g]) = 1.f;
    }
    // the autoencoder reconstructs its own (augmented) input
    out.targets["recon"] = out.input;
    if (supervised_) out.targets["cls"] = std::move(cls);
  }

 private:
  const std::vector<LabelMap>* maps_;
  const std::vector<int>* labels_;
  std::vector<size_t> subset_;
  bool supervised_, augment_;
  double rot_, trans_;
};

inline void require_balance(const std::vector<metrics::SampleInfo>& infos, bool strict) {
  std::map<std::pair<int, int>, int> counts;
  for (const auto& s : infos) counts[{s.study_id, s.class_label}]++;
  int lo = 1 << 30, hi = 0;
  for (auto& [key, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  if (hi - lo > 1) {
    if (strict)
      throw std::invalid_argument("train_ae: study/class counts unbalanced (" +
                                  std::to_string(lo) + ".." + std::to_string(hi) + ")");
    std::cerr << "train_ae: warning: study/class counts unbalanced (" << lo << ".." << hi
              << ")\n";
  }
}

}  // namespace detail

/// Reconstruction Dice and glaucoma probabilities of a model over given
/// records (no augmentation).
inline void evaluate_ae(const AeModel& model, const std::vector<LabelMap>& maps,
                        const std::vector<int>& labels, const std::vector<size_t>& indices,
                        std::vector<double>* dice_out, std::vector<double>* prob_out) {
  traincore::Activations acts;
  for (size_t i : indices) {
    model.net.forward(one_hot(maps[i]), acts);
    if (dice_out) {
      LabelMap recon = argmax_map(acts.values[size_t(model.net.head("recon"))]);
      dice_out->push_back(metrics::dice(recon, maps[i]).mean);
    }
    if (prob_out && model.net.has_head("cls"))
      prob_out->push_back(acts.values[size_t(model.net.head("cls"))].data[1]);
  }
  (void)labels;
}

/// Trains the autoencoder on one-hot label maps with joint L = L_R + L_C
/// (L_R alone when unsupervised), best-validation checkpointing, and
/// reports test reconstruction Dice plus classification metrics.
inline AeReport train_ae(const std::vector<LabelMap>& maps,
                         const std::vector<metrics::SampleInfo>& infos, int n,
                         const AeTrainOptions& options, std::ostream* log = nullptr) {
  if (maps.empty() || maps.size() != infos.size())
    throw std::invalid_argument("train_ae: empty or inconsistent dataset");
  detail::require_balance(infos, options.strict_balance);

  std::vector<int> labels;
  labels.reserve(infos.size());
  for (const auto& s : infos) labels.push_back(s.class_label);

  AeReport report;
  report.split = metrics::balanced_split(infos, options.ratios,
                                         Rng::stream(options.train.rng_seed, 21).next_u64());
  std::vector<size_t> tr, va, te;
  for (size_t i = 0; i < report.split.size(); ++i)
    (report.split[i] == 0 ? tr : report.split[i] == 1 ? va : te).push_back(i);

  detail::AeSource train_src(&maps, &labels, tr, options.supervised, options.augment,
                             options.rotation_deg, options.translation_px);
  detail::AeSource val_src(&maps, &labels, va, options.supervised, false, 0, 0);

  AeModel model = build_autoencoder(n, maps[0].height, maps[0].width, options.supervised,
                                    Rng::stream(options.train.rng_seed, 22).next_u64());
  std::vector<traincore::HeadSpec> heads{{"recon", traincore::LossKind::kSoftJaccard}};
  if (options.supervised) heads.push_back({"cls", traincore::LossKind::kCrossEntropy});

  auto fitres = traincore::fit(model.net, heads, train_src, val_src, options.train, log);
  report.checkpoint = fitres.best;
  report.curve = fitres.curve;
  report.latent_dim = model.latent_dim;
  fitres.best.apply_to(model.net);

  report.test_indices = te;
  evaluate_ae(model, maps, labels, te, &report.test_dice,
              options.supervised ? &report.test_prob_glaucoma : nullptr);
  auto [m, sd] = metrics::mean_sd(report.test_dice);
  report.mean_dice = m;
  report.sd_dice = sd;
  if (options.supervised) {
    for (size_t i : te) report.test_labels.push_back(labels[i]);
    report.accuracy = metrics::accuracy(report.test_prob_glaucoma, report.test_labels);
    report.auc = metrics::roc_auc(report.test_prob_glaucoma, report.test_labels);
    report.sens95 =
        metrics::sensitivity_at_specificity(report.test_prob_glaucoma, report.test_labels, 0.95);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Latent-dimension sweep with 5-fold cross-validation.
// ---------------------------------------------------------------------------

struct SweepRow {
  int dim = 0;
  int fold = 0;
  double dice = 0, acc = 0, auc = 0, sens95 = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  struct Summary {
    double dice_mean = 0, dice_sd = 0;
    double acc_mean = 0, acc_sd = 0;
    double auc_mean = 0, auc_sd = 0;
    double sens_mean = 0, sens_sd = 0;
  };

  Summary summarize(int dim) const {
    std::vector<double> d, a, u, s;
    for (const auto& r : rows)
      if (r.dim == dim) {
        d.push_back(r.dice);
        a.push_back(r.acc);
        u.push_back(r.auc);
        s.push_back(r.sens95);
      }
    Summary out;
    std::tie(out.dice_mean, out.dice_sd) = metrics::mean_sd(d);
    std::tie(out.acc_mean, out.acc_sd) = metrics::mean_sd(a);
    std::tie(out.auc_mean, out.auc_sd) = metrics::mean_sd(u);
    std::tie(out.sens_mean, out.sens_sd) = metrics::mean_sd(s);
    return out;
  }
};

/// Trains one supervised autoencoder per (latent dim, fold) cell over a
/// shared 5-fold subject-level plan; data, folds and seeds are identical
/// across dims so rows are comparable. Within each cell the non-test folds
/// are split 85/15 into train/validation.
inline SweepTable latent_sweep(const std::vector<LabelMap>& maps,
                               const std::vector<metrics::SampleInfo>& infos,
                               const std::vector<int>& dims, const AeTrainOptions& options,
                               int k_folds = 5, std::ostream* log = nullptr) {
  for (int d : dims)
    if (d % 9 != 0 || d < 9 || d > 72)
      throw std::invalid_argument("latent_sweep: dims must be multiples of 9 in [9,72]");
  std::vector<int> labels;
  for (const auto& s : infos) labels.push_back(s.class_label);

  auto plan = metrics::make_folds(infos, k_folds,
                                  Rng::stream(options.train.rng_seed, 31).next_u64());
  SweepTable table;
  for (int dim : dims) {
    for (int fold = 0; fold < k_folds; ++fold) {
      std::vector<size_t> pool, te;
      std::vector<metrics::SampleInfo> pool_infos;
      for (size_t i = 0; i < infos.size(); ++i) {
        if (plan.fold_of(infos[i].subject_id) == fold) {
          te.push_back(i);
        } else {
          pool.push_back(i);
          pool_infos.push_back(infos[i]);
        }
      }
      // seeds shared across dims: they depend on the fold only
      const uint64_t cell_seed = Rng::stream(options.train.rng_seed, 100 + uint64_t(fold)).next_u64();
      auto inner = metrics::balanced_split(pool_infos, {0.85, 0.15}, cell_seed);
      std::vector<size_t> tr, va;
      for (size_t j = 0; j < pool.size(); ++j) (inner[j] == 0 ? tr : va).push_back(pool[j]);

      detail::AeSource train_src(&maps, &labels, tr, options.supervised, options.augment,
                                 options.rotation_deg, options.translation_px);
      detail::AeSource val_src(&maps, &labels, va, options.supervised, false, 0, 0);
      AeModel model =
          build_autoencoder(dim / 9, maps[0].height, maps[0].width, options.supervised, cell_seed);
      std::vector<traincore::HeadSpec> heads{{"recon", traincore::LossKind::kSoftJaccard}};
      if (options.supervised) heads.push_back({"cls", traincore::LossKind::kCrossEntropy});
      traincore::TrainConfig cfg = options.train;
      cfg.rng_seed = cell_seed;
      auto fitres = traincore::fit(model.net, heads, train_src, val_src, cfg, nullptr);
      fitres.best.apply_to(model.net);

      SweepRow row;
      row.dim = dim;
      row.fold = fold;
      std::vector<double> dice, probs;
      evaluate_ae(model, maps, labels, te, &dice, options.supervised ? &probs : nullptr);
      row.dice = metrics::mean_sd(dice).first;
      if (options.supervised) {
        std::vector<int> te_labels;
        for (size_t i : te) te_labels.push_back(labels[i]);
        row.acc = metrics::accuracy(probs, te_labels);
        row.auc = metrics::roc_auc(probs, te_labels);
        row.sens95 = metrics::sensitivity_at_specificity(probs, te_labels, 0.95);
      }
      table.rows.push_back(row);
      if (log)
        (*log) << "sweep dim " << dim << " fold " << fold << ": dice " << row.dice << " acc "
               << row.acc << "\n";
    }
  }
  return table;
}

}  // namespace onh::autoencoder
