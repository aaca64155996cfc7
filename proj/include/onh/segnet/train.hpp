#pragma once

#include <set>

#include "onh/metrics/classify.hpp"
#include "onh/metrics/dice.hpp"
#include "onh/metrics/folds.hpp"
#include "onh/segnet/augment.hpp"
#include "onh/segnet/unet.hpp"
#include "onh/synthgen/dataset.hpp"
#include "onh/traincore/fit.hpp"

namespace onh::segnet {

struct SegTrainOptions {
  traincore::TrainConfig train;
  SegAugmentConfig augment;
  bool use_augmentation = true;
  std::vector<double> ratios{0.70, 0.15, 0.15};
};

struct SegReport {
  traincore::Checkpoint checkpoint;
  std::vector<traincore::EpochPoint> curve;
  std::vector<int> split;                   // 0 train / 1 val / 2 test per record
  std::vector<double> test_dice_per_image;  // mean dice of each test image
  std::vector<double> dice_per_class;       // averaged over test images
  double mean_dice = 0;
  double sd_dice = 0;
};

namespace detail {

class SegSource : public traincore::BatchSource {
 public:
  SegSource(const std::vector<IntensityImage>* imgs, const std::vector<LabelMap>* maps,
            std::vector<size_t> subset, const SegAugmentConfig* aug)
      : imgs_(imgs), maps_(maps), subset_(std::move(subset)), aug_(aug) {}

  size_t size() const override { return subset_.size(); }

  void fill(const std::vector<size_t>& idx, bool training, Rng& aug_rng,
            traincore::Batch& out) const override {
    const IntensityImage& first = (*imgs_)[subset_.at(0)];
    const int H = first.height, W = first.width;
    out.input = Tensor({int(idx.size()), H, W, 1});
    Tensor target({int(idx.size()), H, W, kNumClasses});
    for (size_t k = 0; k < idx.size(); ++k) {
      const size_t g = subset_[idx[k]];
      const IntensityImage* img = &(*imgs_)[g];
      const LabelMap* map = &(*maps_)[g];
      IntensityImage aug_img;
      LabelMap aug_map;
      if (training && aug_) {
        std::tie(aug_img, aug_map) = augment_pair(*img, *map, *aug_, aug_rng.next_u64());
        img = &aug_img;
        map = &aug_map;
      }
      float* dst = out.input.ptr() + size_t(k) * img->data.size();
      for (size_t i = 0; i < img->data.size(); ++i) dst[i] = img->data[i] * 2.f - 1.f;
      one_hot_into(*map, target, int(k));
    }
    out.targets["seg"] = std::move(target);
  }

 private:
  const std::vector<IntensityImage>* imgs_;
  const std::vector<LabelMap>* maps_;
  std::vector<size_t> subset_;
  const SegAugmentConfig* aug_;
};

inline void require_no_leakage(const std::vector<metrics::SampleInfo>& infos,
                               const std::vector<int>& split) {
  std::map<int, int> seen;
  for (size_t i = 0; i < infos.size(); ++i) {
    auto [it, fresh] = seen.emplace(infos[i].subject_id, split[i]);
    if (!fresh && it->second != split[i])
      throw std::invalid_argument("split leakage: subject " +
                                  std::to_string(infos[i].subject_id) + " crosses splits");
  }
}

}  // namespace detail

/// Trains the U-Net on a generated dataset (intensity renders in, label maps
/// out) with a subject-level balanced 70/15/15 split, per-pixel crossentropy
/// and the augmentation pipeline, then reports test Dice per class and per
/// image from the best-validation checkpoint.
inline SegReport train_seg(const synthgen::DatasetManifest& manifest,
                           const SegTrainOptions& options, std::ostream* log = nullptr) {
  if (manifest.records.empty()) throw std::invalid_argument("train_seg: empty dataset");
  std::vector<IntensityImage> imgs;
  std::vector<LabelMap> maps;
  imgs.reserve(manifest.records.size());
  for (const auto& r : manifest.records) {
    imgs.push_back(load_record_intensity(manifest, r));
    maps.push_back(load_record_map(manifest, r));
  }
  auto infos = manifest.sample_infos();
  SegReport report;
  report.split =
      metrics::balanced_split(infos, options.ratios, Rng::stream(options.train.rng_seed, 11).next_u64());
  detail::require_no_leakage(infos, report.split);

  std::vector<size_t> tr, va, te;
  for (size_t i = 0; i < report.split.size(); ++i)
    (report.split[i] == 0 ? tr : report.split[i] == 1 ? va : te).push_back(i);

  detail::SegSource train_src(&imgs, &maps, tr,
                              options.use_augmentation ? &options.augment : nullptr);
  detail::SegSource val_src(&imgs, &maps, va, nullptr);

  Network net = build_unet(imgs[0].height, imgs[0].width, kNumClasses,
                           Rng::stream(options.train.rng_seed, 12).next_u64());
  auto fitres = traincore::fit(net, {{"seg", traincore::LossKind::kPixelCrossEntropy}},
                               train_src, val_src, options.train, log);
  report.checkpoint = fitres.best;
  report.curve = fitres.curve;
  fitres.best.apply_to(net);

  std::vector<double> class_sum(kNumClasses, 0);
  std::vector<int> class_n(kNumClasses, 0);
  for (size_t i : te) {
    LabelMap pred = segment(net, imgs[i]);
    auto d = metrics::dice(pred, maps[i]);
    report.test_dice_per_image.push_back(d.mean);
    for (int c = 0; c < kNumClasses; ++c)
      if (d.per_class[size_t(c)] >= 0) {
        class_sum[size_t(c)] += d.per_class[size_t(c)];
        class_n[size_t(c)]++;
      }
  }
  report.dice_per_class.assign(kNumClasses, -1);
  for (int c = 0; c < kNumClasses; ++c)
    if (class_n[size_t(c)]) report.dice_per_class[size_t(c)] = class_sum[size_t(c)] / class_n[size_t(c)];
  auto [m, sd] = metrics::mean_sd(report.test_dice_per_image);
  report.mean_dice = m;
  report.sd_dice = sd;
  return report;
}

}  // namespace onh::segnet
