#pragma once

#include <cmath>

#include "onh/image.hpp"
#include "onh/traincore/loss.hpp"

namespace onh::autoencoder {

/// Reconstruction loss, classification loss and their exact sum.
struct LossBreakdown {
  double l_r = 0;
  double l_c = 0;
  double total = 0;
};

/// 1 - mean per-class soft Jaccard between predicted per-pixel class
/// probabilities (1 x H x W x C or H x W x C) and a label map. Always in
/// [0,1]; zero exactly on a perfect one-hot reconstruction.
inline double reconstruction_loss(const Tensor& pred_probs, const LabelMap& target) {
  const int rank = pred_probs.rank();
  if (rank != 3 && rank != 4)
    throw std::invalid_argument("reconstruction_loss: expected HWC or NHWC probabilities");
  const int H = pred_probs.dim(rank - 3), W = pred_probs.dim(rank - 2),
            C = pred_probs.dim(rank - 1);
  if (rank == 4 && pred_probs.dim(0) != 1)
    throw std::invalid_argument("reconstruction_loss: one sample at a time");
  if (H != target.height || W != target.width || C != target.classes)
    throw std::invalid_argument("reconstruction_loss: prediction/target shape mismatch");
  Tensor onehot = one_hot(target);
  return traincore::soft_jaccard_loss(pred_probs.ptr(), onehot.ptr(), size_t(H) * W, C);
}

/// Categorical crossentropy -log p(label) with the probability clamped at
/// 1e-12.
inline double classification_loss(const std::array<float, 2>& class_probs, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("classification_loss: bad label");
  return -std::log(std::max(double(class_probs[size_t(label)]), 1e-12));
}

inline LossBreakdown total_loss(const Tensor& pred_probs, const LabelMap& target,
                                const std::array<float, 2>& class_probs, int label) {
  LossBreakdown b;
  b.l_r = reconstruction_loss(pred_probs, target);
  b.l_c = classification_loss(class_probs, label);
  b.total = b.l_r + b.l_c;
  return b;
}

}  // namespace onh::autoencoder
