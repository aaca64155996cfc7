#pragma once

#include <cmath>
#include <string>

#include "onh/traincore/network.hpp"

namespace onh::traincore {

enum class LossKind {
  kCrossEntropy,       // categorical crossentropy on a flat softmax head
  kPixelCrossEntropy,  // per-pixel categorical crossentropy on a HWC softmax head
  kSoftJaccard,        // 1 - mean per-class soft Jaccard on a HWC softmax head
};

/// Loss value plus the gradient to inject into the graph and the node to
/// inject it at. Crossentropy losses inject (p - y) directly at the softmax
/// input, which is the analytically reduced form of backpropagating -y/p
/// through the softmax and avoids blowups at tiny probabilities.
template <class S>
struct LossOut {
  double value = 0;
  int inject_node = -1;
  TensorT<S> grad;
};

template <class S>
double crossentropy_value(const TensorT<S>& probs, const TensorT<S>& target) {
  double sum = 0;
  for (size_t i = 0; i < probs.numel(); ++i)
    if (target.data[i] != S(0))
      sum -= double(target.data[i]) * std::log(std::max(double(probs.data[i]), 1e-12));
  return sum;
}

/// Soft Jaccard of one sample: per class, I = sum p*m and
/// U = sum (p + m - p*m); classes empty in both prediction and target score 1.
/// Returns 1 - mean_c J_c; accumulates d(loss)/dp into grad when non-null.
template <class S>
double soft_jaccard_loss(const S* probs, const S* target, size_t pixels, int classes,
                         S* grad = nullptr, double grad_scale = 1.0) {
  double mean_j = 0;
  for (int c = 0; c < classes; ++c) {
    double inter = 0, uni = 0;
    for (size_t i = 0; i < pixels; ++i) {
      const double p = probs[i * classes + c], m = target[i * classes + c];
      inter += p * m;
      uni += p + m - p * m;
    }
    if (uni <= 0) {
      mean_j += 1.0;
      continue;
    }
    mean_j += inter / uni;
    if (grad) {
      const double coeff = -grad_scale / classes;
      for (size_t i = 0; i < pixels; ++i) {
        const double m = target[i * classes + c];
        grad[i * classes + c] += S(coeff * (m * uni - inter * (1.0 - m)) / (uni * uni));
      }
    }
  }
  return 1.0 - mean_j / classes;
}

/// Computes one head's loss over a batch and the gradient to inject.
/// `target` is one-hot, shaped like the head output.
template <class S>
LossOut<S> head_loss(const NetworkT<S>& net, const ActivationsT<S>& acts, int head_node,
                     LossKind kind, const TensorT<S>& target) {
  const TensorT<S>& probs = acts.values[size_t(head_node)];
  if (probs.shape != target.shape)
    throw std::invalid_argument("loss: target shape " + shape_str(target.shape) +
                                " does not match head output " + shape_str(probs.shape));
  const int N = probs.dim(0);
  LossOut<S> out;
  switch (kind) {
    case LossKind::kCrossEntropy: {
      out.value = crossentropy_value(probs, target) / N;
      out.inject_node = net.node_inputs(head_node).at(0);
      out.grad = TensorT<S>(probs.shape);
      for (size_t i = 0; i < probs.numel(); ++i)
        out.grad.data[i] = (probs.data[i] - target.data[i]) / S(N);
      break;
    }
    case LossKind::kPixelCrossEntropy: {
      const size_t pixels = probs.numel() / size_t(probs.shape.back()) / size_t(N);
      out.value = crossentropy_value(probs, target) / (double(N) * double(pixels));
      out.inject_node = net.node_inputs(head_node).at(0);
      out.grad = TensorT<S>(probs.shape);
      const S scale = S(1.0 / (double(N) * double(pixels)));
      for (size_t i = 0; i < probs.numel(); ++i)
        out.grad.data[i] = (probs.data[i] - target.data[i]) * scale;
      break;
    }
    case LossKind::kSoftJaccard: {
      const int C = probs.shape.back();
      const size_t pixels = probs.numel() / size_t(C) / size_t(N);
      out.inject_node = head_node;
      out.grad = TensorT<S>(probs.shape);
      double total = 0;
      for (int n = 0; n < N; ++n) {
        total += soft_jaccard_loss(probs.ptr() + size_t(n) * pixels * C,
                                   target.ptr() + size_t(n) * pixels * C, pixels, C,
                                   out.grad.ptr() + size_t(n) * pixels * C, 1.0 / N);
      }
      out.value = total / N;
      break;
    }
  }
  return out;
}

}  // namespace onh::traincore
