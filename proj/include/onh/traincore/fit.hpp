#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "onh/traincore/checkpoint.hpp"
#include "onh/traincore/loss.hpp"
#include "onh/traincore/optimizer.hpp"

namespace onh::traincore {

struct Batch {
  Tensor input;
  std::map<std::string, Tensor> targets;  // head name -> one-hot target
};

/// Dataset adapter used by fit(). Implementations apply augmentation inside
/// fill() when `training` is set, drawing randomness only from `aug_rng` so
/// runs stay reproducible.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual size_t size() const = 0;
  virtual void fill(const std::vector<size_t>& indices, bool training, Rng& aug_rng,
                    Batch& out) const = 0;
};

struct HeadSpec {
  std::string head;
  LossKind kind;
};

struct EpochPoint {
  double train_loss = 0;
  double val_loss = 0;
};

struct FitResult {
  Checkpoint best;
  std::vector<EpochPoint> curve;
};

namespace detail {

inline double eval_loss(Network& net, const std::vector<HeadSpec>& heads, const BatchSource& data,
                        int batch_size) {
  double total = 0;
  size_t count = 0;
  Rng no_aug(0);
  Activations acts;
  std::vector<size_t> idx;
  for (size_t start = 0; start < data.size(); start += size_t(batch_size)) {
    idx.clear();
    for (size_t i = start; i < std::min(data.size(), start + size_t(batch_size)); ++i)
      idx.push_back(i);
    Batch b;
    data.fill(idx, false, no_aug, b);
    net.forward(b.input, acts, false, nullptr);
    double batch_loss = 0;
    for (auto& h : heads)
      batch_loss += head_loss(net, acts, net.head(h.head), h.kind, b.targets.at(h.head)).value;
    total += batch_loss * double(idx.size());
    count += idx.size();
  }
  return total / double(count);
}

}  // namespace detail

/// Full training loop: per-epoch shuffled minibatches, SGD with Nesterov
/// momentum, validation after every epoch, returns the checkpoint of the
/// epoch with the lowest validation loss (earliest epoch wins ties) plus the
/// per-epoch train/validation curve.
inline FitResult fit(Network& net, const std::vector<HeadSpec>& heads, const BatchSource& train,
                     const BatchSource& val, const TrainConfig& cfg,
                     std::ostream* log = nullptr) {
  cfg.validate();
  if (train.size() == 0 || val.size() == 0)
    throw std::invalid_argument("fit: empty train or validation set");

  Rng shuffle_rng = Rng::stream(cfg.rng_seed, 1);
  Rng aug_rng = Rng::stream(cfg.rng_seed, 2);
  Rng dropout_rng = Rng::stream(cfg.rng_seed, 3);

  Sgd opt;
  auto params = net.params();
  FitResult result;
  double best_val = 0;
  bool have_best = false;

  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  Activations acts;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double train_loss = 0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
      std::vector<size_t> idx(order.begin() + long(start),
                              order.begin() + long(std::min(order.size(), start + size_t(cfg.batch_size))));
      Batch b;
      train.fill(idx, true, aug_rng, b);
      net.forward(b.input, acts, true, &dropout_rng);
      net.zero_grads();
      std::map<int, Tensor> inject;
      double batch_loss = 0;
      for (auto& h : heads) {
        auto lo = head_loss(net, acts, net.head(h.head), h.kind, b.targets.at(h.head));
        batch_loss += lo.value;
        auto it = inject.find(lo.inject_node);
        if (it == inject.end()) {
          inject.emplace(lo.inject_node, std::move(lo.grad));
        } else {
          for (size_t i = 0; i < it->second.numel(); ++i) it->second.data[i] += lo.grad.data[i];
        }
      }
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("training fault: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(start / size_t(cfg.batch_size)));
      net.backward(acts, inject);
      opt.step(params, cfg);
      train_loss += batch_loss * double(idx.size());
      seen += idx.size();
    }
    EpochPoint pt;
    pt.train_loss = train_loss / double(seen);
    pt.val_loss = detail::eval_loss(net, heads, val, cfg.batch_size);
    result.curve.push_back(pt);
    if (!std::isfinite(pt.val_loss))
      throw std::runtime_error("training fault: non-finite validation loss at epoch " +
                               std::to_string(epoch));
    if (!have_best || pt.val_loss < best_val) {
      best_val = pt.val_loss;
      have_best = true;
      result.best = Checkpoint::capture(net, epoch, float(pt.val_loss));
    }
    if (log)
      (*log) << "epoch " << epoch << " train " << pt.train_loss << " val " << pt.val_loss
             << "\n";
  }
  return result;
}

}  // namespace onh::traincore
