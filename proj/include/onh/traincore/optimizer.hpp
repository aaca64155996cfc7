#pragma once

#include <stdexcept>
#include <vector>

#include "onh/traincore/network.hpp"

namespace onh::traincore {

struct TrainConfig {
  float learning_rate = 0.001f;
  float momentum = 0.9f;
  bool nesterov = true;
  int batch_size = 8;
  int epochs = 1;
  uint64_t rng_seed = 0;
  std::string validation_metric = "loss";  // checkpoint selection criterion

  void validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("momentum must be in [0,1)");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (validation_metric != "loss")
      throw std::invalid_argument("validation_metric: only 'loss' is supported");
  }
};

/// SGD with (optional) Nesterov momentum. The stored parameters are the
/// look-ahead variables, so with nesterov set the update is
///   v <- mu*v - lr*g ;  w <- w + mu*v - lr*g
/// and with plain momentum
///   v <- mu*v - lr*g ;  w <- w + v
template <class S>
class SgdT {
 public:
  void step(std::vector<NamedParam<S>>& params, const TrainConfig& cfg) {
    cfg.validate();
    if (velocity_.size() != params.size()) {
      velocity_.clear();
      for (auto& p : params) velocity_.emplace_back(p.param->value.shape);
    }
    const S lr = S(cfg.learning_rate), mu = S(cfg.momentum);
    for (size_t i = 0; i < params.size(); ++i) {
      S* w = params[i].param->value.ptr();
      const S* g = params[i].param->grad.ptr();
      S* v = velocity_[i].ptr();
      const size_t n = params[i].param->value.numel();
      if (cfg.nesterov) {
        for (size_t j = 0; j < n; ++j) {
          v[j] = mu * v[j] - lr * g[j];
          w[j] += mu * v[j] - lr * g[j];
        }
      } else {
        for (size_t j = 0; j < n; ++j) {
          v[j] = mu * v[j] - lr * g[j];
          w[j] += v[j];
        }
      }
    }
  }

  std::vector<TensorT<S>>& velocity() { return velocity_; }

 private:
  std::vector<TensorT<S>> velocity_;
};

using Sgd = SgdT<float>;

}  // namespace onh::traincore
