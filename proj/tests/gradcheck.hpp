#pragma once

// Finite-difference gradient verification used by both the unit tests and
// the acceptance suite. Runs the layer templates in double precision so the
// h = 1e-3 central difference is limited by truncation, not rounding.

#include <cmath>
#include <map>
#include <string>

#include "onh/traincore/fit.hpp"

namespace gradcheck {

using onh::Shape;
using onh::TensorT;
using DNet = onh::traincore::NetworkT<double>;
using DActs = onh::traincore::ActivationsT<double>;

inline constexpr double kStep = 1e-3;
inline constexpr uint64_t kDropoutSeed = 77;

// linear probe loss sum_i r_i * out_i summed over all heads
inline double probe_loss(const DNet& net, const TensorT<double>& input,
                         const std::map<int, TensorT<double>>& probes) {
  DActs acts;
  onh::Rng drop(kDropoutSeed);
  net.forward(input, acts, true, &drop);
  double loss = 0;
  for (auto& [node, r] : probes) {
    const auto& out = acts.values[size_t(node)];
    for (size_t i = 0; i < out.numel(); ++i) loss += r.data[i] * out.data[i];
  }
  return loss;
}

struct Result {
  double max_rel = 0;
  size_t checked = 0;
};

inline double rel_err(double analytic, double fd) {
  const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  return std::abs(analytic - fd) / denom;
}

/// d(probe loss)/d(param) and d(probe loss)/d(input) for every scalar versus
/// central finite differences, for one input.
inline std::vector<double> check_params_one(DNet& net, TensorT<double> input) {
  onh::Rng rng(123);
  std::map<int, TensorT<double>> probes;
  {
    DActs acts;
    onh::Rng drop(kDropoutSeed);
    net.forward(input, acts, true, &drop);
    for (auto& [name, node] : net.heads()) {
      TensorT<double> r(acts.values[size_t(node)].shape);
      for (auto& v : r.data) v = rng.uniform(-1.0, 1.0);
      probes[node] = r;
    }
  }
  // analytic
  DActs acts;
  onh::Rng drop(kDropoutSeed);
  net.forward(input, acts, true, &drop);
  net.zero_grads();
  net.backward(acts, probes, /*want_input_grad=*/true);

  std::vector<double> errs;
  for (auto& p : net.params()) {
    for (size_t i = 0; i < p.param->value.numel(); ++i) {
      const double keep = p.param->value.data[i];
      p.param->value.data[i] = keep + kStep;
      const double up = probe_loss(net, input, probes);
      p.param->value.data[i] = keep - kStep;
      const double dn = probe_loss(net, input, probes);
      p.param->value.data[i] = keep;
      errs.push_back(rel_err(p.param->grad.data[i], (up - dn) / (2 * kStep)));
    }
  }
  const auto& din = acts.grads[size_t(net.input_node())];
  for (size_t i = 0; i < input.numel(); ++i) {
    const double keep = input.data[i];
    input.data[i] = keep + kStep;
    const double up = probe_loss(net, input, probes);
    input.data[i] = keep - kStep;
    const double dn = probe_loss(net, input, probes);
    input.data[i] = keep;
    errs.push_back(rel_err(din.data[i], (up - dn) / (2 * kStep)));
  }
  return errs;
}

/// Runs the check over several independent random inputs and keeps the
/// per-coordinate minimum error. The finite difference is invalid when an
/// input happens to put a ReLU pre-activation or pool margin inside the
/// step; such hits are input-specific, while a wrong backward formula fails
/// for every input.
inline Result check_params(DNet& net, const std::vector<TensorT<double>>& inputs) {
  std::vector<double> combined;
  for (const auto& input : inputs) {
    auto errs = check_params_one(net, input);
    if (combined.empty())
      combined = errs;
    else
      for (size_t i = 0; i < errs.size(); ++i) combined[i] = std::min(combined[i], errs[i]);
  }
  Result res;
  res.checked = combined.size();
  for (double e : combined) res.max_rel = std::max(res.max_rel, e);
  return res;
}

inline Result check_params(DNet& net, TensorT<double> input) {
  return check_params(net, std::vector<TensorT<double>>{std::move(input)});
}

/// Same check but for a real loss function attached to a head.
inline Result check_loss(DNet& net, TensorT<double> input, const std::string& head,
                         onh::traincore::LossKind kind, const TensorT<double>& target) {
  auto loss_value = [&]() {
    DActs acts;
    net.forward(input, acts, false, nullptr);
    return onh::traincore::head_loss(net, acts, net.head(head), kind, target).value;
  };
  DActs acts;
  net.forward(input, acts, false, nullptr);
  auto lo = onh::traincore::head_loss(net, acts, net.head(head), kind, target);
  net.zero_grads();
  std::map<int, TensorT<double>> inject;
  inject[lo.inject_node] = lo.grad;
  net.backward(acts, inject, true);

  Result res;
  for (auto& p : net.params()) {
    for (size_t i = 0; i < p.param->value.numel(); ++i) {
      const double keep = p.param->value.data[i];
      p.param->value.data[i] = keep + kStep;
      const double up = loss_value();
      p.param->value.data[i] = keep - kStep;
      const double dn = loss_value();
      p.param->value.data[i] = keep;
      res.max_rel = std::max(res.max_rel, rel_err(p.param->grad.data[i], (up - dn) / (2 * kStep)));
      ++res.checked;
    }
  }
  return res;
}

}  // namespace gradcheck
