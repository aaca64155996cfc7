#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "onh/traincore/layers.hpp"

namespace onh::traincore {

template <class S>
struct NamedParam {
  std::string name;
  ParamT<S>* param;
};

/// Activations and scratch for one forward pass through a network. Owned by
/// the caller so concurrent inference over one network stays possible.
template <class S>
struct ActivationsT {
  std::vector<TensorT<S>> values;
  std::vector<NodeScratch<S>> scratch;
  std::vector<TensorT<S>> grads;  // filled by backward
  std::vector<char> grad_set;
  int batch = 0;
  int start_node = 0;
};

/// Static acyclic layer graph in topological order, with named output heads.
/// Nodes are added through the builder methods; shapes are inferred and
/// validated at build time.
template <class S>
class NetworkT {
 public:
  struct Node {
    std::unique_ptr<Layer<S>> layer;
    std::vector<int> in;
    Shape shape;  // without batch dim
  };

  int add_input(Shape shape) {
    if (input_ >= 0) throw std::logic_error("network already has an input");
    input_ = add(std::make_unique<InputLayer<S>>(std::move(shape)), {});
    return input_;
  }

  int add(std::unique_ptr<Layer<S>> layer, std::vector<int> in) {
    std::vector<Shape> in_shapes;
    for (int i : in) {
      if (i < 0 || i >= int(nodes_.size()))
        throw std::invalid_argument("bad node reference in graph");
      in_shapes.push_back(nodes_[size_t(i)].shape);
    }
    Node n;
    n.layer = std::move(layer);
    n.in = std::move(in);
    n.shape = n.layer->infer(in_shapes);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  void mark_output(const std::string& name, int node) { heads_[name] = node; }

  int input_node() const { return input_; }
  int head(const std::string& name) const {
    auto it = heads_.find(name);
    if (it == heads_.end()) throw std::invalid_argument("no output head named " + name);
    return it->second;
  }
  bool has_head(const std::string& name) const { return heads_.count(name) > 0; }
  const std::map<std::string, int>& heads() const { return heads_; }
  const Shape& node_shape(int i) const { return nodes_[size_t(i)].shape; }
  const std::vector<int>& node_inputs(int i) const { return nodes_[size_t(i)].in; }
  int num_nodes() const { return int(nodes_.size()); }

  std::vector<NamedParam<S>> params() {
    std::vector<NamedParam<S>> out;
    for (size_t i = 0; i < nodes_.size(); ++i)
      for (ParamT<S>* p : nodes_[i].layer->params())
        out.push_back({"n" + std::to_string(i) + "." + p->name, p});
    return out;
  }

  size_t param_count() {
    size_t n = 0;
    for (auto& p : params()) n += p.param->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params()) p.param->grad.fill(S(0));
  }

  /// FNV-1a over the canonical layer descriptions, wiring and head names.
  /// A pure function of topology; checkpoints are keyed by it.
  uint64_t topology_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (size_t i = 0; i < nodes_.size(); ++i) {
      mix(nodes_[i].layer->describe());
      for (int in : nodes_[i].in) mix("<" + std::to_string(in));
      mix(";");
    }
    for (auto& [name, node] : heads_) mix(name + "@" + std::to_string(node));
    return h;
  }

  /// Hash of the first `count` nodes only; used to compare shared backbones
  /// across model variants.
  uint64_t prefix_hash(int count) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (int i = 0; i < count && i < int(nodes_.size()); ++i) {
      mix(nodes_[size_t(i)].layer->describe());
      for (int in : nodes_[size_t(i)].in) mix("<" + std::to_string(in));
      mix(";");
    }
    return h;
  }

  void forward(const TensorT<S>& input, ActivationsT<S>& acts, bool training = false,
               Rng* dropout_rng = nullptr) const {
    if (input_ < 0) throw std::logic_error("network has no input node");
    Shape want = nodes_[size_t(input_)].shape;
    Shape got(input.shape.begin() + 1, input.shape.end());
    if (got != want)
      throw std::invalid_argument("forward: input shape " + shape_str(got) + ", expected " +
                                  shape_str(want));
    acts.values.assign(nodes_.size(), TensorT<S>());
    acts.scratch.assign(nodes_.size(), NodeScratch<S>());
    acts.batch = input.dim(0);
    acts.start_node = 0;
    acts.values[size_t(input_)] = input;
    LayerCtx<S> ctx{training, dropout_rng};
    run_nodes(acts, ctx, input_);
  }

  /// Runs only the part of the graph downstream of `node`, seeding it with
  /// `value` (used to decode/classify straight from a latent code).
  void forward_from(int node, const TensorT<S>& value, ActivationsT<S>& acts) const {
    Shape got(value.shape.begin() + 1, value.shape.end());
    if (got != nodes_[size_t(node)].shape)
      throw std::invalid_argument("forward_from: value shape " + shape_str(got) +
                                  ", expected " + shape_str(nodes_[size_t(node)].shape));
    acts.values.assign(nodes_.size(), TensorT<S>());
    acts.scratch.assign(nodes_.size(), NodeScratch<S>());
    acts.batch = value.dim(0);
    acts.start_node = node;
    acts.values[size_t(node)] = value;
    LayerCtx<S> ctx{false, nullptr};
    run_nodes(acts, ctx, node);
  }

  /// Reverse-mode pass. `head_grads` maps node id -> dLoss/dOutput of that
  /// node. Parameter gradients accumulate into the layers (zero_grads()
  /// first); activation gradients propagate through fan-out by summation.
  /// Gradients w.r.t. the seed/input node are only produced when
  /// `want_input_grad` is set.
  void backward(ActivationsT<S>& acts, const std::map<int, TensorT<S>>& head_grads,
                bool want_input_grad = false) {
    acts.grads.assign(nodes_.size(), TensorT<S>());
    acts.grad_set.assign(nodes_.size(), 0);
    for (auto& [node, g] : head_grads) {
      ensure_grad(acts, node);
      if (g.shape != acts.values[size_t(node)].shape)
        throw std::invalid_argument("backward: head gradient shape mismatch");
      for (size_t i = 0; i < g.numel(); ++i) acts.grads[size_t(node)].data[i] += g.data[i];
    }
    for (int i = int(nodes_.size()) - 1; i > acts.start_node; --i) {
      if (!acts.grad_set[size_t(i)]) continue;
      Node& n = nodes_[size_t(i)];
      std::vector<const TensorT<S>*> ins;
      std::vector<TensorT<S>*> dins;
      for (int in : n.in) {
        ins.push_back(&acts.values[size_t(in)]);
        const bool source = (in == acts.start_node || in == input_);
        if (computed(acts, in) && (!source || want_input_grad)) {
          ensure_grad(acts, in);
          dins.push_back(&acts.grads[size_t(in)]);
        } else {
          dins.push_back(nullptr);
        }
      }
      n.layer->backward(ins, acts.values[size_t(i)], acts.grads[size_t(i)], dins,
                        acts.scratch[size_t(i)]);
    }
  }

 private:
  bool computed(const ActivationsT<S>& acts, int node) const {
    return acts.values[size_t(node)].numel() > 0;
  }

  void ensure_grad(ActivationsT<S>& acts, int node) {
    if (!acts.grad_set[size_t(node)]) {
      acts.grads[size_t(node)] = TensorT<S>(acts.values[size_t(node)].shape);
      acts.grad_set[size_t(node)] = 1;
    }
  }

  void run_nodes(ActivationsT<S>& acts, const LayerCtx<S>& ctx, int seed_node) const {
    for (size_t i = size_t(seed_node) + 1; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      bool needed = true;
      std::vector<const TensorT<S>*> ins;
      for (int in : n.in) {
        if (!computed(acts, in)) {
          needed = false;
          break;
        }
        ins.push_back(&acts.values[size_t(in)]);
      }
      if (!needed) {
        if (depends_on(int(i), seed_node))
          throw std::logic_error("forward_from: node depends on an uncomputed branch");
        continue;
      }
      Shape full = n.shape;
      full.insert(full.begin(), acts.batch);
      acts.values[i] = TensorT<S>(full);
      n.layer->forward(ins, acts.values[i], acts.scratch[i], ctx);
    }
  }

  bool depends_on(int node, int target) const {
    std::set<int> seen;
    std::vector<int> stack{node};
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      if (cur == target) return true;
      if (!seen.insert(cur).second) continue;
      for (int in : nodes_[size_t(cur)].in) stack.push_back(in);
    }
    return false;
  }

  std::vector<Node> nodes_;
  std::map<std::string, int> heads_;
  int input_ = -1;
};

using Network = NetworkT<float>;
using Activations = ActivationsT<float>;

}  // namespace onh::traincore
