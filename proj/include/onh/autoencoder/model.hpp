#pragma once

#include <array>
#include <memory>
#include <vector>

#include "onh/image.hpp"
#include "onh/traincore/checkpoint.hpp"
#include "onh/traincore/network.hpp"

namespace onh::autoencoder {

using traincore::Network;

/// A built autoencoder: the graph, the latent code node and bookkeeping for
/// topology comparisons. Heads: "recon" always, "cls" when supervised.
struct AeModel {
  Network net;
  int code_node = -1;
  int latent_dim = 0;
  int code_channels = 0;          // n; the code is 3 x 3 x n
  uint64_t backbone_hash = 0;     // hash of encoder+decoder nodes only
  int backbone_nodes = 0;
  bool supervised = true;
};

namespace detail {

struct LayerSeeder {
  uint64_t seed;
  uint64_t counter = 0;
  Rng next() { return Rng::stream(seed, counter++); }
};

inline int conv_relu(Network& net, int in, int filters, int kh, int kw, LayerSeeder& seeds,
                     bool relu = true) {
  Rng rng = seeds.next();
  int c = net.add(std::make_unique<traincore::Conv2D<float>>(kh, kw, filters, &rng), {in});
  if (!relu) return c;
  return net.add(std::make_unique<traincore::ReLU<float>>(0.01), {c});
}

/// Keras-style fixup pair: ZeroPadding2D both sides followed by a crop, with
/// the net effect of one extra row (top) or column (left).
inline int pad_crop(Network& net, int node, int add_h, int add_w) {
  if (add_h == 0 && add_w == 0) return node;
  if (add_h < 0 || add_w < 0 || add_h > 1 || add_w > 1)
    throw std::logic_error("autoencoder: decoder shape fixup beyond one pixel");
  int padded = net.add(std::make_unique<traincore::ZeroPad2D<float>>(add_h, add_h, add_w, add_w),
                       {node});
  return net.add(std::make_unique<traincore::Crop2D<float>>(0, add_h, 0, add_w), {padded});
}

}  // namespace detail

/// Builds the supervised (or, for the ablation, unsupervised) convolutional
/// autoencoder. The encoder halves the image down to a 3 x 3 x n code
/// (latent dimension d = 9n); the decoder mirrors the pooling ladder with
/// upsample + triple-convolution stages and one-pixel pad/crop fixups where
/// a floored odd dimension must be restored; the MLP branch (18/12/6/2 dense
/// units on the flattened code) is present only in supervised mode.
///
/// The filter ladders follow the full-resolution design (encoder
/// 64/32/16/8/4/2 at 200x400) truncated from the front for smaller inputs,
/// so a 100x200 input uses 32/16/8/4/2.
inline AeModel build_autoencoder(int n, int input_h, int input_w, bool supervised = true,
                                 uint64_t init_seed = 0) {
  if (n < 1 || n > 8) throw std::invalid_argument("build_autoencoder: n must be in 1..8");

  // pooling schedule: halve until height 3; width must land on 6 so the
  // final (1,2) pool reaches the 3x3 code
  std::vector<std::pair<int, int>> ladder;  // shape after each 2x2 pool
  {
    int h = input_h, w = input_w;
    while (h > 3) {
      h /= 2;
      w /= 2;
      ladder.push_back({h, w});
    }
    if (h != 3 || w != 6 || ladder.size() < 3 || ladder.size() > 6)
      throw std::invalid_argument(
          "build_autoencoder: input must reduce to a 3x6 bottleneck by repeated halving");
  }
  const int k = int(ladder.size());
  static const int kFullEncoder[6] = {64, 32, 16, 8, 4, 2};
  std::vector<int> enc_filters(kFullEncoder + (6 - k), kFullEncoder + 6);

  detail::LayerSeeder seeds{init_seed};
  AeModel model;
  Network& net = model.net;
  int x = net.add_input({input_h, input_w, kNumClasses});

  // encoder
  for (int stage = 0; stage < k; ++stage) {
    x = detail::conv_relu(net, x, enc_filters[size_t(stage)], 3, 3, seeds);
    x = detail::conv_relu(net, x, enc_filters[size_t(stage)], 3, 3, seeds);
    x = net.add(std::make_unique<traincore::MaxPool2D<float>>(2, 2), {x});
  }
  x = detail::conv_relu(net, x, n, 2, 2, seeds);
  x = detail::conv_relu(net, x, n, 2, 2, seeds, /*relu=*/false);  // linear code
  x = net.add(std::make_unique<traincore::MaxPool2D<float>>(1, 2), {x});
  model.code_node = x;
  model.code_channels = n;
  model.latent_dim = 9 * n;

  // decoder: filter schedule [6, 6, 8, 16, 32, ...] with the last up stage
  // matching the encoder front, then the output block
  std::vector<int> up_filters{6, 6};
  {
    static const int kMid[4] = {8, 16, 32, 64};
    for (int i = 0; i < k - 2; ++i) up_filters.push_back(kMid[i]);
    up_filters.push_back(enc_filters.front());
  }
  int cur_h = 3, cur_w = 3;
  for (size_t stage = 0; stage < up_filters.size(); ++stage) {
    const int sh = (stage == 1) ? 1 : 2, sw = 2;
    x = net.add(std::make_unique<traincore::Upsample2D<float>>(sh, sw), {x});
    cur_h *= sh;
    cur_w *= sw;
    // target shape for this stage, walking the encoder ladder back up
    int want_h, want_w;
    if (stage == 0) {
      want_h = 6;
      want_w = 6;
    } else if (int(stage) <= k - 1) {
      want_h = ladder[size_t(k - 1 - int(stage))].first;
      want_w = ladder[size_t(k - 1 - int(stage))].second;
    } else {
      want_h = input_h;
      want_w = input_w;
    }
    x = detail::pad_crop(net, x, want_h - cur_h, want_w - cur_w);
    cur_h = want_h;
    cur_w = want_w;
    for (int c = 0; c < 3; ++c) x = detail::conv_relu(net, x, up_filters[stage], 3, 3, seeds);
  }
  // output block: three convs at half the front filters, two at a quarter,
  // then the 9-class convolution and softmax
  const int g = std::max(4, enc_filters.front() / 2);
  for (int c = 0; c < 3; ++c) x = detail::conv_relu(net, x, g, 3, 3, seeds);
  for (int c = 0; c < 2; ++c) x = detail::conv_relu(net, x, std::max(2, g / 2), 3, 3, seeds);
  x = detail::conv_relu(net, x, kNumClasses, 3, 3, seeds, /*relu=*/false);
  int recon = net.add(std::make_unique<traincore::Softmax<float>>(), {x});
  net.mark_output("recon", recon);
  net.mark_output("code", model.code_node);

  model.backbone_nodes = net.num_nodes();
  model.backbone_hash = net.prefix_hash(model.backbone_nodes);
  model.supervised = supervised;

  if (supervised) {
    int m = net.add(std::make_unique<traincore::Flatten<float>>(), {model.code_node});
    for (int units : {18, 12, 6}) {
      Rng rng = seeds.next();
      m = net.add(std::make_unique<traincore::Dense<float>>(units, &rng), {m});
      m = net.add(std::make_unique<traincore::ReLU<float>>(0.01), {m});
    }
    Rng rng = seeds.next();
    // zero-initialized output layer: the branch opens gradually instead of
    // jolting the shared code with full-scale crossentropy gradients
    m = net.add(std::make_unique<traincore::Dense<float>>(2, &rng, 0.0), {m});
    int cls = net.add(std::make_unique<traincore::Softmax<float>>(), {m});
    net.mark_output("cls", cls);
  }
  return model;
}

using LatentVector = std::vector<float>;

/// Decoded reconstruction probabilities plus (when supervised) the class
/// probabilities from the same latent.
struct AeOutput {
  Tensor reconstruction;               // 1 x H x W x 9, softmax normalized
  std::array<float, 2> class_probs{};  // sums to 1 when present
  bool has_class = false;
};

inline LatentVector encode(const AeModel& model, const LabelMap& map) {
  traincore::Activations acts;
  model.net.forward(one_hot(map), acts);
  const Tensor& code = acts.values[size_t(model.code_node)];
  return LatentVector(code.data.begin(), code.data.end());
}

namespace detail {
inline Tensor code_tensor(const AeModel& model, const LatentVector& z) {
  if (int(z.size()) != model.latent_dim)
    throw std::invalid_argument("latent length " + std::to_string(z.size()) +
                                " does not match d=" + std::to_string(model.latent_dim));
  Tensor code({1, 3, 3, model.code_channels});
  std::copy(z.begin(), z.end(), code.data.begin());
  return code;
}
}  // namespace detail

inline AeOutput decode(const AeModel& model, const LatentVector& z) {
  traincore::Activations acts;
  model.net.forward_from(model.code_node, detail::code_tensor(model, z), acts);
  AeOutput out;
  out.reconstruction = acts.values[size_t(model.net.head("recon"))];
  if (model.net.has_head("cls")) {
    const Tensor& p = acts.values[size_t(model.net.head("cls"))];
    out.class_probs = {p.data[0], p.data[1]};
    out.has_class = true;
  }
  return out;
}

inline std::array<float, 2> classify(const AeModel& model, const LatentVector& z) {
  AeOutput out = decode(model, z);
  if (!out.has_class) throw std::logic_error("classify: model has no classification branch");
  return out.class_probs;
}

}  // namespace onh::autoencoder
