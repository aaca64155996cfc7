#pragma once

#include <memory>

#include "onh/image.hpp"
#include "onh/traincore/network.hpp"

namespace onh::segnet {

using traincore::Network;

namespace detail {

struct LayerSeeder {
  uint64_t seed;
  uint64_t counter = 0;
  Rng next() { return Rng::stream(seed, counter++); }
};

inline int conv_block(Network& net, int in, int filters, int kh, int kw, LayerSeeder& seeds) {
  Rng rng = seeds.next();
  int c = net.add(std::make_unique<traincore::Conv2D<float>>(kh, kw, filters, &rng), {in});
  return net.add(std::make_unique<traincore::ReLU<float>>(0.01), {c});
}

/// Pads bottom/right so the node's spatial shape matches `want`; needed where
/// an odd dimension was floored by pooling on the way down.
inline int pad_to(Network& net, int node, const Shape& want) {
  const Shape& have = net.node_shape(node);
  const int dh = want[0] - have[0], dw = want[1] - have[1];
  if (dh == 0 && dw == 0) return node;
  if (dh < 0 || dw < 0 || dh > 1 || dw > 1)
    throw std::logic_error("decoder/skip shape mismatch beyond one-pixel fixup");
  return net.add(std::make_unique<traincore::ZeroPad2D<float>>(0, dh, 0, dw), {node});
}

}  // namespace detail

/// Compact U-Net: encoder filters 8/16/32/64/64 with three 2x2 pools and
/// dropout on the two deepest blocks, symmetric decoder with 2x2
/// up-convolutions and skip concatenations, 1x1 output convolution with a
/// per-pixel softmax over the tissue classes. At 200x400 (or any size, the
/// count is spatial-independent) this comes to 321,777 parameters.
/// The softmax head is named "seg".
inline Network build_unet(int input_h, int input_w, int classes = kNumClasses,
                          uint64_t init_seed = 0) {
  if (input_h % 4 != 0 || input_w % 4 != 0 || input_h < 16 || input_w < 16)
    throw std::invalid_argument("build_unet: input dims must be multiples of 4 and >= 16");
  detail::LayerSeeder seeds{init_seed};
  Network net;
  int in = net.add_input({input_h, input_w, 1});

  auto pool = [&](int node) {
    return net.add(std::make_unique<traincore::MaxPool2D<float>>(2, 2), {node});
  };
  auto up = [&](int node, int sh, int sw) {
    return net.add(std::make_unique<traincore::Upsample2D<float>>(sh, sw), {node});
  };
  auto drop = [&](int node) {
    return net.add(std::make_unique<traincore::Dropout<float>>(0.5), {node});
  };
  auto concat = [&](int a, int b) {
    return net.add(std::make_unique<traincore::Concat<float>>(), {a, b});
  };

  // encoder
  int c1 = detail::conv_block(net, in, 8, 3, 3, seeds);
  c1 = detail::conv_block(net, c1, 8, 3, 3, seeds);
  int p1 = pool(c1);
  int c2 = detail::conv_block(net, p1, 16, 3, 3, seeds);
  c2 = detail::conv_block(net, c2, 16, 3, 3, seeds);
  int p2 = pool(c2);
  int c3 = detail::conv_block(net, p2, 32, 3, 3, seeds);
  c3 = detail::conv_block(net, c3, 32, 3, 3, seeds);
  int p3 = pool(c3);
  int c4 = detail::conv_block(net, p3, 64, 3, 3, seeds);
  c4 = detail::conv_block(net, c4, 64, 3, 3, seeds);
  int d4 = drop(c4);
  int c5 = detail::conv_block(net, d4, 64, 3, 3, seeds);
  c5 = detail::conv_block(net, c5, 64, 3, 3, seeds);
  int d5 = drop(c5);

  // decoder; the deepest stage stays at the bottleneck resolution
  int u6 = up(d5, 1, 1);
  u6 = detail::conv_block(net, u6, 64, 2, 2, seeds);
  int m6 = concat(u6, d4);
  int c6 = detail::conv_block(net, m6, 64, 3, 3, seeds);
  c6 = detail::conv_block(net, c6, 64, 3, 3, seeds);

  int u7 = up(c6, 2, 2);
  u7 = detail::conv_block(net, u7, 32, 2, 2, seeds);
  u7 = detail::pad_to(net, u7, net.node_shape(c3));
  int m7 = concat(u7, c3);
  int c7 = detail::conv_block(net, m7, 32, 3, 3, seeds);
  c7 = detail::conv_block(net, c7, 32, 3, 3, seeds);

  int u8 = up(c7, 2, 2);
  u8 = detail::conv_block(net, u8, 16, 2, 2, seeds);
  u8 = detail::pad_to(net, u8, net.node_shape(c2));
  int m8 = concat(u8, c2);
  int c8 = detail::conv_block(net, m8, 16, 3, 3, seeds);
  c8 = detail::conv_block(net, c8, 16, 3, 3, seeds);

  int u9 = up(c8, 2, 2);
  u9 = detail::conv_block(net, u9, 8, 2, 2, seeds);
  u9 = detail::pad_to(net, u9, net.node_shape(c1));
  int m9 = concat(u9, c1);
  int c9 = detail::conv_block(net, m9, 8, 3, 3, seeds);
  c9 = detail::conv_block(net, c9, 8, 3, 3, seeds);

  Rng rng = seeds.next();
  int c10 = net.add(std::make_unique<traincore::Conv2D<float>>(1, 1, classes, &rng), {c9});
  int sm = net.add(std::make_unique<traincore::Softmax<float>>(), {c10});
  net.mark_output("seg", sm);
  return net;
}

/// Network input encoding for intensity images: reflectances centered from
/// [0,1] to [-1,1]. Training and inference must agree on this.
inline Tensor seg_input_tensor(const IntensityImage& img) {
  Tensor t = intensity_tensor(img);
  for (auto& v : t.data) v = v * 2.f - 1.f;
  return t;
}

/// Per-pixel argmax segmentation of one intensity image.
inline LabelMap segment(const Network& net, const IntensityImage& img) {
  traincore::Activations acts;
  net.forward(seg_input_tensor(img), acts);
  return argmax_map(acts.values[size_t(net.head("seg"))]);
}

}  // namespace onh::segnet
