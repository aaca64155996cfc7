#pragma once

#include <algorithm>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "onh/rng.hpp"
#include "onh/tensor.hpp"

namespace onh::traincore {

template <class S>
struct ParamT {
  std::string name;
  TensorT<S> value;
  TensorT<S> grad;
};

template <class S>
struct LayerCtx {
  bool training = false;
  Rng* rng = nullptr;  // dropout masks
};

/// Per-node scratch written by forward and consumed by backward
/// (pool argmax indices, dropout masks).
template <class S>
struct NodeScratch {
  std::vector<int32_t> idx;
  TensorT<S> aux;
};

namespace detail {

// C[m][f] += A[m][k] * B[k][f]; rows of A/C addressed with explicit strides.
// Four-row blocking reuses each B row across four output rows, which roughly
// halves the load traffic of the naive loop on this access pattern.
template <class S>
inline void gemm_acc(const S* __restrict__ A, size_t lda, const S* __restrict__ B, size_t ldb,
                     S* __restrict__ C, size_t ldc, int M, int K, int F) {
  int m = 0;
  for (; m + 4 <= M; m += 4) {
    const S* a0 = A + size_t(m) * lda;
    const S* a1 = a0 + lda;
    const S* a2 = a1 + lda;
    const S* a3 = a2 + lda;
    S* c0 = C + size_t(m) * ldc;
    S* c1 = c0 + ldc;
    S* c2 = c1 + ldc;
    S* c3 = c2 + ldc;
    for (int k = 0; k < K; ++k) {
      const S v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
      const S* brow = B + size_t(k) * ldb;
      for (int f = 0; f < F; ++f) {
        const S b = brow[f];
        c0[f] += v0 * b;
        c1[f] += v1 * b;
        c2[f] += v2 * b;
        c3[f] += v3 * b;
      }
    }
  }
  for (; m < M; ++m) {
    const S* a = A + size_t(m) * lda;
    S* c = C + size_t(m) * ldc;
    for (int k = 0; k < K; ++k) {
      const S av = a[k];
      const S* brow = B + size_t(k) * ldb;
      for (int f = 0; f < F; ++f) c[f] += av * brow[f];
    }
  }
}

// W[k][f] += A[m][k]^T * G[m][f]  (rank-1 accumulation per row), with the
// same four-row blocking over m.
template <class S>
inline void gemm_at_acc(const S* __restrict__ A, size_t lda, const S* __restrict__ G, size_t ldg,
                        S* __restrict__ W, size_t ldw, int M, int K, int F) {
  int m = 0;
  for (; m + 4 <= M; m += 4) {
    const S* a0 = A + size_t(m) * lda;
    const S* a1 = a0 + lda;
    const S* a2 = a1 + lda;
    const S* a3 = a2 + lda;
    const S* g0 = G + size_t(m) * ldg;
    const S* g1 = g0 + ldg;
    const S* g2 = g1 + ldg;
    const S* g3 = g2 + ldg;
    for (int k = 0; k < K; ++k) {
      const S v0 = a0[k], v1 = a1[k], v2 = a2[k], v3 = a3[k];
      S* wrow = W + size_t(k) * ldw;
      for (int f = 0; f < F; ++f)
        wrow[f] += v0 * g0[f] + v1 * g1[f] + v2 * g2[f] + v3 * g3[f];
    }
  }
  for (; m < M; ++m) {
    const S* a = A + size_t(m) * lda;
    const S* g = G + size_t(m) * ldg;
    for (int k = 0; k < K; ++k) {
      const S av = a[k];
      S* wrow = W + size_t(k) * ldw;
      for (int f = 0; f < F; ++f) wrow[f] += av * g[f];
    }
  }
}

}  // namespace detail

template <class S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string describe() const = 0;
  /// Output shape (without batch dim) given input shapes (without batch dim).
  virtual Shape infer(const std::vector<Shape>& in) const = 0;
  virtual void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out,
                       NodeScratch<S>& scratch, const LayerCtx<S>& ctx) const = 0;
  /// Accumulates input gradients into din (already zero-initialized by the
  /// caller on first touch) and parameter gradients into the layer's grads.
  virtual void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>& out,
                        const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                        const NodeScratch<S>& scratch) = 0;
  virtual std::vector<ParamT<S>*> params() { return {}; }
};

// ---------------------------------------------------------------------------
// Conv2D, stride 1, 'same' padding. Weights are stored per kernel offset as
// contiguous (C x F) blocks so the convolution runs as one small matmul per
// (offset, row) pair with no im2col buffer.
// ---------------------------------------------------------------------------
template <class S>
class Conv2D : public Layer<S> {
 public:
  Conv2D(int kh, int kw, int filters, Rng* init_rng) : kh_(kh), kw_(kw), f_(filters) {
    if (init_rng) init_rng_state_ = *init_rng;
  }

  std::string describe() const override {
    return "conv2d k=" + std::to_string(kh_) + "x" + std::to_string(kw_) +
           " f=" + std::to_string(f_);
  }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 3)
      throw std::invalid_argument("conv2d expects one HWC input");
    c_ = in[0][2];
    if (w_.value.numel() == 0) init_weights();
    return {in[0][0], in[0][1], f_};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const S* bias = b_.value.ptr();
    for (int n = 0; n < N; ++n) {
      S* ob = out.ptr() + size_t(n) * H * W * f_;
      for (size_t i = 0; i < size_t(H) * W; ++i)
        std::memcpy(ob + i * f_, bias, sizeof(S) * f_);
      const S* xb = x.ptr() + size_t(n) * H * W * C;
      for_each_offset(H, W, [&](int o, int dy, int dx, int y0, int y1, int x0, int x1) {
        const S* wo = w_.value.ptr() + size_t(o) * c_ * f_;
        const int M = x1 - x0;
        if (M <= 0) return;
        for (int y = y0; y < y1; ++y)
          detail::gemm_acc(xb + (size_t(y + dy) * W + (x0 + dx)) * C, C, wo, f_,
                           ob + (size_t(y) * W + x0) * f_, f_, M, C, f_);
      });
    }
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    // bias grad
    {
      S* db = b_.grad.ptr();
      const S* g = dout.ptr();
      for (size_t i = 0; i < size_t(N) * H * W; ++i)
        for (int f = 0; f < f_; ++f) db[f] += g[i * f_ + f];
    }
    // transposed weights per offset for the data gradient
    std::vector<S> wt(size_t(kh_) * kw_ * f_ * c_);
    for (int o = 0; o < kh_ * kw_; ++o) {
      const S* wo = w_.value.ptr() + size_t(o) * c_ * f_;
      S* to = wt.data() + size_t(o) * f_ * c_;
      for (int c = 0; c < c_; ++c)
        for (int f = 0; f < f_; ++f) to[size_t(f) * c_ + c] = wo[size_t(c) * f_ + f];
    }
    for (int n = 0; n < N; ++n) {
      const S* xb = x.ptr() + size_t(n) * H * W * C;
      const S* gb = dout.ptr() + size_t(n) * H * W * f_;
      S* ib = din[0] ? din[0]->ptr() + size_t(n) * H * W * C : nullptr;
      for_each_offset(H, W, [&](int o, int dy, int dx, int y0, int y1, int x0, int x1) {
        const int M = x1 - x0;
        if (M <= 0) return;
        S* dwo = w_.grad.ptr() + size_t(o) * c_ * f_;
        const S* wto = wt.data() + size_t(o) * f_ * c_;
        for (int y = y0; y < y1; ++y) {
          const S* a = xb + (size_t(y + dy) * W + (x0 + dx)) * C;
          const S* g = gb + (size_t(y) * W + x0) * f_;
          detail::gemm_at_acc(a, C, g, f_, dwo, f_, M, C, f_);
          if (ib)
            detail::gemm_acc(g, f_, wto, c_, ib + (size_t(y + dy) * W + (x0 + dx)) * C, C, M, f_,
                             c_);
        }
      });
    }
  }

  std::vector<ParamT<S>*> params() override { return {&w_, &b_}; }

 private:
  template <class Fn>
  void for_each_offset(int H, int W, Fn&& fn) const {
    const int pt = (kh_ - 1) / 2, pl = (kw_ - 1) / 2;
    for (int ky = 0; ky < kh_; ++ky) {
      for (int kx = 0; kx < kw_; ++kx) {
        const int dy = ky - pt, dx = kx - pl;
        const int y0 = std::max(0, -dy), y1 = H - std::max(0, dy);
        const int x0 = std::max(0, -dx), x1 = W - std::max(0, dx);
        fn(ky * kw_ + kx, dy, dx, y0, y1, x0, x1);
      }
    }
  }

  void init_weights() const {
    w_.name = "w";
    b_.name = "b";
    w_.value = TensorT<S>({kh_ * kw_, c_, f_});
    w_.grad = TensorT<S>({kh_ * kw_, c_, f_});
    b_.value = TensorT<S>({f_});
    b_.grad = TensorT<S>({f_});
    // He-normal fan-in initialization, seeded.
    Rng rng = init_rng_state_;
    const double sd = std::sqrt(2.0 / (double(kh_) * kw_ * c_));
    w_.value.fill_normal(rng, 0.0, sd);
  }

  int kh_, kw_, f_;
  mutable int c_ = 0;
  mutable ParamT<S> w_, b_;
  Rng init_rng_state_{0};
};

// ---------------------------------------------------------------------------

template <class S>
class MaxPool2D : public Layer<S> {
 public:
  MaxPool2D(int ph, int pw) : ph_(ph), pw_(pw) {}

  std::string describe() const override {
    return "maxpool " + std::to_string(ph_) + "x" + std::to_string(pw_);
  }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("maxpool expects HWC");
    if (in[0][0] < ph_ || in[0][1] < pw_) throw std::invalid_argument("maxpool: input too small");
    return {in[0][0] / ph_, in[0][1] / pw_, in[0][2]};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out,
               NodeScratch<S>& scratch, const LayerCtx<S>&) const override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const int OH = out.dim(1), OW = out.dim(2);
    scratch.idx.assign(out.numel(), 0);
    for (int n = 0; n < N; ++n) {
      const S* xb = x.ptr() + size_t(n) * H * W * C;
      for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
          for (int c = 0; c < C; ++c) {
            S best = xb[(size_t(oy * ph_) * W + ox * pw_) * C + c];
            int32_t besti = int32_t((size_t(oy * ph_) * W + ox * pw_) * C + c);
            for (int py = 0; py < ph_; ++py)
              for (int px = 0; px < pw_; ++px) {
                size_t i = (size_t(oy * ph_ + py) * W + (ox * pw_ + px)) * C + c;
                if (xb[i] > best) {
                  best = xb[i];
                  besti = int32_t(i);
                }
              }
            size_t oi = ((size_t(n) * OH + oy) * OW + ox) * C + c;
            out.data[oi] = best;
            scratch.idx[oi] = besti;
          }
        }
      }
    }
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>& out,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>& scratch) override {
    if (!din[0]) return;
    const int N = in[0]->dim(0);
    const size_t per_in = in[0]->numel() / N, per_out = out.numel() / N;
    for (int n = 0; n < N; ++n) {
      S* ib = din[0]->ptr() + size_t(n) * per_in;
      const S* g = dout.ptr() + size_t(n) * per_out;
      const int32_t* idx = scratch.idx.data() + size_t(n) * per_out;
      for (size_t i = 0; i < per_out; ++i) ib[idx[i]] += g[i];
    }
  }

 private:
  int ph_, pw_;
};

// ---------------------------------------------------------------------------

template <class S>
class Upsample2D : public Layer<S> {
 public:
  Upsample2D(int sh, int sw) : sh_(sh), sw_(sw) {}

  std::string describe() const override {
    return "upsample " + std::to_string(sh_) + "x" + std::to_string(sw_);
  }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("upsample expects HWC");
    return {in[0][0] * sh_, in[0][1] * sw_, in[0][2]};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H * sh_; ++y) {
        const S* src = x.ptr() + ((size_t(n) * H + y / sh_) * W) * C;
        S* dst = out.ptr() + ((size_t(n) * H * sh_ + y) * (W * sw_)) * C;
        for (int xw = 0; xw < W * sw_; ++xw)
          std::memcpy(dst + size_t(xw) * C, src + size_t(xw / sw_) * C, sizeof(S) * C);
      }
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    if (!din[0]) return;
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H * sh_; ++y) {
        S* dst = din[0]->ptr() + ((size_t(n) * H + y / sh_) * W) * C;
        const S* g = dout.ptr() + ((size_t(n) * H * sh_ + y) * (W * sw_)) * C;
        for (int xw = 0; xw < W * sw_; ++xw)
          for (int c = 0; c < C; ++c) dst[size_t(xw / sw_) * C + c] += g[size_t(xw) * C + c];
      }
  }

 private:
  int sh_, sw_;
};

// ---------------------------------------------------------------------------

template <class S>
class ZeroPad2D : public Layer<S> {
 public:
  ZeroPad2D(int top, int bottom, int left, int right)
      : t_(top), b_(bottom), l_(left), r_(right) {}

  std::string describe() const override {
    return "zeropad " + std::to_string(t_) + "," + std::to_string(b_) + "," + std::to_string(l_) +
           "," + std::to_string(r_);
  }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("zeropad expects HWC");
    return {in[0][0] + t_ + b_, in[0][1] + l_ + r_, in[0][2]};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    out.fill(S(0));
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        std::memcpy(out.ptr() + ((size_t(n) * (H + t_ + b_) + (y + t_)) * (W + l_ + r_) + l_) * C,
                    x.ptr() + (size_t(n) * H + y) * W * C, sizeof(S) * W * C);
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    if (!din[0]) return;
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y) {
        const S* g =
            dout.ptr() + ((size_t(n) * (H + t_ + b_) + (y + t_)) * (W + l_ + r_) + l_) * C;
        S* d = din[0]->ptr() + (size_t(n) * H + y) * W * C;
        for (size_t i = 0; i < size_t(W) * C; ++i) d[i] += g[i];
      }
  }

 private:
  int t_, b_, l_, r_;
};

// ---------------------------------------------------------------------------

template <class S>
class Crop2D : public Layer<S> {
 public:
  Crop2D(int top, int bottom, int left, int right) : t_(top), b_(bottom), l_(left), r_(right) {}

  std::string describe() const override {
    return "crop " + std::to_string(t_) + "," + std::to_string(b_) + "," + std::to_string(l_) +
           "," + std::to_string(r_);
  }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 3) throw std::invalid_argument("crop expects HWC");
    Shape s{in[0][0] - t_ - b_, in[0][1] - l_ - r_, in[0][2]};
    if (s[0] <= 0 || s[1] <= 0) throw std::invalid_argument("crop larger than input");
    return s;
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const int OH = H - t_ - b_, OW = W - l_ - r_;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < OH; ++y)
        std::memcpy(out.ptr() + (size_t(n) * OH + y) * OW * C,
                    x.ptr() + ((size_t(n) * H + (y + t_)) * W + l_) * C, sizeof(S) * OW * C);
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    if (!din[0]) return;
    const TensorT<S>& x = *in[0];
    const int N = x.dim(0), H = x.dim(1), W = x.dim(2), C = x.dim(3);
    const int OH = H - t_ - b_, OW = W - l_ - r_;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < OH; ++y) {
        const S* g = dout.ptr() + (size_t(n) * OH + y) * OW * C;
        S* d = din[0]->ptr() + ((size_t(n) * H + (y + t_)) * W + l_) * C;
        for (size_t i = 0; i < size_t(OW) * C; ++i) d[i] += g[i];
      }
  }

 private:
  int t_, b_, l_, r_;
};

// ---------------------------------------------------------------------------

/// Concatenation along the channel axis; both inputs must share H and W.
template <class S>
class Concat : public Layer<S> {
 public:
  std::string describe() const override { return "concat"; }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 2 || in[0].size() != 3 || in[1].size() != 3)
      throw std::invalid_argument("concat expects two HWC inputs");
    if (in[0][0] != in[1][0] || in[0][1] != in[1][1])
      throw std::invalid_argument("concat: spatial shapes differ: " + shape_str(in[0]) + " vs " +
                                  shape_str(in[1]));
    return {in[0][0], in[0][1], in[0][2] + in[1][2]};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const int N = in[0]->dim(0), H = in[0]->dim(1), W = in[0]->dim(2);
    const int C0 = in[0]->dim(3), C1 = in[1]->dim(3);
    for (int n = 0; n < N; ++n)
      for (size_t i = 0; i < size_t(H) * W; ++i) {
        S* dst = out.ptr() + (size_t(n) * H * W + i) * (C0 + C1);
        std::memcpy(dst, in[0]->ptr() + (size_t(n) * H * W + i) * C0, sizeof(S) * C0);
        std::memcpy(dst + C0, in[1]->ptr() + (size_t(n) * H * W + i) * C1, sizeof(S) * C1);
      }
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    const int N = in[0]->dim(0), H = in[0]->dim(1), W = in[0]->dim(2);
    const int C0 = in[0]->dim(3), C1 = in[1]->dim(3);
    for (int n = 0; n < N; ++n)
      for (size_t i = 0; i < size_t(H) * W; ++i) {
        const S* g = dout.ptr() + (size_t(n) * H * W + i) * (C0 + C1);
        if (din[0]) {
          S* d = din[0]->ptr() + (size_t(n) * H * W + i) * C0;
          for (int c = 0; c < C0; ++c) d[c] += g[c];
        }
        if (din[1]) {
          S* d = din[1]->ptr() + (size_t(n) * H * W + i) * C1;
          for (int c = 0; c < C1; ++c) d[c] += g[c + C0];
        }
      }
  }
};

// ---------------------------------------------------------------------------

template <class S>
class Flatten : public Layer<S> {
 public:
  std::string describe() const override { return "flatten"; }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1) throw std::invalid_argument("flatten expects one input");
    int n = 1;
    for (int d : in[0]) n *= d;
    return {n};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    std::memcpy(out.ptr(), in[0]->ptr(), sizeof(S) * in[0]->numel());
  }

  void backward(const std::vector<const TensorT<S>*>&, const TensorT<S>&, const TensorT<S>& dout,
                std::vector<TensorT<S>*>& din, const NodeScratch<S>&) override {
    if (!din[0]) return;
    for (size_t i = 0; i < dout.numel(); ++i) din[0]->data[i] += dout.data[i];
  }
};

// ---------------------------------------------------------------------------

template <class S>
class Dense : public Layer<S> {
 public:
  /// init_scale multiplies the He-normal stddev; zero gives a zero-initialized
  /// layer (useful as a lazily-opening output head).
  Dense(int units, Rng* init_rng, double init_scale = 1.0) : u_(units), init_scale_(init_scale) {
    if (init_rng) init_rng_state_ = *init_rng;
  }

  std::string describe() const override { return "dense u=" + std::to_string(u_); }

  Shape infer(const std::vector<Shape>& in) const override {
    if (in.size() != 1 || in[0].size() != 1)
      throw std::invalid_argument("dense expects one flat input");
    d_ = in[0][0];
    if (w_.value.numel() == 0) {
      w_.name = "w";
      b_.name = "b";
      w_.value = TensorT<S>({d_, u_});
      w_.grad = TensorT<S>({d_, u_});
      b_.value = TensorT<S>({u_});
      b_.grad = TensorT<S>({u_});
      Rng rng = init_rng_state_;
      w_.value.fill_normal(rng, 0.0, init_scale_ * std::sqrt(2.0 / double(d_)));
    }
    return {u_};
  }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const int N = in[0]->dim(0);
    for (int n = 0; n < N; ++n)
      std::memcpy(out.ptr() + size_t(n) * u_, b_.value.ptr(), sizeof(S) * u_);
    detail::gemm_acc(in[0]->ptr(), d_, w_.value.ptr(), u_, out.ptr(), u_, N, d_, u_);
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    const int N = in[0]->dim(0);
    for (int n = 0; n < N; ++n)
      for (int u = 0; u < u_; ++u) b_.grad.data[u] += dout.at2(n, u);
    detail::gemm_at_acc(in[0]->ptr(), d_, dout.ptr(), u_, w_.grad.ptr(), u_, N, d_, u_);
    if (din[0]) {
      std::vector<S> wt(size_t(u_) * d_);
      for (int d = 0; d < d_; ++d)
        for (int u = 0; u < u_; ++u) wt[size_t(u) * d_ + d] = w_.value.at2(d, u);
      detail::gemm_acc(dout.ptr(), u_, wt.data(), d_, din[0]->ptr(), d_, N, u_, d_);
    }
  }

  std::vector<ParamT<S>*> params() override { return {&w_, &b_}; }

 private:
  int u_;
  double init_scale_ = 1.0;
  mutable int d_ = 0;
  mutable ParamT<S> w_, b_;
  Rng init_rng_state_{0};
};

// ---------------------------------------------------------------------------

/// Rectifier with an optional small negative slope. The leaky variant keeps
/// a trickle of gradient through inactive units, which protects long noisy
/// trainings from permanent unit death.
template <class S>
class ReLU : public Layer<S> {
 public:
  explicit ReLU(double negative_slope = 0.0) : slope_(S(negative_slope)) {}

  std::string describe() const override {
    return slope_ == S(0) ? "relu" : "leaky_relu a=" + std::to_string(double(slope_));
  }
  Shape infer(const std::vector<Shape>& in) const override { return in.at(0); }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const S* x = in[0]->ptr();
    S* o = out.ptr();
    const S a = slope_;
    for (size_t i = 0; i < out.numel(); ++i) o[i] = x[i] > S(0) ? x[i] : a * x[i];
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>&,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    if (!din[0]) return;
    const S* x = in[0]->ptr();
    const S a = slope_;
    for (size_t i = 0; i < dout.numel(); ++i)
      din[0]->data[i] += x[i] > S(0) ? dout.data[i] : a * dout.data[i];
  }

 private:
  S slope_;
};

// ---------------------------------------------------------------------------

/// Inverted dropout: scales kept units by 1/(1-rate) in training mode and is
/// the identity in inference mode.
template <class S>
class Dropout : public Layer<S> {
 public:
  explicit Dropout(double rate) : rate_(rate) {}

  std::string describe() const override { return "dropout r=" + std::to_string(rate_); }
  Shape infer(const std::vector<Shape>& in) const override { return in.at(0); }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out,
               NodeScratch<S>& scratch, const LayerCtx<S>& ctx) const override {
    if (!ctx.training || rate_ <= 0.0) {
      std::memcpy(out.ptr(), in[0]->ptr(), sizeof(S) * out.numel());
      scratch.aux = TensorT<S>();
      return;
    }
    if (!ctx.rng) throw std::runtime_error("dropout in training mode needs an rng");
    scratch.aux = TensorT<S>(out.shape);
    const S keep_scale = S(1.0 / (1.0 - rate_));
    for (size_t i = 0; i < out.numel(); ++i) {
      S m = ctx.rng->uniform() < rate_ ? S(0) : keep_scale;
      scratch.aux.data[i] = m;
      out.data[i] = in[0]->data[i] * m;
    }
  }

  void backward(const std::vector<const TensorT<S>*>&, const TensorT<S>&, const TensorT<S>& dout,
                std::vector<TensorT<S>*>& din, const NodeScratch<S>& scratch) override {
    if (!din[0]) return;
    if (scratch.aux.numel() == 0) {
      for (size_t i = 0; i < dout.numel(); ++i) din[0]->data[i] += dout.data[i];
    } else {
      for (size_t i = 0; i < dout.numel(); ++i)
        din[0]->data[i] += dout.data[i] * scratch.aux.data[i];
    }
  }

 private:
  double rate_;
};

// ---------------------------------------------------------------------------

/// Softmax over the trailing axis: per-pixel over channels for HWC inputs,
/// over features for flat inputs.
template <class S>
class Softmax : public Layer<S> {
 public:
  std::string describe() const override { return "softmax"; }
  Shape infer(const std::vector<Shape>& in) const override { return in.at(0); }

  void forward(const std::vector<const TensorT<S>*>& in, TensorT<S>& out, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    const int C = in[0]->shape.back();
    const size_t groups = in[0]->numel() / C;
    for (size_t g = 0; g < groups; ++g) {
      const S* x = in[0]->ptr() + g * C;
      S* o = out.ptr() + g * C;
      S mx = x[0];
      for (int c = 1; c < C; ++c) mx = std::max(mx, x[c]);
      S sum = S(0);
      for (int c = 0; c < C; ++c) {
        o[c] = std::exp(x[c] - mx);
        sum += o[c];
      }
      const S inv = S(1) / sum;
      for (int c = 0; c < C; ++c) o[c] *= inv;
    }
  }

  void backward(const std::vector<const TensorT<S>*>& in, const TensorT<S>& out,
                const TensorT<S>& dout, std::vector<TensorT<S>*>& din,
                const NodeScratch<S>&) override {
    if (!din[0]) return;
    const int C = in[0]->shape.back();
    const size_t groups = out.numel() / C;
    for (size_t g = 0; g < groups; ++g) {
      const S* y = out.ptr() + g * C;
      const S* go = dout.ptr() + g * C;
      S* gi = din[0]->ptr() + g * C;
      S dot = S(0);
      for (int c = 0; c < C; ++c) dot += go[c] * y[c];
      for (int c = 0; c < C; ++c) gi[c] += y[c] * (go[c] - dot);
    }
  }
};

// ---------------------------------------------------------------------------

/// Input placeholder; carries the declared shape.
template <class S>
class InputLayer : public Layer<S> {
 public:
  explicit InputLayer(Shape shape) : shape_(std::move(shape)) {}
  std::string describe() const override { return "input " + shape_str(shape_); }
  Shape infer(const std::vector<Shape>&) const override { return shape_; }
  void forward(const std::vector<const TensorT<S>*>&, TensorT<S>&, NodeScratch<S>&,
               const LayerCtx<S>&) const override {
    throw std::logic_error("input layer is never executed");
  }
  void backward(const std::vector<const TensorT<S>*>&, const TensorT<S>&, const TensorT<S>&,
                std::vector<TensorT<S>*>&, const NodeScratch<S>&) override {}

 private:
  Shape shape_;
};

}  // namespace onh::traincore
