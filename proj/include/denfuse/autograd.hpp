#pragma once

// Reverse-mode differentiation over a fixed operator set: enough to train
// the residual denoiser and the attention fusion network, nothing more.
//
// A forward pass builds a graph of shared Node values; backward() walks it
// once in reverse topological order and accumulates gradients into every
// reachable Parameter. Graphs are single-threaded; Parameters may be shared
// read-only across concurrently built graphs.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "denfuse/tensor.hpp"

namespace denfuse {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string name_, Tensor init)
      : name(std::move(name_)), value(std::move(init)), grad(value.shape()) {}

  void zero_grad() { std::fill(grad.raw().begin(), grad.raw().end(), 0.0f); }
};

using ParamPtr = std::shared_ptr<Parameter>;

inline ParamPtr make_parameter(std::string name, Tensor init) {
  return std::make_shared<Parameter>(std::move(name), std::move(init));
}

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily
  bool needs_grad = false;
  bool backward_done = false;
  std::vector<Var> inputs;
  std::function<void()> backprop;
  Parameter* param = nullptr;

  void ensure_grad() {
    if (grad.empty()) grad = Tensor(value.shape());
  }
};

inline Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

// grad-tracked leaf, not bound to a Parameter (used by gradient tests)
inline Var leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->needs_grad = true;
  return n;
}

inline Var from_param(const ParamPtr& p) {
  auto n = std::make_shared<Node>();
  n->value = p->value;
  n->needs_grad = true;
  n->param = p.get();
  return n;
}

namespace detail {

inline Var make_op(Tensor value, std::vector<Var> inputs) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const Var& in : n->inputs) {
    if (in->needs_grad) {
      n->needs_grad = true;
      break;
    }
  }
  return n;
}

// C[M,N] (+)= A[M,K] * B[K,N], all row-major
inline void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c,
                    bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0f);
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      if (av == 0.0f) continue;
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// blocked out-of-place transpose: src [rows,cols] -> dst [cols,rows]
inline void transpose(int rows, int cols, const float* src, float* dst) {
  constexpr int kBlock = 32;
  for (int r0 = 0; r0 < rows; r0 += kBlock) {
    const int r1 = std::min(rows, r0 + kBlock);
    for (int c0 = 0; c0 < cols; c0 += kBlock) {
      const int c1 = std::min(cols, c0 + kBlock);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
        }
      }
    }
  }
}

// C[M,N] = A[K,M]^T * B[K,N]
inline void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
  std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0f);
  for (int p = 0; p < k; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * m;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// one sample: src [Cin,H,W] -> cols [Cin*k*k, H*W], zero-fill "same" padding
inline void im2col(const float* src, int cin, int h, int w, int k, float* cols) {
  const int pad = (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int ci = 0; ci < cin; ++ci) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++row) {
        float* dst = cols + row * hw;
        const int dy = ki - pad;
        const int dx = kj - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          float* drow = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(drow, drow + w, 0.0f);
            continue;
          }
          const float* srow = src + (static_cast<std::size_t>(ci) * h + sy) * w;
          if (x0 > 0) std::fill(drow, drow + x0, 0.0f);
          if (x1 > x0) std::copy_n(srow + x0 + dx, x1 - x0, drow + x0);
          if (x1 < w) std::fill(drow + std::max(x0, x1), drow + w, 0.0f);
        }
      }
    }
  }
}

// transpose of im2col: scatter-add cols [Cin*k*k, H*W] back into dst [Cin,H,W]
inline void col2im_add(const float* cols, int cin, int h, int w, int k, float* dst) {
  const int pad = (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int ci = 0; ci < cin; ++ci) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj, ++row) {
        const float* srcrow = cols + row * hw;
        const int dy = ki - pad;
        const int dx = kj - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          float* drow = dst + (static_cast<std::size_t>(ci) * h + sy) * w + dx;
          const float* srow = srcrow + static_cast<std::size_t>(y) * w;
          for (int x = x0; x < x1; ++x) drow[x] += srow[x];
        }
      }
    }
  }
}

}  // namespace detail

// 2-D cross-correlation, zero-fill "same" padding, odd square kernel.
// input [N,Cin,H,W], kernel [Cout,Cin,k,k], bias [Cout] -> [N,Cout,H,W]
inline Var conv2d(const Var& input, const Var& kernel, const Var& bias) {
  const Tensor& x = input->value;
  const Tensor& kt = kernel->value;
  const Tensor& bt = bias->value;
  if (x.rank() != 4 || kt.rank() != 4) {
    throw std::invalid_argument("conv2d: input and kernel must be rank 4");
  }
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int cout = kt.dim(0), k = kt.dim(2);
  if (kt.dim(1) != cin) {
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(kt.dim(1)) +
                                " input channels, got " + std::to_string(cin));
  }
  if (kt.dim(3) != k || k % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel must be square with odd size");
  }
  if (bt.rank() != 1 || bt.dim(0) != cout) {
    throw std::invalid_argument("conv2d: bias must have one value per output channel");
  }

  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const int ckk = cin * k * k;
  Tensor out({n, cout, h, w});
  std::vector<float> cols(static_cast<std::size_t>(ckk) * hw);
  for (int s = 0; s < n; ++s) {
    const float* src = x.data() + static_cast<std::size_t>(s) * cin * hw;
    float* dst = out.data() + static_cast<std::size_t>(s) * cout * hw;
    detail::im2col(src, cin, h, w, k, cols.data());
    detail::gemm_nn(cout, static_cast<int>(hw), ckk, kt.data(), cols.data(), dst, false);
    for (int co = 0; co < cout; ++co) {
      const float b = bt[co];
      float* crow = dst + static_cast<std::size_t>(co) * hw;
      for (std::size_t i = 0; i < hw; ++i) crow[i] += b;
    }
  }

  Var node = detail::make_op(std::move(out), {input, kernel, bias});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    Node* kn = kernel.get();
    Node* bn = bias.get();
    node->backprop = [self, in, kn, bn, n, cin, cout, h, w, k]() {
      const std::size_t hw = static_cast<std::size_t>(h) * w;
      const int ckk = cin * k * k;
      const float* dout = self->grad.data();
      std::vector<float> cols(static_cast<std::size_t>(ckk) * hw);

      if (bn->needs_grad) {
        bn->ensure_grad();
        for (int s = 0; s < n; ++s) {
          for (int co = 0; co < cout; ++co) {
            const float* g = dout + (static_cast<std::size_t>(s) * cout + co) * hw;
            float acc = 0.0f;
            for (std::size_t i = 0; i < hw; ++i) acc += g[i];
            bn->grad[co] += acc;
          }
        }
      }
      if (kn->needs_grad) {
        kn->ensure_grad();
        std::vector<float> cols_t(static_cast<std::size_t>(ckk) * hw);
        for (int s = 0; s < n; ++s) {
          detail::im2col(in->value.data() + static_cast<std::size_t>(s) * cin * hw, cin, h, w, k,
                         cols.data());
          detail::transpose(ckk, static_cast<int>(hw), cols.data(), cols_t.data());
          detail::gemm_nn(cout, ckk, static_cast<int>(hw),
                          dout + static_cast<std::size_t>(s) * cout * hw, cols_t.data(),
                          kn->grad.data(), true);
        }
      }
      if (in->needs_grad) {
        in->ensure_grad();
        std::vector<float> colgrad(static_cast<std::size_t>(ckk) * hw);
        for (int s = 0; s < n; ++s) {
          detail::gemm_tn(ckk, static_cast<int>(hw), cout, kn->value.data(),
                          dout + static_cast<std::size_t>(s) * cout * hw, colgrad.data());
          detail::col2im_add(colgrad.data(), cin, h, w, k,
                             in->grad.data() + static_cast<std::size_t>(s) * cin * hw);
        }
      }
    };
  }
  return node;
}

inline Var conv2d(const Var& input, const ParamPtr& kernel, const ParamPtr& bias) {
  return conv2d(input, from_param(kernel), from_param(bias));
}

// elementwise max(0,x); gradient at x == 0 is defined as 0
inline Var relu(const Var& input) {
  Tensor out(input->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = input->value[i] > 0.0f ? input->value[i] : 0.0f;
  Var node = detail::make_op(std::move(out), {input});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    node->backprop = [self, in]() {
      in->ensure_grad();
      for (std::int64_t i = 0; i < self->grad.size(); ++i) {
        if (in->value[i] > 0.0f) in->grad[i] += self->grad[i];
      }
    };
  }
  return node;
}

// softmax across the channel axis of [N,C,H,W], optionally restricted to a
// subset of channels (excluded channels get weight 0 and pass no gradient).
inline Var softmax_channels(const Var& input, const std::vector<int>& keep = {}) {
  const Tensor& x = input->value;
  if (x.rank() != 4) throw std::invalid_argument("softmax_channels: input must be rank 4");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<char> mask(static_cast<std::size_t>(c), keep.empty() ? 1 : 0);
  for (int idx : keep) {
    if (idx < 0 || idx >= c) throw std::invalid_argument("softmax_channels: subset index out of range");
    mask[static_cast<std::size_t>(idx)] = 1;
  }

  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t chw = static_cast<std::size_t>(c) * hw;
  Tensor out(x.shape());
  for (int s = 0; s < n; ++s) {
    const float* xs = x.data() + s * chw;
    float* os = out.data() + s * chw;
    for (std::size_t p = 0; p < hw; ++p) {
      float m = -std::numeric_limits<float>::infinity();
      for (int ch = 0; ch < c; ++ch) {
        if (mask[ch] && xs[ch * hw + p] > m) m = xs[ch * hw + p];
      }
      float denom = 0.0f;
      for (int ch = 0; ch < c; ++ch) {
        if (!mask[ch]) continue;
        const float e = std::exp(xs[ch * hw + p] - m);
        os[ch * hw + p] = e;
        denom += e;
      }
      for (int ch = 0; ch < c; ++ch) {
        os[ch * hw + p] = mask[ch] ? os[ch * hw + p] / denom : 0.0f;
      }
    }
  }

  Var node = detail::make_op(std::move(out), {input});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    node->backprop = [self, in, mask, n, c, hw, chw]() {
      in->ensure_grad();
      for (int s = 0; s < n; ++s) {
        const float* ss = self->value.data() + s * chw;
        const float* gs = self->grad.data() + s * chw;
        float* ds = in->grad.data() + s * chw;
        for (std::size_t p = 0; p < hw; ++p) {
          float dot = 0.0f;
          for (int ch = 0; ch < c; ++ch) {
            if (mask[ch]) dot += gs[ch * hw + p] * ss[ch * hw + p];
          }
          for (int ch = 0; ch < c; ++ch) {
            if (mask[ch]) ds[ch * hw + p] += ss[ch * hw + p] * (gs[ch * hw + p] - dot);
          }
        }
      }
    };
  }
  return node;
}

// [N,C,H,W] -> [N,C,1,1] spatial mean (accumulated in double)
inline Var global_avg_pool(const Var& input) {
  const Tensor& x = input->value;
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be rank 4");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, c, 1, 1});
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += src[i];
      out.at(s, ch, 0, 0) = static_cast<float>(acc / static_cast<double>(hw));
    }
  }
  Var node = detail::make_op(std::move(out), {input});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    node->backprop = [self, in, n, c, hw]() {
      in->ensure_grad();
      const float inv = 1.0f / static_cast<float>(hw);
      for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
          const float g = self->grad.at(s, ch, 0, 0) * inv;
          float* dst = in->grad.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
          for (std::size_t i = 0; i < hw; ++i) dst[i] += g;
        }
      }
    };
  }
  return node;
}

// input [N,Cin], weight [Cout,Cin], bias [Cout] -> [N,Cout]
inline Var fully_connected(const Var& input, const Var& weight, const Var& bias) {
  const Tensor& x = input->value;
  const Tensor& wt = weight->value;
  const Tensor& bt = bias->value;
  if (x.rank() != 2 || wt.rank() != 2) {
    throw std::invalid_argument("fully_connected: input and weight must be rank 2");
  }
  const int n = x.dim(0), cin = x.dim(1), cout = wt.dim(0);
  if (wt.dim(1) != cin) {
    throw std::invalid_argument("fully_connected: weight expects " + std::to_string(wt.dim(1)) +
                                " inputs, got " + std::to_string(cin));
  }
  if (bt.rank() != 1 || bt.dim(0) != cout) {
    throw std::invalid_argument("fully_connected: bias size mismatch");
  }
  Tensor out({n, cout});
  for (int s = 0; s < n; ++s) {
    for (int o = 0; o < cout; ++o) {
      float acc = bt[o];
      const float* xr = x.data() + static_cast<std::size_t>(s) * cin;
      const float* wr = wt.data() + static_cast<std::size_t>(o) * cin;
      for (int i = 0; i < cin; ++i) acc += xr[i] * wr[i];
      out.at(s, o) = acc;
    }
  }
  Var node = detail::make_op(std::move(out), {input, weight, bias});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    Node* wn = weight.get();
    Node* bn = bias.get();
    node->backprop = [self, in, wn, bn, n, cin, cout]() {
      for (int s = 0; s < n; ++s) {
        for (int o = 0; o < cout; ++o) {
          const float g = self->grad.at(s, o);
          if (bn->needs_grad) {
            bn->ensure_grad();
            bn->grad[o] += g;
          }
          if (wn->needs_grad) {
            wn->ensure_grad();
            float* wg = wn->grad.data() + static_cast<std::size_t>(o) * cin;
            const float* xr = in->value.data() + static_cast<std::size_t>(s) * cin;
            for (int i = 0; i < cin; ++i) wg[i] += g * xr[i];
          }
          if (in->needs_grad) {
            in->ensure_grad();
            float* xg = in->grad.data() + static_cast<std::size_t>(s) * cin;
            const float* wr = wn->value.data() + static_cast<std::size_t>(o) * cin;
            for (int i = 0; i < cin; ++i) xg[i] += g * wr[i];
          }
        }
      }
    };
  }
  return node;
}

inline Var fully_connected(const Var& input, const ParamPtr& weight, const ParamPtr& bias) {
  return fully_connected(input, from_param(weight), from_param(bias));
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor out(a->value.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  Var node = detail::make_op(std::move(out), {a, b});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* an = a.get();
    Node* bn = b.get();
    node->backprop = [self, an, bn]() {
      if (an->needs_grad) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) an->grad[i] += self->grad[i] * bn->value[i];
      }
      if (bn->needs_grad) {
        bn->ensure_grad();
        for (std::int64_t i = 0; i < self->grad.size(); ++i) bn->grad[i] += self->grad[i] * an->value[i];
      }
    };
  }
  return node;
}

// [N,C,H,W] -> [N,1,H,W]
inline Var sum_channels(const Var& input) {
  const Tensor& x = input->value;
  if (x.rank() != 4) throw std::invalid_argument("sum_channels: input must be rank 4");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, 1, h, w});
  for (int s = 0; s < n; ++s) {
    float* dst = out.data() + s * hw;
    std::fill(dst, dst + hw, 0.0f);
    for (int ch = 0; ch < c; ++ch) {
      const float* src = x.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] += src[i];
    }
  }
  Var node = detail::make_op(std::move(out), {input});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    node->backprop = [self, in, n, c, hw]() {
      in->ensure_grad();
      for (int s = 0; s < n; ++s) {
        const float* g = self->grad.data() + s * hw;
        for (int ch = 0; ch < c; ++ch) {
          float* dst = in->grad.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
          for (std::size_t i = 0; i < hw; ++i) dst[i] += g[i];
        }
      }
    };
  }
  return node;
}

// [N,Ca,H,W] ++ [N,Cb,H,W] -> [N,Ca+Cb,H,W]
inline Var concat_channels(const Var& a, const Var& b) {
  const Tensor& xa = a->value;
  const Tensor& xb = b->value;
  if (xa.rank() != 4 || xb.rank() != 4 || xa.dim(0) != xb.dim(0) || xa.dim(2) != xb.dim(2) ||
      xa.dim(3) != xb.dim(3)) {
    throw std::invalid_argument("concat_channels: shapes incompatible");
  }
  const int n = xa.dim(0), ca = xa.dim(1), cb = xb.dim(1), h = xa.dim(2), w = xa.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({n, ca + cb, h, w});
  for (int s = 0; s < n; ++s) {
    std::copy_n(xa.data() + static_cast<std::size_t>(s) * ca * hw, ca * hw,
                out.data() + static_cast<std::size_t>(s) * (ca + cb) * hw);
    std::copy_n(xb.data() + static_cast<std::size_t>(s) * cb * hw, cb * hw,
                out.data() + (static_cast<std::size_t>(s) * (ca + cb) + ca) * hw);
  }
  Var node = detail::make_op(std::move(out), {a, b});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* an = a.get();
    Node* bn = b.get();
    node->backprop = [self, an, bn, n, ca, cb, hw]() {
      for (int s = 0; s < n; ++s) {
        const float* g = self->grad.data() + static_cast<std::size_t>(s) * (ca + cb) * hw;
        if (an->needs_grad) {
          an->ensure_grad();
          float* dst = an->grad.data() + static_cast<std::size_t>(s) * ca * hw;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * hw; ++i) dst[i] += g[i];
        }
        if (bn->needs_grad) {
          bn->ensure_grad();
          float* dst = bn->grad.data() + static_cast<std::size_t>(s) * cb * hw;
          const float* gb = g + static_cast<std::size_t>(ca) * hw;
          for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * hw; ++i) dst[i] += gb[i];
        }
      }
    };
  }
  return node;
}

// stack [N,C,H,W] scaled per channel by weights [N,C]
inline Var scale_channels(const Var& stack, const Var& weights) {
  const Tensor& x = stack->value;
  const Tensor& wt = weights->value;
  if (x.rank() != 4 || wt.rank() != 2 || wt.dim(0) != x.dim(0) || wt.dim(1) != x.dim(1)) {
    throw std::invalid_argument("scale_channels: weights must be [N,C] matching the stack");
  }
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out(x.shape());
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      const float sc = wt.at(s, ch);
      const float* src = x.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
      float* dst = out.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * sc;
    }
  }
  Var node = detail::make_op(std::move(out), {stack, weights});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* sn = stack.get();
    Node* wn = weights.get();
    node->backprop = [self, sn, wn, n, c, hw]() {
      for (int s = 0; s < n; ++s) {
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t base = (static_cast<std::size_t>(s) * c + ch) * hw;
          const float* g = self->grad.data() + base;
          if (sn->needs_grad) {
            sn->ensure_grad();
            const float sc = wn->value.at(s, ch);
            float* dst = sn->grad.data() + base;
            for (std::size_t i = 0; i < hw; ++i) dst[i] += g[i] * sc;
          }
          if (wn->needs_grad) {
            wn->ensure_grad();
            const float* src = sn->value.data() + base;
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(g[i]) * src[i];
            wn->grad.at(s, ch) += static_cast<float>(acc);
          }
        }
      }
    };
  }
  return node;
}

inline Var reshape(const Var& input, std::vector<int> shape) {
  Tensor out = input->value.reshaped(std::move(shape));
  Var node = detail::make_op(std::move(out), {input});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* in = input.get();
    node->backprop = [self, in]() {
      in->ensure_grad();
      for (std::int64_t i = 0; i < self->grad.size(); ++i) in->grad[i] += self->grad[i];
    };
  }
  return node;
}

// mean of squared differences, accumulated in double; result is a scalar node
inline Var mse_loss(const Var& prediction, const Tensor& target) {
  require_same_shape(prediction->value, target, "mse_loss");
  const std::int64_t count = prediction->value.size();
  double acc = 0.0;
  for (std::int64_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(prediction->value[i]) - target[i];
    acc += d * d;
  }
  Tensor out({1});
  out[0] = static_cast<float>(acc / static_cast<double>(count));
  Var node = detail::make_op(std::move(out), {prediction});
  if (node->needs_grad) {
    Node* self = node.get();
    Node* pred = prediction.get();
    Tensor tgt = target;
    node->backprop = [self, pred, tgt = std::move(tgt), count]() {
      pred->ensure_grad();
      const float g = self->grad[0] * 2.0f / static_cast<float>(count);
      for (std::int64_t i = 0; i < count; ++i) {
        pred->grad[i] += g * (pred->value[i] - tgt[i]);
      }
    };
  }
  return node;
}

// Accumulates d(loss)/d(parameter) into every Parameter reachable from the
// scalar loss node. A graph can only be walked once.
inline void backward(const Var& loss) {
  if (loss->value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar");
  }
  if (loss->backward_done) {
    throw std::logic_error("backward: this graph has already been differentiated");
  }
  loss->backward_done = true;

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  seen.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next].get();
      ++next;
      if (child->needs_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop();
  }
  for (Node* node : order) {
    if (node->param != nullptr && !node->grad.empty()) {
      Tensor& pg = node->param->grad;
      for (std::int64_t i = 0; i < pg.size(); ++i) pg[i] += node->grad[i];
    }
  }
}

}  // namespace denfuse
