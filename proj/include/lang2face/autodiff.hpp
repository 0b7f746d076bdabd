#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <new>
#include <vector>

#include "lang2face/tensor.hpp"

namespace lang2face {

// Reverse-mode autodiff on a define-by-run tape. Nodes own their value;
// gradients are allocated lazily during backward. Parameter leaves flush
// their gradient into an external accumulator owned by the ParamStore,
// so one tape step can be discarded wholesale afterwards.
template <typename S>
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  using EMat =
      Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<EMat>;
  using CMap = Eigen::Map<const EMat>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

  const Tensor<S>& val(Var v) const { return nodes_[size_t(v.id)].value; }
  const Tensor<S>& grad(Var v) const { return nodes_[size_t(v.id)].grad; }
  bool has_grad(Var v) const { return !nodes_[size_t(v.id)].grad.data.empty(); }
  double scalar(Var v) const { return double(val(v).data.at(0)); }

  Var constant(Tensor<S> t) { return push(std::move(t), false, nullptr); }

  // Leaf whose gradient is accumulated into *grad_out (may be null when
  // only downstream gradients are of interest).
  Var param(const Tensor<S>& value, Tensor<S>* grad_out) {
    Var v = push(value, true, nullptr);
    Node& n = nodes_[size_t(v.id)];
    n.backward = [grad_out](Tape& t, Node& self) {
      if (grad_out == nullptr) return;
      if (grad_out->data.empty()) *grad_out = Tensor<S>(self.value.shape);
      for (size_t i = 0; i < self.grad.data.size(); ++i)
        grad_out->data[i] += self.grad.data[i];
      (void)t;
    };
    return v;
  }

  // ---- elementwise ----

  Var add(Var a, Var b) { return ew2(a, b, [](S x, S y) { return x + y; },
                                     [](S, S) { return S(1); },
                                     [](S, S) { return S(1); }); }
  Var sub(Var a, Var b) { return ew2(a, b, [](S x, S y) { return x - y; },
                                     [](S, S) { return S(1); },
                                     [](S, S) { return S(-1); }); }
  Var mul(Var a, Var b) { return ew2(a, b, [](S x, S y) { return x * y; },
                                     [](S, S y) { return y; },
                                     [](S x, S) { return x; }); }

  // a*x + b, elementwise
  Var affine(Var x, double a, double b) {
    return ew1(x, [a, b](S v) { return S(a * double(v) + b); },
               [a](S) { return S(a); });
  }
  Var scale(Var x, double a) { return affine(x, a, 0.0); }

  Var relu(Var x) {
    return ew1(x, [](S v) { return v > S(0) ? v : S(0); },
               [](S v) { return v > S(0) ? S(1) : S(0); });
  }
  Var leaky_relu(Var x, double slope = 0.2) {
    return ew1(x, [slope](S v) { return v > S(0) ? v : S(slope * double(v)); },
               [slope](S v) { return v > S(0) ? S(1) : S(slope); });
  }
  // activations whose derivative comes from the stored output
  Var tanh_(Var x) {
    return ew1_from_out(x, [](S v) { return std::tanh(v); },
                        [](S y) { return S(1) - y * y; });
  }
  Var sigmoid_(Var x) {
    return ew1_from_out(x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
                        [](S y) { return y * (S(1) - y); });
  }
  Var exp_(Var x) {
    return ew1_from_out(x, [](S v) { return std::exp(v); },
                        [](S y) { return y; });
  }
  Var log_(Var x) {
    return ew1(x, [](S v) { return S(std::log(double(v))); },
               [](S v) { return S(1.0 / double(v)); });
  }
  Var square(Var x) {
    return ew1(x, [](S v) { return v * v; }, [](S v) { return S(2) * v; });
  }
  Var abs_(Var x) {
    return ew1(x, [](S v) { return S(std::abs(double(v))); },
               [](S v) { return v >= S(0) ? S(1) : S(-1); });
  }
  Var clamp(Var x, double lo, double hi) {
    return ew1(x,
               [lo, hi](S v) {
                 double d = double(v);
                 return S(d < lo ? lo : (d > hi ? hi : d));
               },
               [lo, hi](S v) {
                 double d = double(v);
                 return (d >= lo && d <= hi) ? S(1) : S(0);
               });
  }

  // ---- shape ops ----

  Var reshape(Var x, std::vector<int> shape) {
    Tensor<S> out(std::move(shape));
    if (out.numel() != val(x).numel())
      throw ShapeMismatch("reshape: numel mismatch");
    out.data = val(x).data;
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (size_t i = 0; i < self.grad.data.size(); ++i)
        gx.data[i] += self.grad.data[i];
    });
    return v;
  }

  Var permute(Var x, std::vector<int> perm) {
    const Tensor<S>& in = val(x);
    if (perm.size() != size_t(in.rank()))
      throw ShapeMismatch("permute: rank mismatch");
    std::vector<int> shp(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) shp[i] = in.shape[size_t(perm[i])];
    Tensor<S> out(shp);
    std::vector<int64_t> in_strides = strides_of(in.shape);
    std::vector<int64_t> out_strides = strides_of(shp);
    int r = in.rank();
    std::vector<int> idx(size_t(r), 0);
    for (int64_t o = 0; o < out.numel(); ++o) {
      int64_t rem = o;
      int64_t src = 0;
      for (int d = 0; d < r; ++d) {
        int q = int(rem / out_strides[size_t(d)]);
        rem %= out_strides[size_t(d)];
        src += int64_t(q) * in_strides[size_t(perm[size_t(d)])];
      }
      out.data[size_t(o)] = in.data[size_t(src)];
    }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, perm](Tape& t, Node& self) {
      const Tensor<S>& g = self.grad;
      Tensor<S>& gx = t.grad_buf(x);
      std::vector<int64_t> in_strides = strides_of(gx.shape);
      std::vector<int64_t> out_strides = strides_of(g.shape);
      int r = int(perm.size());
      for (int64_t o = 0; o < g.numel(); ++o) {
        int64_t rem = o;
        int64_t src = 0;
        for (int d = 0; d < r; ++d) {
          int q = int(rem / out_strides[size_t(d)]);
          rem %= out_strides[size_t(d)];
          src += int64_t(q) * in_strides[size_t(perm[size_t(d)])];
        }
        gx.data[size_t(src)] += g.data[size_t(o)];
      }
    });
    return v;
  }

  // concat along `axis`
  Var concat(Var a, Var b, int axis) {
    const Tensor<S>& ta = val(a);
    const Tensor<S>& tb = val(b);
    if (ta.rank() != tb.rank()) throw ShapeMismatch("concat: rank mismatch");
    for (int d = 0; d < ta.rank(); ++d)
      if (d != axis && ta.shape[size_t(d)] != tb.shape[size_t(d)])
        throw ShapeMismatch("concat: shape mismatch");
    std::vector<int> shp = ta.shape;
    shp[size_t(axis)] += tb.shape[size_t(axis)];
    auto [outer, inner] = split_at(ta.shape, axis);
    int na = ta.shape[size_t(axis)], nb = tb.shape[size_t(axis)];
    Tensor<S> out(shp);
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(ta.ptr() + o * na * inner, size_t(na * inner),
                  out.ptr() + o * (na + nb) * inner);
      std::copy_n(tb.ptr() + o * nb * inner, size_t(nb * inner),
                  out.ptr() + o * (na + nb) * inner + na * inner);
    }
    Var v = push(std::move(out), needs(a) || needs(b), nullptr);
    set_backward(v, [a, b, axis, outer, inner, na, nb](Tape& t, Node& self) {
      const Tensor<S>& g = self.grad;
      if (t.needs(a)) {
        Tensor<S>& ga = t.grad_buf(a);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < na * inner; ++i)
            ga.data[size_t(o * na * inner + i)] +=
                g.data[size_t(o * (na + nb) * inner + i)];
      }
      if (t.needs(b)) {
        Tensor<S>& gb = t.grad_buf(b);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < nb * inner; ++i)
            gb.data[size_t(o * nb * inner + i)] +=
                g.data[size_t(o * (na + nb) * inner + na * inner + i)];
      }
    });
    return v;
  }

  Var slice(Var x, int axis, int start, int len) {
    const Tensor<S>& in = val(x);
    auto [outer, inner] = split_at(in.shape, axis);
    int n = in.shape[size_t(axis)];
    if (start < 0 || start + len > n) throw ShapeMismatch("slice: out of range");
    std::vector<int> shp = in.shape;
    shp[size_t(axis)] = len;
    Tensor<S> out(shp);
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(in.ptr() + (o * n + start) * inner, size_t(len * inner),
                  out.ptr() + o * len * inner);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, axis, start, len, outer, inner, n](Tape& t, Node& self) {
      (void)axis;
      Tensor<S>& gx = t.grad_buf(x);
      const Tensor<S>& g = self.grad;
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < len * inner; ++i)
          gx.data[size_t((o * n + start) * inner + i)] +=
              g.data[size_t(o * len * inner + i)];
    });
    return v;
  }

  // Insert a broadcast axis of size `count` at position `axis`.
  Var expand_dim(Var x, int axis, int count) {
    const Tensor<S>& in = val(x);
    auto [outer, inner] = split_expand(in.shape, axis);
    std::vector<int> shp = in.shape;
    shp.insert(shp.begin() + axis, count);
    Tensor<S> out(shp);
    for (int64_t o = 0; o < outer; ++o)
      for (int c = 0; c < count; ++c)
        std::copy_n(in.ptr() + o * inner, size_t(inner),
                    out.ptr() + (o * count + c) * inner);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, count, outer, inner](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      const Tensor<S>& g = self.grad;
      for (int64_t o = 0; o < outer; ++o)
        for (int c = 0; c < count; ++c)
          for (int64_t i = 0; i < inner; ++i)
            gx.data[size_t(o * inner + i)] +=
                g.data[size_t((o * count + c) * inner + i)];
    });
    return v;
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const Tensor<S>& ta = val(a);
    const Tensor<S>& tb = val(b);
    if (ta.rank() != 2 || tb.rank() != 2 || ta.shape[1] != tb.shape[0])
      throw DimMismatch("matmul: " + shape_str(ta.shape) + " x " +
                        shape_str(tb.shape));
    int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor<S> out({m, n});
    CMap A(ta.ptr(), m, k), B(tb.ptr(), k, n);
    Map C(out.ptr(), m, n);
    C.noalias() = A * B;
    Var v = push(std::move(out), needs(a) || needs(b), nullptr);
    set_backward(v, [a, b, m, k, n](Tape& t, Node& self) {
      CMap G(self.grad.ptr(), m, n);
      if (t.needs(a)) {
        CMap B(t.val(b).ptr(), k, n);
        Map GA(t.grad_buf(a).ptr(), m, k);
        GA.noalias() += G * B.transpose();
      }
      if (t.needs(b)) {
        CMap A(t.val(a).ptr(), m, k);
        Map GB(t.grad_buf(b).ptr(), k, n);
        GB.noalias() += A.transpose() * G;
      }
    });
    return v;
  }

  // batched matmul: [B,M,K] x [B,K,N] -> [B,M,N]
  Var bmm(Var a, Var b) {
    const Tensor<S>& ta = val(a);
    const Tensor<S>& tb = val(b);
    if (ta.rank() != 3 || tb.rank() != 3 || ta.shape[0] != tb.shape[0] ||
        ta.shape[2] != tb.shape[1])
      throw DimMismatch("bmm: " + shape_str(ta.shape) + " x " +
                        shape_str(tb.shape));
    int bs = ta.shape[0], m = ta.shape[1], k = ta.shape[2], n = tb.shape[2];
    Tensor<S> out({bs, m, n});
    for (int i = 0; i < bs; ++i) {
      CMap A(ta.ptr() + int64_t(i) * m * k, m, k);
      CMap B(tb.ptr() + int64_t(i) * k * n, k, n);
      Map C(out.ptr() + int64_t(i) * m * n, m, n);
      C.noalias() = A * B;
    }
    Var v = push(std::move(out), needs(a) || needs(b), nullptr);
    set_backward(v, [a, b, bs, m, k, n](Tape& t, Node& self) {
      for (int i = 0; i < bs; ++i) {
        CMap G(self.grad.ptr() + int64_t(i) * m * n, m, n);
        if (t.needs(a)) {
          CMap B(t.val(b).ptr() + int64_t(i) * k * n, k, n);
          Map GA(t.grad_buf(a).ptr() + int64_t(i) * m * k, m, k);
          GA.noalias() += G * B.transpose();
        }
        if (t.needs(b)) {
          CMap A(t.val(a).ptr() + int64_t(i) * m * k, m, k);
          Map GB(t.grad_buf(b).ptr() + int64_t(i) * k * n, k, n);
          GB.noalias() += A.transpose() * G;
        }
      }
    });
    return v;
  }

  Var bias_add_row(Var x, Var b) {  // [B,N] + [N]
    const Tensor<S>& tx = val(x);
    const Tensor<S>& tb = val(b);
    if (tx.rank() != 2 || tb.rank() != 1 || tx.shape[1] != tb.shape[0])
      throw DimMismatch("bias_add_row");
    Tensor<S> out = tx;
    int rows = tx.shape[0], cols = tx.shape[1];
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) out.at(r, c) += tb[size_t(c)];
    Var v = push(std::move(out), needs(x) || needs(b), nullptr);
    set_backward(v, [x, b, rows, cols](Tape& t, Node& self) {
      if (t.needs(x)) {
        Tensor<S>& gx = t.grad_buf(x);
        for (size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] += self.grad.data[i];
      }
      if (t.needs(b)) {
        Tensor<S>& gb = t.grad_buf(b);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c)
            gb[size_t(c)] += self.grad.at(r, c);
      }
    });
    return v;
  }

  // ---- reductions ----

  Var sum_all(Var x) {
    const Tensor<S>& in = val(x);
    double s = 0;
    for (S v : in.data) s += double(v);
    Var v = push(Tensor<S>::scalar(S(s)), needs(x), nullptr);
    set_backward(v, [x](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      S g = self.grad[0];
      for (auto& e : gx.data) e += g;
    });
    return v;
  }
  Var mean_all(Var x) { return scale(sum_all(x), 1.0 / double(val(x).numel())); }

  Var sum_lastdim(Var x) {
    const Tensor<S>& in = val(x);
    int k = in.shape.back();
    int64_t rows = in.numel() / k;
    std::vector<int> shp(in.shape.begin(), in.shape.end() - 1);
    if (shp.empty()) shp = {1};
    Tensor<S> out(shp);
    for (int64_t r = 0; r < rows; ++r) {
      double s = 0;
      for (int i = 0; i < k; ++i) s += double(in.data[size_t(r * k + i)]);
      out.data[size_t(r)] = S(s);
    }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, rows, k](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int64_t r = 0; r < rows; ++r)
        for (int i = 0; i < k; ++i)
          gx.data[size_t(r * k + i)] += self.grad.data[size_t(r)];
    });
    return v;
  }

  Var gather_diag(Var x) {  // [B,B] -> [B]
    const Tensor<S>& in = val(x);
    if (in.rank() != 2 || in.shape[0] != in.shape[1])
      throw DimMismatch("gather_diag expects square matrix");
    int b = in.shape[0];
    Tensor<S> out({b});
    for (int i = 0; i < b; ++i) out[size_t(i)] = in.at(i, i);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, b](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int i = 0; i < b; ++i) gx.at(i, i) += self.grad[size_t(i)];
    });
    return v;
  }

  // ---- softmax family ----

  Var softmax_lastdim(Var x) {
    const Tensor<S>& in = val(x);
    int k = in.shape.back();
    int64_t rows = in.numel() / k;
    Tensor<S> out(in.shape);
    for (int64_t r = 0; r < rows; ++r)
      softmax_row(in.ptr() + r * k, out.ptr() + r * k, k);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, rows, k](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int64_t r = 0; r < rows; ++r) {
        const S* y = self.value.ptr() + r * k;
        const S* g = self.grad.ptr() + r * k;
        double dot = 0;
        for (int i = 0; i < k; ++i) dot += double(g[i]) * double(y[i]);
        for (int i = 0; i < k; ++i)
          gx.data[size_t(r * k + i)] += S(double(y[i]) * (double(g[i]) - dot));
      }
    });
    return v;
  }

  Var log_softmax_lastdim(Var x) {
    const Tensor<S>& in = val(x);
    int k = in.shape.back();
    int64_t rows = in.numel() / k;
    Tensor<S> out(in.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const S* p = in.ptr() + r * k;
      double mx = -1e300;
      for (int i = 0; i < k; ++i) mx = std::max(mx, double(p[i]));
      double lse = 0;
      for (int i = 0; i < k; ++i) lse += std::exp(double(p[i]) - mx);
      lse = mx + std::log(lse);
      for (int i = 0; i < k; ++i) out.data[size_t(r * k + i)] = S(double(p[i]) - lse);
    }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, rows, k](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int64_t r = 0; r < rows; ++r) {
        const S* y = self.value.ptr() + r * k;
        const S* g = self.grad.ptr() + r * k;
        double gsum = 0;
        for (int i = 0; i < k; ++i) gsum += double(g[i]);
        for (int i = 0; i < k; ++i)
          gx.data[size_t(r * k + i)] +=
              S(double(g[i]) - std::exp(double(y[i])) * gsum);
      }
    });
    return v;
  }

  // softmax over the last dim of [B,R,N] with a 0/1 word mask [B,N];
  // masked entries get exactly zero weight.
  Var masked_softmax_words(Var logits, const Tensor<S>& mask) {
    const Tensor<S>& in = val(logits);
    if (in.rank() != 3 || mask.rank() != 2 || in.shape[0] != mask.shape[0] ||
        in.shape[2] != mask.shape[1])
      throw DimMismatch("masked_softmax_words");
    int b = in.shape[0], rgn = in.shape[1], n = in.shape[2];
    Tensor<S> out(in.shape);
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < rgn; ++j) {
        const S* p = &in.at(i, j, 0);
        S* q = &out.at(i, j, 0);
        double mx = -1e300;
        for (int w = 0; w < n; ++w)
          if (mask.at(i, w) > S(0)) mx = std::max(mx, double(p[w]));
        double z = 0;
        for (int w = 0; w < n; ++w)
          z += mask.at(i, w) > S(0) ? std::exp(double(p[w]) - mx) : 0.0;
        for (int w = 0; w < n; ++w)
          q[w] = mask.at(i, w) > S(0) ? S(std::exp(double(p[w]) - mx) / z) : S(0);
      }
    Var v = push(std::move(out), needs(logits), nullptr);
    Tensor<S> mask_copy = mask;
    set_backward(v, [logits, b, rgn, n, mask_copy](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(logits);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < rgn; ++j) {
          const S* y = &self.value.at(i, j, 0);
          const S* g = &self.grad.at(i, j, 0);
          double dot = 0;
          for (int w = 0; w < n; ++w) dot += double(g[w]) * double(y[w]);
          for (int w = 0; w < n; ++w)
            if (mask_copy.at(i, w) > S(0))
              gx.at(i, j, w) += S(double(y[w]) * (double(g[w]) - dot));
        }
    });
    return v;
  }

  // out[i,j] = (1/gamma) log sum_{t: mask[i,t]=1} exp(gamma*x[i,j,t])
  Var masked_lse_words(Var x, const Tensor<S>& mask, double gamma) {
    const Tensor<S>& in = val(x);
    if (in.rank() != 3 || mask.rank() != 2 || in.shape[0] != mask.shape[0] ||
        in.shape[2] != mask.shape[1])
      throw DimMismatch("masked_lse_words");
    int b = in.shape[0], bj = in.shape[1], n = in.shape[2];
    Tensor<S> out({b, bj});
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < bj; ++j) {
        double mx = -1e300;
        for (int t = 0; t < n; ++t)
          if (mask.at(i, t) > S(0))
            mx = std::max(mx, gamma * double(in.at(i, j, t)));
        double z = 0;
        for (int t = 0; t < n; ++t)
          if (mask.at(i, t) > S(0))
            z += std::exp(gamma * double(in.at(i, j, t)) - mx);
        out.at(i, j) = S((mx + std::log(z)) / gamma);
      }
    Var v = push(std::move(out), needs(x), nullptr);
    Tensor<S> mask_copy = mask;
    set_backward(v, [x, b, bj, n, mask_copy, gamma](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      const Tensor<S>& in = t.val(x);
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < bj; ++j) {
          double mx = -1e300;
          for (int tt = 0; tt < n; ++tt)
            if (mask_copy.at(i, tt) > S(0))
              mx = std::max(mx, gamma * double(in.at(i, j, tt)));
          double z = 0;
          for (int tt = 0; tt < n; ++tt)
            if (mask_copy.at(i, tt) > S(0))
              z += std::exp(gamma * double(in.at(i, j, tt)) - mx);
          double g = double(self.grad.at(i, j));
          for (int tt = 0; tt < n; ++tt)
            if (mask_copy.at(i, tt) > S(0))
              gx.at(i, j, tt) +=
                  S(g * std::exp(gamma * double(in.at(i, j, tt)) - mx) / z);
        }
    });
    return v;
  }

  Var l2_normalize_lastdim(Var x, double eps = 1e-8) {
    const Tensor<S>& in = val(x);
    int k = in.shape.back();
    int64_t rows = in.numel() / k;
    Tensor<S> out(in.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const S* p = in.ptr() + r * k;
      double nrm = 0;
      for (int i = 0; i < k; ++i) nrm += double(p[i]) * double(p[i]);
      nrm = std::max(std::sqrt(nrm), eps);
      for (int i = 0; i < k; ++i) out.data[size_t(r * k + i)] = S(double(p[i]) / nrm);
    }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, rows, k, eps](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      const Tensor<S>& in = t.val(x);
      for (int64_t r = 0; r < rows; ++r) {
        const S* p = in.ptr() + r * k;
        const S* y = self.value.ptr() + r * k;
        const S* g = self.grad.ptr() + r * k;
        double nrm = 0;
        for (int i = 0; i < k; ++i) nrm += double(p[i]) * double(p[i]);
        nrm = std::max(std::sqrt(nrm), eps);
        double dot = 0;
        for (int i = 0; i < k; ++i) dot += double(g[i]) * double(y[i]);
        for (int i = 0; i < k; ++i)
          gx.data[size_t(r * k + i)] += S((double(g[i]) - double(y[i]) * dot) / nrm);
      }
    });
    return v;
  }

  // ---- conv / image ops ----

  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor<S>& tx = val(x);
    const Tensor<S>& tw = val(w);
    if (tx.rank() != 4 || tw.rank() != 4 || tx.shape[1] != tw.shape[1])
      throw DimMismatch("conv2d: " + shape_str(tx.shape) + " w " +
                        shape_str(tw.shape));
    int B = tx.shape[0], C = tx.shape[1], H = tx.shape[2], W = tx.shape[3];
    int OC = tw.shape[0], KH = tw.shape[2], KW = tw.shape[3];
    int OH = (H + 2 * pad - KH) / stride + 1;
    int OW = (W + 2 * pad - KW) / stride + 1;
    int ckk = C * KH * KW;
    int64_t N = int64_t(B) * OH * OW;
    Tensor<S> out({B, OC, OH, OW});
    {
      S* cols = scratch_a(size_t(ckk) * N);
      im2col(tx, KH, KW, stride, pad, OH, OW, cols);
      Map out2(scratch_b(size_t(OC) * N), OC, N);
      CMap A(cols, ckk, N);
      CMap Wm(tw.ptr(), OC, ckk);
      out2.noalias() = Wm * A;  // [OC, N], column n = (b, oh, ow)
      const Tensor<S>& tb = val(b);
      for (int oc = 0; oc < OC; ++oc) {
        S bias = tb[size_t(oc)];
        const S* src = out2.data() + int64_t(oc) * N;  // row-major map
        for (int n = 0; n < B; ++n) {
          S* dst = &out.at(n, oc, 0, 0);
          const S* s0 = src + int64_t(n) * OH * OW;
          for (int i = 0; i < OH * OW; ++i) dst[i] = s0[i] + bias;
        }
      }
    }
    Var v = push(std::move(out), needs(x) || needs(w) || needs(b), nullptr);
    set_backward(v, [x, w, b, B, C, H, W, OC, KH, KW, OH, OW, stride, pad, ckk,
                     N](Tape& t, Node& self) {
      // gradient as [OC, N]
      Map g2(t.scratch_c(size_t(OC) * N), OC, N);
      for (int oc = 0; oc < OC; ++oc) {
        S* dst = g2.data() + int64_t(oc) * N;
        for (int n = 0; n < B; ++n)
          std::copy_n(&self.grad.at(n, oc, 0, 0), OH * OW,
                      dst + int64_t(n) * OH * OW);
      }
      if (t.needs(b)) {
        Tensor<S>& gb = t.grad_buf(b);
        for (int oc = 0; oc < OC; ++oc) gb[size_t(oc)] += S(g2.row(oc).sum());
      }
      if (t.needs(w)) {
        // recompute im2col; cheaper than holding it across the step
        S* cols = t.scratch_a(size_t(ckk) * N);
        im2col(t.val(x), KH, KW, stride, pad, OH, OW, cols);
        CMap A(cols, ckk, N);
        Map GW(t.grad_buf(w).ptr(), OC, ckk);
        GW.noalias() += g2 * A.transpose();
      }
      if (t.needs(x)) {
        CMap Wm(t.val(w).ptr(), OC, ckk);
        Map dcols(t.scratch_b(size_t(ckk) * N), ckk, N);
        dcols.noalias() = Wm.transpose() * g2;  // [ckk, N]
        Tensor<S>& gx = t.grad_buf(x);
        for (int c = 0; c < C; ++c)
          for (int kh = 0; kh < KH; ++kh)
            for (int kw = 0; kw < KW; ++kw) {
              const S* drow =
                  dcols.data() + int64_t((c * KH + kh) * KW + kw) * N;
              int shift = kw - pad;
              for (int n = 0; n < B; ++n)
                for (int oh = 0; oh < OH; ++oh) {
                  int ih = oh * stride - pad + kh;
                  if (ih < 0 || ih >= H) continue;
                  const S* src = drow + (int64_t(n) * OH + oh) * OW;
                  S* dst = &gx.at(n, c, ih, 0);
                  if (stride == 1) {
                    int ow0 = std::max(0, -shift);
                    int ow1 = std::min(OW, W - shift);
                    for (int ow = ow0; ow < ow1; ++ow)
                      dst[ow + shift] += src[ow];
                  } else {
                    for (int ow = 0; ow < OW; ++ow) {
                      int iw = ow * stride + shift;
                      if (iw >= 0 && iw < W) dst[iw] += src[ow];
                    }
                  }
                }
            }
      }
    });
    return v;
  }

  Var upsample2x(Var x) {  // nearest-neighbor
    const Tensor<S>& in = val(x);
    if (in.rank() != 4) throw DimMismatch("upsample2x expects NCHW");
    int B = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    Tensor<S> out({B, C, 2 * H, 2 * W});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            S v0 = in.at(n, c, h, w);
            out.at(n, c, 2 * h, 2 * w) = v0;
            out.at(n, c, 2 * h, 2 * w + 1) = v0;
            out.at(n, c, 2 * h + 1, 2 * w) = v0;
            out.at(n, c, 2 * h + 1, 2 * w + 1) = v0;
          }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, B, C, H, W](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              gx.at(n, c, h, w) += self.grad.at(n, c, 2 * h, 2 * w) +
                                   self.grad.at(n, c, 2 * h, 2 * w + 1) +
                                   self.grad.at(n, c, 2 * h + 1, 2 * w) +
                                   self.grad.at(n, c, 2 * h + 1, 2 * w + 1);
    });
    return v;
  }

  // repeat by integer factor (nearest); factor may be 1
  Var upsample_nearest(Var x, int factor) {
    Var v = x;
    for (int f = 1; f < factor; f *= 2) v = upsample2x(v);
    return v;
  }

  Var avgpool_global(Var x) {  // [B,C,H,W] -> [B,C]
    const Tensor<S>& in = val(x);
    if (in.rank() != 4) throw DimMismatch("avgpool_global expects NCHW");
    int B = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    Tensor<S> out({B, C});
    double inv = 1.0 / (double(H) * W);
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) s += double(in.at(n, c, h, w));
        out.at(n, c) = S(s * inv);
      }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, B, C, H, W, inv](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
          S g = S(double(self.grad.at(n, c)) * inv);
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) gx.at(n, c, h, w) += g;
        }
    });
    return v;
  }

  Var tile_hw(Var x, int H, int W) {  // [B,C] -> [B,C,H,W]
    const Tensor<S>& in = val(x);
    if (in.rank() != 2) throw DimMismatch("tile_hw expects [B,C]");
    int B = in.shape[0], C = in.shape[1];
    Tensor<S> out({B, C, H, W});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        S v0 = in.at(n, c);
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) out.at(n, c, h, w) = v0;
      }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, B, C, H, W](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
          double s = 0;
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) s += double(self.grad.at(n, c, h, w));
          gx.at(n, c) += S(s);
        }
    });
    return v;
  }

  Var bias_add_ch(Var x, Var b) {  // [B,C,H,W] + [C]
    const Tensor<S>& tx = val(x);
    const Tensor<S>& tb = val(b);
    if (tx.rank() != 4 || tb.rank() != 1 || tx.shape[1] != tb.shape[0])
      throw DimMismatch("bias_add_ch");
    int B = tx.shape[0], C = tx.shape[1], H = tx.shape[2], W = tx.shape[3];
    Tensor<S> out = tx;
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        S v0 = tb[size_t(c)];
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) out.at(n, c, h, w) += v0;
      }
    Var v = push(std::move(out), needs(x) || needs(b), nullptr);
    set_backward(v, [x, b, B, C, H, W](Tape& t, Node& self) {
      if (t.needs(x)) {
        Tensor<S>& gx = t.grad_buf(x);
        for (size_t i = 0; i < gx.data.size(); ++i)
          gx.data[i] += self.grad.data[i];
      }
      if (t.needs(b)) {
        Tensor<S>& gb = t.grad_buf(b);
        for (int n = 0; n < B; ++n)
          for (int c = 0; c < C; ++c) {
            double s = 0;
            for (int h = 0; h < H; ++h)
              for (int w = 0; w < W; ++w) s += double(self.grad.at(n, c, h, w));
            gb[size_t(c)] += S(s);
          }
      }
    });
    return v;
  }

  // per-position normalization across channels (no coupling between
  // pixels, so local feature edits stay local)
  Var pixel_norm(Var x, double eps = 1e-6) {
    const Tensor<S>& in = val(x);
    if (in.rank() != 4) throw DimMismatch("pixel_norm expects NCHW");
    int B = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    int HW = H * W;
    Tensor<S> out({B, C, H, W});
    for (int n = 0; n < B; ++n)
      for (int i = 0; i < HW; ++i) {
        const S* p = &in.data[size_t(int64_t(n) * C * HW + i)];
        S* q = &out.data[size_t(int64_t(n) * C * HW + i)];
        double ss = 0;
        for (int c = 0; c < C; ++c) {
          double v = double(p[size_t(c) * HW]);
          ss += v * v;
        }
        double inv = 1.0 / std::sqrt(ss / C + eps);
        for (int c = 0; c < C; ++c)
          q[size_t(c) * HW] = S(double(p[size_t(c) * HW]) * inv);
      }
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, B, C, HW, eps](Tape& t, Node& self) {
      const Tensor<S>& in = t.val(x);
      Tensor<S>& gx = t.grad_buf(x);
      for (int n = 0; n < B; ++n)
        for (int i = 0; i < HW; ++i) {
          const S* p = &in.data[size_t(int64_t(n) * C * HW + i)];
          const S* g = &self.grad.data[size_t(int64_t(n) * C * HW + i)];
          S* gq = &gx.data[size_t(int64_t(n) * C * HW + i)];
          double ss = 0, dot = 0;
          for (int c = 0; c < C; ++c) {
            double v = double(p[size_t(c) * HW]);
            ss += v * v;
            dot += v * double(g[size_t(c) * HW]);
          }
          double m = ss / C + eps;
          double inv = 1.0 / std::sqrt(m);
          // y_c = x_c / sqrt(mean_c(x^2)+eps)
          for (int c = 0; c < C; ++c) {
            double v = double(p[size_t(c) * HW]);
            gq[size_t(c) * HW] +=
                S(inv * (double(g[size_t(c) * HW]) - v * dot / (C * m)));
          }
        }
    });
    return v;
  }

  // per-sample, per-channel normalization with affine parameters
  Var instance_norm(Var x, Var gamma, Var beta, double eps = 1e-5) {
    const Tensor<S>& in = val(x);
    if (in.rank() != 4) throw DimMismatch("instance_norm expects NCHW");
    int B = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    int M = H * W;
    const Tensor<S>& tg = val(gamma);
    const Tensor<S>& tb = val(beta);
    if (tg.shape != std::vector<int>{C} || tb.shape != std::vector<int>{C})
      throw DimMismatch("instance_norm affine shape");
    Tensor<S> out({B, C, H, W});
    for (int n = 0; n < B; ++n)
      for (int c = 0; c < C; ++c) {
        const S* p = &in.at(n, c, 0, 0);
        S* q = &out.at(n, c, 0, 0);
        double mu = 0;
        for (int i = 0; i < M; ++i) mu += double(p[i]);
        mu /= M;
        double var = 0;
        for (int i = 0; i < M; ++i) var += (double(p[i]) - mu) * (double(p[i]) - mu);
        var /= M;
        double istd = 1.0 / std::sqrt(var + eps);
        double g = double(tg[size_t(c)]), b0 = double(tb[size_t(c)]);
        for (int i = 0; i < M; ++i)
          q[i] = S((double(p[i]) - mu) * istd * g + b0);
      }
    Var v = push(std::move(out), needs(x) || needs(gamma) || needs(beta), nullptr);
    set_backward(v, [x, gamma, beta, B, C, H, W, M, eps](Tape& t, Node& self) {
      const Tensor<S>& in = t.val(x);
      const Tensor<S>& tg = t.val(gamma);
      for (int n = 0; n < B; ++n)
        for (int c = 0; c < C; ++c) {
          const S* p = &in.at(n, c, 0, 0);
          const S* go = &self.grad.at(n, c, 0, 0);
          double mu = 0;
          for (int i = 0; i < M; ++i) mu += double(p[i]);
          mu /= M;
          double var = 0;
          for (int i = 0; i < M; ++i)
            var += (double(p[i]) - mu) * (double(p[i]) - mu);
          var /= M;
          double istd = 1.0 / std::sqrt(var + eps);
          double gmean = 0, gxhat = 0;
          for (int i = 0; i < M; ++i) {
            double xh = (double(p[i]) - mu) * istd;
            gmean += double(go[i]);
            gxhat += double(go[i]) * xh;
          }
          if (t.needs(gamma)) t.grad_buf(gamma)[size_t(c)] += S(gxhat);
          if (t.needs(beta)) t.grad_buf(beta)[size_t(c)] += S(gmean);
          if (t.needs(x)) {
            Tensor<S>& gx = t.grad_buf(x);
            S* gq = &gx.at(n, c, 0, 0);
            double g = double(tg[size_t(c)]);
            gmean /= M;
            gxhat /= M;
            for (int i = 0; i < M; ++i) {
              double xh = (double(p[i]) - mu) * istd;
              gq[i] += S(g * istd * (double(go[i]) - gmean - xh * gxhat));
            }
          }
        }
    });
    return v;
  }

  // h = prev + m*(next - prev), m a constant per-row 0/1 mask [B]
  Var lerp_rows(Var prev, Var next, const Tensor<S>& m) {
    const Tensor<S>& tp = val(prev);
    const Tensor<S>& tn = val(next);
    if (!tp.same_shape(tn) || tp.rank() != 2 || m.shape != std::vector<int>{tp.shape[0]})
      throw DimMismatch("lerp_rows");
    int B = tp.shape[0], Hd = tp.shape[1];
    Tensor<S> out(tp.shape);
    for (int r = 0; r < B; ++r) {
      S mv = m[size_t(r)];
      for (int c = 0; c < Hd; ++c)
        out.at(r, c) = tp.at(r, c) + mv * (tn.at(r, c) - tp.at(r, c));
    }
    Var v = push(std::move(out), needs(prev) || needs(next), nullptr);
    Tensor<S> mc = m;
    set_backward(v, [prev, next, B, Hd, mc](Tape& t, Node& self) {
      for (int r = 0; r < B; ++r) {
        S mv = mc[size_t(r)];
        if (t.needs(prev)) {
          Tensor<S>& gp = t.grad_buf(prev);
          for (int c = 0; c < Hd; ++c)
            gp.at(r, c) += (S(1) - mv) * self.grad.at(r, c);
        }
        if (t.needs(next)) {
          Tensor<S>& gn = t.grad_buf(next);
          for (int c = 0; c < Hd; ++c) gn.at(r, c) += mv * self.grad.at(r, c);
        }
      }
    });
    return v;
  }

  // embedding lookup: ids [B,N] (values < V) into table [V,E]
  Var embed(const Tensor<int>& ids, Var table) {
    const Tensor<S>& tw = val(table);
    if (ids.rank() != 2 || tw.rank() != 2) throw DimMismatch("embed");
    int B = ids.shape[0], N = ids.shape[1], V = tw.shape[0], E = tw.shape[1];
    Tensor<S> out({B, N, E});
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < N; ++n) {
        int id = ids.at(b, n);
        if (id < 0 || id >= V) throw DimMismatch("embed: id out of range");
        std::copy_n(tw.ptr() + int64_t(id) * E, size_t(E), &out.at(b, n, 0));
      }
    Var v = push(std::move(out), needs(table), nullptr);
    Tensor<int> ids_copy = ids;
    set_backward(v, [table, ids_copy, B, N, E](Tape& t, Node& self) {
      Tensor<S>& gw = t.grad_buf(table);
      for (int b = 0; b < B; ++b)
        for (int n = 0; n < N; ++n) {
          int id = ids_copy.at(b, n);
          for (int e = 0; e < E; ++e)
            gw.data[size_t(int64_t(id) * E + e)] += self.grad.at(b, n, e);
        }
    });
    return v;
  }

  Var stack_axis1(const std::vector<Var>& xs) {  // T x [B,D] -> [B,T,D]
    if (xs.empty()) throw DimMismatch("stack_axis1: empty");
    int B = val(xs[0]).shape[0], D = val(xs[0]).shape[1];
    int T = int(xs.size());
    Tensor<S> out({B, T, D});
    bool ng = false;
    for (int t = 0; t < T; ++t) {
      const Tensor<S>& xt = val(xs[size_t(t)]);
      if (xt.shape != std::vector<int>{B, D}) throw DimMismatch("stack_axis1");
      for (int b = 0; b < B; ++b)
        std::copy_n(&xt.at(b, 0), size_t(D), &out.at(b, t, 0));
      ng = ng || needs(xs[size_t(t)]);
    }
    Var v = push(std::move(out), ng, nullptr);
    std::vector<Var> xs_copy = xs;
    set_backward(v, [xs_copy, B, D](Tape& t, Node& self) {
      for (int ti = 0; ti < int(xs_copy.size()); ++ti) {
        if (!t.needs(xs_copy[size_t(ti)])) continue;
        Tensor<S>& g = t.grad_buf(xs_copy[size_t(ti)]);
        for (int b = 0; b < B; ++b)
          for (int d = 0; d < D; ++d) g.at(b, d) += self.grad.at(b, ti, d);
      }
    });
    return v;
  }

  // ---- backward driver ----

  void backward(Var loss) {
    Node& ln = nodes_[size_t(loss.id)];
    if (ln.value.numel() != 1)
      throw DimMismatch("backward expects a scalar loss");
    ln.grad = Tensor<S>(ln.value.shape);
    ln.grad.fill(S(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (!n.requires_grad || n.grad.data.empty() || !n.backward) continue;
      n.backward(*this, n);
    }
  }

  bool needs(Var v) const { return nodes_[size_t(v.id)].requires_grad; }

  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    bool requires_grad = false;
    std::function<void(Tape&, Node&)> backward;
  };

  Tensor<S>& grad_buf(Var v) {
    Node& n = nodes_[size_t(v.id)];
    if (n.grad.data.empty()) n.grad = Tensor<S>(n.value.shape);
    return n.grad;
  }

  // Grow-only scratch for conv im2col buffers, shared per thread across
  // tapes; only used within a single op call, and every user overwrites
  // the region it reads. Allocation keeps a fixed 64-byte alignment so
  // Eigen's vectorized kernels take identical code paths no matter how
  // the buffer grew (bit-stable results).
  struct AlignedScratch {
    S* ptr = nullptr;
    size_t cap = 0;
    ~AlignedScratch() { std::free(ptr); }
    S* ensure(size_t n) {
      if (cap < n) {
        std::free(ptr);
        size_t bytes = ((n * sizeof(S) + 63) / 64) * 64;
        ptr = static_cast<S*>(std::aligned_alloc(64, bytes));
        if (!ptr) throw std::bad_alloc();
        cap = n;
      }
      return ptr;
    }
  };
  S* scratch_a(size_t n) {
    static thread_local AlignedScratch buf;
    return buf.ensure(n);
  }
  S* scratch_b(size_t n) {
    static thread_local AlignedScratch buf;
    return buf.ensure(n);
  }
  S* scratch_c(size_t n) {
    static thread_local AlignedScratch buf;
    return buf.ensure(n);
  }

 private:
  Var push(Tensor<S> value, bool requires_grad,
           std::function<void(Tape&, Node&)> bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
  }

  void set_backward(Var v, std::function<void(Tape&, Node&)> bw) {
    if (nodes_[size_t(v.id)].requires_grad)
      nodes_[size_t(v.id)].backward = std::move(bw);
  }

  template <typename F, typename DA, typename DB>
  Var ew2(Var a, Var b, F f, DA da, DB db) {
    const Tensor<S>& ta = val(a);
    const Tensor<S>& tb = val(b);
    if (!ta.same_shape(tb))
      throw ShapeMismatch("elementwise: " + shape_str(ta.shape) + " vs " +
                          shape_str(tb.shape));
    Tensor<S> out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
      out.data[i] = f(ta.data[i], tb.data[i]);
    Var v = push(std::move(out), needs(a) || needs(b), nullptr);
    set_backward(v, [a, b, da, db](Tape& t, Node& self) {
      const Tensor<S>& ta = t.val(a);
      const Tensor<S>& tb = t.val(b);
      if (t.needs(a)) {
        Tensor<S>& ga = t.grad_buf(a);
        for (size_t i = 0; i < ga.data.size(); ++i)
          ga.data[i] += self.grad.data[i] * da(ta.data[i], tb.data[i]);
      }
      if (t.needs(b)) {
        Tensor<S>& gb = t.grad_buf(b);
        for (size_t i = 0; i < gb.data.size(); ++i)
          gb.data[i] += self.grad.data[i] * db(ta.data[i], tb.data[i]);
      }
    });
    return v;
  }

  template <typename F, typename D>
  Var ew1_from_out(Var x, F f, D d_of_out) {
    const Tensor<S>& in = val(x);
    Tensor<S> out(in.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(in.data[i]);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, d_of_out](Tape& t, Node& self) {
      Tensor<S>& gx = t.grad_buf(x);
      const S* y = self.value.ptr();
      const S* g = self.grad.ptr();
      for (size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] += g[i] * d_of_out(y[i]);
    });
    return v;
  }

  template <typename F, typename D>
  Var ew1(Var x, F f, D d) {
    const Tensor<S>& in = val(x);
    Tensor<S> out(in.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(in.data[i]);
    Var v = push(std::move(out), needs(x), nullptr);
    set_backward(v, [x, d](Tape& t, Node& self) {
      const Tensor<S>& in = t.val(x);
      Tensor<S>& gx = t.grad_buf(x);
      for (size_t i = 0; i < gx.data.size(); ++i)
        gx.data[i] += self.grad.data[i] * d(in.data[i]);
    });
    return v;
  }

  static void softmax_row(const S* p, S* q, int k) {
    double mx = -1e300;
    for (int i = 0; i < k; ++i) mx = std::max(mx, double(p[i]));
    double z = 0;
    for (int i = 0; i < k; ++i) z += std::exp(double(p[i]) - mx);
    for (int i = 0; i < k; ++i) q[i] = S(std::exp(double(p[i]) - mx) / z);
  }

  static std::vector<int64_t> strides_of(const std::vector<int>& shape) {
    std::vector<int64_t> s(shape.size());
    int64_t acc = 1;
    for (int i = int(shape.size()) - 1; i >= 0; --i) {
      s[size_t(i)] = acc;
      acc *= shape[size_t(i)];
    }
    return s;
  }

  static std::pair<int64_t, int64_t> split_at(const std::vector<int>& shape,
                                              int axis) {
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[size_t(i)];
    for (int i = axis + 1; i < int(shape.size()); ++i) inner *= shape[size_t(i)];
    return {outer, inner};
  }

  static std::pair<int64_t, int64_t> split_expand(const std::vector<int>& shape,
                                                  int axis) {
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[size_t(i)];
    for (int i = axis; i < int(shape.size()); ++i) inner *= shape[size_t(i)];
    return {outer, inner};
  }

  // cols layout: [C*KH*KW, B*OH*OW], column n = (b, oh, ow); rows are
  // contiguous output pixels, which keeps fills and the GEMM fast
  static void im2col(const Tensor<S>& x, int KH, int KW, int stride, int pad,
                     int OH, int OW, S* cols) {
    int B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
    int64_t N = int64_t(B) * OH * OW;
    for (int c = 0; c < C; ++c)
      for (int kh = 0; kh < KH; ++kh)
        for (int kw = 0; kw < KW; ++kw) {
          S* row = cols + int64_t((c * KH + kh) * KW + kw) * N;
          int shift = kw - pad;
          for (int n = 0; n < B; ++n)
            for (int oh = 0; oh < OH; ++oh) {
              int ih = oh * stride - pad + kh;
              S* dst = row + (int64_t(n) * OH + oh) * OW;
              if (ih < 0 || ih >= H) {
                std::fill_n(dst, OW, S(0));
                continue;
              }
              const S* src = &x.at(n, c, ih, 0);
              if (stride == 1) {
                int ow0 = std::max(0, -shift);
                int ow1 = std::min(OW, W - shift);
                for (int ow = 0; ow < ow0; ++ow) dst[ow] = S(0);
                for (int ow = ow0; ow < ow1; ++ow) dst[ow] = src[ow + shift];
                for (int ow = ow1; ow < OW; ++ow) dst[ow] = S(0);
              } else {
                for (int ow = 0; ow < OW; ++ow) {
                  int iw = ow * stride + shift;
                  dst[ow] = (iw >= 0 && iw < W) ? src[iw] : S(0);
                }
              }
            }
        }
  }

  std::vector<Node> nodes_;
};

template <typename S>
using Var = typename Tape<S>::Var;

}  // namespace lang2face
