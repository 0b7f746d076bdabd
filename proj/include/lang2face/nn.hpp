#pragma once

#include <map>
#include <string>
#include <vector>

#include "lang2face/autodiff.hpp"
#include "lang2face/random.hpp"
#include "lang2face/sha256.hpp"

namespace lang2face {

// Named parameter set. Iteration is always in name order so update
// order, serialization and hashing are deterministic.
template <typename S>
class ParamStore {
 public:
  struct Entry {
    Tensor<S> value;
    Tensor<S> grad;
  };

  Tensor<S>& create(const std::string& name, std::vector<int> shape) {
    auto [it, fresh] = params_.try_emplace(name);
    if (!fresh) throw ConfigError("duplicate parameter: " + name);
    it->second.value = Tensor<S>(std::move(shape));
    return it->second.value;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  Entry& entry(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  typename Tape<S>::Var use(Tape<S>& tape, const std::string& name) {
    Entry& e = entry(name);
    return tape.param(e.value, &e.grad);
  }
  // frozen parameters enter the graph as constants
  typename Tape<S>::Var use_frozen(Tape<S>& tape, const std::string& name) const {
    return tape.constant(entry(name).value);
  }

  void zero_grad() {
    for (auto& [name, e] : params_) e.grad.data.clear();
  }

  int64_t num_scalars() const {
    int64_t n = 0;
    for (const auto& [name, e] : params_) n += e.value.numel();
    return n;
  }

  std::map<std::string, Entry>& all() { return params_; }
  const std::map<std::string, Entry>& all() const { return params_; }

  // content hash over names, shapes and raw values
  std::string content_hash() const {
    Sha256 h;
    for (const auto& [name, e] : params_) {
      h.update(name.data(), name.size());
      for (int d : e.value.shape) h.update(&d, sizeof(d));
      h.update(e.value.ptr(), e.value.data.size() * sizeof(S));
    }
    return h.hex();
  }

 private:
  std::map<std::string, Entry> params_;
};

// Seeded initializers. Seeds derive from (base_seed, parameter name) so
// a parameter's initial value is independent of creation order.
template <typename S>
void init_normal(Tensor<S>& t, uint64_t seed, const std::string& name,
                 double stddev) {
  RandomStream rs(seed, "init/" + name);
  for (auto& v : t.data) v = S(rs.normal() * stddev);
}

template <typename S>
void init_conv(Tensor<S>& w, uint64_t seed, const std::string& name) {
  // He-style fan-in scaling
  int fan_in = w.shape[1] * w.shape[2] * w.shape[3];
  init_normal(w, seed, name, std::sqrt(2.0 / fan_in));
}

template <typename S>
void init_dense(Tensor<S>& w, uint64_t seed, const std::string& name) {
  int fan_in = w.shape[0];
  init_normal(w, seed, name, std::sqrt(1.0 / fan_in));
}

// ---- layer builders -------------------------------------------------
// Layers are thin descriptors over named parameters; forward() stitches
// tape ops. No layer owns tensors, the store does.

template <typename S>
struct Conv2d {
  std::string name;
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;

  void init(ParamStore<S>& ps, uint64_t seed) const {
    auto& w = ps.create(name + ".w", {out_ch, in_ch, ksize, ksize});
    init_conv(w, seed, name + ".w");
    ps.create(name + ".b", {out_ch});
  }
  typename Tape<S>::Var forward(Tape<S>& t, ParamStore<S>& ps,
                                typename Tape<S>::Var x) const {
    return t.conv2d(x, ps.use(t, name + ".w"), ps.use(t, name + ".b"), stride,
                    pad);
  }
};

template <typename S>
struct Dense {
  std::string name;
  int in_dim = 0, out_dim = 0;

  void init(ParamStore<S>& ps, uint64_t seed) const {
    auto& w = ps.create(name + ".w", {in_dim, out_dim});
    init_dense(w, seed, name + ".w");
    ps.create(name + ".b", {out_dim});
  }
  typename Tape<S>::Var forward(Tape<S>& t, ParamStore<S>& ps,
                                typename Tape<S>::Var x) const {
    return t.bias_add_row(t.matmul(x, ps.use(t, name + ".w")),
                          ps.use(t, name + ".b"));
  }
};

template <typename S>
struct InstanceNorm {
  std::string name;
  int channels = 0;

  void init(ParamStore<S>& ps, uint64_t /*seed*/) const {
    auto& g = ps.create(name + ".g", {channels});
    g.fill(S(1));
    ps.create(name + ".b", {channels});
  }
  typename Tape<S>::Var forward(Tape<S>& t, ParamStore<S>& ps,
                                typename Tape<S>::Var x) const {
    return t.instance_norm(x, ps.use(t, name + ".g"), ps.use(t, name + ".b"));
  }
};

// two 3x3 convolutions + per-position normalization with a skip
// connection; pixel-local norm keeps word-attention edits spatially
// contained
template <typename S>
struct ResidualBlock {
  std::string name;
  int channels = 0;
  Conv2d<S> c1, c2;

  void configure() {
    c1 = {name + ".c1", channels, channels, 3, 1, 1};
    c2 = {name + ".c2", channels, channels, 3, 1, 1};
  }
  void init(ParamStore<S>& ps, uint64_t seed) {
    configure();
    c1.init(ps, seed);
    c2.init(ps, seed);
  }
  typename Tape<S>::Var forward(Tape<S>& t, ParamStore<S>& ps,
                                typename Tape<S>::Var x) const {
    auto h = t.relu(t.pixel_norm(c1.forward(t, ps, x)));
    h = t.pixel_norm(c2.forward(t, ps, h));
    return t.relu(t.add(x, h));
  }
};

// Adam with bias correction; state keyed by parameter name.
template <typename S>
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore<S>& ps) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, double(t_));
    double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (auto& [name, e] : ps.all()) {
      if (e.grad.data.empty()) continue;  // parameter unused this step
      auto& st = state_[name];
      if (st.m.data.empty()) {
        st.m = Tensor<double>(e.value.shape);
        st.v = Tensor<double>(e.value.shape);
      }
      for (size_t i = 0; i < e.value.data.size(); ++i) {
        double g = double(e.grad.data[i]);
        st.m.data[i] = beta1_ * st.m.data[i] + (1.0 - beta1_) * g;
        st.v.data[i] = beta2_ * st.v.data[i] + (1.0 - beta2_) * g * g;
        double mhat = st.m.data[i] / bc1;
        double vhat = st.v.data[i] / bc2;
        e.value.data[i] =
            S(double(e.value.data[i]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  struct State {
    Tensor<double> m, v;
  };
  int64_t steps() const { return t_; }
  void set_steps(int64_t t) { t_ = t; }
  std::map<std::string, State>& state() { return state_; }
  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, State> state_;
};

}  // namespace lang2face
