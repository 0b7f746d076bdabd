#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "lang2face/autodiff.hpp"

namespace lang2face {

// Scalar losses of the training objective as pure, independently
// testable functions, plus the equivalent tape builders used by the
// trainer. The pure forms validate their domains strictly; the tape
// forms clamp scores away from {0,1} for float-safe logs.

struct CriticScore {
  double uncond = 0.5;
  double cond = 0.5;
};

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 5.0;
  double lambda3 = 0.005;
  double lambda_ca = 1e-3;
  bool ca_kl_enabled = true;
};

namespace detail {
inline void check_score(double s, const char* who) {
  if (!(s > 0.0 && s < 1.0))
    throw DomainError(std::string(who) + ": score outside (0,1)");
}
}  // namespace detail

// Eq. 2: face verification discriminator loss (also Eq. 3 on deltas and
// the synthesis discriminator with level 3 inputs).
inline double loss_fv(const CriticScore& real, const CriticScore& fake) {
  detail::check_score(real.uncond, "loss_fv real.uncond");
  detail::check_score(real.cond, "loss_fv real.cond");
  detail::check_score(fake.uncond, "loss_fv fake.uncond");
  detail::check_score(fake.cond, "loss_fv fake.cond");
  return -0.5 * (std::log(real.uncond) + std::log(1.0 - fake.uncond)) -
         0.5 * (std::log(real.cond) + std::log(1.0 - fake.cond));
}

// Eq. 3 has the same functional form applied to expression-delta scores.
inline double loss_ev(const CriticScore& on_target_delta,
                      const CriticScore& on_synth_delta) {
  return loss_fv(on_target_delta, on_synth_delta);
}

// Eq. 5: generator adversarial loss at one level.
inline double loss_adv(const CriticScore& fake) {
  detail::check_score(fake.uncond, "loss_adv uncond");
  detail::check_score(fake.cond, "loss_adv cond");
  return -0.5 * (std::log(fake.uncond) + std::log(fake.cond));
}

// squared L2 distance between feature tensors, mean-reduced
template <typename S>
double loss_identity(const Tensor<S>& feat_target, const Tensor<S>& feat_synth) {
  if (!feat_target.same_shape(feat_synth))
    throw ShapeMismatch("loss_identity: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < feat_target.data.size(); ++i) {
    double d = double(feat_target.data[i]) - double(feat_synth.data[i]);
    s += d * d;
  }
  return s / double(feat_target.numel());
}

// mean absolute pixel difference
template <typename S>
double loss_recon(const Tensor<S>& target, const Tensor<S>& synth) {
  if (!target.same_shape(synth)) throw ShapeMismatch("loss_recon: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < target.data.size(); ++i)
    s += std::abs(double(target.data[i]) - double(synth.data[i]));
  return s / double(target.numel());
}

// Eq. 4: L_syn + sum_{i=1,2} (L_FV^i + L_EV^i)
inline double loss_d_total(double l_syn, const std::array<double, 2>& l_fv,
                           const std::array<double, 2>& l_ev) {
  return l_syn + l_fv[0] + l_fv[1] + l_ev[0] + l_ev[1];
}

// Eq. 6: sum_i lambda1*L_adv^i + lambda2*L_id^i + lambda3*L_recon^i.
// The CA KL term is reported separately and never enters this sum.
inline double loss_g_total(const std::array<double, 3>& l_adv,
                           const std::array<double, 3>& l_id,
                           const std::array<double, 3>& l_recon,
                           const LossWeights& w) {
  double s = 0;
  for (int i = 0; i < 3; ++i)
    s += w.lambda1 * l_adv[i] + w.lambda2 * l_id[i] + w.lambda3 * l_recon[i];
  return s;
}

inline double loss_total(double l_lvm, double l_d_total, double l_g_total) {
  return l_lvm + l_d_total + l_g_total;
}

// ---- tape builders ---------------------------------------------------

template <typename S>
typename Tape<S>::Var safe_log(Tape<S>& t, typename Tape<S>::Var x) {
  return t.log_(t.clamp(x, 1e-7, 1.0 - 1e-7));
}

// mean over the batch of the Eq. 2 form; scores are [B] vectors
template <typename S>
typename Tape<S>::Var critic_loss_graph(Tape<S>& t,
                                        typename Tape<S>::Var real_uncond,
                                        typename Tape<S>::Var real_cond,
                                        typename Tape<S>::Var fake_uncond,
                                        typename Tape<S>::Var fake_cond) {
  auto one_minus = [&](typename Tape<S>::Var v) { return t.affine(v, -1.0, 1.0); };
  auto term = t.add(
      t.add(safe_log(t, real_uncond), safe_log(t, one_minus(fake_uncond))),
      t.add(safe_log(t, real_cond), safe_log(t, one_minus(fake_cond))));
  return t.scale(t.mean_all(term), -0.5);
}

template <typename S>
typename Tape<S>::Var adv_loss_graph(Tape<S>& t,
                                     typename Tape<S>::Var fake_uncond,
                                     typename Tape<S>::Var fake_cond) {
  auto term = t.add(safe_log(t, fake_uncond), safe_log(t, fake_cond));
  return t.scale(t.mean_all(term), -0.5);
}

template <typename S>
typename Tape<S>::Var identity_loss_graph(Tape<S>& t, typename Tape<S>::Var a,
                                          typename Tape<S>::Var b) {
  return t.mean_all(t.square(t.sub(a, b)));
}

template <typename S>
typename Tape<S>::Var recon_loss_graph(Tape<S>& t, typename Tape<S>::Var target,
                                       typename Tape<S>::Var synth) {
  return t.mean_all(t.abs_(t.sub(target, synth)));
}

// ---- per-step report -------------------------------------------------

struct LossReport {
  int64_t step = 0;
  double l_lvm = 0;
  double l_fv[2] = {0, 0};
  double l_ev[2] = {0, 0};
  double l_syn = 0;
  double l_adv[3] = {0, 0, 0};
  double l_id[3] = {0, 0, 0};
  double l_recon[3] = {0, 0, 0};
  double l_ca_kl = 0;
  double l_d_total = 0;
  double l_g_total = 0;
  double total = 0;

  void recompute_totals(const LossWeights& w) {
    l_d_total = loss_d_total(l_syn, {l_fv[0], l_fv[1]}, {l_ev[0], l_ev[1]});
    l_g_total = loss_g_total({l_adv[0], l_adv[1], l_adv[2]},
                             {l_id[0], l_id[1], l_id[2]},
                             {l_recon[0], l_recon[1], l_recon[2]}, w);
    total = loss_total(l_lvm, l_d_total, l_g_total);
  }

  bool all_finite() const {
    for (double v : values())
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::vector<double> values() const {
    return {l_lvm,      l_fv[0],    l_fv[1],   l_ev[0],    l_ev[1],
            l_syn,      l_adv[0],   l_adv[1],  l_adv[2],   l_id[0],
            l_id[1],    l_id[2],    l_recon[0], l_recon[1], l_recon[2],
            l_ca_kl,    l_d_total,  l_g_total, total};
  }

  static const std::vector<std::string>& column_names() {
    static const std::vector<std::string> kCols = {
        "step",      "L_LVM",    "L_FV_1",    "L_FV_2",    "L_EV_1",
        "L_EV_2",    "L_syn",    "L_adv_1",   "L_adv_2",   "L_adv_3",
        "L_id_1",    "L_id_2",   "L_id_3",    "L_recon_1", "L_recon_2",
        "L_recon_3", "L_CA_KL",  "L_D_total", "L_G_total", "total"};
    return kCols;
  }

  std::string csv_row() const;
  static std::string csv_header();
  static LossReport from_csv_row(const std::string& row);
};

}  // namespace lang2face
