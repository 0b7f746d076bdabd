#include "lang2face/verify.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "lang2face/codec.hpp"
#include "lang2face/generator.hpp"
#include "lang2face/metrics.hpp"
#include "lang2face/objectives.hpp"
#include "lang2face/random.hpp"
#include "lang2face/renderer.hpp"
#include "lang2face/trainer.hpp"

namespace lang2face {

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

const std::vector<Gender> kGenders = {Gender::male, Gender::female,
                                      Gender::unspecified};
const std::vector<Protocol> kProtocols = {Protocol::P1, Protocol::P2,
                                          Protocol::P3};

}  // namespace

CheckResult check_codec_roundtrip() {
  Timer timer;
  CheckResult res{"codec_roundtrip", true, "", 0};
  int failures = 0, cases = 0;
  auto roundtrip = [&](const AUVector& au, Gender g, Protocol p) {
    ++cases;
    auto [au2, g2] = parse(describe(au, g, p));
    if (!(au2 == au) || g2 != g) {
      ++failures;
      if (res.detail.empty())
        res.detail = "first failure: " + au.to_string() + " " +
                     gender_name(g) + " " + protocol_name(p);
    }
  };

  for (Gender g : kGenders)
    for (Protocol p : kProtocols) {
      roundtrip(AUVector{}, g, p);
      for (AUId au : all_aus())
        for (int k = 1; k <= 5; ++k) {
          AUVector v;
          v.set(au, k);
          roundtrip(v, g, p);
        }
    }

  RandomStream rs(2024, "codec_roundtrip");
  for (int i = 0; i < 1000; ++i) {
    int n_active = 1 + int(rs.uniform_index(8));
    std::vector<AUId> pool = all_aus();
    rs.shuffle(pool);
    AUVector v;
    for (int a = 0; a < n_active; ++a)
      v.set(pool[size_t(a)], 1 + int(rs.uniform_index(5)));
    roundtrip(v, kGenders[rs.uniform_index(3)], kProtocols[rs.uniform_index(3)]);
  }

  res.pass = failures == 0;
  if (res.pass)
    res.detail = std::to_string(cases) + " round-trips exact";
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_renderer_locality(int n_identities) {
  Timer timer;
  CheckResult res{"renderer_locality", true, "", 0};
  const int size = 64;
  int violations = 0, non_monotone = 0, cases = 0;
  for (AUId au : all_aus()) {
    RegionMask mask = region_mask(au, size).dilated(2);
    for (int ident = 0; ident < n_identities; ++ident) {
      IdentityParams id = IdentityParams::sample(
          RandomStream(99, "locality_identity", uint64_t(ident)).next_u64());
      Tensor<float> neutral = render(id, AUVector{}, size);
      double prev_l1 = 0;
      for (int k = 1; k <= 5; ++k) {
        ++cases;
        AUVector v;
        v.set(au, k);
        Tensor<float> img = render(id, v, size);
        double l1 = 0;
        bool contained = true;
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            double d = 0;
            for (int c = 0; c < 3; ++c)
              d += std::abs(double(img.at(c, y, x)) -
                            double(neutral.at(c, y, x)));
            l1 += d;
            if (d > 0 && !mask.test(y, x)) contained = false;
          }
        if (!contained) {
          ++violations;
          if (res.detail.empty())
            res.detail = "leak: " + au_name(au) + " k=" + std::to_string(k) +
                         " identity " + std::to_string(ident);
        }
        if (l1 <= prev_l1) {
          ++non_monotone;
          if (res.detail.empty())
            res.detail = "non-monotone: " + au_name(au) +
                         " k=" + std::to_string(k);
        }
        prev_l1 = l1;
      }
    }
  }
  res.pass = violations == 0 && non_monotone == 0;
  if (res.pass)
    res.detail = std::to_string(cases) + " renders contained and monotone";
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_attention_oracle(int n_instances) {
  Timer timer;
  CheckResult res{"attention_oracle", true, "", 0};
  RandomStream rs(7, "attention_oracle");
  double worst = 0;
  for (int inst = 0; inst < n_instances && res.pass; ++inst) {
    int B = 1 + int(rs.uniform_index(3));
    int N = 1 + int(rs.uniform_index(4));
    int D = 2 + int(rs.uniform_index(4));
    int C = 2 + int(rs.uniform_index(4));
    int H = 1 + int(rs.uniform_index(3));
    int W = 1 + int(rs.uniform_index(3));
    Tensor<double> words({B, N, D}), q({B, C, H, W}), proj({D, C});
    for (auto& v : words.data) v = rs.normal();
    for (auto& v : q.data) v = rs.normal();
    for (auto& v : proj.data) v = rs.normal();
    Tensor<double> mask({B, N});
    std::vector<int> lengths(static_cast<size_t>(B));
    for (int b = 0; b < B; ++b) {
      lengths[size_t(b)] = 1 + int(rs.uniform_index(uint64_t(N)));
      for (int n = 0; n < N; ++n)
        mask.at(b, n) = n < lengths[size_t(b)] ? 1.0 : 0.0;
    }

    Tape<double> t;
    auto att = word_attention_core(t, t.constant(words), mask, t.constant(q),
                                   t.constant(proj));
    // the N=1 exactness contract is against the model's own projection;
    // build it before taking references (ops may reallocate node storage)
    auto model_proj = t.reshape(
        t.matmul(t.reshape(t.constant(words), {B * N, D}), t.constant(proj)),
        {B, N, C});
    const Tensor<double>& beta = t.val(att.beta);       // [B,HW,N]
    const Tensor<double>& ctx = t.val(att.context);     // [B,C,H,W]
    const Tensor<double>& w_hat_model = t.val(model_proj);

    // independent hand-softmax oracle
    for (int b = 0; b < B && res.pass; ++b) {
      // projected words
      std::vector<std::vector<double>> w_hat(
          static_cast<size_t>(N), std::vector<double>(static_cast<size_t>(C), 0.0));
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          double s = 0;
          for (int d = 0; d < D; ++d) s += words.at(b, n, d) * proj.at(d, c);
          w_hat[size_t(n)][size_t(c)] = s;
        }
      for (int j = 0; j < H * W && res.pass; ++j) {
        std::vector<double> logit(static_cast<size_t>(N), 0.0);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c)
            logit[size_t(n)] +=
                q.data[size_t(((b * C + c) * H * W) + j)] * w_hat[size_t(n)][size_t(c)];
        double z = 0;
        std::vector<double> expv(static_cast<size_t>(N), 0.0);
        for (int n = 0; n < lengths[size_t(b)]; ++n) {
          expv[size_t(n)] = std::exp(logit[size_t(n)]);
          z += expv[size_t(n)];
        }
        double bsum = 0;
        for (int n = 0; n < N; ++n) {
          double want = n < lengths[size_t(b)] ? expv[size_t(n)] / z : 0.0;
          double got = beta.at(b, j, n);
          worst = std::max(worst, std::abs(want - got));
          if (std::abs(want - got) > 1e-6) {
            res.pass = false;
            res.detail = "beta mismatch " + std::to_string(got) + " vs " +
                         std::to_string(want);
          }
          if (n >= lengths[size_t(b)] && got != 0.0) {
            res.pass = false;
            res.detail = "PAD weight not exactly zero";
          }
          bsum += got;
        }
        if (std::abs(bsum - 1.0) > 1e-6) {
          res.pass = false;
          res.detail = "beta rows must sum to 1, got " + std::to_string(bsum);
        }
        // alpha in the convex hull; with one word, alpha == w_hat exactly
        if (lengths[size_t(b)] == 1) {
          for (int c = 0; c < C; ++c) {
            double got = ctx.data[size_t(((b * C + c) * H * W) + j)];
            if (got != w_hat_model.at(b, 0, c)) {
              res.pass = false;
              res.detail = "single-word alpha must equal w_hat exactly";
            }
          }
        }
      }
    }
  }
  if (res.pass) {
    std::ostringstream os;
    os << n_instances << " instances, max |beta - oracle| = " << worst;
    res.detail = os.str();
  }
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_loss_anchors() {
  Timer timer;
  CheckResult res{"loss_anchors", true, "", 0};
  auto expect = [&](double got, double want, double tol, const char* what) {
    if (std::abs(got - want) > tol) {
      res.pass = false;
      if (res.detail.empty()) {
        std::ostringstream os;
        os << what << ": got " << got << ", want " << want;
        res.detail = os.str();
      }
    }
  };

  CriticScore half{0.5, 0.5};
  expect(loss_fv(half, half), 2 * std::log(2.0), 1e-9, "loss_fv @0.5");
  expect(loss_ev(half, half), 2 * std::log(2.0), 1e-9, "loss_ev @0.5");
  expect(loss_adv(half), std::log(2.0), 1e-9, "loss_adv @0.5");
  expect(loss_fv({0.8, 0.8}, {0.3, 0.3}),
         -(std::log(0.8) + std::log(0.7)), 1e-9, "loss_fv mixed");
  expect(loss_adv({0.9, 0.6}), -0.5 * (std::log(0.9) + std::log(0.6)), 1e-9,
         "loss_adv mixed");
  LossWeights w;
  expect(loss_g_total({1, 1, 1}, {1, 1, 1}, {1, 1, 1}, w), 18.015, 1e-9,
         "loss_g_total unit");
  expect(loss_d_total(2 * std::log(2.0),
                      {2 * std::log(2.0), 2 * std::log(2.0)},
                      {2 * std::log(2.0), 2 * std::log(2.0)}),
         10 * std::log(2.0), 1e-9, "loss_d_total @0.5");
  expect(loss_total(1, 2, 3), 6, 1e-12, "loss_total");
  if (res.pass) res.detail = "closed-form anchors hold to 1e-9";
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_gradient_suite() {
  Timer timer;
  CheckResult res{"gradient_suite", true, "", 0};
  auto report = run_grad_check_suite();
  std::ostringstream os;
  for (const auto& [name, err] : report) {
    os << name << "=" << err << " ";
    if (!(err <= 1e-4)) {
      res.pass = false;
      res.detail = name + " max rel error " + std::to_string(err);
    }
  }
  if (res.pass) res.detail = os.str();
  res.seconds = timer.seconds();
  return res;
}

CheckResult check_metric_oracles() {
  Timer timer;
  CheckResult res{"metric_oracles", true, "", 0};
  auto fail = [&](const std::string& what) {
    res.pass = false;
    if (res.detail.empty()) res.detail = what;
  };

  RandomStream rs(5, "metrics");
  Tensor<float> x({3, 32, 32}), y({3, 32, 32});
  for (auto& v : x.data) v = float(rs.uniform(-1, 1));
  for (auto& v : y.data) v = float(rs.uniform(-1, 1));
  if (std::abs(ssim(x, x) - 1.0) > 1e-6) fail("ssim(x,x) != 1");
  if (std::abs(ssim(x, y) - ssim(y, x)) > 1e-9) fail("ssim not symmetric");

  Tensor<float> cb({3, 32, 32}), cb_inv({3, 32, 32});
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) {
        float v = ((i + j) % 2 == 0) ? 1.0f : -1.0f;
        cb.at(c, i, j) = v;
        cb_inv.at(c, i, j) = -v;
      }
  if (ssim(cb, cb_inv) >= 0) fail("checkerboard vs inverse should be negative");

  // FID oracles
  auto gauss_cloud = [&](int n, int dim, double shift, uint64_t seed) {
    RandomStream g(seed, "fid_cloud");
    std::vector<std::vector<double>> out(
        static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(dim)));
    for (auto& row : out)
      for (auto& v : row) v = g.normal() + shift;
    return out;
  };
  auto a = gauss_cloud(512, 8, 0.0, 100);
  if (fid(a, a) > 1e-3) fail("fid(identical) > 1e-3");
  double delta = 0.7;
  auto c1 = gauss_cloud(10000, 8, 0.0, 101);
  auto c2 = gauss_cloud(10000, 8, delta, 102);
  double want = 8 * delta * delta;  // |mu difference|^2, identity covariances
  double got = fid(c1, c2);
  if (std::abs(got - want) > 0.05 * want) fail("gaussian fid off by >5%");
  double sym = std::abs(fid(c1, c2) - fid(c2, c1));
  if (sym > 1e-6) fail("fid not symmetric");
  if (res.pass) {
    std::ostringstream os;
    os << "gaussian fid " << got << " vs closed form " << want;
    res.detail = os.str();
  }
  res.seconds = timer.seconds();
  return res;
}

std::vector<CheckResult> run_fast_checks() {
  return {check_codec_roundtrip(),  check_renderer_locality(),
          check_attention_oracle(), check_loss_anchors(),
          check_gradient_suite(),   check_metric_oracles()};
}

}  // namespace lang2face
