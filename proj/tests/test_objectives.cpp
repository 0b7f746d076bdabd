#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lang2face/objectives.hpp"
#include "lang2face/random.hpp"

using namespace lang2face;

TEST_CASE("closed-form anchors at the 0.5 score point") {
  CriticScore half{0.5, 0.5};
  CHECK(loss_fv(half, half) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss_ev(half, half) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss_adv(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("perfect-critic and generator-wins limits approach zero") {
  CriticScore real{1 - 1e-9, 1 - 1e-9};
  CriticScore fake{1e-9, 1e-9};
  CHECK(loss_fv(real, fake) < 1e-7);
  CHECK(loss_adv(real) < 1e-7);
}

TEST_CASE("mixed-score values match direct evaluation") {
  CHECK(loss_fv({0.8, 0.8}, {0.3, 0.3}) ==
        doctest::Approx(-(std::log(0.8) + std::log(0.7))).epsilon(1e-12));
  CHECK(loss_fv({0.8, 0.8}, {0.3, 0.3}) == doctest::Approx(0.579818).epsilon(1e-5));
  CHECK(loss_adv({0.9, 0.6}) ==
        doctest::Approx(-0.5 * (std::log(0.9) + std::log(0.6))).epsilon(1e-12));
  CHECK(loss_adv({0.9, 0.6}) == doctest::Approx(0.308094).epsilon(1e-5));
}

TEST_CASE("loss_ev has exactly the loss_fv functional form") {
  RandomStream rs(1, "ev_form");
  for (int i = 0; i < 100; ++i) {
    CriticScore a{rs.uniform(0.01, 0.99), rs.uniform(0.01, 0.99)};
    CriticScore b{rs.uniform(0.01, 0.99), rs.uniform(0.01, 0.99)};
    CHECK(loss_ev(a, b) == loss_fv(a, b));
  }
}

TEST_CASE("scores outside the open interval raise DomainError") {
  CriticScore ok{0.5, 0.5};
  CHECK_THROWS_AS(loss_fv({0.0, 0.5}, ok), DomainError);
  CHECK_THROWS_AS(loss_fv(ok, {0.5, 1.0}), DomainError);
  CHECK_THROWS_AS(loss_adv({-0.1, 0.5}), DomainError);
}

TEST_CASE("totals are plain sums validated against a summation oracle") {
  RandomStream rs(2, "sums");
  for (int i = 0; i < 200; ++i) {
    double syn = rs.uniform(0, 3);
    std::array<double, 2> fv{rs.uniform(0, 3), rs.uniform(0, 3)};
    std::array<double, 2> ev{rs.uniform(0, 3), rs.uniform(0, 3)};
    double want = syn + fv[0] + fv[1] + ev[0] + ev[1];
    CHECK(loss_d_total(syn, fv, ev) == doctest::Approx(want).epsilon(1e-9));

    std::array<double, 3> adv{rs.uniform(0, 2), rs.uniform(0, 2), rs.uniform(0, 2)};
    std::array<double, 3> id{rs.uniform(0, 2), rs.uniform(0, 2), rs.uniform(0, 2)};
    std::array<double, 3> rec{rs.uniform(0, 2), rs.uniform(0, 2), rs.uniform(0, 2)};
    LossWeights w;
    double wantg = 0;
    for (int m = 0; m < 3; ++m)
      wantg += w.lambda1 * adv[size_t(m)] + w.lambda2 * id[size_t(m)] +
               w.lambda3 * rec[size_t(m)];
    CHECK(loss_g_total(adv, id, rec, w) == doctest::Approx(wantg).epsilon(1e-9));
  }
}

TEST_CASE("unit components with the published weights give 18.015") {
  LossWeights w;  // lambda1=1, lambda2=5, lambda3=0.005
  CHECK(loss_g_total({1, 1, 1}, {1, 1, 1}, {1, 1, 1}, w) ==
        doctest::Approx(18.015).epsilon(1e-12));
}

TEST_CASE("all-0.5 discriminator components sum to 10 ln 2") {
  double c = 2 * std::log(2.0);
  CHECK(loss_d_total(c, {c, c}, {c, c}) ==
        doctest::Approx(5 * c).epsilon(1e-12));
}

TEST_CASE("loss_total is a plain sum") {
  CHECK(loss_total(1, 2, 3) == 6);
  CHECK(loss_total(0, 0, 0) == 0);
}

TEST_CASE("identity and reconstruction losses") {
  Tensor<double> a({2, 3, 2, 2});
  RandomStream rs(3, "id_rec");
  for (auto& v : a.data) v = rs.normal();
  CHECK(loss_identity(a, a) == 0.0);
  CHECK(loss_recon(a, a) == 0.0);

  Tensor<double> b = a;
  for (auto& v : b.data) v += 0.25;
  CHECK(loss_recon(a, b) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(loss_identity(a, b) == doctest::Approx(0.0625).epsilon(1e-12));

  // symmetry in both arguments
  Tensor<double> c({2, 3, 2, 2});
  for (auto& v : c.data) v = rs.normal();
  CHECK(loss_identity(a, c) == doctest::Approx(loss_identity(c, a)).epsilon(1e-12));
  CHECK(loss_recon(a, c) == doctest::Approx(loss_recon(c, a)).epsilon(1e-12));

  // brute-force oracle
  double want = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    want += std::abs(a.data[i] - c.data[i]);
  want /= double(a.numel());
  CHECK(loss_recon(a, c) == doctest::Approx(want).epsilon(1e-12));

  // tiny hand stub for the identity loss
  Tensor<double> s1({2}), s2({2});
  s1.data = {1.0, -2.0};
  s2.data = {0.0, 2.0};
  CHECK(loss_identity(s1, s2) == doctest::Approx((1.0 + 16.0) / 2).epsilon(1e-12));
}

TEST_CASE("nonnegativity on random interior scores") {
  RandomStream rs(4, "nonneg");
  for (int i = 0; i < 300; ++i) {
    CriticScore r{rs.uniform(0.01, 0.99), rs.uniform(0.01, 0.99)};
    CriticScore f{rs.uniform(0.01, 0.99), rs.uniform(0.01, 0.99)};
    CHECK(loss_fv(r, f) >= 0.0);
    CHECK(loss_adv(f) >= 0.0);
  }
}

TEST_CASE("LossReport: totals recompute and CSV round-trips") {
  LossReport r;
  r.step = 17;
  RandomStream rs(5, "report");
  r.l_lvm = rs.uniform(0, 2);
  for (int i = 0; i < 2; ++i) {
    r.l_fv[i] = rs.uniform(0, 2);
    r.l_ev[i] = rs.uniform(0, 2);
  }
  r.l_syn = rs.uniform(0, 2);
  for (int i = 0; i < 3; ++i) {
    r.l_adv[i] = rs.uniform(0, 2);
    r.l_id[i] = rs.uniform(0, 2);
    r.l_recon[i] = rs.uniform(0, 2);
  }
  r.l_ca_kl = rs.uniform(0, 1);
  LossWeights w;
  r.recompute_totals(w);

  double d = r.l_syn + r.l_fv[0] + r.l_fv[1] + r.l_ev[0] + r.l_ev[1];
  CHECK(r.l_d_total == doctest::Approx(d).epsilon(1e-9));
  CHECK(r.total == doctest::Approx(r.l_lvm + r.l_d_total + r.l_g_total).epsilon(1e-9));

  LossReport back = LossReport::from_csv_row(r.csv_row());
  CHECK(back.step == r.step);
  CHECK(back.l_g_total == doctest::Approx(r.l_g_total).epsilon(1e-9));
  CHECK(back.l_recon[2] == doctest::Approx(r.l_recon[2]).epsilon(1e-9));
  CHECK(LossReport::csv_header().substr(0, 10) == "step,L_LVM");
}
