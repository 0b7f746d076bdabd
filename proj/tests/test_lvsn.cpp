#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lang2face/lvsn.hpp"
#include "lang2face/random.hpp"

using namespace lang2face;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.base_size = 8;  // l3 = 32
  d.d_word = 16;
  d.n_max = 8;
  d.embed_dim = 8;
  d.vse_channels = 4;
  return d;
}

struct Fixture {
  ModelDims dims = tiny_dims();
  Lvsn<float> model{dims, 20};
  ParamStore<float> params;
  Fixture() { model.init(params, 42); }
};

Tensor<int> tokens_of(const std::vector<std::vector<int>>& rows, int n_max) {
  Tensor<int> t({int(rows.size()), n_max});
  for (size_t b = 0; b < rows.size(); ++b)
    for (int n = 0; n < n_max; ++n)
      t.at(int(b), n) = n < int(rows[b].size()) ? rows[b][size_t(n)] : 0;
  return t;
}

Tensor<float> rand_img(int b, int s, uint64_t seed) {
  Tensor<float> t({b, 3, s, s});
  RandomStream rs(seed, "lvsn_test");
  for (auto& v : t.data) v = float(rs.uniform(-1, 1));
  return t;
}

}  // namespace

TEST_CASE("encode_words shapes and padding neutrality") {
  Fixture f;
  Tape<float> t;
  auto tok = tokens_of({{3, 4, 5}, {3, 4, 5, 6, 7}}, f.dims.n_max);
  auto out = f.model.encode_words(t, f.params, tok, {3, 5}, false);
  CHECK(t.val(out.words).shape == std::vector<int>{2, f.dims.n_max, 16});
  CHECK(t.val(out.sentence).shape == std::vector<int>{2, 16});

  // same prefix, different PAD tail: unmasked columns identical
  Tape<float> t2;
  auto tok2 = tokens_of({{3, 4, 5}, {3, 4, 5}}, f.dims.n_max);
  auto out2 = f.model.encode_words(t2, f.params, tok2, {3, 3}, false);
  const auto& w = t2.val(out2.words);
  for (int n = 0; n < 3; ++n)
    for (int d = 0; d < 16; ++d)
      CHECK(w.at(0, n, d) == w.at(1, n, d));
}

TEST_CASE("word order matters (not a bag of words)") {
  Fixture f;
  Tape<float> t;
  auto tok = tokens_of({{3, 4}, {4, 3}}, f.dims.n_max);
  auto out = f.model.encode_words(t, f.params, tok, {2, 2}, false);
  const auto& w = t.val(out.words);
  double diff = 0;
  for (int d = 0; d < 16; ++d)
    diff += std::abs(double(w.at(0, 0, d)) - double(w.at(1, 0, d)));
  CHECK(diff > 1e-6);
}

TEST_CASE("encode_visual shape, purity and level validation") {
  Fixture f;
  Tape<float> t;
  auto img = t.constant(rand_img(2, 32, 9));
  auto v1 = f.model.encode_visual(t, f.params, img, false);
  auto v2 = f.model.encode_visual(t, f.params, img, false);
  CHECK(t.val(v1.global).shape == std::vector<int>{2, 16});
  CHECK(t.val(v1.regions).shape ==
        std::vector<int>{2, f.model.region_count(), 16});
  CHECK(t.val(v1.global).data == t.val(v2.global).data);

  auto small = t.constant(rand_img(2, 16, 10));
  CHECK_THROWS_AS(f.model.encode_visual(t, f.params, small, false), WrongLevel);
}

TEST_CASE("encode_words rejects overlong input") {
  Fixture f;
  Tape<float> t;
  auto tok = tokens_of({{3, 4, 5}}, f.dims.n_max);
  CHECK_THROWS_AS(f.model.encode_words(t, f.params, tok, {f.dims.n_max + 1}, false),
                  LengthMismatch);
}

TEST_CASE("matching loss: indistinguishable batch hits the uniform value") {
  // all features identical -> softmax uniform -> 2 ln B per granularity
  for (int B : {2, 4, 8}) {
    Tape<double> t;
    Tensor<double> s({B, 6}), g({B, 6}), w({B, 3, 6}), r({B, 2, 6});
    for (auto* ten : {&s, &g}) {
      for (int b = 0; b < B; ++b)
        for (int d = 0; d < 6; ++d) ten->at(b, d) = 0.3 * (d + 1);
    }
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < 3; ++n)
        for (int d = 0; d < 6; ++d) w.at(b, n, d) = 0.1 * (d + 1) + n;
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < 2; ++n)
        for (int d = 0; d < 6; ++d) r.at(b, n, d) = 0.2 * (d + 1) - n;
    Tensor<double> mask({B, 3});
    mask.fill(1.0);

    MatchingGammas gam;
    gam.word_level = false;
    {
      Tape<double> tape;
      WordFeaturesT<double> wf{tape.constant(w), tape.constant(s), mask};
      VisualFeaturesT<double> vf{tape.constant(r), tape.constant(g)};
      double loss = tape.scalar(matching_loss(tape, wf, vf, gam));
      CHECK(loss == doctest::Approx(2 * std::log(double(B))).epsilon(1e-9));
    }
    gam.word_level = true;
    {
      Tape<double> tape;
      WordFeaturesT<double> wf{tape.constant(w), tape.constant(s), mask};
      VisualFeaturesT<double> vf{tape.constant(r), tape.constant(g)};
      double loss = tape.scalar(matching_loss(tape, wf, vf, gam));
      CHECK(loss == doctest::Approx(4 * std::log(double(B))).epsilon(1e-9));
    }
  }
}

TEST_CASE("matching loss: B=2 orthogonal pairs against a softmax oracle") {
  // aligned within pairs, orthogonal across pairs, sentence level only
  Tape<double> t;
  Tensor<double> s({2, 4}), g({2, 4});
  s.fill(0);
  g.fill(0);
  s.at(0, 0) = 1.0; s.at(1, 1) = 1.0;
  g.at(0, 0) = 1.0; g.at(1, 1) = 1.0;
  Tensor<double> w({2, 1, 4}), r({2, 1, 4});
  Tensor<double> mask({2, 1});
  mask.fill(1.0);
  MatchingGammas gam;
  gam.word_level = false;
  gam.gamma3 = 1.0;
  WordFeaturesT<double> wf{t.constant(w), t.constant(s), mask};
  VisualFeaturesT<double> vf{t.constant(r), t.constant(g)};
  double loss = t.scalar(matching_loss(t, wf, vf, gam));
  // independent oracle: per row softmax over {1, 0} logits
  double per_item = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(loss == doctest::Approx(2 * per_item).epsilon(1e-12));
  CHECK(loss == doctest::Approx(2 * std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("matching loss is invariant to positive rescaling of one feature") {
  RandomStream rs(77, "scale_inv");
  Tensor<double> s({3, 5}), g({3, 5}), w({3, 2, 5}), r({3, 2, 5});
  for (auto* ten : {&s, &g}) for (auto& v : ten->data) v = rs.normal();
  for (auto* ten : {&w, &r}) for (auto& v : ten->data) v = rs.normal();
  Tensor<double> mask({3, 2});
  mask.fill(1.0);
  MatchingGammas gam;
  gam.word_level = false;
  auto eval = [&](const Tensor<double>& sent) {
    Tape<double> t;
    WordFeaturesT<double> wf{t.constant(w), t.constant(sent), mask};
    VisualFeaturesT<double> vf{t.constant(r), t.constant(g)};
    return t.scalar(matching_loss(t, wf, vf, gam));
  };
  double base = eval(s);
  Tensor<double> scaled = s;
  for (int d = 0; d < 5; ++d) scaled.at(1, d) *= 7.3;  // one vector rescaled
  CHECK(eval(scaled) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("matching loss rejects tiny batches, cosine stays bounded") {
  Tape<double> t;
  Tensor<double> s({1, 4}), g({1, 4}), w({1, 2, 4}), r({1, 2, 4});
  Tensor<double> mask({1, 2});
  mask.fill(1.0);
  WordFeaturesT<double> wf{t.constant(w), t.constant(s), mask};
  VisualFeaturesT<double> vf{t.constant(r), t.constant(g)};
  CHECK_THROWS_AS(matching_loss(t, wf, vf, MatchingGammas{}), BatchTooSmall);

  // cosine bound: |cos| <= 1 for random features
  RandomStream rs(5, "cos");
  Tape<double> t2;
  Tensor<double> a({4, 6}), b({4, 6});
  for (auto& v : a.data) v = rs.normal() * 3;
  for (auto& v : b.data) v = rs.normal() * 0.1;
  auto an = t2.l2_normalize_lastdim(t2.constant(a));
  auto bn = t2.l2_normalize_lastdim(t2.constant(b));
  auto sim = t2.matmul(an, t2.permute(bn, {1, 0}));
  for (double v : t2.val(sim).data) {
    CHECK(v <= 1.0 + 1e-9);
    CHECK(v >= -1.0 - 1e-9);
  }
}

TEST_CASE("masked words contribute nothing to word-level matching") {
  RandomStream rs(31, "mask_test");
  Tensor<double> s({2, 4}), g({2, 4}), w({2, 3, 4}), r({2, 2, 4});
  for (auto* ten : {&s, &g}) for (auto& v : ten->data) v = rs.normal();
  for (auto* ten : {&w, &r}) for (auto& v : ten->data) v = rs.normal();
  Tensor<double> mask({2, 3});
  mask.fill(1.0);
  mask.at(1, 2) = 0.0;  // PAD
  MatchingGammas gam;
  auto eval = [&](const Tensor<double>& words) {
    Tape<double> t;
    WordFeaturesT<double> wf{t.constant(words), t.constant(s), mask};
    VisualFeaturesT<double> vf{t.constant(r), t.constant(g)};
    return t.scalar(matching_loss(t, wf, vf, gam));
  };
  double base = eval(w);
  Tensor<double> poked = w;
  for (int d = 0; d < 4; ++d) poked.at(1, 2, d) = 1000.0;  // only the PAD word
  CHECK(eval(poked) == doctest::Approx(base).epsilon(1e-12));
}
