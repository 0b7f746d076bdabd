#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lang2face/image.hpp"
#include "lang2face/random.hpp"
#include "lang2face/renderer.hpp"

using namespace lang2face;

namespace {
IdentityParams identity(int n) {
  return IdentityParams::sample(RandomStream(321, "render_test", uint64_t(n)).next_u64());
}
}  // namespace

TEST_CASE("render is deterministic and bounded") {
  IdentityParams id = identity(0);
  AUVector au{{AUId::AU12, 3}};
  Tensor<float> a = render(id, au, 64);
  Tensor<float> b = render(id, au, 64);
  CHECK(a.data == b.data);
  for (float v : a.data) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("same seed gives identical identity parameters") {
  IdentityParams a = IdentityParams::sample(99);
  IdentityParams b = IdentityParams::sample(99);
  CHECK(a.face_width == b.face_width);
  CHECK(a.eye_spacing == b.eye_spacing);
  CHECK(a.skin[1] == b.skin[1]);
}

TEST_CASE("changed pixels stay inside the dilated region mask") {
  const int size = 64;
  for (AUId au : all_aus()) {
    RegionMask mask = region_mask(au, size).dilated(2);
    for (int n = 0; n < 5; ++n) {
      IdentityParams id = identity(n);
      Tensor<float> neutral = render(id, AUVector{}, size);
      AUVector v;
      v.set(au, 5);
      Tensor<float> img = render(id, v, size);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          bool changed = false;
          for (int c = 0; c < 3; ++c)
            changed = changed || img.at(c, y, x) != neutral.at(c, y, x);
          if (changed) CHECK(mask.test(y, x));
        }
    }
  }
}

TEST_CASE("mask superset property over 100 seeded identities") {
  const int size = 64;
  for (AUId au : all_aus()) {
    RegionMask mask = region_mask(au, size);
    // union of deform pixels over identities and intensities
    for (int n = 0; n < 100; ++n) {
      IdentityParams id = identity(1000 + n);
      Tensor<float> neutral = render(id, AUVector{}, size);
      for (int k = 1; k <= 5; k += 4) {
        AUVector v;
        v.set(au, k);
        Tensor<float> img = render(id, v, size);
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            bool changed = false;
            for (int c = 0; c < 3; ++c)
              changed = changed || img.at(c, y, x) != neutral.at(c, y, x);
            if (changed) {
              INFO(au_name(au) << " k=" << k << " identity " << n << " at ("
                               << y << "," << x << ")");
              REQUIRE(mask.test(y, x));
            }
          }
      }
    }
  }
}

TEST_CASE("L1 distance to neutral is strictly increasing in intensity") {
  const int size = 64;
  for (AUId au : all_aus())
    for (int n = 0; n < 10; ++n) {
      IdentityParams id = identity(50 + n);
      Tensor<float> neutral = render(id, AUVector{}, size);
      double prev = 0;
      for (int k = 1; k <= 5; ++k) {
        AUVector v;
        v.set(au, k);
        double l1 = l1_distance(render(id, v, size), neutral);
        INFO(au_name(au) << " k=" << k);
        CHECK(l1 > prev);
        prev = l1;
      }
    }
}

TEST_CASE("masks are nonempty and pairwise disjoint except AU25/AU26") {
  const int size = 64;
  std::vector<RegionMask> masks;
  for (AUId au : all_aus()) {
    masks.push_back(region_mask(au, size));
    CHECK(masks.back().area() > 0);
  }
  for (size_t i = 0; i < masks.size(); ++i)
    for (size_t j = i + 1; j < masks.size(); ++j) {
      bool allowed = (masks[i].au == AUId::AU25 && masks[j].au == AUId::AU26) ||
                     (masks[i].au == AUId::AU26 && masks[j].au == AUId::AU25);
      if (allowed) continue;
      int overlap = 0;
      for (int c = 0; c < size * size; ++c)
        overlap += (masks[i].cells[size_t(c)] && masks[j].cells[size_t(c)]);
      INFO(au_name(masks[i].au) << " vs " << au_name(masks[j].au));
      CHECK(overlap == 0);
    }
}

TEST_CASE("AU26 mask sits in the lower third of the face box") {
  RegionMask m = region_mask(AUId::AU26, 64);
  // face bounding box at maximum extent: y in [0.09, 0.97] of the image
  int face_top = int(0.09 * 64), face_bottom = int(0.97 * 64);
  int lower_third_start = face_top + (face_bottom - face_top) * 2 / 3;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (m.test(y, x)) CHECK(y >= lower_third_start);
}

TEST_CASE("identity separation dominates adjacent-intensity distance") {
  const int size = 64;
  double cross_sum = 0, adj_sum = 0;
  int cross_n = 0, adj_n = 0;
  std::vector<IdentityParams> ids;
  for (int n = 0; n < 20; ++n) ids.push_back(identity(300 + n));
  AUVector au{{AUId::AU26, 3}};
  std::vector<Tensor<float>> imgs;
  for (const auto& id : ids) imgs.push_back(render(id, au, size));
  for (size_t i = 0; i < ids.size(); ++i) {
    for (size_t j = i + 1; j < ids.size(); ++j) {
      cross_sum += l1_distance(imgs[i], imgs[j]);
      ++cross_n;
    }
    AUVector a2{{AUId::AU26, 4}};
    adj_sum += l1_distance(imgs[i], render(ids[i], a2, size));
    ++adj_n;
  }
  CHECK(cross_sum / cross_n > adj_sum / adj_n);
}

TEST_CASE("unsupported intensity is rejected") {
  IdentityParams id = identity(7);
  AUVector v;
  CHECK_THROWS_AS(v.set(AUId::AU9, 9), IntensityOutOfRange);
}

TEST_CASE("renders scale across pyramid levels") {
  IdentityParams id = identity(3);
  AUVector au{{AUId::AU25, 4}};
  for (int size : {16, 32, 64}) {
    Tensor<float> img = render(id, au, size);
    CHECK(img.shape == std::vector<int>{3, size, size});
  }
}

TEST_CASE("png round-trip preserves pixels to quantization") {
  IdentityParams id = identity(11);
  Tensor<float> img = render(id, AUVector{{AUId::AU9, 5}}, 32);
  write_png("/tmp/l2f_render_test.png", img);
  Tensor<float> back = read_png("/tmp/l2f_render_test.png");
  REQUIRE(back.shape == img.shape);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(img.data[i] - back.data[i]) <= 1.0f / 127.5f + 1e-6f);
}
