#pragma once

#include <cstdint>
#include <vector>

#include "lang2face/au.hpp"
#include "lang2face/image.hpp"

namespace lang2face {

// Bounded identity parameters; same seed, same face.
struct IdentityParams {
  double face_width;      // head ellipse width, fraction of image
  double face_height;
  double eye_spacing;     // distance between eye centers
  double mouth_width;     // distance between mouth corner ticks
  double brow_thickness;
  double skin[3];
  uint64_t seed = 0;

  static IdentityParams sample(uint64_t seed);
};

// Binary mask of every pixel an AU can alter, for any identity in range
// and any intensity. Identity-independent by construction.
struct RegionMask {
  AUId au;
  int size = 0;
  std::vector<uint8_t> cells;  // size*size, row-major

  bool test(int y, int x) const { return cells[size_t(y) * size + x] != 0; }
  int area() const;
  RegionMask dilated(int px) const;
};

// Deterministic render of one face at a square resolution. Intensity k
// deforms the AU's facial part by k/5 of that part's maximum
// displacement; crease-type AUs (4, 9) accumulate strokes with k.
Tensor<float> render(const IdentityParams& identity, const AUVector& au,
                     int size);

RegionMask region_mask(AUId au, int size);

}  // namespace lang2face
