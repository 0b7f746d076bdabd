#pragma once

#include <vector>

#include "lang2face/image.hpp"

namespace lang2face {

// Structural similarity of one image pair: 11-tap Gaussian window
// (sigma 1.5), C1=(0.01L)^2, C2=(0.03L)^2 on [0,1]-mapped values,
// averaged over channels and window positions.
double ssim(const Tensor<float>& x, const Tensor<float>& y);

// Frechet distance between Gaussian fits of two feature sets.
// features: one row per sample. Eigenvalues of the covariance products
// are clipped at 1e-10; meaningfully negative spectra raise
// DegenerateCovariance.
double fid(const std::vector<std::vector<double>>& features_a,
           const std::vector<std::vector<double>>& features_b);

}  // namespace lang2face
