#pragma once

#include <string>
#include <vector>

#include "lang2face/tensor.hpp"

namespace lang2face {

// Images are Tensor<float> of shape {3, H, W} with values in [-1, 1].

void write_png(const std::string& path, const Tensor<float>& img);
Tensor<float> read_png(const std::string& path);

// integer-factor area downsampling (pyramid levels for targets)
Tensor<float> downsample(const Tensor<float>& img, int factor);

// nearest-neighbor upscale by integer factor
Tensor<float> upsample(const Tensor<float>& img, int factor);

// horizontal concatenation with a 2px separator (for result grids)
Tensor<float> hcat(const std::vector<Tensor<float>>& imgs);

double l1_distance(const Tensor<float>& a, const Tensor<float>& b);

}  // namespace lang2face
