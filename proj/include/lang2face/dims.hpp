#pragma once

#include "lang2face/errors.hpp"

namespace lang2face {

// Network dimensioning. The toy profile trains on a desktop CPU; the
// paper profile reproduces the published tensor shapes (256x256 input,
// 512-dim features).
struct ModelDims {
  int base_size = 16;  // level-1 image size; L2 = 2x, L3 = 4x
  int d_word = 64;     // word/sentence feature dim
  int n_max = 24;      // token frame length
  int embed_dim = 32;
  int vse_channels = 16;   // VSE trunk base width
  int feat_channels = 64;  // FFE output channels (2x2xC)
  int gen_channels = 48;   // synthesizer trunk width
  int res_blocks = 2;
  int critic_channels = 16;  // critic trunk base width

  int lstm_hidden() const { return d_word / 2; }
  int level_size(int level) const {  // level 1..3
    return base_size << (level - 1);
  }
  int l3_size() const { return base_size * 4; }

  void validate() const {
    if (base_size < 8 || (base_size & (base_size - 1)) != 0)
      throw ConfigError("base_size must be a power of two >= 8");
    if (d_word % 2 != 0) throw ConfigError("d_word must be even");
  }

  static ModelDims toy() { return ModelDims{}; }
  static ModelDims paper_scale() {
    ModelDims d;
    d.base_size = 64;  // L3 = 256
    d.d_word = 512;
    d.embed_dim = 128;
    d.vse_channels = 32;
    d.feat_channels = 512;
    d.gen_channels = 64;
    d.res_blocks = 4;
    d.critic_channels = 32;
    return d;
  }
};

}  // namespace lang2face
