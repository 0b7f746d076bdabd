#pragma once

#include <string>
#include <vector>

#include "lang2face/dims.hpp"
#include "lang2face/nn.hpp"

namespace lang2face {

template <typename S>
struct CriticScoreT {
  typename Tape<S>::Var uncond;  // [B] in (0,1)
  typename Tape<S>::Var cond;    // [B] in (0,1)
};

// Face/expression verification critics at levels 1 and 2 plus the
// synthesis critic at level 3. Each critic has an unconditional head and
// a head conditioned on the augmented sentence vector (tiled spatially
// and channel-concatenated at the trunk's last feature map).
template <typename S>
class Critics {
 public:
  explicit Critics(ModelDims dims) : dims_(dims) {
    for (int lvl = 1; lvl <= 3; ++lvl) {
      if (lvl < 3) {
        build_trunk("d_fv" + std::to_string(lvl), dims_.level_size(lvl),
                    fv_trunk_[lvl - 1]);
        build_heads("d_fv" + std::to_string(lvl), fv_heads_[lvl - 1]);
        build_trunk("f_ev" + std::to_string(lvl), dims_.level_size(lvl),
                    ev_enc_[lvl - 1]);
        build_heads("d_ev" + std::to_string(lvl), ev_heads_[lvl - 1]);
      }
    }
    build_trunk("d_syn", dims_.level_size(3), syn_trunk_);
    build_heads("d_syn", syn_heads_);
  }

  void init(ParamStore<S>& ps, uint64_t seed) {
    for (int i = 0; i < 2; ++i) {
      init_trunk(ps, seed, fv_trunk_[i]);
      init_heads(ps, seed, fv_heads_[i]);
      init_trunk(ps, seed, ev_enc_[i]);
      init_heads(ps, seed, ev_heads_[i]);
    }
    init_trunk(ps, seed, syn_trunk_);
    init_heads(ps, seed, syn_heads_);
  }

  // level n in {1,2}; img at the level's resolution
  CriticScoreT<S> face_verify(Tape<S>& t, ParamStore<S>& ps, int level,
                              typename Tape<S>::Var img,
                              typename Tape<S>::Var sentence,
                              bool trainable) const {
    if (level < 1 || level > 2)
      throw WrongLevel("face_verify exists at levels 1 and 2");
    check_level(t, img, level, "face_verify");
    auto f = trunk_forward(t, ps, fv_trunk_[level - 1], img, trainable);
    return heads_forward(t, ps, fv_heads_[level - 1], f, sentence, trainable);
  }

  // expression delta scoring: f_EV(candidate) - f_EV(neutral input)
  CriticScoreT<S> expression_verify(Tape<S>& t, ParamStore<S>& ps, int level,
                                    typename Tape<S>::Var candidate,
                                    typename Tape<S>::Var neutral,
                                    typename Tape<S>::Var sentence,
                                    bool trainable) const {
    auto delta = expression_delta(t, ps, level, candidate, neutral, trainable);
    return heads_forward(t, ps, ev_heads_[level - 1], delta, sentence,
                         trainable);
  }

  typename Tape<S>::Var expression_delta(Tape<S>& t, ParamStore<S>& ps,
                                         int level,
                                         typename Tape<S>::Var candidate,
                                         typename Tape<S>::Var neutral,
                                         bool trainable) const {
    if (level < 1 || level > 2)
      throw WrongLevel("expression_verify exists at levels 1 and 2");
    check_level(t, candidate, level, "expression_verify");
    check_level(t, neutral, level, "expression_verify");
    auto fc = trunk_forward(t, ps, ev_enc_[level - 1], candidate, trainable);
    auto fn = trunk_forward(t, ps, ev_enc_[level - 1], neutral, trainable);
    return t.sub(fc, fn);
  }

  // level-3 critic on the final synthesized image
  CriticScoreT<S> synthesis_verify(Tape<S>& t, ParamStore<S>& ps,
                                   typename Tape<S>::Var img,
                                   typename Tape<S>::Var sentence,
                                   bool trainable) const {
    const auto& shp = t.val(img).shape;
    int want = dims_.level_size(3);
    if (shp.size() != 4 || shp[1] != 3 || shp[2] != want || shp[3] != want)
      throw WrongShape("synthesis_verify expects level-3 images of size " +
                       std::to_string(want) + ", got " + shape_str(shp));
    auto f = trunk_forward(t, ps, syn_trunk_, img, trainable);
    return heads_forward(t, ps, syn_heads_, f, sentence, trainable);
  }

  const ModelDims& dims() const { return dims_; }

 private:
  struct Trunk {
    std::vector<Conv2d<S>> blocks;
    std::vector<InstanceNorm<S>> norms;  // none on the first block
  };
  struct Heads {
    Conv2d<S> u_conv;
    Dense<S> u_out;
    Conv2d<S> c_fuse;
    Conv2d<S> c_conv;
    Dense<S> c_out;
    int trunk_ch = 0;
  };

  void build_trunk(const std::string& name, int input_size, Trunk& trunk) {
    int c = dims_.critic_channels;
    int in_ch = 3, size = input_size, idx = 0;
    while (size > 4) {
      // last block always widens to the head width 4c
      int out_ch = (size / 2 > 4) ? std::min(c << idx, 4 * c) : 4 * c;
      trunk.blocks.push_back(
          {name + ".b" + std::to_string(idx), in_ch, out_ch, 4, 2, 1});
      if (idx > 0)
        trunk.norms.push_back({name + ".b" + std::to_string(idx) + "_n", out_ch});
      in_ch = out_ch;
      size /= 2;
      ++idx;
    }
  }

  void build_heads(const std::string& name, Heads& h) {
    int tc = 4 * dims_.critic_channels;
    // trunks that end shallower still report their real width at init
    h.trunk_ch = tc;
    h.u_conv = {name + ".u_conv", tc, tc, 3, 1, 1};
    h.u_out = {name + ".u_out", tc, 1};
    h.c_fuse = {name + ".c_fuse", tc + dims_.feat_channels, tc, 1, 1, 0};
    h.c_conv = {name + ".c_conv", tc, tc, 3, 1, 1};
    h.c_out = {name + ".c_out", tc, 1};
  }

  void init_trunk(ParamStore<S>& ps, uint64_t seed, Trunk& trunk) {
    for (auto& b : trunk.blocks) b.init(ps, seed);
    for (auto& n : trunk.norms) n.init(ps, seed);
  }
  void init_heads(ParamStore<S>& ps, uint64_t seed, Heads& h) {
    h.u_conv.init(ps, seed);
    h.u_out.init(ps, seed);
    h.c_fuse.init(ps, seed);
    h.c_conv.init(ps, seed);
    h.c_out.init(ps, seed);
  }

  void check_level(Tape<S>& t, typename Tape<S>::Var img, int level,
                   const char* who) const {
    const auto& shp = t.val(img).shape;
    int want = dims_.level_size(level);
    if (shp.size() != 4 || shp[1] != 3 || shp[2] != want || shp[3] != want)
      throw WrongLevel(std::string(who) + ": expected level-" +
                       std::to_string(level) + " size " + std::to_string(want) +
                       ", got " + shape_str(shp));
  }

  typename Tape<S>::Var conv(Tape<S>& t, ParamStore<S>& ps, const Conv2d<S>& c,
                             typename Tape<S>::Var x, bool trainable) const {
    if (trainable) return c.forward(t, ps, x);
    return t.conv2d(x, ps.use_frozen(t, c.name + ".w"),
                    ps.use_frozen(t, c.name + ".b"), c.stride, c.pad);
  }
  typename Tape<S>::Var dense(Tape<S>& t, ParamStore<S>& ps, const Dense<S>& d,
                              typename Tape<S>::Var x, bool trainable) const {
    if (trainable) return d.forward(t, ps, x);
    return t.bias_add_row(t.matmul(x, ps.use_frozen(t, d.name + ".w")),
                          ps.use_frozen(t, d.name + ".b"));
  }

  typename Tape<S>::Var trunk_forward(Tape<S>& t, ParamStore<S>& ps,
                                      const Trunk& trunk,
                                      typename Tape<S>::Var x,
                                      bool trainable) const {
    for (size_t i = 0; i < trunk.blocks.size(); ++i) {
      x = conv(t, ps, trunk.blocks[i], x, trainable);
      if (i > 0) {
        const auto& n = trunk.norms[i - 1];
        x = trainable ? n.forward(t, ps, x)
                      : t.instance_norm(x, ps.use_frozen(t, n.name + ".g"),
                                        ps.use_frozen(t, n.name + ".b"));
      }
      x = t.leaky_relu(x);
    }
    return x;  // [B, 4c, 4, 4]
  }

  CriticScoreT<S> heads_forward(Tape<S>& t, ParamStore<S>& ps, const Heads& h,
                                typename Tape<S>::Var feat,
                                typename Tape<S>::Var sentence,
                                bool trainable) const {
    // copy: later ops may reallocate node storage
    const std::vector<int> fs = t.val(feat).shape;
    CriticScoreT<S> out;
    {
      auto u = t.leaky_relu(conv(t, ps, h.u_conv, feat, trainable));
      auto pooled = t.avgpool_global(u);
      out.uncond = t.sigmoid_(
          t.reshape(dense(t, ps, h.u_out, pooled, trainable), {fs[0]}));
    }
    {
      auto tiled = t.tile_hw(sentence, fs[2], fs[3]);
      auto fused = t.leaky_relu(
          conv(t, ps, h.c_fuse, t.concat(feat, tiled, 1), trainable));
      auto c = t.leaky_relu(conv(t, ps, h.c_conv, fused, trainable));
      auto pooled = t.avgpool_global(c);
      out.cond = t.sigmoid_(
          t.reshape(dense(t, ps, h.c_out, pooled, trainable), {fs[0]}));
    }
    return out;
  }

  ModelDims dims_;
  Trunk fv_trunk_[2], ev_enc_[2], syn_trunk_;
  Heads fv_heads_[2], ev_heads_[2], syn_heads_;
};

}  // namespace lang2face
