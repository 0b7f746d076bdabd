#pragma once

#include <string>
#include <vector>

#include "lang2face/dims.hpp"
#include "lang2face/nn.hpp"

namespace lang2face {

// Language-Visual Semantic Network: bidirectional-LSTM language encoder
// (LSE), convolutional visual encoder (VSE) and the two-granularity
// cosine matching loss. Encoders are pretrained, then frozen.

struct MatchingGammas {
  double gamma1 = 5.0;   // region-attention sharpening
  double gamma2 = 5.0;   // word-score pooling
  double gamma3 = 10.0;  // batch softmax scale
  bool word_level = true;
};

template <typename S>
struct WordFeaturesT {
  typename Tape<S>::Var words;     // [B, N, D]
  typename Tape<S>::Var sentence;  // [B, D]
  Tensor<S> mask;                  // [B, N] 0/1 word mask
};

template <typename S>
struct VisualFeaturesT {
  typename Tape<S>::Var regions;  // [B, R, D]
  typename Tape<S>::Var global;   // [B, D]
};

template <typename S>
class Lvsn {
 public:
  struct MatSpec {
    std::string name;
    int rows = 0, cols = 0;
  };

  Lvsn(ModelDims dims, int vocab_size) : dims_(dims), vocab_size_(vocab_size) {
    int H = dims_.lstm_hidden();
    embed_ = {"lse.embed", vocab_size_, dims_.embed_dim};
    fwd_x_ = {"lse.fwd.x", dims_.embed_dim, 4 * H};
    fwd_h_ = {"lse.fwd.h", H, 4 * H};
    bwd_x_ = {"lse.bwd.x", dims_.embed_dim, 4 * H};
    bwd_h_ = {"lse.bwd.h", H, 4 * H};
    int c = dims_.vse_channels;
    int l3 = dims_.l3_size();
    int size = l3;
    int in_ch = 3;
    for (int b = 0; b < 4; ++b) {  // 4-block strided trunk
      int out_ch = c << std::min(b, 2);
      vse_blocks_.push_back(
          {"vse.block" + std::to_string(b), in_ch, out_ch, 4, 2, 1});
      in_ch = out_ch;
      size /= 2;
    }
    vse_out_ch_ = in_ch;
    region_grid_ = size;
    vse_region_proj_ = {"vse.region_proj", in_ch, dims_.d_word, 1, 1, 0};
    vse_global_ = {"vse.global", in_ch, dims_.d_word};
  }

  void init(ParamStore<S>& ps, uint64_t seed) const {
    auto& e = ps.create(embed_.name, {embed_.rows, embed_.cols});
    init_normal(e, seed, embed_.name, 0.1);
    init_lstm(ps, seed, fwd_x_);
    init_lstm(ps, seed, fwd_h_);
    init_lstm(ps, seed, bwd_x_);
    init_lstm(ps, seed, bwd_h_);
    ps.create("lse.fwd.b", {4 * dims_.lstm_hidden()});
    ps.create("lse.bwd.b", {4 * dims_.lstm_hidden()});
    for (const auto& b : vse_blocks_) b.init(ps, seed);
    vse_region_proj_.init(ps, seed);
    vse_global_.init(ps, seed);
  }

  // tokens: [B, n_max] ids; lengths: actual token counts
  WordFeaturesT<S> encode_words(Tape<S>& t, ParamStore<S>& ps,
                                const Tensor<int>& tokens,
                                const std::vector<int>& lengths,
                                bool trainable) const {
    int B = tokens.shape[0], N = tokens.shape[1];
    if (N != dims_.n_max)
      throw LengthMismatch("encode_words: expected n_max tokens");
    for (int len : lengths)
      if (len > N) throw LengthMismatch("encode_words: length exceeds n_max");
    int H = dims_.lstm_hidden();

    auto P = [&](const std::string& n) {
      return trainable ? ps.use(t, n) : ps.use_frozen(t, n);
    };

    auto emb = t.embed(tokens, P(embed_.name));  // [B,N,E]

    // per-step 0/1 masks
    std::vector<Tensor<S>> masks(size_t(N), Tensor<S>({B}));
    Tensor<S> word_mask({B, N});
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < N; ++n) {
        S m = n < lengths[size_t(b)] ? S(1) : S(0);
        masks[size_t(n)][size_t(b)] = m;
        word_mask.at(b, n) = m;
      }

    auto run_dir = [&](bool forward) {
      auto wx = P(forward ? fwd_x_.name : bwd_x_.name);
      auto wh = P(forward ? fwd_h_.name : bwd_h_.name);
      auto bias = P(forward ? "lse.fwd.b" : "lse.bwd.b");
      auto h = t.constant(Tensor<S>({B, H}));
      auto c = t.constant(Tensor<S>({B, H}));
      std::vector<typename Tape<S>::Var> outs;
      outs.resize(size_t(N));
      for (int step = 0; step < N; ++step) {
        int n = forward ? step : N - 1 - step;
        auto x = t.reshape(t.slice(emb, 1, n, 1), {B, dims_.embed_dim});
        auto gates = t.bias_add_row(
            t.add(t.matmul(x, wx), t.matmul(h, wh)), bias);
        auto ig = t.sigmoid_(t.slice(gates, 1, 0, H));
        auto fg = t.sigmoid_(t.slice(gates, 1, H, H));
        auto gg = t.tanh_(t.slice(gates, 1, 2 * H, H));
        auto og = t.sigmoid_(t.slice(gates, 1, 3 * H, H));
        auto c_new = t.add(t.mul(fg, c), t.mul(ig, gg));
        auto h_new = t.mul(og, t.tanh_(c_new));
        // PAD steps carry state through unchanged
        c = t.lerp_rows(c, c_new, masks[size_t(n)]);
        h = t.lerp_rows(h, h_new, masks[size_t(n)]);
        outs[size_t(n)] = h;
      }
      return std::pair{outs, h};
    };

    auto [fwd_outs, fwd_last] = run_dir(true);
    auto [bwd_outs, bwd_last] = run_dir(false);

    std::vector<typename Tape<S>::Var> per_word;
    per_word.resize(size_t(N));
    for (int n = 0; n < N; ++n)
      per_word[size_t(n)] = t.concat(fwd_outs[size_t(n)], bwd_outs[size_t(n)], 1);
    WordFeaturesT<S> out;
    out.words = t.stack_axis1(per_word);           // [B,N,D]
    out.sentence = t.concat(fwd_last, bwd_last, 1);  // [B,D]
    out.mask = word_mask;
    return out;
  }

  // img: [B,3,l3,l3] in [-1,1]
  VisualFeaturesT<S> encode_visual(Tape<S>& t, ParamStore<S>& ps,
                                   typename Tape<S>::Var img,
                                   bool trainable) const {
    const std::vector<int> shp = t.val(img).shape;
    int l3 = dims_.l3_size();
    if (shp.size() != 4 || shp[1] != 3 || shp[2] != l3 || shp[3] != l3)
      throw WrongLevel("encode_visual expects level-3 images of size " +
                       std::to_string(l3) + ", got " + shape_str(shp));
    auto x = img;
    for (const auto& blk : vse_blocks_) {
      x = trainable ? blk.forward(t, ps, x)
                    : t.conv2d(x, ps.use_frozen(t, blk.name + ".w"),
                               ps.use_frozen(t, blk.name + ".b"), blk.stride,
                               blk.pad);
      x = t.leaky_relu(x);
    }
    int B = shp[0];
    int R = region_grid_ * region_grid_;
    typename Tape<S>::Var regions;
    if (trainable) {
      regions = vse_region_proj_.forward(t, ps, x);
    } else {
      regions = t.conv2d(x, ps.use_frozen(t, vse_region_proj_.name + ".w"),
                         ps.use_frozen(t, vse_region_proj_.name + ".b"), 1, 0);
    }
    // [B,D,g,g] -> [B,R,D]
    regions = t.permute(t.reshape(regions, {B, dims_.d_word, R}), {0, 2, 1});
    auto pooled = t.avgpool_global(x);  // [B,C]
    typename Tape<S>::Var global;
    if (trainable) {
      global = vse_global_.forward(t, ps, pooled);
    } else {
      global = t.bias_add_row(
          t.matmul(pooled, ps.use_frozen(t, vse_global_.name + ".w")),
          ps.use_frozen(t, vse_global_.name + ".b"));
    }
    return {regions, global};
  }

  int region_count() const { return region_grid_ * region_grid_; }
  const ModelDims& dims() const { return dims_; }
  int vocab_size() const { return vocab_size_; }

 private:
  void init_lstm(ParamStore<S>& ps, uint64_t seed, const MatSpec& spec) const {
    auto& w = ps.create(spec.name, {spec.rows, spec.cols});
    init_normal(w, seed, spec.name, std::sqrt(1.0 / spec.rows));
  }

  ModelDims dims_;
  int vocab_size_;
  MatSpec embed_, fwd_x_, fwd_h_, bwd_x_, bwd_h_;
  std::vector<Conv2d<S>> vse_blocks_;
  Conv2d<S> vse_region_proj_;
  Dense<S> vse_global_;
  int vse_out_ch_ = 0;
  int region_grid_ = 0;
};

// Symmetric two-granularity matching loss over a batch of aligned
// (description, image) pairs. Mean per item, summed over the two
// softmax directions and the enabled granularities.
template <typename S>
typename Tape<S>::Var matching_loss(Tape<S>& t, const WordFeaturesT<S>& text,
                                    const VisualFeaturesT<S>& vis,
                                    const MatchingGammas& g) {
  int B = t.val(text.sentence).shape[0];
  if (B < 2) throw BatchTooSmall("matching_loss needs batch >= 2");

  auto symmetric_ce = [&](typename Tape<S>::Var sim) {
    // sim: [B,B], sim(i,j) = score(description i, image j)
    auto scaled = t.scale(sim, g.gamma3);
    auto rows = t.log_softmax_lastdim(scaled);  // P(image | description)
    auto cols = t.log_softmax_lastdim(
        t.permute(scaled, {1, 0}));  // P(description | image)
    auto diag = t.add(t.gather_diag(rows), t.gather_diag(cols));
    return t.scale(t.mean_all(diag), -1.0);
  };

  // sentence level: cosine similarity matrix
  auto sn = t.l2_normalize_lastdim(text.sentence);
  auto vn = t.l2_normalize_lastdim(vis.global);
  auto sim_s = t.matmul(sn, t.permute(vn, {1, 0}));
  auto loss = symmetric_ce(sim_s);

  if (g.word_level) {
    int N = t.val(text.words).shape[1];
    int R = t.val(vis.regions).shape[1];
    int D = t.val(text.words).shape[2];
    auto wn = t.l2_normalize_lastdim(text.words);    // [B,N,D]
    auto rn = t.l2_normalize_lastdim(vis.regions);   // [B,R,D]
    // all-pairs word-region similarities -> [Bd,Bi,N,R]
    auto e = t.matmul(t.reshape(wn, {B * N, D}),
                      t.permute(t.reshape(rn, {B * R, D}), {1, 0}));
    auto e4 = t.permute(t.reshape(e, {B, N, B, R}), {0, 2, 1, 3});
    auto attn = t.softmax_lastdim(t.scale(e4, g.gamma1));
    // context per (desc,image,word): attention-pooled regions
    auto rn_e = t.reshape(t.expand_dim(rn, 0, B), {B * B, R, D});
    auto ctx = t.bmm(t.reshape(attn, {B * B, N, R}), rn_e);  // [BB,N,D]
    auto ctx_n = t.l2_normalize_lastdim(ctx);
    auto wn_e = t.reshape(t.expand_dim(wn, 1, B), {B * B, N, D});
    auto rel = t.sum_lastdim(t.mul(ctx_n, wn_e));          // cos, [BB,N]
    auto rel3 = t.reshape(rel, {B, B, N});
    auto sim_w = t.masked_lse_words(rel3, text.mask, g.gamma2);  // [B,B]
    loss = t.add(loss, symmetric_ce(sim_w));
  }
  return loss;
}

}  // namespace lang2face
