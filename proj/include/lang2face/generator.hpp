#pragma once

#include <atomic>
#include <cmath>
#include <vector>

#include "lang2face/dims.hpp"
#include "lang2face/nn.hpp"

namespace lang2face {

// call-count probe for the attention-ablation contract
int64_t word_attention_calls();
void reset_word_attention_calls();
void bump_word_attention_calls();

template <typename S>
struct AugmentedSentenceT {
  typename Tape<S>::Var tiled;   // [B, C, 2, 2]
  typename Tape<S>::Var sample;  // [B, C] (mu + sigma*eps)
  typename Tape<S>::Var mu;      // [B, C]
  typename Tape<S>::Var logvar;  // [B, C]
};

template <typename S>
struct AttentionResultT {
  typename Tape<S>::Var context;  // alpha as [B, C, H, W]
  typename Tape<S>::Var beta;     // [B, H*W, N]
};

template <typename S>
struct SynthesisT {
  typename Tape<S>::Var img1, img2, img3;  // [-1,1] images per level
  typename Tape<S>::Var q1, q2;            // hidden level features
  AugmentedSentenceT<S> ca;
};

// Eq. 1 on explicit graph inputs: beta_ij = softmax over words i of
// q_hat_j^T w_hat_i with PAD logits at -inf; alpha_j = sum_i beta_ij
// w_hat_i. proj_w is the bias-free 1x1 word projection.
template <typename S>
AttentionResultT<S> word_attention_core(Tape<S>& t, typename Tape<S>::Var words,
                                        const Tensor<S>& mask,
                                        typename Tape<S>::Var q,
                                        typename Tape<S>::Var proj_w) {
  bump_word_attention_calls();
  const auto& qs = t.val(q).shape;
  const auto& ws = t.val(words).shape;
  const auto& ps = t.val(proj_w).shape;
  if (qs.size() != 4 || ws.size() != 3 || ps.size() != 2 || ws[2] != ps[0] ||
      qs[1] != ps[1])
    throw DimMismatch("word_attention: q " + shape_str(qs) + ", words " +
                      shape_str(ws) + ", proj " + shape_str(ps));
  int B = qs[0], C = qs[1], H = qs[2], W = qs[3], N = ws[1], D = ws[2];
  auto w_proj =
      t.reshape(t.matmul(t.reshape(words, {B * N, D}), proj_w), {B, N, C});
  auto q_hat = t.permute(t.reshape(q, {B, C, H * W}), {0, 2, 1});  // [B,HW,C]
  auto logits = t.bmm(q_hat, t.permute(w_proj, {0, 2, 1}));        // [B,HW,N]
  AttentionResultT<S> out;
  out.beta = t.masked_softmax_words(logits, mask);
  auto ctx = t.bmm(out.beta, w_proj);  // [B,HW,C]
  out.context = t.reshape(t.permute(ctx, {0, 2, 1}), {B, C, H, W});
  return out;
}

// conditioning augmentation on explicit inputs (reparameterized sample
// tiled to the 2x2 facial-feature grid)
template <typename S>
AugmentedSentenceT<S> condition_augment_core(
    Tape<S>& t, typename Tape<S>::Var sentence, typename Tape<S>::Var mu_w,
    typename Tape<S>::Var mu_b, typename Tape<S>::Var logvar_w,
    typename Tape<S>::Var logvar_b, const Tensor<S>& eps) {
  AugmentedSentenceT<S> out;
  out.mu = t.bias_add_row(t.matmul(sentence, mu_w), mu_b);
  out.logvar = t.bias_add_row(t.matmul(sentence, logvar_w), logvar_b);
  auto sigma = t.exp_(t.scale(out.logvar, 0.5));
  out.sample = t.add(out.mu, t.mul(sigma, t.constant(eps)));
  out.tiled = t.tile_hw(out.sample, 2, 2);
  return out;
}

// Generator path of the FESN: facial feature encoder, conditioning
// augmentation and the three-level synthesizer with expressive word
// attention between levels.
template <typename S>
class Generator {
 public:
  explicit Generator(ModelDims dims) : dims_(dims) {
    int l3 = dims_.l3_size();
    int ch = 16;
    int size = l3;
    int in_ch = 3;
    while (size > 2) {  // strided downsampling to 2x2
      int out_ch = size > 4 ? std::min(ch, dims_.feat_channels)
                            : dims_.feat_channels;
      ffe_blocks_.push_back({"ffe.block" + std::to_string(int(ffe_blocks_.size())),
                             in_ch, out_ch, 4, 2, 1});
      in_ch = out_ch;
      ch *= 2;
      size /= 2;
    }

    ca_mu_ = {"ca.mu", dims_.d_word, dims_.feat_channels};
    ca_logvar_ = {"ca.logvar", dims_.d_word, dims_.feat_channels};

    int C = dims_.gen_channels;
    join_[0] = {"mes.l1.join", 2 * dims_.feat_channels, C, 3, 1, 1};
    join_[1] = {"mes.l2.join", 2 * C, C, 3, 1, 1};
    join_[2] = {"mes.l3.join", 2 * C, C, 3, 1, 1};
    for (int lvl = 0; lvl < 3; ++lvl) {
      for (int rb = 0; rb < dims_.res_blocks; ++rb) {
        ResidualBlock<S> blk;
        blk.name = "mes.l" + std::to_string(lvl + 1) + ".res" + std::to_string(rb);
        blk.channels = C;
        blk.configure();
        res_[lvl].push_back(blk);
      }
      head_[lvl] = {"mes.l" + std::to_string(lvl + 1) + ".head", C, 3, 3, 1, 1};
    }
    // level 1 upsamples 2 -> base through a conv ladder
    int ups = 0;
    for (int s = 2; s < dims_.base_size; s *= 2) ++ups;
    for (int u = 0; u < ups; ++u)
      up1_.push_back({"mes.l1.up" + std::to_string(u), C, C, 3, 1, 1});
    up23_[0] = {"mes.l2.up", C, C, 3, 1, 1};
    up23_[1] = {"mes.l3.up", C, C, 3, 1, 1};
    word_proj_ = {"att.word_proj", dims_.d_word, C};  // bias-free 1x1
  }

  void init(ParamStore<S>& ps, uint64_t seed) {
    for (auto& b : ffe_blocks_) b.init(ps, seed);
    ca_mu_.init(ps, seed);
    ca_logvar_.init(ps, seed);
    for (int l = 0; l < 3; ++l) {
      join_[l].init(ps, seed);
      for (auto& rb : res_[l]) rb.init(ps, seed);
      head_[l].init(ps, seed);
    }
    for (auto& c : up1_) c.init(ps, seed);
    for (int i = 0; i < 2; ++i) up23_[i].init(ps, seed);
    auto& w = ps.create(word_proj_.name + ".w",
                        {word_proj_.rows, word_proj_.cols});
    // larger-than-Xavier scale so attention logits start spread enough
    // for the word softmax to break symmetry early in training
    init_normal(w, seed, word_proj_.name + ".w",
                4.0 * std::sqrt(1.0 / word_proj_.rows));
  }

  // neutral image [B,3,l3,l3] -> facial feature [B,C,2,2]
  typename Tape<S>::Var encode_face(Tape<S>& t, ParamStore<S>& ps,
                                    typename Tape<S>::Var img,
                                    bool trainable) const {
    const auto& shp = t.val(img).shape;
    int l3 = dims_.l3_size();
    if (shp.size() != 4 || shp[1] != 3 || shp[2] != l3 || shp[3] != l3)
      throw WrongShape("encode_face expects [B,3," + std::to_string(l3) + "," +
                       std::to_string(l3) + "], got " + shape_str(shp));
    auto x = img;
    for (const auto& blk : ffe_blocks_) {
      x = conv(t, ps, blk, x, trainable);
      x = t.leaky_relu(x);
    }
    return x;
  }

  // sentence feature + caller-supplied eps [B,C] -> augmented sentence
  AugmentedSentenceT<S> condition_augment(Tape<S>& t, ParamStore<S>& ps,
                                          typename Tape<S>::Var sentence,
                                          const Tensor<S>& eps,
                                          bool trainable) const {
    auto P = [&](const std::string& n) {
      return trainable ? ps.use(t, n) : ps.use_frozen(t, n);
    };
    return condition_augment_core(t, sentence, P(ca_mu_.name + ".w"),
                                  P(ca_mu_.name + ".b"),
                                  P(ca_logvar_.name + ".w"),
                                  P(ca_logvar_.name + ".b"), eps);
  }

  // Eq. 1: projected words scored against reshaped regions, softmax
  // over the word index per region, PAD logits forced to -inf.
  AttentionResultT<S> word_attention(Tape<S>& t, ParamStore<S>& ps,
                                     typename Tape<S>::Var words,
                                     const Tensor<S>& mask,
                                     typename Tape<S>::Var q,
                                     bool trainable) const {
    auto proj = trainable ? ps.use(t, word_proj_.name + ".w")
                          : ps.use_frozen(t, word_proj_.name + ".w");
    return word_attention_core(t, words, mask, q, proj);
  }

  // Full synthesis pass. eps is caller-supplied for determinism;
  // disable_attention replaces the attention context with zeros.
  SynthesisT<S> synthesize(Tape<S>& t, ParamStore<S>& ps,
                           typename Tape<S>::Var neutral_img,
                           typename Tape<S>::Var words, const Tensor<S>& mask,
                           typename Tape<S>::Var sentence, const Tensor<S>& eps,
                           bool trainable, bool disable_attention = false) const {
    SynthesisT<S> out;
    auto f_f = encode_face(t, ps, neutral_img, trainable);
    out.ca = condition_augment(t, ps, sentence, eps, trainable);
    int C = dims_.gen_channels;

    // level 1: [f_f ; w_hat_N]
    auto h = t.concat(f_f, out.ca.tiled, 1);
    h = t.relu(t.pixel_norm(conv(t, ps, join_[0], h, trainable)));
    for (const auto& rb : res_[0]) h = resblock(t, ps, rb, h, trainable);
    for (size_t u = 0; u < up1_.size(); ++u) {
      h = t.upsample2x(h);
      h = t.relu(t.pixel_norm(conv(t, ps, up1_[u], h, trainable)));
    }
    out.q1 = h;
    out.img1 = t.tanh_(conv(t, ps, head_[0], h, trainable));

    auto attended = [&](typename Tape<S>::Var q) {
      if (disable_attention) {
        const auto& qs = t.val(q).shape;
        return t.constant(Tensor<S>({qs[0], C, qs[2], qs[3]}));
      }
      return word_attention(t, ps, words, mask, q, trainable).context;
    };

    // level 2: [q1 ; att1], upsample x2
    auto h2 = t.concat(out.q1, attended(out.q1), 1);
    h2 = t.relu(t.pixel_norm(conv(t, ps, join_[1], h2, trainable)));
    for (const auto& rb : res_[1]) h2 = resblock(t, ps, rb, h2, trainable);
    h2 = t.upsample2x(h2);
    h2 = t.relu(t.pixel_norm(conv(t, ps, up23_[0], h2, trainable)));
    out.q2 = h2;
    out.img2 = t.tanh_(conv(t, ps, head_[1], h2, trainable));

    // level 3
    auto h3 = t.concat(out.q2, attended(out.q2), 1);
    h3 = t.relu(t.pixel_norm(conv(t, ps, join_[2], h3, trainable)));
    for (const auto& rb : res_[2]) h3 = resblock(t, ps, rb, h3, trainable);
    h3 = t.upsample2x(h3);
    h3 = t.relu(t.pixel_norm(conv(t, ps, up23_[1], h3, trainable)));
    out.img3 = t.tanh_(conv(t, ps, head_[2], h3, trainable));
    return out;
  }

  // KL(q(c|s) || N(0,I)), mean over batch
  typename Tape<S>::Var ca_kl(Tape<S>& t, const AugmentedSentenceT<S>& ca) const {
    auto mu2 = t.square(ca.mu);
    auto var = t.exp_(ca.logvar);
    auto term = t.sub(t.add(mu2, var), ca.logvar);  // mu^2 + var - logvar
    auto per_item = t.sum_lastdim(term);            // [B]
    int C = dims_.feat_channels;
    return t.affine(t.mean_all(per_item), 0.5, -0.5 * C);
  }

  const ModelDims& dims() const { return dims_; }

 private:
  typename Tape<S>::Var conv(Tape<S>& t, ParamStore<S>& ps, const Conv2d<S>& c,
                             typename Tape<S>::Var x, bool trainable) const {
    if (trainable) return c.forward(t, ps, x);
    return t.conv2d(x, ps.use_frozen(t, c.name + ".w"),
                    ps.use_frozen(t, c.name + ".b"), c.stride, c.pad);
  }
  typename Tape<S>::Var resblock(Tape<S>& t, ParamStore<S>& ps,
                                 const ResidualBlock<S>& rb,
                                 typename Tape<S>::Var x, bool trainable) const {
    if (trainable) return rb.forward(t, ps, x);
    auto h = t.relu(t.pixel_norm(conv(t, ps, rb.c1, x, false)));
    h = t.pixel_norm(conv(t, ps, rb.c2, h, false));
    return t.relu(t.add(x, h));
  }
  typename Tape<S>::Var dense(Tape<S>& t, ParamStore<S>& ps,
                              const Dense<S>& d, typename Tape<S>::Var x,
                              bool trainable) const {
    if (trainable) return d.forward(t, ps, x);
    return t.bias_add_row(t.matmul(x, ps.use_frozen(t, d.name + ".w")),
                          ps.use_frozen(t, d.name + ".b"));
  }

  ModelDims dims_;
  std::vector<Conv2d<S>> ffe_blocks_;
  Dense<S> ca_mu_, ca_logvar_;
  Conv2d<S> join_[3];
  std::vector<ResidualBlock<S>> res_[3];
  Conv2d<S> head_[3];
  std::vector<Conv2d<S>> up1_;
  Conv2d<S> up23_[2];
  struct MatSpec {
    std::string name;
    int rows = 0, cols = 0;
  };
  MatSpec word_proj_;
};

}  // namespace lang2face
