#include "lang2face/trainer.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <chrono>
#include <cstdlib>

#include <json.hpp>

#include "lang2face/checkpoint.hpp"
#include "lang2face/gradcheck.hpp"
#include "lang2face/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lang2face {

// ---- config ----------------------------------------------------------

std::string TrainConfig::to_json() const {
  json j = {{"base_size", dims.base_size},
            {"d_word", dims.d_word},
            {"n_max", dims.n_max},
            {"embed_dim", dims.embed_dim},
            {"vse_channels", dims.vse_channels},
            {"feat_channels", dims.feat_channels},
            {"gen_channels", dims.gen_channels},
            {"res_blocks", dims.res_blocks},
            {"critic_channels", dims.critic_channels},
            {"batch_size", batch_size},
            {"steps", steps},
            {"pretrain_steps", pretrain_steps},
            {"pretrain_batch", pretrain_batch},
            {"lr_main", lr_main},
            {"lr_pretrain", lr_pretrain},
            {"lambda1", weights.lambda1},
            {"lambda2", weights.lambda2},
            {"lambda3", weights.lambda3},
            {"lambda_ca", weights.lambda_ca},
            {"ca_kl_enabled", weights.ca_kl_enabled},
            {"gamma1", gammas.gamma1},
            {"gamma2", gammas.gamma2},
            {"gamma3", gammas.gamma3},
            {"word_level_matching", gammas.word_level},
            {"seed", seed},
            {"disable_lvm", disable_lvm},
            {"disable_attention", disable_attention},
            {"checkpoint_every", checkpoint_every},
            {"probe_leakage", probe_leakage},
            {"manip_locality_median_min", manip_locality_median_min},
            {"manip_consistency_neg_frac", manip_consistency_neg_frac}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("base_size", c.dims.base_size);
  get("d_word", c.dims.d_word);
  get("n_max", c.dims.n_max);
  get("embed_dim", c.dims.embed_dim);
  get("vse_channels", c.dims.vse_channels);
  get("feat_channels", c.dims.feat_channels);
  get("gen_channels", c.dims.gen_channels);
  get("res_blocks", c.dims.res_blocks);
  get("critic_channels", c.dims.critic_channels);
  get("batch_size", c.batch_size);
  get("steps", c.steps);
  get("pretrain_steps", c.pretrain_steps);
  get("pretrain_batch", c.pretrain_batch);
  get("lr_main", c.lr_main);
  get("lr_pretrain", c.lr_pretrain);
  get("lambda1", c.weights.lambda1);
  get("lambda2", c.weights.lambda2);
  get("lambda3", c.weights.lambda3);
  get("lambda_ca", c.weights.lambda_ca);
  get("ca_kl_enabled", c.weights.ca_kl_enabled);
  get("gamma1", c.gammas.gamma1);
  get("gamma2", c.gammas.gamma2);
  get("gamma3", c.gammas.gamma3);
  get("word_level_matching", c.gammas.word_level);
  get("seed", c.seed);
  get("disable_lvm", c.disable_lvm);
  get("disable_attention", c.disable_attention);
  get("checkpoint_every", c.checkpoint_every);
  get("probe_leakage", c.probe_leakage);
  get("manip_locality_median_min", c.manip_locality_median_min);
  get("manip_consistency_neg_frac", c.manip_consistency_neg_frac);
  c.dims.validate();
  if (c.lr_main <= 0 || c.lr_pretrain <= 0)
    throw ConfigError("learning rates must be positive");
  if (c.batch_size < 2) throw ConfigError("batch_size must be >= 2");
  return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void TrainConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write config: " + path);
  out << to_json() << "\n";
}

// ---- dataset loading ---------------------------------------------------

LoadedDataset load_dataset(const Manifest& manifest, const Vocab& vocab,
                           const ModelDims& dims) {
  LoadedDataset out;
  out.l3_size = dims.l3_size();
  if (manifest.image_size != out.l3_size)
    throw ConfigError("manifest images are " + std::to_string(manifest.image_size) +
                      "px but the configured pyramid needs " +
                      std::to_string(out.l3_size));
  auto load_one = [&](const SampleRecord& rec) {
    LoadedSample s;
    s.rec = &rec;
    Tensor<float> neutral = read_png(manifest.resolve(rec.neutral_path));
    Tensor<float> target = read_png(manifest.resolve(rec.target_path));
    for (int lvl = 0; lvl < 3; ++lvl) {
      int factor = 1 << (2 - lvl);
      s.neutral[lvl] = downsample(neutral, factor);
      s.target[lvl] = downsample(target, factor);
    }
    s.tokens = tokenize(rec.text, vocab, dims.n_max);
    s.length = token_count(s.tokens);
    return s;
  };
  for (const auto& rec : manifest.records) {
    if (manifest.is_test_identity(rec.identity_seed))
      out.test.push_back(load_one(rec));
    else
      out.train.push_back(load_one(rec));
  }
  return out;
}

std::vector<int> batch_indices(uint64_t seed, int64_t step, int batch, int n) {
  std::vector<int> out(static_cast<size_t>(batch));
  int64_t epoch_cache = -1;
  std::vector<int> perm;
  for (int i = 0; i < batch; ++i) {
    int64_t pos = step * batch + i;
    int64_t epoch = pos / n;
    if (epoch != epoch_cache) {
      perm.resize(size_t(n));
      for (int k = 0; k < n; ++k) perm[size_t(k)] = k;
      RandomStream rs(seed, "data_order", uint64_t(epoch));
      rs.shuffle(perm);
      epoch_cache = epoch;
    }
    out[size_t(i)] = perm[size_t(pos % n)];
  }
  return out;
}

Tensor<float> stack_images(const std::vector<const LoadedSample*>& batch,
                           int level) {
  int B = int(batch.size());
  const Tensor<float>& first = level >= 0 ? batch[0]->target[level]
                                          : batch[0]->neutral[-level - 1];
  int H = first.shape[1], W = first.shape[2];
  Tensor<float> out({B, 3, H, W});
  for (int b = 0; b < B; ++b) {
    const Tensor<float>& img =
        level >= 0 ? batch[size_t(b)]->target[level] : batch[size_t(b)]->neutral[-level - 1];
    std::copy(img.data.begin(), img.data.end(),
              out.data.begin() + int64_t(b) * img.numel());
  }
  return out;
}

Tensor<int> stack_tokens(const std::vector<const LoadedSample*>& batch) {
  int B = int(batch.size());
  int N = int(batch[0]->tokens.size());
  Tensor<int> out({B, N});
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < N; ++n) out.at(b, n) = batch[size_t(b)]->tokens[size_t(n)];
  return out;
}

namespace {

std::vector<const LoadedSample*> pick(const std::vector<LoadedSample>& pool,
                                      const std::vector<int>& idx) {
  std::vector<const LoadedSample*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&pool[size_t(i)]);
  return out;
}

std::vector<int> lengths_of(const std::vector<const LoadedSample*>& batch) {
  std::vector<int> out;
  out.reserve(batch.size());
  for (const auto* s : batch) out.push_back(s->length);
  return out;
}

}  // namespace

// ---- retrieval probe ---------------------------------------------------

double retrieval_top1(const Lvsn<float>& model, ParamStore<float>& params,
                      const std::vector<LoadedSample>& samples, int batch,
                      uint64_t seed) {
  if (int(samples.size()) < batch) throw BatchTooSmall("retrieval_top1");
  int n_batches = int(samples.size()) / batch;
  int hits = 0, total = 0;
  std::vector<int> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  RandomStream rs(seed, "retrieval");
  rs.shuffle(order);
  for (int bi = 0; bi < n_batches; ++bi) {
    std::vector<int> idx(order.begin() + int64_t(bi) * batch,
                         order.begin() + int64_t(bi + 1) * batch);
    auto b = pick(samples, idx);
    Tape<float> t;
    auto tokens = stack_tokens(b);
    auto words = model.encode_words(t, params, tokens, lengths_of(b), false);
    auto imgs = t.constant(stack_images(b, 2));
    auto vis = model.encode_visual(t, params, imgs, false);
    auto sn = t.l2_normalize_lastdim(words.sentence);
    auto vn = t.l2_normalize_lastdim(vis.global);
    auto sim = t.matmul(sn, t.permute(vn, {1, 0}));
    const Tensor<float>& m = t.val(sim);
    for (int i = 0; i < batch; ++i) {
      int best = 0;
      for (int j = 1; j < batch; ++j)
        if (m.at(i, j) > m.at(i, best)) best = j;
      hits += best == i;
      ++total;
    }
  }
  return double(hits) / double(total);
}

// ---- pretraining ---------------------------------------------------------

std::string run_pretrain(const TrainConfig& cfg, const Manifest& manifest,
                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  Eigen::setNbThreads(worker_threads());

  Vocab vocab = Vocab::build(grammar_corpus());
  vocab.save((fs::path(out_dir) / "vocab.txt").string());

  LoadedDataset data = load_dataset(manifest, vocab, cfg.dims);
  Lvsn<float> model(cfg.dims, vocab.size());
  ParamStore<float> params;
  model.init(params, mix_seed(cfg.seed, hash_string("lvsn")));

  Adam<float> opt(cfg.lr_pretrain);
  std::ofstream log((fs::path(out_dir) / "pretrain_log.csv").string());
  log << "step,loss\n";

  int n = int(data.train.size());
  for (int64_t step = 0; step < cfg.pretrain_steps; ++step) {
    auto idx = batch_indices(mix_seed(cfg.seed, hash_string("pretrain")), step,
                             cfg.pretrain_batch, n);
    auto b = pick(data.train, idx);
    Tape<float> t;
    auto words =
        model.encode_words(t, params, stack_tokens(b), lengths_of(b), true);
    auto imgs = t.constant(stack_images(b, 2));
    auto vis = model.encode_visual(t, params, imgs, true);
    auto loss = matching_loss(t, words, vis, cfg.gammas);
    double lv = t.scalar(loss);
    if (!std::isfinite(lv))
      throw NonFiniteLoss("pretrain loss non-finite at step " +
                          std::to_string(step));
    t.backward(loss);
    opt.step(params);
    params.zero_grad();
    log << step << "," << lv << "\n";
  }

  const auto& eval_set = data.test.empty() ? data.train : data.test;
  int rbatch = std::min<int>(16, int(eval_set.size()));
  double top1 =
      rbatch >= 2 ? retrieval_top1(model, params, eval_set, rbatch, cfg.seed)
                  : -1.0;
  std::string hash = params.content_hash();
  json meta = {{"kind", "lvsn"},
               {"vocab", "vocab.txt"},
               {"content_hash", hash},
               {"retrieval_top1", top1},
               {"config", json::parse(cfg.to_json())}};
  std::string path = (fs::path(out_dir) / "lvsn.bin").string();
  save_params(path, params, meta.dump());
  std::ofstream meta_out((fs::path(out_dir) / "lvsn_meta.json").string());
  meta_out << meta.dump(2) << "\n";
  return path;
}

// ---- main training -------------------------------------------------------

struct Trainer::StepTensors {
  std::vector<const LoadedSample*> batch;
  Tensor<int> tokens;
  std::vector<int> lengths;
  Tensor<float> neutral[3];  // batched neutral pyramid
  Tensor<float> target[3];
  Tensor<float> eps;
};

Trainer::Trainer(const TrainConfig& cfg, const Manifest& manifest,
                 const std::string& lvsn_checkpoint, const std::string& out_dir,
                 const std::string& resume_dir)
    : cfg_(cfg), out_dir_(out_dir), vocab_(Vocab::load(
          (fs::path(lvsn_checkpoint).parent_path() / "vocab.txt").string())) {
  Eigen::setNbThreads(worker_threads());
  fs::create_directories(out_dir_);
  cfg_.dims.validate();

  data_ = load_dataset(manifest, vocab_, cfg_.dims);
  if (int(data_.train.size()) < cfg_.batch_size)
    throw ConfigError("training set smaller than one batch");

  lvsn_ = std::make_unique<Lvsn<float>>(cfg_.dims, vocab_.size());
  lvsn_->init(lvsn_params_, 0);  // shapes only; values come from the archive
  std::string meta;
  load_params(lvsn_checkpoint, lvsn_params_, meta);
  lvsn_hash_at_load_ = lvsn_params_.content_hash();

  gen_ = std::make_unique<Generator<float>>(cfg_.dims);
  critics_ = std::make_unique<Critics<float>>(cfg_.dims);
  gen_->init(gen_params_, mix_seed(cfg_.seed, hash_string("generator")));
  critics_->init(critic_params_, mix_seed(cfg_.seed, hash_string("critics")));
  opt_g_ = std::make_unique<Adam<float>>(cfg_.lr_main);
  opt_d_ = std::make_unique<Adam<float>>(cfg_.lr_main);

  if (!resume_dir.empty()) {
    std::string m;
    load_params((fs::path(resume_dir) / "generator.bin").string(), gen_params_, m);
    load_params((fs::path(resume_dir) / "critics.bin").string(), critic_params_, m);
    load_adam((fs::path(resume_dir) / "adam_g.bin").string(), *opt_g_);
    load_adam((fs::path(resume_dir) / "adam_d.bin").string(), *opt_d_);
    std::ifstream st(fs::path(resume_dir) / "state.json");
    if (!st) throw IOError("resume dir missing state.json");
    json j = json::parse(st);
    step_ = j.at("step").get<int64_t>();
    if (j.at("lvsn_hash").get<std::string>() != lvsn_hash_at_load_)
      throw ConfigError("resume: LVSN checkpoint differs from the run's");
  }

  log_owner_ = std::make_unique<std::ofstream>(
      (fs::path(out_dir_) / "train_log.csv").string(), std::ios::trunc);
  log_ = log_owner_.get();
  *log_ << LossReport::csv_header() << "\n";
  cfg_.save((fs::path(out_dir_) / "config.json").string());
}

Trainer::StepTensors Trainer::assemble(int64_t step) const {
  StepTensors st;
  auto idx = batch_indices(cfg_.seed, step, cfg_.batch_size,
                           int(data_.train.size()));
  st.batch = pick(data_.train, idx);
  st.tokens = stack_tokens(st.batch);
  st.lengths = lengths_of(st.batch);
  for (int lvl = 0; lvl < 3; ++lvl) {
    st.neutral[lvl] = stack_images(st.batch, -(lvl + 1));
    st.target[lvl] = stack_images(st.batch, lvl);
  }
  st.eps = Tensor<float>({cfg_.batch_size, cfg_.dims.feat_channels});
  RandomStream rs(cfg_.seed, "ca_eps", uint64_t(step));
  for (auto& v : st.eps.data) v = float(rs.normal());
  return st;
}

LossReport Trainer::step() {
  const bool profile = std::getenv("LANG2FACE_PROFILE") != nullptr;
  auto tick = [] { return std::chrono::steady_clock::now(); };
  auto mswait = [](auto a, auto b) {
    return std::chrono::duration<double>(b - a).count() * 1000.0;
  };
  auto t_start = tick();

  StepTensors st = assemble(step_);
  LossReport report;
  report.step = step_;
  auto t_assemble = tick();

  // One generator forward per step, with gradients. The critic update
  // consumes detached copies of its outputs; generator parameters do
  // not change until after the critic step, so the values match a
  // recomputed forward exactly.
  Tape<float> tg;
  auto words = lvsn_->encode_words(tg, lvsn_params_, st.tokens, st.lengths,
                                   false);
  auto syn = gen_->synthesize(tg, gen_params_, tg.constant(st.neutral[2]),
                              words.words, words.mask, words.sentence, st.eps,
                              true, cfg_.disable_attention);
  Tensor<float> fake_img[3] = {tg.val(syn.img1), tg.val(syn.img2),
                               tg.val(syn.img3)};
  Tensor<float> ca_sample = tg.val(syn.ca.sample);

  std::string gen_hash_before, critic_hash_before;
  if (cfg_.probe_leakage) gen_hash_before = gen_params_.content_hash();

  auto t_genfwd = tick();

  // ---- critic update (Eq. 4) ----
  {
    Tape<float> t;
    auto sent = t.constant(ca_sample);
    typename Tape<float>::Var d_loss{};
    for (int lvl = 1; lvl <= 2; ++lvl) {
      auto real = critics_->face_verify(t, critic_params_, lvl,
                                        t.constant(st.target[lvl - 1]), sent,
                                        true);
      auto fake = critics_->face_verify(t, critic_params_, lvl,
                                        t.constant(fake_img[lvl - 1]), sent,
                                        true);
      auto l = critic_loss_graph(t, real.uncond, real.cond, fake.uncond,
                                 fake.cond);
      report.l_fv[lvl - 1] = t.scalar(l);
      d_loss = d_loss.valid() ? t.add(d_loss, l) : l;

      auto ev_real = critics_->expression_verify(
          t, critic_params_, lvl, t.constant(st.target[lvl - 1]),
          t.constant(st.neutral[lvl - 1]), sent, true);
      auto ev_fake = critics_->expression_verify(
          t, critic_params_, lvl, t.constant(fake_img[lvl - 1]),
          t.constant(st.neutral[lvl - 1]), sent, true);
      auto lev = critic_loss_graph(t, ev_real.uncond, ev_real.cond,
                                   ev_fake.uncond, ev_fake.cond);
      report.l_ev[lvl - 1] = t.scalar(lev);
      d_loss = t.add(d_loss, lev);
    }
    auto syn_real = critics_->synthesis_verify(
        t, critic_params_, t.constant(st.target[2]), sent, true);
    auto syn_fake = critics_->synthesis_verify(
        t, critic_params_, t.constant(fake_img[2]), sent, true);
    auto lsyn = critic_loss_graph(t, syn_real.uncond, syn_real.cond,
                                  syn_fake.uncond, syn_fake.cond);
    report.l_syn = t.scalar(lsyn);
    d_loss = t.add(d_loss, lsyn);
    t.backward(d_loss);
    opt_d_->step(critic_params_);
    critic_params_.zero_grad();
  }
  auto t_dphase = tick();
  if (cfg_.probe_leakage) {
    if (gen_params_.content_hash() != gen_hash_before)
      throw ConfigError("critic update modified generator parameters");
    critic_hash_before = critic_params_.content_hash();
  }

  // ---- generator update (Eq. 6 + L_LVM + CA KL) ----
  {
    Tape<float>& t = tg;
    typename Tape<float>::Var imgs[3] = {syn.img1, syn.img2, syn.img3};

    typename Tape<float>::Var g_loss{};
    auto add_term = [&](typename Tape<float>::Var v, double w) {
      auto scaled = t.scale(v, w);
      g_loss = g_loss.valid() ? t.add(g_loss, scaled) : scaled;
    };

    for (int m = 1; m <= 3; ++m) {
      CriticScoreT<float> score;
      if (m < 3)
        score = critics_->face_verify(t, critic_params_, m, imgs[m - 1],
                                      syn.ca.sample, false);
      else
        score = critics_->synthesis_verify(t, critic_params_, imgs[2],
                                           syn.ca.sample, false);
      auto ladv = adv_loss_graph(t, score.uncond, score.cond);
      report.l_adv[m - 1] = t.scalar(ladv);
      add_term(ladv, cfg_.weights.lambda1);

      int factor = 1 << (3 - m);
      auto synth_l3 = t.upsample_nearest(imgs[m - 1], factor);
      Tensor<float> target_l3 = st.target[m - 1];
      if (factor > 1) {
        Tensor<float> up({target_l3.shape[0], 3, cfg_.dims.l3_size(),
                          cfg_.dims.l3_size()});
        for (int b = 0; b < target_l3.shape[0]; ++b) {
          Tensor<float> one({3, target_l3.shape[2], target_l3.shape[3]});
          std::copy_n(target_l3.ptr() + int64_t(b) * one.numel(), one.numel(),
                      one.ptr());
          Tensor<float> u = upsample(one, factor);
          std::copy_n(u.ptr(), u.numel(), up.ptr() + int64_t(b) * u.numel());
        }
        target_l3 = std::move(up);
      }
      auto feat_t = gen_->encode_face(t, gen_params_, t.constant(target_l3), true);
      auto feat_s = gen_->encode_face(t, gen_params_, synth_l3, true);
      auto lid = identity_loss_graph(t, feat_t, feat_s);
      report.l_id[m - 1] = t.scalar(lid);
      add_term(lid, cfg_.weights.lambda2);

      auto lrec = recon_loss_graph(t, t.constant(st.target[m - 1]), imgs[m - 1]);
      report.l_recon[m - 1] = t.scalar(lrec);
      add_term(lrec, cfg_.weights.lambda3);
    }

    if (!cfg_.disable_lvm) {
      auto vis = lvsn_->encode_visual(t, lvsn_params_, syn.img3, false);
      auto lvm = matching_loss(t, words, vis, cfg_.gammas);
      report.l_lvm = t.scalar(lvm);
      add_term(lvm, 1.0);
    }

    if (cfg_.weights.ca_kl_enabled) {
      auto kl = gen_->ca_kl(t, syn.ca);
      report.l_ca_kl = t.scalar(kl);
      add_term(kl, cfg_.weights.lambda_ca);
    }

    t.backward(g_loss);
    opt_g_->step(gen_params_);
    gen_params_.zero_grad();
    lvsn_params_.zero_grad();  // frozen params never accumulate, but be sure
  }

  auto t_gphase = tick();
  if (profile)
    std::fprintf(stderr,
                 "step %lld: assemble %.0fms genfwd %.0fms D %.0fms G %.0fms\n",
                 (long long)step_, mswait(t_start, t_assemble),
                 mswait(t_assemble, t_genfwd), mswait(t_genfwd, t_dphase),
                 mswait(t_dphase, t_gphase));

  if (cfg_.probe_leakage &&
      critic_params_.content_hash() != critic_hash_before)
    throw ConfigError("generator update modified critic parameters");

  report.recompute_totals(cfg_.weights);
  *log_ << report.csv_row() << "\n";
  log_->flush();
  if (!report.all_finite()) {
    throw NonFiniteLoss("non-finite loss at step " + std::to_string(step_) +
                        ": " + report.csv_row());
  }
  ++step_;
  return report;
}

void Trainer::save_checkpoint() {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06lld", (long long)step_);
  fs::path dir = fs::path(out_dir_) / buf;
  fs::create_directories(dir);
  json meta = {{"kind", "fesn"},
               {"step", step_},
               {"config", json::parse(cfg_.to_json())}};
  save_params((dir / "generator.bin").string(), gen_params_, meta.dump());
  save_params((dir / "critics.bin").string(), critic_params_, meta.dump());
  save_adam((dir / "adam_g.bin").string(), *opt_g_);
  save_adam((dir / "adam_d.bin").string(), *opt_d_);
  json state = {{"step", step_},
                {"lvsn_hash", lvsn_hash_at_load_},
                {"generator_hash", gen_params_.content_hash()},
                {"critics_hash", critic_params_.content_hash()}};
  std::ofstream st(dir / "state.json");
  st << state.dump(2) << "\n";
}

std::string run_train(const TrainConfig& cfg, const Manifest& manifest,
                      const std::string& lvsn_checkpoint,
                      const std::string& out_dir,
                      const std::string& resume_dir) {
  Trainer tr(cfg, manifest, lvsn_checkpoint, out_dir, resume_dir);
  std::string lvsn_before = tr.lvsn_hash();
  while (tr.current_step() < cfg.steps) {
    tr.step();
    if (tr.current_step() % cfg.checkpoint_every == 0 ||
        tr.current_step() == cfg.steps)
      tr.save_checkpoint();
  }
  if (tr.lvsn_hash() != lvsn_before)
    throw ConfigError("LVSN hash changed during training");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%06lld", (long long)tr.current_step());
  return (fs::path(out_dir) / buf).string();
}

// ---- gradient-check suite -------------------------------------------

std::map<std::string, double> run_grad_check_suite() {
  std::map<std::string, double> report;
  using T = Tape<double>;

  auto randt = [](std::vector<int> shape, uint64_t seed, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    RandomStream rs(seed, "gradcheck");
    for (auto& v : t.data) v = rs.normal() * scale;
    return t;
  };

  {  // word_attention: q [2,4,2,2], words [2,3,6], proj [6,4]; one PAD word
    Tensor<double> mask({2, 3});
    mask.data = {1, 1, 1, 1, 1, 0};
    auto build = [&](T& t, const std::vector<T::Var>& in) {
      auto att = word_attention_core(t, in[0], mask, in[1], in[2]);
      return t.mean_all(t.square(att.context));
    };
    report["word_attention"] =
        check_gradients(build, {randt({2, 3, 6}, 11), randt({2, 4, 2, 2}, 12),
                                randt({6, 4}, 13)})
            .max_rel_error;
  }

  {  // condition_augment: sentence [2,6] -> C=4
    Tensor<double> eps({2, 4});
    RandomStream rs(77, "eps");
    for (auto& v : eps.data) v = rs.normal();
    auto build = [&](T& t, const std::vector<T::Var>& in) {
      auto ca = condition_augment_core(t, in[0], in[1], in[2], in[3], in[4], eps);
      // exercise sample, tiling, mu and logvar paths
      auto a = t.mean_all(t.square(ca.tiled));
      auto kl = t.affine(t.mean_all(t.sum_lastdim(t.sub(
                    t.add(t.square(ca.mu), t.exp_(ca.logvar)), ca.logvar))),
                         0.5, -0.5 * 4);
      return t.add(a, kl);
    };
    report["condition_augment"] =
        check_gradients(build, {randt({2, 6}, 21), randt({6, 4}, 22, 0.5),
                                randt({4}, 23, 0.2), randt({6, 4}, 24, 0.3),
                                randt({4}, 25, 0.2)})
            .max_rel_error;
  }

  {  // matching_loss on the spec instance: B=3, D=8, N=4, R=4
    Tensor<double> mask({3, 4});
    mask.data = {1, 1, 1, 1, 1, 1, 1, 0, 1, 1, 0, 0};
    MatchingGammas g;
    auto build = [&](T& t, const std::vector<T::Var>& in) {
      WordFeaturesT<double> w{in[0], in[1], mask};
      VisualFeaturesT<double> v{in[2], in[3]};
      return matching_loss(t, w, v, g);
    };
    report["matching_loss"] =
        check_gradients(build, {randt({3, 4, 8}, 31), randt({3, 8}, 32),
                                randt({3, 4, 8}, 33), randt({3, 8}, 34)})
            .max_rel_error;
  }

  auto score_tensor = [](std::initializer_list<double> v) {
    Tensor<double> t({int(v.size())});
    t.data = v;
    return t;
  };

  {  // loss_fv / loss_ev (same functional form, distinct instances)
    auto build = [](T& t, const std::vector<T::Var>& in) {
      return critic_loss_graph(t, in[0], in[1], in[2], in[3]);
    };
    report["loss_fv"] =
        check_gradients(build, {score_tensor({0.8, 0.6}), score_tensor({0.7, 0.55}),
                                score_tensor({0.3, 0.45}), score_tensor({0.2, 0.35})})
            .max_rel_error;
    report["loss_ev"] =
        check_gradients(build, {score_tensor({0.55, 0.62}), score_tensor({0.48, 0.52}),
                                score_tensor({0.41, 0.38}), score_tensor({0.33, 0.61})})
            .max_rel_error;
  }

  {  // loss_adv
    auto build = [](T& t, const std::vector<T::Var>& in) {
      return adv_loss_graph(t, in[0], in[1]);
    };
    report["loss_adv"] =
        check_gradients(build, {score_tensor({0.9, 0.4}), score_tensor({0.6, 0.7})})
            .max_rel_error;
  }

  {  // loss_identity
    auto build = [](T& t, const std::vector<T::Var>& in) {
      return identity_loss_graph(t, in[0], in[1]);
    };
    report["loss_identity"] =
        check_gradients(build, {randt({2, 3, 2, 2}, 41), randt({2, 3, 2, 2}, 42)})
            .max_rel_error;
  }

  {  // loss_recon; keep |a-b| away from the kink
    Tensor<double> a = randt({2, 3, 4, 4}, 51);
    Tensor<double> b = a;
    RandomStream rs(52, "recon");
    for (auto& v : b.data)
      v += (rs.uniform() < 0.5 ? -1.0 : 1.0) * rs.uniform(0.05, 0.4);
    auto build = [](T& t, const std::vector<T::Var>& in) {
      return recon_loss_graph(t, in[0], in[1]);
    };
    report["loss_recon"] = check_gradients(build, {a, b}).max_rel_error;
  }

  return report;
}

}  // namespace lang2face
