#include "lang2face/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lang2face/checkpoint.hpp"
#include "lang2face/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lang2face {

AUVector apply_edit(const AUVector& au, const EditSpec& edit) {
  AUVector out = au;
  switch (edit.kind) {
    case EditSpec::Kind::adverb_swap:
      if (!au.active(edit.au))
        throw EditNotApplicable("adverb_swap: AU not active");
      if (edit.new_intensity < 1 || edit.new_intensity > 5)
        throw EditNotApplicable("adverb_swap: intensity outside 1..5");
      out.set(edit.au, edit.new_intensity);
      break;
    case EditSpec::Kind::phrase_remove:
      if (!au.active(edit.au))
        throw EditNotApplicable("phrase_remove: AU not active");
      out.set(edit.au, 0);
      break;
    case EditSpec::Kind::phrase_add:
      if (au.active(edit.au))
        throw EditNotApplicable("phrase_add: AU already active");
      if (edit.new_intensity < 1 || edit.new_intensity > 5)
        throw EditNotApplicable("phrase_add: intensity outside 1..5");
      out.set(edit.au, edit.new_intensity);
      break;
  }
  return out;
}

EditSpec edit_from_string(const std::string& spec) {
  // forms: swap:AU9:1  remove:AU25  add:AU26:4
  EditSpec e;
  auto p1 = spec.find(':');
  if (p1 == std::string::npos) throw ConfigError("bad edit spec: " + spec);
  std::string kind = spec.substr(0, p1);
  std::string rest = spec.substr(p1 + 1);
  auto p2 = rest.find(':');
  std::string au = p2 == std::string::npos ? rest : rest.substr(0, p2);
  e.au = au_from_name(au);
  if (kind == "swap")
    e.kind = EditSpec::Kind::adverb_swap;
  else if (kind == "remove")
    e.kind = EditSpec::Kind::phrase_remove;
  else if (kind == "add")
    e.kind = EditSpec::Kind::phrase_add;
  else
    throw ConfigError("bad edit kind: " + kind);
  if (e.kind != EditSpec::Kind::phrase_remove) {
    if (p2 == std::string::npos)
      throw ConfigError("edit spec needs an intensity: " + spec);
    e.new_intensity = std::atoi(rest.substr(p2 + 1).c_str());
  }
  return e;
}

// ---- engine ----------------------------------------------------------

Engine::Engine(const std::string& fesn_checkpoint_dir,
               const std::string& lvsn_checkpoint)
    : vocab_(Vocab::load(
          (fs::path(lvsn_checkpoint).parent_path() / "vocab.txt").string())) {
  std::string meta;
  {
    // config snapshot travels inside the generator archive
    std::map<std::string, Tensor<float>> f32;
    std::map<std::string, Tensor<double>> f64;
    load_archive((fs::path(fesn_checkpoint_dir) / "generator.bin").string(),
                 f32, f64, meta);
    json j = json::parse(meta);
    cfg_ = TrainConfig::from_json(j.at("config").dump());
  }
  lvsn_ = std::make_unique<Lvsn<float>>(cfg_.dims, vocab_.size());
  lvsn_->init(lvsn_params_, 0);
  load_params(lvsn_checkpoint, lvsn_params_, meta);
  gen_ = std::make_unique<Generator<float>>(cfg_.dims);
  gen_->init(gen_params_, 0);
  load_params((fs::path(fesn_checkpoint_dir) / "generator.bin").string(),
              gen_params_, meta);
}

std::array<Tensor<float>, 3> Engine::synthesize(const Tensor<float>& neutral_l3,
                                                const std::string& text) const {
  int l3 = cfg_.dims.l3_size();
  if (neutral_l3.shape != std::vector<int>{3, l3, l3})
    throw WrongShape("synthesize expects a level-3 neutral image, got " +
                     shape_str(neutral_l3.shape));
  std::vector<int> tokens = tokenize(text, vocab_, cfg_.dims.n_max);
  Tensor<int> tok({1, cfg_.dims.n_max});
  std::copy(tokens.begin(), tokens.end(), tok.data.begin());
  std::vector<int> lengths = {token_count(tokens)};

  Tape<float> t;
  auto words = lvsn_->encode_words(t, lvsn_params_, tok, lengths, false);
  Tensor<float> batched({1, 3, l3, l3});
  batched.data = neutral_l3.data;
  Tensor<float> eps({1, cfg_.dims.feat_channels});  // zero noise at eval
  auto syn = gen_->synthesize(t, gen_params_, t.constant(batched), words.words,
                              words.mask, words.sentence, eps, false,
                              cfg_.disable_attention);
  auto unbatch = [&](typename Tape<float>::Var v) {
    const Tensor<float>& b = t.val(v);
    Tensor<float> img({3, b.shape[2], b.shape[3]});
    img.data.assign(b.data.begin(), b.data.end());
    return img;
  };
  return {unbatch(syn.img1), unbatch(syn.img2), unbatch(syn.img3)};
}

std::vector<double> Engine::vse_features(const Tensor<float>& img_l3) const {
  int l3 = cfg_.dims.l3_size();
  Tensor<float> batched({1, 3, l3, l3});
  if (img_l3.shape != std::vector<int>{3, l3, l3})
    throw WrongShape("vse_features expects a level-3 image");
  batched.data = img_l3.data;
  Tape<float> t;
  auto vis = lvsn_->encode_visual(t, lvsn_params_, t.constant(batched), false);
  const Tensor<float>& g = t.val(vis.global);
  std::vector<double> out(g.data.size());
  for (size_t i = 0; i < g.data.size(); ++i) out[i] = double(g.data[i]);
  return out;
}

// ---- evaluate ---------------------------------------------------------

void EvalReport::save(const std::string& dir) const {
  fs::create_directories(dir);
  json j = {{"ssim_mean", ssim_mean},
            {"fid", fid},
            {"n_samples", n_samples},
            {"checkpoint_hash", checkpoint_hash},
            {"lvsn_hash", lvsn_hash}};
  std::ofstream out(fs::path(dir) / "eval_report.json");
  out << j.dump(2) << "\n";
  std::ofstream csv(fs::path(dir) / "per_sample.csv");
  csv << "sample_id,ssim\n";
  for (const auto& [id, v] : per_sample_ssim) csv << id << "," << v << "\n";
}

EvalReport evaluate(const Engine& engine, const Manifest& manifest) {
  EvalReport rep;
  rep.checkpoint_hash = engine.checkpoint_hash();
  rep.lvsn_hash = engine.lvsn_hash();
  std::vector<std::vector<double>> feat_synth, feat_target;
  double ssim_sum = 0;
  for (const SampleRecord* rec : manifest.test_records()) {
    Tensor<float> neutral = read_png(manifest.resolve(rec->neutral_path));
    Tensor<float> target = read_png(manifest.resolve(rec->target_path));
    auto imgs = engine.synthesize(neutral, rec->text);
    double s = ssim(imgs[2], target);
    ssim_sum += s;
    rep.per_sample_ssim.push_back({rec->id, s});
    feat_synth.push_back(engine.vse_features(imgs[2]));
    feat_target.push_back(engine.vse_features(target));
    ++rep.n_samples;
  }
  if (rep.n_samples == 0) throw ConfigError("evaluate: no test records");
  rep.ssim_mean = ssim_sum / rep.n_samples;
  rep.fid = fid(feat_synth, feat_target);
  return rep;
}

// ---- manipulation -------------------------------------------------------

ManipulationResult manipulate(const Engine& engine, const Manifest& manifest,
                              const SampleRecord& sample, const EditSpec& edit) {
  ManipulationResult res;
  res.edited_au = apply_edit(sample.au, edit);
  Description before_desc = describe(sample.au, sample.gender, sample.protocol);
  Description after_desc =
      describe(res.edited_au, sample.gender, sample.protocol);

  Tensor<float> neutral = read_png(manifest.resolve(sample.neutral_path));
  auto before = engine.synthesize(neutral, before_desc.text)[2];
  auto after = engine.synthesize(neutral, after_desc.text)[2];

  int size = before.shape[1];
  RegionMask mask = region_mask(edit.au, size).dilated(2);
  double inside = 0, total = 0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double d = 0;
      for (int c = 0; c < 3; ++c)
        d += std::abs(double(after.at(c, y, x)) - double(before.at(c, y, x)));
      total += d;
      if (mask.test(y, x)) inside += d;
    }
  res.locality_score = total > 0 ? inside / total : 1.0;

  IdentityParams identity = IdentityParams::sample(sample.identity_seed);
  Tensor<float> oracle_edited = render(identity, res.edited_au, size);
  Tensor<float> oracle_original = render(identity, sample.au, size);
  res.consistency_score =
      l1_distance(after, oracle_edited) - l1_distance(after, oracle_original);

  res.grid = hcat({neutral, before, after, oracle_edited});
  return res;
}

// ---- ablation matrix ------------------------------------------------------

std::vector<AblationRow> ablation_matrix(const TrainConfig& base,
                                         const Manifest& manifest,
                                         const std::string& lvsn_checkpoint,
                                         const std::string& out_dir) {
  fs::create_directories(out_dir);
  struct Variant {
    std::string name;
    bool no_lvm, no_att;
  };
  const std::vector<Variant> variants = {{"full", false, false},
                                         {"no_lvm", true, false},
                                         {"no_attention", false, true}};
  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    TrainConfig cfg = base;  // identical seeds and budget across variants
    cfg.disable_lvm = v.no_lvm;
    cfg.disable_attention = v.no_att;
    std::string run_dir = (fs::path(out_dir) / v.name).string();
    std::string ckpt = run_train(cfg, manifest, lvsn_checkpoint, run_dir);
    Engine engine(ckpt, lvsn_checkpoint);
    EvalReport rep = evaluate(engine, manifest);
    rep.save((fs::path(run_dir) / "eval").string());
    rows.push_back({v.name, rep.ssim_mean, rep.fid});
  }
  std::ofstream csv(fs::path(out_dir) / "ablation.csv");
  csv << "variant,ssim,fid\n";
  for (const auto& r : rows)
    csv << r.variant << "," << r.ssim << "," << r.fid << "\n";
  return rows;
}

}  // namespace lang2face
