#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "lang2face/dataset.hpp"
#include "lang2face/eval.hpp"
#include "lang2face/image.hpp"
#include "lang2face/run_manifest.hpp"
#include "lang2face/trainer.hpp"
#include "lang2face/verify.hpp"

namespace fs = std::filesystem;
using namespace lang2face;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string manifest_dir;
  std::string ckpt_dir;
  std::string lvsn_path;
  uint64_t seed = 0;
  bool seed_set = false;
  bool paper_scale = false;
};

TrainConfig resolve_config(const CommonArgs& a) {
  TrainConfig cfg;
  if (!a.config_path.empty()) cfg = TrainConfig::from_json_file(a.config_path);
  if (a.paper_scale) {
    ModelDims paper = ModelDims::paper_scale();
    cfg.dims = paper;
  }
  if (a.seed_set) cfg.seed = a.seed;
  return cfg;
}

RunManifest base_manifest(const std::string& command, int argc, char** argv,
                          const CommonArgs& a, const TrainConfig* cfg) {
  RunManifest m;
  m.command = command;
  for (int i = 0; i < argc; ++i) m.argv.push_back(argv[i]);
  m.seed = a.seed_set ? a.seed : (cfg ? cfg->seed : 0);
  m.threads = worker_threads();
  if (!a.config_path.empty()) m.add_input_file(a.config_path);
  if (!a.manifest_dir.empty()) m.add_input_dir_manifest(a.manifest_dir);
  if (!a.lvsn_path.empty() && fs::exists(a.lvsn_path))
    m.add_input_file(a.lvsn_path);
  if (!a.ckpt_dir.empty()) {
    for (const char* f : {"generator.bin", "critics.bin"}) {
      fs::path p = fs::path(a.ckpt_dir) / f;
      if (fs::exists(p)) m.add_input_file(p.string());
    }
  }
  if (cfg) m.config_json = cfg->to_json();
  return m;
}

int fail(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"language-conditioned facial expression synthesis"};
  app.require_subcommand(1);

  CommonArgs a;
  int n_identities = 10;
  int per_identity = 50;
  int dataset_size = 64;
  bool ablate_lvm = false, ablate_attention = false, ablation_matrix_flag = false;
  std::string resume_dir, text, neutral_path, edit_spec;
  uint64_t identity_seed = 0;
  bool identity_seed_set = false;
  int64_t sample_id = -1;

  auto add_common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", a.config_path, "config file (JSON)");
    auto* seed_opt = cmd->add_option("--seed", a.seed, "seed override");
    seed_opt->each([&](const std::string&) { a.seed_set = true; });
    cmd->add_flag("--paper-scale", a.paper_scale,
                  "64/128/256 pyramid with 512-dim features");
    if (needs_out)
      cmd->add_option("--out", a.out_dir, "output directory")->required();
  };

  auto* cmd_dataset = app.add_subcommand("dataset", "generate the synthetic dataset");
  add_common(cmd_dataset);
  cmd_dataset->add_option("--identities", n_identities, "number of identities");
  cmd_dataset->add_option("--per-identity", per_identity, "samples per identity");
  cmd_dataset->add_option("--size", dataset_size, "level-3 image size");

  auto* cmd_pretrain = app.add_subcommand("pretrain", "pretrain and freeze the LVSN");
  add_common(cmd_pretrain);
  cmd_pretrain->add_option("--manifest", a.manifest_dir, "dataset directory")->required();

  auto* cmd_train = app.add_subcommand("train", "train the synthesis networks");
  add_common(cmd_train);
  cmd_train->add_option("--manifest", a.manifest_dir, "dataset directory")->required();
  cmd_train->add_option("--lvsn", a.lvsn_path, "frozen LVSN checkpoint")->required();
  cmd_train->add_flag("--ablate-lvm", ablate_lvm, "drop the matching loss");
  cmd_train->add_flag("--ablate-attention", ablate_attention,
                      "replace word attention with zeros");
  cmd_train->add_option("--resume", resume_dir, "checkpoint directory to resume from");

  auto* cmd_synth = app.add_subcommand("synthesize", "synthesize one description");
  add_common(cmd_synth);
  cmd_synth->add_option("--ckpt", a.ckpt_dir, "trained checkpoint directory")->required();
  cmd_synth->add_option("--lvsn", a.lvsn_path, "frozen LVSN checkpoint")->required();
  cmd_synth->add_option("--text", text, "expression description")->required();
  cmd_synth->add_option("--neutral", neutral_path, "neutral face PNG");
  auto* idseed_opt = cmd_synth->add_option("--identity-seed", identity_seed,
                                           "render the neutral from this identity");
  idseed_opt->each([&](const std::string&) { identity_seed_set = true; });

  auto* cmd_manip = app.add_subcommand("manipulate", "word-level manipulation with scores");
  add_common(cmd_manip);
  cmd_manip->add_option("--ckpt", a.ckpt_dir, "trained checkpoint directory")->required();
  cmd_manip->add_option("--lvsn", a.lvsn_path, "frozen LVSN checkpoint")->required();
  cmd_manip->add_option("--manifest", a.manifest_dir, "dataset directory")->required();
  cmd_manip->add_option("--sample", sample_id, "sample id")->required();
  cmd_manip->add_option("--edit", edit_spec,
                        "edit spec: swap:AU9:1 | remove:AU25 | add:AU26:4")->required();

  auto* cmd_eval = app.add_subcommand("evaluate", "SSIM/FID evaluation");
  add_common(cmd_eval);
  cmd_eval->add_option("--ckpt", a.ckpt_dir, "trained checkpoint directory");
  cmd_eval->add_option("--lvsn", a.lvsn_path, "frozen LVSN checkpoint")->required();
  cmd_eval->add_option("--manifest", a.manifest_dir, "dataset directory")->required();
  cmd_eval->add_flag("--ablation-matrix", ablation_matrix_flag,
                     "train and compare full model and both ablations");

  auto* cmd_verify = app.add_subcommand("verify", "run the property suites");
  add_common(cmd_verify, false);
  cmd_verify->add_option("--out", a.out_dir, "optional report directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_dataset->parsed()) {
      TrainConfig cfg = resolve_config(a);
      DatasetConfig dc;
      dc.n_identities = n_identities;
      dc.samples_per_identity = per_identity;
      dc.seed = a.seed_set ? a.seed : 7;
      dc.image_size = a.paper_scale ? 256 : dataset_size;
      base_manifest("dataset", argc, argv, a, &cfg).write(a.out_dir);
      Manifest m = generate_dataset(dc, a.out_dir);
      std::cout << "wrote " << m.records.size() << " samples to " << a.out_dir
                << "\n";
      return 0;
    }

    if (cmd_pretrain->parsed()) {
      TrainConfig cfg = resolve_config(a);
      base_manifest("pretrain", argc, argv, a, &cfg).write(a.out_dir);
      Manifest m = load_manifest(a.manifest_dir);
      std::string ckpt = run_pretrain(cfg, m, a.out_dir);
      std::cout << "LVSN checkpoint: " << ckpt << "\n";
      return 0;
    }

    if (cmd_train->parsed()) {
      TrainConfig cfg = resolve_config(a);
      cfg.disable_lvm = cfg.disable_lvm || ablate_lvm;
      cfg.disable_attention = cfg.disable_attention || ablate_attention;
      base_manifest("train", argc, argv, a, &cfg).write(a.out_dir);
      Manifest m = load_manifest(a.manifest_dir);
      std::string ckpt = run_train(cfg, m, a.lvsn_path, a.out_dir, resume_dir);
      std::cout << "final checkpoint: " << ckpt << "\n";
      return 0;
    }

    if (cmd_synth->parsed()) {
      // the description must parse; free text is rejected
      auto parsed = parse_text(text);
      Engine engine(a.ckpt_dir, a.lvsn_path);
      base_manifest("synthesize", argc, argv, a, nullptr).write(a.out_dir);
      Tensor<float> neutral;
      int l3 = engine.config().dims.l3_size();
      if (!neutral_path.empty()) {
        neutral = read_png(neutral_path);
      } else if (identity_seed_set) {
        neutral = render(IdentityParams::sample(identity_seed), AUVector{}, l3);
      } else {
        return fail("synthesize needs --neutral or --identity-seed");
      }
      auto imgs = engine.synthesize(neutral, text);
      for (int lvl = 0; lvl < 3; ++lvl) {
        std::string p =
            (fs::path(a.out_dir) / ("level" + std::to_string(lvl + 1) + ".png"))
                .string();
        write_png(p, imgs[size_t(lvl)]);
      }
      write_png((fs::path(a.out_dir) / "triptych.png").string(),
                hcat({upsample(imgs[0], 4), upsample(imgs[1], 2), imgs[2]}));
      std::cout << "AUs: " << parsed.first.to_string() << "\n";
      return 0;
    }

    if (cmd_manip->parsed()) {
      Engine engine(a.ckpt_dir, a.lvsn_path);
      base_manifest("manipulate", argc, argv, a, nullptr).write(a.out_dir);
      Manifest m = load_manifest(a.manifest_dir);
      const SampleRecord* rec = nullptr;
      for (const auto& r : m.records)
        if (r.id == sample_id) rec = &r;
      if (!rec) return fail("sample id not found");
      auto res = manipulate(engine, m, *rec, edit_from_string(edit_spec));
      write_png((fs::path(a.out_dir) / "grid.png").string(), res.grid);
      std::printf("locality_score %.4f\nconsistency_score %.4f\n",
                  res.locality_score, res.consistency_score);
      return 0;
    }

    if (cmd_eval->parsed()) {
      if (ablation_matrix_flag) {
        TrainConfig cfg = resolve_config(a);
        base_manifest("evaluate", argc, argv, a, &cfg).write(a.out_dir);
        Manifest m = load_manifest(a.manifest_dir);
        auto rows = ablation_matrix(cfg, m, a.lvsn_path, a.out_dir);
        for (const auto& r : rows)
          std::printf("%-14s ssim %.4f  fid %.4f\n", r.variant.c_str(), r.ssim,
                      r.fid);
        return 0;
      }
      if (a.ckpt_dir.empty()) return fail("evaluate needs --ckpt");
      Engine engine(a.ckpt_dir, a.lvsn_path);
      base_manifest("evaluate", argc, argv, a, nullptr).write(a.out_dir);
      Manifest m = load_manifest(a.manifest_dir);
      EvalReport rep = evaluate(engine, m);
      std::string run_dir =
          (fs::path(a.out_dir) / ("eval_" + rep.checkpoint_hash.substr(0, 12)))
              .string();
      rep.save(run_dir);
      std::printf("ssim_mean %.4f\nfid %.4f\n(n=%d) -> %s\n", rep.ssim_mean,
                  rep.fid, rep.n_samples, run_dir.c_str());
      return 0;
    }

    if (cmd_verify->parsed()) {
      if (!a.out_dir.empty())
        base_manifest("verify", argc, argv, a, nullptr).write(a.out_dir);
      bool all = true;
      for (const CheckResult& r : run_fast_checks()) {
        std::printf("[%s] %-20s (%.1fs) %s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.seconds, r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const ParseError& e) {
    std::cerr << "ParseError: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
