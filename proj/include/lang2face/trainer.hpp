#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "lang2face/critics.hpp"
#include "lang2face/dataset.hpp"
#include "lang2face/dims.hpp"
#include "lang2face/generator.hpp"
#include "lang2face/lvsn.hpp"
#include "lang2face/objectives.hpp"

namespace lang2face {

struct TrainConfig {
  ModelDims dims;
  int batch_size = 8;
  int steps = 800;
  int pretrain_steps = 20000;
  int pretrain_batch = 16;
  double lr_main = 2e-4;
  double lr_pretrain = 1e-5;
  LossWeights weights;
  MatchingGammas gammas;
  uint64_t seed = 1234;
  bool disable_lvm = false;
  bool disable_attention = false;
  int checkpoint_every = 200;
  // per-step parameter-partition hash check (slow; probe runs only)
  bool probe_leakage = false;
  // manipulation acceptance bars (declared here, not in test code)
  double manip_locality_median_min = 0.6;
  double manip_consistency_neg_frac = 0.7;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig from_json_file(const std::string& path);
  void save(const std::string& path) const;
};

// In-memory dataset with precomputed target/neutral pyramids and
// tokenized descriptions.
struct LoadedSample {
  const SampleRecord* rec = nullptr;
  Tensor<float> neutral[3];  // levels 1..3 (index 0..2)
  Tensor<float> target[3];
  std::vector<int> tokens;
  int length = 0;
};

struct LoadedDataset {
  std::vector<LoadedSample> train, test;
  int l3_size = 0;
};

LoadedDataset load_dataset(const Manifest& manifest, const Vocab& vocab,
                           const ModelDims& dims);

// deterministic per-epoch shuffled batch order; pure in (seed, step)
std::vector<int> batch_indices(uint64_t seed, int64_t step, int batch, int n);

Tensor<float> stack_images(const std::vector<const LoadedSample*>& batch,
                           int level);
Tensor<int> stack_tokens(const std::vector<const LoadedSample*>& batch);

// matched-pair retrieval accuracy of the (frozen) encoders
double retrieval_top1(const Lvsn<float>& model, ParamStore<float>& params,
                      const std::vector<LoadedSample>& samples, int batch,
                      uint64_t seed);

// Pretrains LSE+VSE on (target image, description) pairs with
// lr_pretrain, freezes and saves. Returns the checkpoint path.
std::string run_pretrain(const TrainConfig& cfg, const Manifest& manifest,
                         const std::string& out_dir);

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Manifest& manifest,
          const std::string& lvsn_checkpoint, const std::string& out_dir,
          const std::string& resume_dir = "");

  LossReport step();  // one critic update + one generator update
  void save_checkpoint();
  int64_t current_step() const { return step_; }

  const TrainConfig& config() const { return cfg_; }
  ParamStore<float>& generator_params() { return gen_params_; }
  ParamStore<float>& critic_params() { return critic_params_; }
  ParamStore<float>& lvsn_params() { return lvsn_params_; }
  std::string lvsn_hash() const { return lvsn_params_.content_hash(); }
  const std::string& out_dir() const { return out_dir_; }
  const LoadedDataset& dataset() const { return data_; }
  const Vocab& vocab() const { return vocab_; }
  const Generator<float>& generator() const { return *gen_; }
  const Lvsn<float>& lvsn() const { return *lvsn_; }

 private:
  struct StepTensors;
  StepTensors assemble(int64_t step) const;

  TrainConfig cfg_;
  std::string out_dir_;
  Vocab vocab_;
  LoadedDataset data_;
  std::unique_ptr<Lvsn<float>> lvsn_;
  std::unique_ptr<Generator<float>> gen_;
  std::unique_ptr<Critics<float>> critics_;
  ParamStore<float> lvsn_params_, gen_params_, critic_params_;
  std::unique_ptr<Adam<float>> opt_g_, opt_d_;
  std::string lvsn_hash_at_load_;
  int64_t step_ = 0;
  std::ofstream* log_ = nullptr;  // owned via unique_ptr below
  std::unique_ptr<std::ofstream> log_owner_;
};

// Full training loop with periodic checkpoints; returns final
// checkpoint directory.
std::string run_train(const TrainConfig& cfg, const Manifest& manifest,
                      const std::string& lvsn_checkpoint,
                      const std::string& out_dir,
                      const std::string& resume_dir = "");

// Central finite-difference validation of every differentiable
// operation the objective touches. Key: op name, value: max relative
// error. All checks run in double precision on fixed tiny instances.
std::map<std::string, double> run_grad_check_suite();

}  // namespace lang2face
