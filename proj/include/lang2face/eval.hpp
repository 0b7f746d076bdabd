#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lang2face/dataset.hpp"
#include "lang2face/trainer.hpp"

namespace lang2face {

// Description edits operate on the AU vector and re-describe; raw text
// is never edited.
struct EditSpec {
  enum class Kind { adverb_swap, phrase_remove, phrase_add };
  Kind kind = Kind::adverb_swap;
  AUId au = AUId::AU9;
  int new_intensity = 0;  // used by adverb_swap and phrase_add
};

AUVector apply_edit(const AUVector& au, const EditSpec& edit);
EditSpec edit_from_string(const std::string& spec);  // "swap:AU9:1" etc.

struct EvalReport {
  double ssim_mean = 0;
  double fid = 0;
  int n_samples = 0;
  std::vector<std::pair<int64_t, double>> per_sample_ssim;
  std::string checkpoint_hash, lvsn_hash;

  void save(const std::string& dir) const;
};

// Loads a trained FESN checkpoint plus the frozen LVSN and provides
// deterministic synthesis (eps = 0) and feature extraction.
class Engine {
 public:
  Engine(const std::string& fesn_checkpoint_dir,
         const std::string& lvsn_checkpoint);

  // returns images at levels 1..3
  std::array<Tensor<float>, 3> synthesize(const Tensor<float>& neutral_l3,
                                          const std::string& text) const;
  std::vector<double> vse_features(const Tensor<float>& img_l3) const;

  const TrainConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  std::string checkpoint_hash() const { return gen_params_.content_hash(); }
  std::string lvsn_hash() const { return lvsn_params_.content_hash(); }

 private:
  TrainConfig cfg_;
  Vocab vocab_;
  std::unique_ptr<Lvsn<float>> lvsn_;
  std::unique_ptr<Generator<float>> gen_;
  mutable ParamStore<float> lvsn_params_, gen_params_;
};

EvalReport evaluate(const Engine& engine, const Manifest& manifest);

struct ManipulationResult {
  Tensor<float> grid;  // neutral | before | after | edited oracle
  double locality_score = 0;
  double consistency_score = 0;
  AUVector edited_au;
};

ManipulationResult manipulate(const Engine& engine, const Manifest& manifest,
                              const SampleRecord& sample, const EditSpec& edit);

struct AblationRow {
  std::string variant;
  double ssim = 0;
  double fid = 0;
};

// Trains the full model and both ablations under identical seeds and
// budgets, evaluates each on the held-out identities, writes a
// Table-1-shaped CSV into out_dir, and returns the rows.
std::vector<AblationRow> ablation_matrix(const TrainConfig& base,
                                         const Manifest& manifest,
                                         const std::string& lvsn_checkpoint,
                                         const std::string& out_dir);

}  // namespace lang2face
