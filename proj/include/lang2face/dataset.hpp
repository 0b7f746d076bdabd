#pragma once

#include <string>
#include <vector>

#include "lang2face/au.hpp"
#include "lang2face/codec.hpp"
#include "lang2face/renderer.hpp"

namespace lang2face {

struct SampleRecord {
  int64_t id = 0;
  uint64_t identity_seed = 0;
  Gender gender = Gender::unspecified;
  Protocol protocol = Protocol::P1;
  AUVector au;
  std::string text;
  std::string neutral_path;  // relative to the manifest directory
  std::string target_path;
};

struct DatasetConfig {
  int n_identities = 10;
  int samples_per_identity = 50;
  std::vector<Protocol> protocols = {Protocol::P1, Protocol::P2, Protocol::P3};
  uint64_t seed = 7;
  int image_size = 64;  // level-3 resolution of stored images
  double test_fraction = 0.2;
};

struct Manifest {
  std::string dir;
  int image_size = 0;
  uint64_t seed = 0;
  std::vector<SampleRecord> records;
  std::vector<uint64_t> test_identity_seeds;

  bool is_test_identity(uint64_t identity_seed) const;
  std::vector<const SampleRecord*> train_records() const;
  std::vector<const SampleRecord*> test_records() const;
  std::string resolve(const std::string& rel_path) const;
};

// Renders all samples to PNG and writes manifest.jsonl, train.jsonl,
// test.jsonl and dataset_meta.json into out_dir. Identity-level split;
// byte-stable for fixed arguments.
Manifest generate_dataset(const DatasetConfig& cfg, const std::string& out_dir);

Manifest load_manifest(const std::string& dir);

std::string record_to_json(const SampleRecord& r);
SampleRecord record_from_json(const std::string& line);

// worker cap honoring LANG2FACE_THREADS
int worker_threads();

}  // namespace lang2face
