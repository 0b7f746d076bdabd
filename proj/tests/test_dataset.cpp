#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "lang2face/dataset.hpp"
#include "lang2face/sha256.hpp"

namespace fs = std::filesystem;
using namespace lang2face;

namespace {

DatasetConfig small_cfg() {
  DatasetConfig cfg;
  cfg.n_identities = 5;
  cfg.samples_per_identity = 4;
  cfg.seed = 7;
  cfg.image_size = 32;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("dataset generation: counts, split, round-trip, determinism") {
  std::string dir_a = "/tmp/l2f_ds_a";
  std::string dir_b = "/tmp/l2f_ds_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  DatasetConfig cfg = small_cfg();
  Manifest a = generate_dataset(cfg, dir_a);
  CHECK(a.records.size() == 20);

  // identity-level split with zero overlap
  std::set<uint64_t> train_ids, test_ids;
  for (const auto* r : a.train_records()) train_ids.insert(r->identity_seed);
  for (const auto* r : a.test_records()) test_ids.insert(r->identity_seed);
  CHECK(!train_ids.empty());
  CHECK(!test_ids.empty());
  for (uint64_t id : test_ids) CHECK(train_ids.count(id) == 0);

  // every stored description parses back to the stored AU vector
  for (const auto& rec : a.records) {
    auto [au, g] = parse_text(rec.text);
    CHECK(au == rec.au);
    CHECK(g == rec.gender);
    CHECK(fs::exists(fs::path(dir_a) / rec.neutral_path));
    CHECK(fs::exists(fs::path(dir_a) / rec.target_path));
  }

  // AU vectors have 1..3 active entries
  for (const auto& rec : a.records) {
    CHECK(rec.au.size() >= 1);
    CHECK(rec.au.size() <= 3);
  }

  // byte-identical regeneration
  generate_dataset(cfg, dir_b);
  for (const char* f : {"manifest.jsonl", "train.jsonl", "test.jsonl",
                        "dataset_meta.json"}) {
    CHECK(slurp((fs::path(dir_a) / f).string()) ==
          slurp((fs::path(dir_b) / f).string()));
  }
  CHECK(Sha256::of_file((fs::path(dir_a) / a.records[3].target_path).string()) ==
        Sha256::of_file((fs::path(dir_b) / a.records[3].target_path).string()));
}

TEST_CASE("manifest load round-trip") {
  std::string dir = "/tmp/l2f_ds_load";
  fs::remove_all(dir);
  Manifest a = generate_dataset(small_cfg(), dir);
  Manifest b = load_manifest(dir);
  REQUIRE(b.records.size() == a.records.size());
  CHECK(b.image_size == a.image_size);
  CHECK(b.test_identity_seeds == a.test_identity_seeds);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(b.records[i].id == a.records[i].id);
    CHECK(b.records[i].text == a.records[i].text);
    CHECK(b.records[i].au == a.records[i].au);
  }
}

TEST_CASE("record json round-trip") {
  SampleRecord r;
  r.id = 42;
  r.identity_seed = 99;
  r.gender = Gender::female;
  r.protocol = Protocol::P2;
  r.au.set(AUId::AU9, 4);
  r.au.set(AUId::AU25, 1);
  r.text = describe(r.au, r.gender, r.protocol).text;
  r.neutral_path = "imgs/n.png";
  r.target_path = "imgs/t.png";
  SampleRecord back = record_from_json(record_to_json(r));
  CHECK(back.id == r.id);
  CHECK(back.identity_seed == r.identity_seed);
  CHECK(back.gender == r.gender);
  CHECK(back.protocol == r.protocol);
  CHECK(back.au == r.au);
  CHECK(back.text == r.text);
}

TEST_CASE("generation rejects degenerate configs") {
  DatasetConfig cfg = small_cfg();
  cfg.n_identities = 1;
  CHECK_THROWS_AS(generate_dataset(cfg, "/tmp/l2f_ds_bad"), ConfigError);
}
