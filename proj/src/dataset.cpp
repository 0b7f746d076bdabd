#include "lang2face/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "lang2face/random.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lang2face {

int worker_threads() {
  int hw = int(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("LANG2FACE_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

bool Manifest::is_test_identity(uint64_t identity_seed) const {
  return std::find(test_identity_seeds.begin(), test_identity_seeds.end(),
                   identity_seed) != test_identity_seeds.end();
}

std::vector<const SampleRecord*> Manifest::train_records() const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (!is_test_identity(r.identity_seed)) out.push_back(&r);
  return out;
}

std::vector<const SampleRecord*> Manifest::test_records() const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (is_test_identity(r.identity_seed)) out.push_back(&r);
  return out;
}

std::string Manifest::resolve(const std::string& rel) const {
  return (fs::path(dir) / rel).string();
}

std::string record_to_json(const SampleRecord& r) {
  json au = json::object();
  for (const auto& [id, k] : r.au.entries()) au[au_name(id)] = k;
  json j = {{"id", r.id},
            {"identity_seed", r.identity_seed},
            {"gender", gender_name(r.gender)},
            {"protocol", protocol_name(r.protocol)},
            {"au", au},
            {"text", r.text},
            {"neutral_path", r.neutral_path},
            {"target_path", r.target_path}};
  return j.dump();
}

SampleRecord record_from_json(const std::string& line) {
  json j = json::parse(line);
  SampleRecord r;
  r.id = j.at("id").get<int64_t>();
  r.identity_seed = j.at("identity_seed").get<uint64_t>();
  r.gender = gender_from_name(j.at("gender").get<std::string>());
  r.protocol = protocol_from_name(j.at("protocol").get<std::string>());
  for (auto& [key, val] : j.at("au").items())
    r.au.set(au_from_name(key), val.get<int>());
  r.text = j.at("text").get<std::string>();
  r.neutral_path = j.at("neutral_path").get<std::string>();
  r.target_path = j.at("target_path").get<std::string>();
  return r;
}

namespace {

AUVector sample_au_vector(RandomStream& rs) {
  int n_active = 1 + int(rs.uniform_index(3));
  std::vector<AUId> pool = all_aus();
  rs.shuffle(pool);
  AUVector v;
  for (int i = 0; i < n_active; ++i)
    v.set(pool[size_t(i)], 1 + int(rs.uniform_index(5)));
  return v;
}

}  // namespace

Manifest generate_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
  if (cfg.n_identities < 2)
    throw ConfigError("generate_dataset needs at least 2 identities");
  if (cfg.protocols.empty()) throw ConfigError("no protocols given");

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "imgs", ec);
  if (ec) throw IOError("cannot create dataset directory: " + out_dir);

  Manifest m;
  m.dir = out_dir;
  m.image_size = cfg.image_size;
  m.seed = cfg.seed;

  std::vector<uint64_t> identity_seeds(size_t(cfg.n_identities));
  for (int i = 0; i < cfg.n_identities; ++i)
    identity_seeds[size_t(i)] = RandomStream(cfg.seed, "identity_seed", uint64_t(i)).next_u64();

  int n_test = std::max(1, int(std::lround(cfg.n_identities * cfg.test_fraction)));
  if (n_test >= cfg.n_identities) n_test = cfg.n_identities - 1;
  m.test_identity_seeds.assign(identity_seeds.end() - n_test, identity_seeds.end());

  m.records.resize(size_t(cfg.n_identities) * cfg.samples_per_identity);

  auto build_identity = [&](int idx) {
    uint64_t id_seed = identity_seeds[size_t(idx)];
    IdentityParams identity = IdentityParams::sample(id_seed);
    RandomStream id_rs(cfg.seed, "gender", uint64_t(idx));
    Gender gender = static_cast<Gender>(id_rs.uniform_index(3));

    char buf[64];
    std::snprintf(buf, sizeof(buf), "imgs/id%04d_neutral.png", idx);
    std::string neutral_rel = buf;
    Tensor<float> neutral = render(identity, AUVector{}, cfg.image_size);
    write_png((fs::path(out_dir) / neutral_rel).string(), neutral);

    for (int s = 0; s < cfg.samples_per_identity; ++s) {
      int64_t sample_id = int64_t(idx) * cfg.samples_per_identity + s;
      RandomStream rs(cfg.seed, "sample", uint64_t(sample_id));
      SampleRecord rec;
      rec.id = sample_id;
      rec.identity_seed = id_seed;
      rec.gender = gender;
      rec.protocol = cfg.protocols[size_t(s) % cfg.protocols.size()];
      rec.au = sample_au_vector(rs);
      rec.text = describe(rec.au, rec.gender, rec.protocol).text;
      rec.neutral_path = neutral_rel;
      std::snprintf(buf, sizeof(buf), "imgs/id%04d_s%04d_target.png", idx, s);
      rec.target_path = buf;
      Tensor<float> target = render(identity, rec.au, cfg.image_size);
      write_png((fs::path(out_dir) / rec.target_path).string(), target);
      m.records[size_t(sample_id)] = std::move(rec);
    }
  };

  int workers = std::min(worker_threads(), cfg.n_identities);
  if (workers <= 1) {
    for (int i = 0; i < cfg.n_identities; ++i) build_identity(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < cfg.n_identities;
             i = next.fetch_add(1))
          build_identity(i);
      });
    for (auto& th : pool) th.join();
  }

  auto write_rows = [&](const std::string& name, auto pred) {
    std::ofstream out(fs::path(out_dir) / name);
    if (!out) throw IOError("cannot write " + name);
    for (const auto& r : m.records)
      if (pred(r)) out << record_to_json(r) << "\n";
  };
  write_rows("manifest.jsonl", [](const SampleRecord&) { return true; });
  write_rows("train.jsonl", [&](const SampleRecord& r) {
    return !m.is_test_identity(r.identity_seed);
  });
  write_rows("test.jsonl", [&](const SampleRecord& r) {
    return m.is_test_identity(r.identity_seed);
  });

  json meta = {{"seed", cfg.seed},
               {"n_identities", cfg.n_identities},
               {"samples_per_identity", cfg.samples_per_identity},
               {"image_size", cfg.image_size},
               {"test_identity_seeds", m.test_identity_seeds}};
  std::ofstream meta_out(fs::path(out_dir) / "dataset_meta.json");
  meta_out << meta.dump(2) << "\n";
  return m;
}

Manifest load_manifest(const std::string& dir) {
  Manifest m;
  m.dir = dir;
  std::ifstream meta_in(fs::path(dir) / "dataset_meta.json");
  if (!meta_in) throw IOError("missing dataset_meta.json in " + dir);
  json meta = json::parse(meta_in);
  m.image_size = meta.at("image_size").get<int>();
  m.seed = meta.at("seed").get<uint64_t>();
  m.test_identity_seeds =
      meta.at("test_identity_seeds").get<std::vector<uint64_t>>();

  std::ifstream in(fs::path(dir) / "manifest.jsonl");
  if (!in) throw IOError("missing manifest.jsonl in " + dir);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    m.records.push_back(record_from_json(line));
  }
  return m;
}

}  // namespace lang2face
