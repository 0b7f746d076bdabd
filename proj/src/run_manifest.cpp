#include "lang2face/run_manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "lang2face/errors.hpp"
#include "lang2face/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lang2face {

void RunManifest::add_input_file(const std::string& path) {
  input_hashes[path] = Sha256::of_file(path);
}

void RunManifest::add_input_dir_manifest(const std::string& dir) {
  for (const char* name :
       {"manifest.jsonl", "train.jsonl", "test.jsonl", "dataset_meta.json"}) {
    fs::path p = fs::path(dir) / name;
    if (fs::exists(p)) input_hashes[p.string()] = Sha256::of_file(p.string());
  }
}

void RunManifest::write(const std::string& out_dir) const {
  fs::create_directories(out_dir);
  json j = {{"command", command},
            {"argv", argv},
            {"seed", seed},
            {"threads", threads},
            {"input_hashes", input_hashes}};
  if (!config_json.empty()) j["config"] = json::parse(config_json);
  std::ofstream out(fs::path(out_dir) / "run_manifest.json");
  if (!out) throw IOError("cannot write run manifest in " + out_dir);
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::read(const std::string& out_dir) {
  std::ifstream in(fs::path(out_dir) / "run_manifest.json");
  if (!in) throw IOError("missing run_manifest.json in " + out_dir);
  json j = json::parse(in);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<uint64_t>();
  m.threads = j.at("threads").get<int>();
  m.input_hashes =
      j.at("input_hashes").get<std::map<std::string, std::string>>();
  if (j.contains("config")) m.config_json = j.at("config").dump();
  return m;
}

}  // namespace lang2face
