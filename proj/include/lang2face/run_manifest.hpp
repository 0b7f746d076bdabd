#pragma once

#include <map>
#include <string>
#include <vector>

namespace lang2face {

// Written into the output directory before any long-running work; holds
// everything needed to reproduce the run (no timestamps, so re-runs are
// hash-identical).
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, std::string> input_hashes;  // path -> sha256
  std::string config_json;

  void add_input_file(const std::string& path);
  void add_input_dir_manifest(const std::string& dir);  // hashes manifest files
  void write(const std::string& out_dir) const;
  static RunManifest read(const std::string& out_dir);
};

}  // namespace lang2face
