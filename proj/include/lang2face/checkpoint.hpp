#pragma once

#include <map>
#include <string>

#include "lang2face/nn.hpp"

namespace lang2face {

// Versioned binary parameter archive: magic, version, a JSON metadata
// blob and named float tensors. Adam moments are stored as f64 tensors
// under reserved name prefixes so resume is bit-exact.

void save_archive(const std::string& path,
                  const std::map<std::string, Tensor<float>>& f32,
                  const std::map<std::string, Tensor<double>>& f64,
                  const std::string& meta_json);

void load_archive(const std::string& path,
                  std::map<std::string, Tensor<float>>& f32,
                  std::map<std::string, Tensor<double>>& f64,
                  std::string& meta_json);

void save_params(const std::string& path, const ParamStore<float>& ps,
                 const std::string& meta_json);
// replaces the store contents
void load_params(const std::string& path, ParamStore<float>& ps,
                 std::string& meta_json);

void save_adam(const std::string& path, const Adam<float>& opt);
void load_adam(const std::string& path, Adam<float>& opt);

}  // namespace lang2face
