#include "lang2face/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace lang2face {

namespace {

constexpr char kMagic[8] = {'L', '2', 'F', 'A', 'R', 'C', 'H', '1'};

void write_u64(std::ofstream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint64_t read_u64(std::ifstream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void write_str(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), std::streamsize(s.size()));
}
std::string read_str(std::ifstream& in) {
  uint64_t n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), std::streamsize(n));
  return s;
}

template <typename S>
void write_tensor(std::ofstream& out, const std::string& name,
                  const Tensor<S>& t, uint8_t dtype) {
  write_str(out, name);
  out.put(char(dtype));
  write_u64(out, t.shape.size());
  for (int d : t.shape) write_u64(out, uint64_t(d));
  out.write(reinterpret_cast<const char*>(t.data.data()),
            std::streamsize(t.data.size() * sizeof(S)));
}

template <typename S>
Tensor<S> read_tensor(std::ifstream& in) {
  uint64_t rank = read_u64(in);
  std::vector<int> shape(rank);
  for (auto& d : shape) d = int(read_u64(in));
  Tensor<S> t(shape);
  in.read(reinterpret_cast<char*>(t.data.data()),
          std::streamsize(t.data.size() * sizeof(S)));
  return t;
}

}  // namespace

void save_archive(const std::string& path,
                  const std::map<std::string, Tensor<float>>& f32,
                  const std::map<std::string, Tensor<double>>& f64,
                  const std::string& meta_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot write archive: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_str(out, meta_json);
  write_u64(out, f32.size() + f64.size());
  for (const auto& [name, t] : f32) write_tensor(out, name, t, 0);
  for (const auto& [name, t] : f64) write_tensor(out, name, t, 1);
  if (!out) throw IOError("short write: " + path);
}

void load_archive(const std::string& path,
                  std::map<std::string, Tensor<float>>& f32,
                  std::map<std::string, Tensor<double>>& f64,
                  std::string& meta_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot read archive: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IOError("bad archive magic: " + path);
  meta_json = read_str(in);
  uint64_t count = read_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_str(in);
    int dtype = in.get();
    if (dtype == 0)
      f32[name] = read_tensor<float>(in);
    else if (dtype == 1)
      f64[name] = read_tensor<double>(in);
    else
      throw IOError("bad dtype in archive: " + path);
  }
  if (!in) throw IOError("short read: " + path);
}

void save_params(const std::string& path, const ParamStore<float>& ps,
                 const std::string& meta_json) {
  std::map<std::string, Tensor<float>> f32;
  for (const auto& [name, e] : ps.all()) f32[name] = e.value;
  save_archive(path, f32, {}, meta_json);
}

void load_params(const std::string& path, ParamStore<float>& ps,
                 std::string& meta_json) {
  std::map<std::string, Tensor<float>> f32;
  std::map<std::string, Tensor<double>> f64;
  load_archive(path, f32, f64, meta_json);
  for (auto& [name, e] : ps.all()) {
    auto it = f32.find(name);
    if (it == f32.end()) throw IOError("archive missing parameter " + name);
    if (it->second.shape != e.value.shape)
      throw IOError("archive shape mismatch for " + name);
    e.value = it->second;
    e.grad.data.clear();
  }
  if (f32.size() != ps.all().size())
    throw IOError("archive has extra parameters: " + path);
}

void save_adam(const std::string& path, const Adam<float>& opt) {
  std::map<std::string, Tensor<double>> f64;
  auto& st = const_cast<Adam<float>&>(opt).state();
  for (const auto& [name, s] : st) {
    f64["m/" + name] = s.m;
    f64["v/" + name] = s.v;
  }
  save_archive(path, {}, f64,
               "{\"t\":" + std::to_string(opt.steps()) + "}");
}

void load_adam(const std::string& path, Adam<float>& opt) {
  std::map<std::string, Tensor<float>> f32;
  std::map<std::string, Tensor<double>> f64;
  std::string meta;
  load_archive(path, f32, f64, meta);
  auto& st = opt.state();
  st.clear();
  for (auto& [name, t] : f64) {
    if (name.rfind("m/", 0) == 0) st[name.substr(2)].m = t;
    if (name.rfind("v/", 0) == 0) st[name.substr(2)].v = t;
  }
  auto pos = meta.find(':');
  opt.set_steps(std::strtoll(meta.c_str() + pos + 1, nullptr, 10));
}

}  // namespace lang2face
