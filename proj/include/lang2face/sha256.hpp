#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace lang2face {

// Minimal SHA-256, used for content hashes of files, checkpoints and
// parameter stores (freeze / reproducibility contracts).
class Sha256 {
 public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, size_t len);
  // hex digest; finalizes a copy, so update() can continue afterwards
  std::string hex() const;

  static std::string of_bytes(const void* data, size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.hex();
  }
  static std::string of_string(const std::string& s) {
    return of_bytes(s.data(), s.size());
  }
  static std::string of_file(const std::string& path);

 private:
  void process_block(const uint8_t* block);
  void finalize(uint8_t out[32]) const;

  uint32_t state_[8];
  uint64_t bit_count_ = 0;
  uint8_t buffer_[64];
  size_t buffer_len_ = 0;
};

}  // namespace lang2face
