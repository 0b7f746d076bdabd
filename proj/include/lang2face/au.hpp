#pragma once

#include <map>
#include <string>
#include <vector>

#include "lang2face/errors.hpp"

namespace lang2face {

// The eight supported action units. Values are FACS numbers, so natural
// ordering is ascending AU id.
enum class AUId : int {
  AU1 = 1,    // inner-brow raise
  AU2 = 2,    // outer-brow raise
  AU4 = 4,    // brow lowerer
  AU5 = 5,    // upper-lid raise
  AU9 = 9,    // nose wrinkle
  AU12 = 12,  // lip-corner pull
  AU25 = 25,  // lips part
  AU26 = 26,  // jaw drop
};

const std::vector<AUId>& all_aus();
std::string au_name(AUId au);
AUId au_from_name(const std::string& name);  // throws UnsupportedAU

enum class Gender { male, female, unspecified };
std::string gender_name(Gender g);
Gender gender_from_name(const std::string& name);

enum class Protocol { P1, P2, P3 };
std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

// Map AU id -> intensity 1..5 (FACS A..E). Canonical form: intensity-0
// entries are never stored.
class AUVector {
 public:
  AUVector() = default;
  AUVector(std::initializer_list<std::pair<AUId, int>> init) {
    for (const auto& [au, k] : init) set(au, k);
  }

  void set(AUId au, int intensity);  // 0 erases; throws on bad values
  int intensity(AUId au) const;      // 0 when absent
  bool active(AUId au) const { return entries_.count(au) > 0; }
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

  // ascending AU id (std::map ordering on the FACS number)
  const std::map<AUId, int>& entries() const { return entries_; }

  bool operator==(const AUVector& o) const { return entries_ == o.entries_; }

  std::string to_string() const;  // "{AU9:4, AU25:5}"

 private:
  std::map<AUId, int> entries_;
};

}  // namespace lang2face
