#include "lang2face/au.hpp"

namespace lang2face {

const std::vector<AUId>& all_aus() {
  static const std::vector<AUId> kAll = {AUId::AU1,  AUId::AU2,  AUId::AU4,
                                         AUId::AU5,  AUId::AU9,  AUId::AU12,
                                         AUId::AU25, AUId::AU26};
  return kAll;
}

std::string au_name(AUId au) { return "AU" + std::to_string(int(au)); }

AUId au_from_name(const std::string& name) {
  for (AUId au : all_aus())
    if (au_name(au) == name) return au;
  throw UnsupportedAU("unsupported AU: " + name);
}

std::string gender_name(Gender g) {
  switch (g) {
    case Gender::male: return "male";
    case Gender::female: return "female";
    default: return "unspecified";
  }
}

Gender gender_from_name(const std::string& name) {
  if (name == "male") return Gender::male;
  if (name == "female") return Gender::female;
  if (name == "unspecified") return Gender::unspecified;
  throw ConfigError("unknown gender: " + name);
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::P1: return "P1";
    case Protocol::P2: return "P2";
    default: return "P3";
  }
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "P1") return Protocol::P1;
  if (name == "P2") return Protocol::P2;
  if (name == "P3") return Protocol::P3;
  throw ConfigError("unknown protocol: " + name);
}

void AUVector::set(AUId au, int intensity) {
  bool supported = false;
  for (AUId a : all_aus()) supported = supported || a == au;
  if (!supported) throw UnsupportedAU("unsupported AU id");
  if (intensity < 0 || intensity > 5)
    throw IntensityOutOfRange("intensity " + std::to_string(intensity) +
                              " outside 0..5 for " + au_name(au));
  if (intensity == 0)
    entries_.erase(au);
  else
    entries_[au] = intensity;
}

int AUVector::intensity(AUId au) const {
  auto it = entries_.find(au);
  return it == entries_.end() ? 0 : it->second;
}

std::string AUVector::to_string() const {
  std::string s = "{";
  bool first = true;
  for (const auto& [au, k] : entries_) {
    if (!first) s += ", ";
    first = false;
    s += au_name(au) + ":" + std::to_string(k);
  }
  return s + "}";
}

}  // namespace lang2face
