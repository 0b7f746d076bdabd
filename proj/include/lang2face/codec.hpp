#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lang2face/au.hpp"

namespace lang2face {

// Natural-language description of an AU vector. `tokens`/`length` stay
// empty until tokenize() is applied with a vocabulary.
struct Description {
  std::string text;
  std::vector<int> tokens;
  int length = 0;
};

struct DescribeOptions {
  // When false, adverbs are omitted (mirrors records that list AUs
  // without intensities); parse maps such clauses to intensity 5.
  bool include_intensities = true;
};

// intensity 1..5 -> adverb
const std::vector<std::string>& adverb_ladder();
// verb phrase tokens for an AU; "{poss}" marks the possessive slot
const std::vector<std::string>& verb_phrase(AUId au);

// Deterministic sentence generation under one of the three protocols.
Description describe(const AUVector& au, Gender g, Protocol p,
                     const DescribeOptions& opts = {});

// Exact inverse of describe for any protocol; clause order in the
// result is canonical regardless of surface order.
std::pair<AUVector, Gender> parse(const Description& d);
std::pair<AUVector, Gender> parse_text(const std::string& text);

// Vocabulary with fixed special ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;

  int id(const std::string& token) const;  // kUnk when unknown
  const std::string& token(int id) const;
  int size() const { return int(id_to_token_.size()); }
  bool contains(const std::string& token) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // deterministic for a fixed corpus order; duplicates are ignored
  static Vocab build(const std::vector<std::string>& corpus);

 private:
  Vocab();
  std::vector<std::string> id_to_token_;
  std::map<std::string, int> token_to_id_;
};

// Lowercases, separates punctuation, pads/truncates to n_max with PAD.
// Empty text yields [EOS] + PADs.
std::vector<int> tokenize(const std::string& text, const Vocab& v, int n_max);
std::vector<std::string> split_tokens(const std::string& text);
int token_count(const std::vector<int>& ids);  // non-PAD prefix length

// Every sentence the three protocols can produce over the supported AU
// space, single- and multi-AU, all genders. Used to build the vocab.
std::vector<std::string> grammar_corpus();

// Versioned plain-text grammar table (one line per AU).
void save_grammar(const std::string& path);
bool grammar_matches_asset(const std::string& path);

}  // namespace lang2face
