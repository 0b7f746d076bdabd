#include "lang2face/codec.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "lang2face/random.hpp"

namespace lang2face {

namespace {

struct SubjectForms {
  std::string pronoun;     // sentence-initial, P1/P2
  std::string possessive;  // fills {poss}
  std::string noun;        // P3 "The <noun> shows ..."
  std::string keeps;       // verb agreement in the neutral sentence
};

const SubjectForms& subject_forms(Gender g) {
  static const SubjectForms kMale{"He", "his", "man", "keeps"};
  static const SubjectForms kFemale{"She", "her", "woman", "keeps"};
  static const SubjectForms kUnspec{"They", "the", "person", "keep"};
  switch (g) {
    case Gender::male: return kMale;
    case Gender::female: return kFemale;
    default: return kUnspec;
  }
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += " ";
    out += parts[i];
  }
  return out;
}

std::string clause_text(AUId au, int intensity, Gender g, bool nominal,
                        bool include_intensity) {
  std::vector<std::string> words;
  if (include_intensity) words.push_back(adverb_ladder()[size_t(intensity - 1)]);
  for (const std::string& w : verb_phrase(au)) {
    if (w == "{poss}") {
      if (!nominal) words.push_back(subject_forms(g).possessive);
      // nominal form drops the possessive: "creased nose"
    } else {
      words.push_back(w);
    }
  }
  return join(words);
}

std::string lower(std::string s) {
  for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const std::vector<std::string>& adverb_ladder() {
  static const std::vector<std::string> kLadder = {
      "insignificantly", "slightly", "moderately", "significantly", "highly"};
  return kLadder;
}

const std::vector<std::string>& verb_phrase(AUId au) {
  static const std::map<AUId, std::vector<std::string>> kPhrases = {
      {AUId::AU1, {"raised", "inner", "brows"}},
      {AUId::AU2, {"raised", "outer", "brows"}},
      {AUId::AU4, {"lowered", "brows"}},
      {AUId::AU5, {"widened", "eyes"}},
      {AUId::AU9, {"creased", "{poss}", "nose"}},
      {AUId::AU12, {"pulled", "lip", "corners"}},
      {AUId::AU25, {"parted", "lips"}},
      {AUId::AU26, {"dropped", "jaw"}},
  };
  auto it = kPhrases.find(au);
  if (it == kPhrases.end()) throw UnsupportedAU("no phrase for AU");
  return it->second;
}

Description describe(const AUVector& au, Gender g, Protocol p,
                     const DescribeOptions& opts) {
  for (const auto& [id, k] : au.entries())
    if (k < 1 || k > 5)
      throw IntensityOutOfRange("intensity outside 1..5 in describe");

  const SubjectForms& subj = subject_forms(g);

  if (au.empty()) {
    std::string text;
    if (p == Protocol::P3)
      text = "The " + subj.noun + " shows a neutral face .";
    else
      text = subj.pronoun + " " + subj.keeps + " a neutral face .";
    return Description{text, {}, 0};
  }

  bool nominal = (p == Protocol::P3);
  std::vector<std::string> clauses;
  for (const auto& [id, k] : au.entries())
    clauses.push_back(clause_text(id, k, g, nominal, opts.include_intensities));

  if (p == Protocol::P2 && clauses.size() > 1) {
    // deterministic shuffle seeded by the content itself
    uint64_t seed = mix_seed(hash_string(au.to_string() + gender_name(g)),
                             hash_string("P2"));
    RandomStream rs(seed);
    rs.shuffle(clauses);
  }

  std::string body;
  for (size_t i = 0; i < clauses.size(); ++i) {
    if (i > 0) {
      if (p == Protocol::P2)
        body += (i % 2 == 1) ? " while " : " and ";
      else
        body += (i + 1 == clauses.size()) ? " and " : " , ";
    }
    body += clauses[i];
  }

  std::string text;
  if (p == Protocol::P3)
    text = "The " + subj.noun + " shows " + body + " .";
  else
    text = subj.pronoun + " " + body + " .";
  return Description{text, {}, 0};
}

namespace {

struct TokenCursor {
  std::vector<std::string> toks;
  size_t pos = 0;

  bool done() const { return pos >= toks.size(); }
  const std::string& peek() const {
    static const std::string kEmpty;
    return done() ? kEmpty : toks[pos];
  }
  std::string take() { return done() ? std::string() : toks[pos++]; }
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "cannot parse description: " << what << " at token " << pos;
    if (!done()) os << " ('" << toks[pos] << "')";
    throw ParseError(os.str());
  }
};

int adverb_rank(const std::string& tok) {
  const auto& ladder = adverb_ladder();
  for (size_t i = 0; i < ladder.size(); ++i)
    if (ladder[i] == tok) return int(i) + 1;
  return 0;
}

// Matches one AU clause (adverb optional); returns (au, intensity).
std::pair<AUId, int> parse_clause(TokenCursor& c, Gender g, bool nominal) {
  int intensity = adverb_rank(c.peek());
  if (intensity > 0)
    c.take();
  else
    intensity = 5;  // adverb-free clause: peak-intensity convention

  for (AUId au : all_aus()) {
    const auto& phrase = verb_phrase(au);
    size_t save = c.pos;
    bool ok = true;
    for (const std::string& w : phrase) {
      if (w == "{poss}") {
        if (nominal) continue;
        if (c.peek() != subject_forms(g).possessive) {
          ok = false;
          break;
        }
        c.take();
      } else if (c.peek() == w) {
        c.take();
      } else {
        ok = false;
        break;
      }
    }
    if (ok) return {au, intensity};
    c.pos = save;
  }
  c.fail("expected an AU clause");
}

}  // namespace

std::pair<AUVector, Gender> parse_text(const std::string& text) {
  TokenCursor c;
  for (std::string& t : split_tokens(text)) c.toks.push_back(lower(t));
  if (c.toks.empty()) c.fail("empty description");

  Gender g;
  bool nominal = false;
  if (c.peek() == "he") {
    g = Gender::male;
    c.take();
  } else if (c.peek() == "she") {
    g = Gender::female;
    c.take();
  } else if (c.peek() == "they") {
    g = Gender::unspecified;
    c.take();
  } else if (c.peek() == "the") {
    c.take();
    std::string noun = c.take();
    if (noun == "man")
      g = Gender::male;
    else if (noun == "woman")
      g = Gender::female;
    else if (noun == "person")
      g = Gender::unspecified;
    else
      c.fail("expected man/woman/person");
    if (c.take() != "shows") c.fail("expected 'shows'");
    nominal = true;
  } else {
    c.fail("expected a subject");
  }

  AUVector au;
  // neutral templates
  if (!nominal && (c.peek() == "keeps" || c.peek() == "keep")) {
    c.take();
    if (c.take() != "a" || c.take() != "neutral" || c.take() != "face" ||
        c.take() != ".")
      c.fail("malformed neutral sentence");
    if (!c.done()) c.fail("trailing tokens");
    return {au, g};
  }
  if (nominal && c.peek() == "a") {
    c.take();
    if (c.take() != "neutral" || c.take() != "face" || c.take() != ".")
      c.fail("malformed neutral sentence");
    if (!c.done()) c.fail("trailing tokens");
    return {au, g};
  }

  while (true) {
    auto [id, k] = parse_clause(c, g, nominal);
    if (au.active(id)) c.fail("duplicate AU clause");
    au.set(id, k);
    std::string sep = c.take();
    if (sep == ".") {
      if (!c.done()) c.fail("trailing tokens");
      break;
    }
    if (sep != "," && sep != "and" && sep != "while")
      c.fail("expected a connector or '.'");
  }
  return {au, g};
}

std::pair<AUVector, Gender> parse(const Description& d) {
  return parse_text(d.text);
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (std::isalnum(u) || ch == '\'') {
      cur += ch;
    } else {  // punctuation becomes its own token
      flush();
      out.push_back(std::string(1, ch));
    }
  }
  flush();
  return out;
}

Vocab::Vocab() {
  id_to_token_ = {"<pad>", "<unk>", "<eos>"};
  for (size_t i = 0; i < id_to_token_.size(); ++i)
    token_to_id_[id_to_token_[i]] = int(i);
}

int Vocab::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw ConfigError("token id out of range");
  return id_to_token_[size_t(id)];
}

Vocab Vocab::build(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("build_vocab: empty corpus");
  Vocab v;
  for (const std::string& sentence : corpus)
    for (std::string& tok : split_tokens(sentence)) {
      std::string t = lower(tok);
      if (!v.token_to_id_.count(t)) {
        v.token_to_id_[t] = v.size();
        v.id_to_token_.push_back(t);
      }
    }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write vocab: " + path);
  for (const std::string& t : id_to_token_) out << t << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot read vocab: " + path);
  Vocab v;
  v.id_to_token_.clear();
  v.token_to_id_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.token_to_id_[line] = v.size();
    v.id_to_token_.push_back(line);
  }
  if (v.size() < 3 || v.id_to_token_[0] != "<pad>")
    throw IOError("vocab file missing specials: " + path);
  return v;
}

std::vector<int> tokenize(const std::string& text, const Vocab& v, int n_max) {
  std::vector<int> ids;
  for (std::string& tok : split_tokens(text)) ids.push_back(v.id(lower(tok)));
  if (ids.empty()) ids.push_back(Vocab::kEos);
  if (int(ids.size()) > n_max) ids.resize(size_t(n_max));
  while (int(ids.size()) < n_max) ids.push_back(Vocab::kPad);
  return ids;
}

int token_count(const std::vector<int>& ids) {
  int n = 0;
  for (int id : ids) {
    if (id == Vocab::kPad) break;
    ++n;
  }
  return n;
}

std::vector<std::string> grammar_corpus() {
  std::vector<std::string> corpus;
  const std::vector<Gender> genders = {Gender::male, Gender::female,
                                       Gender::unspecified};
  const std::vector<Protocol> protocols = {Protocol::P1, Protocol::P2,
                                           Protocol::P3};
  for (Protocol p : protocols)
    for (Gender g : genders) {
      corpus.push_back(describe(AUVector{}, g, p).text);
      for (AUId au : all_aus())
        for (int k = 1; k <= 5; ++k) {
          AUVector v;
          v.set(au, k);
          corpus.push_back(describe(v, g, p).text);
        }
      // a multi-AU sentence per (protocol, gender) to cover connectors
      AUVector multi{{AUId::AU4, 2}, {AUId::AU9, 4}, {AUId::AU25, 5}};
      corpus.push_back(describe(multi, g, p).text);
    }
  return corpus;
}

void save_grammar(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write grammar: " + path);
  out << "# au grammar v1\n";
  out << "# adverbs:";
  for (const auto& a : adverb_ladder()) out << " " << a;
  out << "\n";
  for (AUId au : all_aus()) {
    out << au_name(au) << "|";
    const auto& phrase = verb_phrase(au);
    for (size_t i = 0; i < phrase.size(); ++i)
      out << (i ? " " : "") << phrase[i];
    out << "\n";
  }
}

bool grammar_matches_asset(const std::string& path) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream gen;
  gen << "# au grammar v1\n";
  gen << "# adverbs:";
  for (const auto& a : adverb_ladder()) gen << " " << a;
  gen << "\n";
  for (AUId au : all_aus()) {
    gen << au_name(au) << "|";
    const auto& phrase = verb_phrase(au);
    for (size_t i = 0; i < phrase.size(); ++i)
      gen << (i ? " " : "") << phrase[i];
    gen << "\n";
  }
  std::stringstream have;
  have << in.rdbuf();
  return have.str() == gen.str();
}

}  // namespace lang2face
