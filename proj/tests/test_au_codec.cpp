#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "lang2face/codec.hpp"
#include "lang2face/random.hpp"

using namespace lang2face;

namespace {
const std::vector<Gender> kGenders = {Gender::male, Gender::female,
                                      Gender::unspecified};
const std::vector<Protocol> kProtocols = {Protocol::P1, Protocol::P2,
                                          Protocol::P3};
}  // namespace

TEST_CASE("describe matches the published word choices") {
  AUVector nose{{AUId::AU9, 4}};
  std::string text = describe(nose, Gender::male, Protocol::P1).text;
  CHECK(text.find("significantly") != std::string::npos);
  CHECK(text.find("creased") != std::string::npos);
  CHECK(text.find("nose") != std::string::npos);

  AUVector mouth{{AUId::AU25, 5}, {AUId::AU26, 4}};
  std::string t2 = describe(mouth, Gender::male, Protocol::P1).text;
  CHECK(t2.find("highly parted lips") != std::string::npos);
  CHECK(t2.find("significantly dropped jaw") != std::string::npos);
}

TEST_CASE("neutral sentence is fixed") {
  CHECK(describe(AUVector{}, Gender::female, Protocol::P1).text ==
        "She keeps a neutral face .");
}

TEST_CASE("round-trip identity on simple cases") {
  AUVector nose{{AUId::AU9, 4}};
  auto [au, g] = parse(describe(nose, Gender::male, Protocol::P1));
  CHECK(au == nose);
  CHECK(g == Gender::male);

  AUVector multi{{AUId::AU1, 2}, {AUId::AU12, 5}};
  auto [au2, g2] = parse(describe(multi, Gender::female, Protocol::P2));
  CHECK(au2 == multi);
  CHECK(g2 == Gender::female);
}

TEST_CASE("round-trip exactness over the sampled AU space") {
  // all single-AU vectors x intensities x genders x protocols
  for (Gender g : kGenders)
    for (Protocol p : kProtocols) {
      auto [au0, g0] = parse(describe(AUVector{}, g, p));
      CHECK(au0.empty());
      CHECK(g0 == g);
      for (AUId id : all_aus())
        for (int k = 1; k <= 5; ++k) {
          AUVector v;
          v.set(id, k);
          auto [au, gg] = parse(describe(v, g, p));
          CHECK(au == v);
          CHECK(gg == g);
        }
    }
  // seeded random multi-AU vectors
  RandomStream rs(41, "codec_test");
  for (int i = 0; i < 1000; ++i) {
    int n = 1 + int(rs.uniform_index(8));
    std::vector<AUId> pool = all_aus();
    rs.shuffle(pool);
    AUVector v;
    for (int a = 0; a < n; ++a) v.set(pool[size_t(a)], 1 + int(rs.uniform_index(5)));
    Gender g = kGenders[rs.uniform_index(3)];
    Protocol p = kProtocols[rs.uniform_index(3)];
    auto [au, gg] = parse(describe(v, g, p));
    CHECK(au == v);
    CHECK(gg == g);
  }
}

TEST_CASE("gibberish is rejected with a ParseError") {
  CHECK_THROWS_AS(parse_text("gibberish tokens"), ParseError);
  CHECK_THROWS_AS(parse_text(""), ParseError);
  CHECK_THROWS_AS(parse_text("He wildly creased his nose nose ."), ParseError);
}

TEST_CASE("parse errors name the offending token") {
  try {
    parse_text("He significantly creased his elbow .");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("token") != std::string::npos);
  }
}

TEST_CASE("adverb ladder ranks are distinct and monotone by construction") {
  const auto& ladder = adverb_ladder();
  REQUIRE(ladder.size() == 5);
  CHECK(ladder[0] == "insignificantly");
  CHECK(ladder[3] == "significantly");
  CHECK(ladder[4] == "highly");
  std::set<std::string> uniq(ladder.begin(), ladder.end());
  CHECK(uniq.size() == 5);
  // distinct intensities of one AU never share an adverb
  AUVector v;
  std::set<std::string> texts;
  for (int k = 1; k <= 5; ++k) {
    v.set(AUId::AU12, k);
    texts.insert(describe(v, Gender::male, Protocol::P1).text);
  }
  CHECK(texts.size() == 5);
}

TEST_CASE("describe is deterministic") {
  AUVector v{{AUId::AU4, 3}, {AUId::AU25, 2}, {AUId::AU2, 1}};
  for (Protocol p : kProtocols) {
    std::string a = describe(v, Gender::female, p).text;
    std::string b = describe(v, Gender::female, p).text;
    CHECK(a == b);
  }
}

TEST_CASE("intensity 3 still emits its adverb") {
  AUVector v{{AUId::AU5, 3}};
  CHECK(describe(v, Gender::male, Protocol::P1).text.find("moderately") !=
        std::string::npos);
}

TEST_CASE("intensity-free variant omits adverbs and parses to intensity 5") {
  AUVector v{{AUId::AU9, 2}};
  DescribeOptions opts;
  opts.include_intensities = false;
  std::string text = describe(v, Gender::male, Protocol::P1, opts).text;
  for (const auto& adv : adverb_ladder())
    CHECK(text.find(adv) == std::string::npos);
  auto [au, g] = parse_text(text);
  CHECK(au.intensity(AUId::AU9) == 5);
  CHECK(g == Gender::male);
}

TEST_CASE("protocols produce distinct surfaces that parse identically") {
  RandomStream rs(55, "protocol_distinct");
  for (int i = 0; i < 50; ++i) {
    int n = 2 + int(rs.uniform_index(7));
    std::vector<AUId> pool = all_aus();
    rs.shuffle(pool);
    AUVector v;
    for (int a = 0; a < n; ++a) v.set(pool[size_t(a)], 1 + int(rs.uniform_index(5)));
    Gender g = kGenders[rs.uniform_index(3)];
    std::set<std::string> texts;
    for (Protocol p : kProtocols) {
      Description d = describe(v, g, p);
      texts.insert(d.text);
      auto [au, gg] = parse(d);
      CHECK(au == v);
      CHECK(gg == g);
    }
    CHECK(texts.size() == 3);
  }
}

TEST_CASE("unsupported AU and bad intensity are rejected") {
  AUVector v;
  CHECK_THROWS_AS(v.set(static_cast<AUId>(17), 3), UnsupportedAU);
  CHECK_THROWS_AS(v.set(AUId::AU9, 6), IntensityOutOfRange);
  CHECK_THROWS_AS(v.set(AUId::AU9, -1), IntensityOutOfRange);
  v.set(AUId::AU9, 2);
  v.set(AUId::AU9, 0);  // zero erases: canonical form
  CHECK(v.empty());
}

TEST_CASE("vocab: build, determinism, specials, coverage") {
  std::vector<std::string> corpus = grammar_corpus();
  Vocab v = Vocab::build(corpus);
  CHECK(v.size() >= 40);
  CHECK(v.size() <= 120);
  CHECK(v.id("<pad>") == Vocab::kPad);
  CHECK(v.id("<unk>") == Vocab::kUnk);
  CHECK(v.id("<eos>") == Vocab::kEos);

  // duplicated corpus gives the same vocab
  std::vector<std::string> doubled = corpus;
  doubled.insert(doubled.end(), corpus.begin(), corpus.end());
  Vocab v2 = Vocab::build(doubled);
  CHECK(v2.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(v.token(i) == v2.token(i));

  // single-sentence corpus
  Vocab v3 = Vocab::build({"He keeps a neutral face ."});
  CHECK(v3.size() == 3 + 6);

  CHECK_THROWS_AS(Vocab::build({}), EmptyCorpus);

  // no grammar sentence ever tokenizes to UNK
  for (const std::string& s : corpus) {
    auto ids = tokenize(s, v, 24);
    for (int id : ids) CHECK(id != Vocab::kUnk);
  }
}

TEST_CASE("tokenize: shape, padding, empty text") {
  Vocab v = Vocab::build(grammar_corpus());
  auto ids = tokenize("He slightly parted lips .", v, 24);
  REQUIRE(ids.size() == 24);
  CHECK(ids[0] == v.id("he"));
  CHECK(ids[1] == v.id("slightly"));
  CHECK(ids[2] == v.id("parted"));
  CHECK(ids[3] == v.id("lips"));
  CHECK(ids[4] == v.id("."));
  for (size_t i = 5; i < ids.size(); ++i) CHECK(ids[i] == Vocab::kPad);
  CHECK(token_count(ids) == 5);

  auto empty = tokenize("", v, 24);
  CHECK(empty[0] == Vocab::kEos);
  for (size_t i = 1; i < empty.size(); ++i) CHECK(empty[i] == Vocab::kPad);
}

TEST_CASE("vocab save/load round-trip") {
  Vocab v = Vocab::build(grammar_corpus());
  std::string path = "/tmp/l2f_vocab_test.txt";
  v.save(path);
  Vocab w = Vocab::load(path);
  REQUIRE(w.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(v.token(i) == w.token(i));
}

TEST_CASE("grammar asset matches the built-in tables") {
  std::string path = "/tmp/l2f_grammar_test.txt";
  save_grammar(path);
  CHECK(grammar_matches_asset(path));
}
