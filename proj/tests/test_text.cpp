#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "alwig/error.hpp"
#include "alwig/text.hpp"
#include "oracles.hpp"

using namespace alwig;

namespace {

std::string join(const Words& w) { return std::accumulate(w.begin(), w.end(), std::string()); }

// Random text mixing lexicon words, stray CJK characters, ASCII and spaces.
std::string random_text(std::mt19937_64& rng, const std::vector<std::string>& pool) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> len(0, 12);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += pool[pick(rng)];
  return s;
}

}  // namespace

TEST_CASE("utf8 units") {
  CHECK(utf8_units("").empty());
  CHECK(utf8_units("ab") == std::vector<std::string>{"a", "b"});
  CHECK(utf8_units("猫a狗") == std::vector<std::string>{"猫", "a", "狗"});
  CHECK(utf8_units("\xF0\x9F\x98\x80") == std::vector<std::string>{"\xF0\x9F\x98\x80"});
  const std::string bad = "a\xFF\xE7\x8C";
  const auto units = utf8_units(bad);
  CHECK(join(units) == bad);
  CHECK(units.size() == 4);
}

TEST_CASE("vocabulary reserved tokens and round trip") {
  const Vocabulary base;
  CHECK(base.size() == static_cast<std::size_t>(special::kCount));
  CHECK(base.token_of(special::kBos) == Vocabulary::reserved_tokens()[1]);

  const auto v = Vocabulary::from_texts({"猫跳", "跳舞a"});
  CHECK(v.size() == static_cast<std::size_t>(special::kCount) + 4);
  CHECK(v.id_of("猫") >= special::kCount);
  CHECK(v.id_of("鱼") == special::kUnk);

  const auto again = Vocabulary::parse(v.serialize());
  CHECK(again.serialize() == v.serialize());
  CHECK(again.fingerprint() == v.fingerprint());
  CHECK(Vocabulary::from_texts({"x"}).fingerprint() != v.fingerprint());

  const auto dir = std::filesystem::temp_directory_path() / "alwig_vocab_test";
  std::filesystem::create_directories(dir);
  v.save(dir / "v.txt");
  CHECK(Vocabulary::load(dir / "v.txt").serialize() == v.serialize());
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(Vocabulary::parse("a\nb\n"), DataError);
  auto dup = v.serialize() + "猫\n";
  CHECK_THROWS_AS(Vocabulary::parse(dup), DataError);
  CHECK_THROWS_AS(v.token_of(static_cast<TokenId>(v.size())), IndexError);
}

TEST_CASE("tokenize examples") {
  const auto v = Vocabulary::from_texts({"一只猫在跳"});
  CHECK(tokenize("", v).empty());
  const auto ids = tokenize("一只猫在跳", v);
  CHECK(ids.size() == 5);
  CHECK(detokenize(ids, v) == "一只猫在跳");
  const auto with_unk = tokenize("一只狗在跳", v);
  CHECK(with_unk.size() == 5);
  CHECK(std::count(with_unk.begin(), with_unk.end(), special::kUnk) == 1);
  CHECK(with_unk[2] == special::kUnk);
  TokenSequence framed{special::kBos, special::kTitle};
  framed.insert(framed.end(), ids.begin(), ids.end());
  framed.push_back(special::kEos);
  framed.push_back(special::kPad);
  CHECK(detokenize(framed, v) == "一只猫在跳");
}

TEST_CASE("tokenize round trips in-vocabulary text") {
  std::mt19937_64 rng(1);
  const std::vector<std::string> pool{"猫", "狗", "跳", "舞", "a", "b", " ", "的"};
  const auto v = Vocabulary::from_texts(pool);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_text(rng, pool);
    const auto ids = tokenize(s, v);
    CHECK(ids.size() == utf8_units(s).size());
    CHECK(detokenize(ids, v) == s);
  }
}

TEST_CASE("segment examples") {
  const Lexicon lex({"AB", "ABC"});
  CHECK(segment("ABCD", lex) == Words{"ABC", "D"});
  CHECK(segment("", lex).empty());
  CHECK(segment("猫狗", Lexicon{}) == Words{"猫", "狗"});
  const Lexicon zh({"小猫", "跳舞", "小猫咪"});
  CHECK(segment("小猫咪在跳舞", zh) == Words{"小猫咪", "在", "跳舞"});
  CHECK(segment_words("小猫 跳舞", zh) == Words{"小猫", "跳舞"});
  CHECK(lex.max_word_length() == 3);
}

TEST_CASE("segmentation is lossless") {
  std::mt19937_64 rng(2);
  const std::vector<std::string> pool{"小", "猫", "咪", "跳", "舞", " ", "x", "\xFF"};
  const Lexicon lex({"小猫", "小猫咪", "跳舞", "猫咪跳"});
  for (int i = 0; i < 500; ++i) {
    const auto s = random_text(rng, pool);
    const auto w = segment(s, lex);
    CHECK(join(w) == s);
    for (const auto& piece : w) CHECK_FALSE(piece.empty());
  }
}

TEST_CASE("lexicon rejects short entries and round trips") {
  CHECK_THROWS_AS(Lexicon({"猫"}), ArgumentError);
  CHECK_THROWS_AS(Lexicon({""}), ArgumentError);
  const Lexicon lex({"跳舞", "小猫"});
  const auto dir = std::filesystem::temp_directory_path() / "alwig_lex_test";
  std::filesystem::create_directories(dir);
  lex.save(dir / "l.txt");
  CHECK(Lexicon::load(dir / "l.txt").sorted_words() == lex.sorted_words());
  std::filesystem::remove_all(dir);
}

TEST_CASE("ngram examples") {
  const Words w{"a", "b", "a", "b"};
  const auto bi = ngrams(w, 2);
  CHECK(bi.size() == 2);
  CHECK(bi.at({"a", "b"}) == 2);
  CHECK(bi.at({"b", "a"}) == 1);
  CHECK(ngrams(w, 5).empty());
  CHECK(ngrams({}, 1).empty());
  CHECK_THROWS_AS(ngrams(w, 0), ArgumentError);
}

TEST_CASE("ngram counts sum to the number of windows") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> tok(0, 3), len(0, 10);
  for (int i = 0; i < 200; ++i) {
    Words w(len(rng));
    for (auto& x : w) x = std::string(1, static_cast<char>('a' + tok(rng)));
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto counts = ngrams(w, n);
      std::size_t total = 0;
      for (const auto& [g, c] : counts) {
        CHECK(g.size() == n);
        CHECK(c == oracle::count_of(oracle::windows(w, n), g));
        total += c;
      }
      CHECK(total == (w.size() >= n ? w.size() - n + 1 : 0));
    }
  }
}
