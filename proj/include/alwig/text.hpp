#pragma once

// Character-level tokenization for the model and lexicon-driven word
// segmentation for the metrics.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace alwig {

using TokenId = std::int64_t;
using TokenSequence = std::vector<TokenId>;
using Words = std::vector<std::string>;

namespace special {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kCls = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kUnk = 5;
// Task markers placed after BOS so one decoder serves titling and captioning.
inline constexpr TokenId kTitle = 6;
inline constexpr TokenId kCaption = 7;
inline constexpr TokenId kCount = 8;
}  // namespace special

// Splits UTF-8 into Unicode scalars, each returned as its byte substring.
// Invalid bytes come back as one-byte units, so the units always concatenate
// to the input.
std::vector<std::string> utf8_units(std::string_view text);

class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();
  // Reserved tokens followed by every distinct character of `texts` in code order.
  static Vocabulary from_texts(const std::vector<std::string>& texts);
  // One token per line; line number is the id; reserved tokens must lead.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static Vocabulary parse(std::string_view content);
  std::string serialize() const;

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId id_of(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::string& token_of(TokenId id) const;
  // Stable 64-bit digest of the token list, stored in checkpoints.
  std::uint64_t fingerprint() const;

  static const std::vector<std::string>& reserved_tokens();

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

// Per-character ids; unknown characters become UNK. No BOS/EOS added.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);
// Inverse of tokenize for ordinary tokens; reserved tokens are dropped.
std::string detokenize(const TokenSequence& ids, const Vocabulary& vocab);

class Lexicon {
 public:
  Lexicon() = default;
  // Entries shorter than two characters are rejected with ArgumentError.
  explicit Lexicon(const std::vector<std::string>& words);
  static Lexicon load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool contains(const std::string& word) const { return words_.count(word) != 0; }
  std::size_t max_word_length() const noexcept { return max_len_; }
  std::size_t size() const noexcept { return words_.size(); }
  std::vector<std::string> sorted_words() const;

 private:
  std::unordered_set<std::string> words_;
  std::size_t max_len_ = 0;  // in characters
};

// Greedy forward longest match. Output concatenates to the input exactly.
Words segment(std::string_view text, const Lexicon& lex);
// segment() with whitespace-only pieces removed; what the metrics consume.
Words segment_words(std::string_view text, const Lexicon& lex);

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, std::size_t>;

NgramCounts ngrams(const Words& words, std::size_t n);

}  // namespace alwig
