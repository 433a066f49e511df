#include "alwig/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "alwig/error.hpp"

namespace alwig {

std::vector<std::string> utf8_units(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xC2 && c <= 0xDF) len = 2;
    else if (c >= 0xE0 && c <= 0xEF) len = 3;
    else if (c >= 0xF0 && c <= 0xF4) len = 4;
    bool ok = len == 1 ? c < 0x80 : i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      ok = (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
    }
    if (!ok) len = 1;
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> tokens = {"[PAD]", "[BOS]", "[EOS]",   "[CLS]",
                                                  "[SEP]", "[UNK]", "[TITLE]", "[CAPTION]"};
  return tokens;
}

Vocabulary::Vocabulary() {
  for (const auto& t : reserved_tokens()) add(t);
}

void Vocabulary::add(const std::string& token) {
  if (!ids_.emplace(token, static_cast<TokenId>(tokens_.size())).second) {
    throw DataError("vocabulary: duplicate token '" + token + "'");
  }
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_texts(const std::vector<std::string>& texts) {
  std::set<std::string> chars;
  for (const auto& t : texts)
    for (auto& u : utf8_units(t)) chars.insert(std::move(u));
  Vocabulary v;
  for (const auto& c : chars) {
    if (!v.contains(c)) v.add(c);
  }
  return v;
}

Vocabulary Vocabulary::parse(std::string_view content) {
  Vocabulary v;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  const auto& reserved = reserved_tokens();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno <= reserved.size()) {
      if (line != reserved[lineno - 1]) {
        throw DataError("vocabulary: expected reserved token " + reserved[lineno - 1] + ", found '" + line + "'",
                        static_cast<long>(lineno));
      }
      continue;
    }
    if (line.empty()) throw DataError("vocabulary: empty token", static_cast<long>(lineno));
    try {
      v.add(line);
    } catch (const DataError& e) {
      throw DataError(e.what(), static_cast<long>(lineno));
    }
  }
  if (lineno < reserved.size()) throw DataError("vocabulary: missing reserved tokens");
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize();
}

TokenId Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? special::kUnk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0x0A;
    h *= 1099511628211ULL;
  }
  return h;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence ids;
  for (const auto& u : utf8_units(text)) ids.push_back(vocab.id_of(u));
  return ids;
}

std::string detokenize(const TokenSequence& ids, const Vocabulary& vocab) {
  std::string out;
  for (auto id : ids) {
    if (id >= 0 && id < special::kCount) continue;
    out += vocab.token_of(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon / segmentation

Lexicon::Lexicon(const std::vector<std::string>& words) {
  for (const auto& w : words) {
    const auto n = utf8_units(w).size();
    if (n < 2) throw ArgumentError("lexicon: entry '" + w + "' is shorter than two characters");
    words_.insert(w);
    max_len_ = std::max(max_len_, n);
  }
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  std::vector<std::string> words;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (utf8_units(line).size() < 2) {
      throw DataError("lexicon: entry '" + line + "' is shorter than two characters", lineno);
    }
    words.push_back(line);
  }
  return Lexicon(words);
}

void Lexicon::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& w : sorted_words()) out << w << '\n';
}

std::vector<std::string> Lexicon::sorted_words() const {
  std::vector<std::string> w(words_.begin(), words_.end());
  std::sort(w.begin(), w.end());
  return w;
}

Words segment(std::string_view text, const Lexicon& lex) {
  const auto units = utf8_units(text);
  Words out;
  std::size_t i = 0;
  while (i < units.size()) {
    std::size_t take = 1;
    const std::size_t longest = std::min(lex.max_word_length(), units.size() - i);
    for (std::size_t len = longest; len >= 2; --len) {
      std::string candidate;
      for (std::size_t k = 0; k < len; ++k) candidate += units[i + k];
      if (lex.contains(candidate)) {
        take = len;
        break;
      }
    }
    std::string word;
    for (std::size_t k = 0; k < take; ++k) word += units[i + k];
    out.push_back(std::move(word));
    i += take;
  }
  return out;
}

Words segment_words(std::string_view text, const Lexicon& lex) {
  Words out;
  for (auto& w : segment(text, lex)) {
    const bool blank = std::all_of(w.begin(), w.end(), [](char c) {
      return c == ' ' || c == '\t' || c == '\n' || c == '\r';
    });
    if (!blank) out.push_back(std::move(w));
  }
  return out;
}

NgramCounts ngrams(const Words& words, std::size_t n) {
  if (n == 0) throw ArgumentError("ngrams: n must be at least 1");
  NgramCounts counts;
  if (words.size() < n) return counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[Ngram(words.begin() + static_cast<std::ptrdiff_t>(i),
                   words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace alwig
