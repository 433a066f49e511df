#include "alwig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "alwig/error.hpp"

namespace alwig {

void SynthConfig::validate() const {
  if (tag_universe == 0 || tags_per_item == 0) throw ArgumentError("synth: tag universe and tags per item must be positive");
  if (tags_per_item > tag_universe) throw ArgumentError("synth: tags_per_item exceeds tag_universe");
  if (frames == 0 || feature_dim == 0) throw ArgumentError("synth: frames and feature_dim must be positive");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ArgumentError("synth: noise must lie in [0, 1]");
  if (items == 0) throw ArgumentError("synth: items must be positive");
}

const SynthSplit& SynthCorpus::split(const std::string& name) const {
  for (const auto& s : splits) {
    if (s.name == name) return s;
  }
  throw ArgumentError("synthetic corpus has no split '" + name + "'");
}

namespace {

std::string encode_utf8(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

std::vector<std::vector<double>> make_directions(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> dirs;
  const bool orthogonal = count <= dim;
  while (dirs.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    if (orthogonal) {
      for (const auto& u : dirs) {
        const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
      }
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

// Distinct k-subsets of {0..u-1} in random order; repeats only once exhausted.
class ComboSampler {
 public:
  ComboSampler(std::size_t universe, std::size_t k, std::mt19937_64& rng) : universe_(universe), k_(k), rng_(rng) {}

  std::vector<std::size_t> next() {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::vector<std::size_t> all(universe_);
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng_);
      all.resize(k_);
      std::sort(all.begin(), all.end());
      if (used_.insert(all).second) return all;
    }
    used_.clear();
    return next();
  }

 private:
  std::size_t universe_;
  std::size_t k_;
  std::mt19937_64& rng_;
  std::set<std::vector<std::size_t>> used_;
};

}  // namespace

SynthCorpus synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthCorpus corpus;
  corpus.config = cfg;

  // Character pool from the CJK block; tag words and fillers draw without replacement.
  std::vector<char32_t> pool(3000);
  std::iota(pool.begin(), pool.end(), char32_t{0x4E00});
  std::shuffle(pool.begin(), pool.end(), rng);
  std::size_t next_char = 0;
  auto fresh_char = [&]() {
    if (next_char >= pool.size()) throw ArgumentError("synth: character pool exhausted");
    return encode_utf8(pool[next_char++]);
  };

  for (std::size_t t = 0; t < cfg.tag_universe; ++t) corpus.tag_words.push_back(fresh_char() + fresh_char());
  std::vector<std::string> fillers;
  for (std::size_t f = 0; f < cfg.filler_words; ++f) {
    const std::size_t len = 1 + f % 3;
    std::string w;
    for (std::size_t c = 0; c < len; ++c) w += fresh_char();
    fillers.push_back(std::move(w));
  }
  const std::string caption_lead = fresh_char() + fresh_char() + fresh_char();
  const std::string joiner = fresh_char();

  corpus.directions = make_directions(cfg.tag_universe, cfg.feature_dim, rng);

  auto make_split = [&](const std::string& name, std::size_t count, bool with_captions) {
    SynthSplit split;
    split.name = name;
    ComboSampler combos(cfg.tag_universe, cfg.tags_per_item, rng);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim)));
    const double signal_scale = 1.0 / std::sqrt(static_cast<double>(cfg.tags_per_item));
    for (std::size_t i = 0; i < count; ++i) {
      auto tags = combos.next();
      std::shuffle(tags.begin(), tags.end(), rng);

      VideoClipFeatures v;
      v.frames = cfg.frames;
      v.dim = cfg.feature_dim;
      v.values.assign(cfg.frames * cfg.feature_dim, 0.0);
      for (std::size_t f = 0; f < cfg.frames; ++f) {
        double* frame = v.values.data() + f * cfg.feature_dim;
        for (auto t : tags) {
          const double w = uniform(rng, 0.5, 1.5) * signal_scale;
          for (std::size_t d = 0; d < cfg.feature_dim; ++d) frame[d] += w * corpus.directions[t][d];
        }
        for (std::size_t d = 0; d < cfg.feature_dim; ++d) frame[d] += cfg.noise * normal(rng);
      }
      // Stored precision is float32.
      for (auto& x : v.values) x = static_cast<double>(static_cast<float>(x));

      DatasetRecord r;
      char id[64];
      std::snprintf(id, sizeof id, "%s_%05zu", name.c_str(), i);
      r.video_id = id;
      r.feature_file = "features/" + r.video_id + ".crtf";
      r.category = "c" + std::to_string(tags.front() % 4);
      for (auto t : tags) r.tags.push_back(corpus.tag_words[t]);

      std::string title;
      if (pick(rng, 2) == 0) title += fillers[pick(rng, fillers.size())];
      for (std::size_t k = 0; k < tags.size(); ++k) {
        title += corpus.tag_words[tags[k]];
        if (k + 1 < tags.size() && pick(rng, 3) == 0) title += fillers[pick(rng, fillers.size())];
      }
      title += fillers[pick(rng, fillers.size())];
      r.title = title;

      if (with_captions) {
        for (std::size_t c = 0; c < cfg.captions_per_item; ++c) {
          auto order = tags;
          std::shuffle(order.begin(), order.end(), rng);
          std::string cap = caption_lead;
          for (std::size_t k = 0; k < order.size(); ++k) {
            if (k) cap += joiner;
            cap += corpus.tag_words[order[k]];
          }
          cap += fillers[pick(rng, fillers.size())];
          r.captions.push_back(std::move(cap));
        }
      }
      split.records.push_back(std::move(r));
      split.features.push_back(std::move(v));
    }
    return split;
  };

  corpus.splits.push_back(make_split("train", cfg.items, true));
  if (cfg.heldout_items > 0) corpus.splits.push_back(make_split("test", cfg.heldout_items, true));
  if (cfg.pretrain_items > 0) corpus.splits.push_back(make_split("pretrain", cfg.pretrain_items, false));

  std::vector<std::string> texts = corpus.tag_words;
  texts.insert(texts.end(), fillers.begin(), fillers.end());
  texts.push_back(caption_lead);
  texts.push_back(joiner);
  corpus.vocab = Vocabulary::from_texts(texts);

  std::vector<std::string> lexicon_words = corpus.tag_words;
  for (const auto& f : fillers) {
    if (utf8_units(f).size() >= 2) lexicon_words.push_back(f);
  }
  lexicon_words.push_back(caption_lead);
  corpus.lexicon = Lexicon(lexicon_words);
  return corpus;
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  for (const auto& split : corpus.splits) {
    for (std::size_t i = 0; i < split.records.size(); ++i) {
      save_features(dir / split.records[i].feature_file, split.features[i]);
    }
    save_dataset(dir / (split.name + ".jsonl"), split.records);
  }
  corpus.vocab.save(dir / "vocab.txt");
  corpus.lexicon.save(dir / "lexicon.txt");
}

}  // namespace alwig
