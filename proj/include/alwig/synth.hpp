#pragma once

// Synthetic stand-in for a tagged video-text corpus. Every tag owns a latent
// direction in feature space and a two-character word. An item's frames are
// noisy random-weight mixtures of its tags' directions and its title and
// captions contain its tags' words, so alignment is learnable by construction.
// With tag_universe <= feature_dim the directions are orthonormal.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alwig/dataset.hpp"
#include "alwig/text.hpp"

namespace alwig {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t items = 200;          // training split size
  std::size_t heldout_items = 0;    // "test" split, disjoint items
  std::size_t pretrain_items = 0;   // "pretrain" split, titles only
  std::size_t tag_universe = 12;
  std::size_t tags_per_item = 3;
  std::size_t frames = 8;
  std::size_t feature_dim = 16;
  std::size_t captions_per_item = 2;
  std::size_t filler_words = 12;
  double noise = 0.2;  // per-frame noise norm relative to the unit signal

  void validate() const;
};

struct SynthSplit {
  std::string name;
  std::vector<DatasetRecord> records;
  std::vector<VideoClipFeatures> features;  // parallel to records
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<std::string> tag_words;
  std::vector<std::vector<double>> directions;  // per tag, unit length
  std::vector<SynthSplit> splits;               // train, then test / pretrain when requested
  Vocabulary vocab;
  Lexicon lexicon;

  const SynthSplit& split(const std::string& name) const;
};

SynthCorpus synth_generate(const SynthConfig& config);

// Writes <split>.jsonl per split, features/<video_id>.crtf, vocab.txt and lexicon.txt.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

}  // namespace alwig
