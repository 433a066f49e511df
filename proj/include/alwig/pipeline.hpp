#pragma once

// Training, evaluation, filtering and statistics workflows behind the CLI.
// The in-memory entry points let tests run them without touching disk.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "alwig/checkpoint.hpp"
#include "alwig/config.hpp"
#include "alwig/dataset.hpp"
#include "alwig/metrics.hpp"
#include "alwig/model.hpp"
#include "alwig/scorer.hpp"
#include "alwig/text.hpp"

namespace alwig {

// One training/evaluation item after tokenization.
struct Example {
  std::string video_id;
  std::vector<TokenSequence> tags;
  VideoClipFeatures video;
  std::vector<TokenSequence> texts;  // title first, then captions
  std::vector<std::string> raw;      // parallel to texts
};

std::vector<Example> prepare_examples(const Dataset& dataset, const Vocabulary& vocab, bool with_captions);
std::vector<Example> prepare_examples(const std::vector<DatasetRecord>& records,
                                      const std::vector<VideoClipFeatures>& features, const Vocabulary& vocab,
                                      bool with_captions);

// [BOS, TITLE|CAPTION, text..., EOS], text truncated to fit max_len.
TokenSequence generation_target(const TokenSequence& text, bool is_title, std::size_t max_len);

struct StageOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  LrSchedule schedule{10, 1e-5, 1e-6, 30};  // total_epochs is overridden by `epochs`
  AdamWOptions adamw{};
  std::uint64_t seed = 0;
};

struct LossRecord {
  std::string stage;
  std::size_t epoch = 0;
  double align = 0.0;
  double gen = 0.0;
  double total = 0.0;
};

// One training stage minimizing align + gen. With `titles_only`, every item
// trains on its title; otherwise epochs rotate through title and captions.
// `after_epoch` (optional) runs after each epoch.
std::vector<LossRecord> train_stage(AlwigModel& model, const std::vector<Example>& examples,
                                    const StageOptions& options, const std::string& stage, bool titles_only,
                                    const std::function<void(std::size_t epoch)>& after_epoch = {});

// Rows: every text of every example (title, then captions); columns: videos.
SimilarityMatrix similarity_matrix(const AlwigModel& model, const std::vector<Example>& examples);

struct DecodedItem {
  std::string video_id;
  TokenSequence title_tokens;
  double title_score = 0.0;
  TokenSequence caption_tokens;
  double caption_score = 0.0;
};

struct EvalOptions {
  std::size_t beam = 3;
  std::size_t max_decode_len = 30;
};

struct EvalOutcome {
  EvalReport report;
  std::vector<DecodedItem> decoded;
};

std::vector<TokenId> special_tokens_banned_in_output();

EvalOutcome evaluate_model(const AlwigModel& model, const std::vector<Example>& examples, const Vocabulary& vocab,
                           const Lexicon& lexicon, const EvalOptions& options, const ProtocolConstants& protocol);

// ---------------------------------------------------------------------------
// Config-driven commands

struct TrainConfig {
  std::string task = "alwig";  // alwig | scorer
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  std::filesystem::path vocab;
  std::filesystem::path lexicon;
  std::filesystem::path pretrain_data;  // optional
  std::filesystem::path train_data;
  std::filesystem::path validation_data;  // optional; selects the epoch with best T2V R@1
  ModelConfig model;
  ScorerConfig scorer;
  std::size_t pretrain_epochs = 30;
  std::size_t finetune_epochs = 30;
  std::size_t batch_size = 8;
  AdamWOptions adamw{};
  LrSchedule schedule{10, 1e-5, 1e-6, 30};
  std::size_t beam = 3;
  std::size_t max_decode_len = 30;
  double filter_threshold = kDefaultFilterThreshold;

  ProtocolConstants protocol() const;
};

// Relative paths resolve against base_dir. Unknown keys are a UsageError.
TrainConfig parse_train_config(const KeyValueConfig& kv, const std::filesystem::path& base_dir);
const std::set<std::string>& train_config_keys();

struct TrainOutcome {
  Checkpoint checkpoint;
  std::vector<LossRecord> log;
};

// Pre-train (titles) then fine-tune (titles + captions); no_pretrain skips
// the first stage. The task=scorer path trains the two-stream scorer on the
// train split instead.
TrainOutcome run_training(const TrainConfig& config);

AlwigModel model_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab);
TwoStreamModel scorer_from_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab);

std::string loss_log_to_tsv(const std::vector<LossRecord>& log);

struct FilterSummary {
  double threshold = kDefaultFilterThreshold;
  std::size_t total = 0;
  std::size_t kept = 0;
  std::array<std::size_t, 20> histogram{};  // 20 bins over [-1, 1]

  double kept_fraction() const { return total ? static_cast<double>(kept) / static_cast<double>(total) : 0.0; }
};

FilterSummary summarize_filter(const FilterResult& result, double threshold);
std::string filter_summary_to_text(const FilterSummary& summary);
std::string scored_pair_to_json(const ScoredPair& pair);

// Corpus statistics. Lengths are in segmented words.
struct CorpusStats {
  std::size_t items = 0;
  std::map<std::size_t, std::size_t> title_length_histogram;
  std::map<std::size_t, std::size_t> caption_length_histogram;  // one entry per caption
  std::map<std::size_t, std::size_t> tag_count_histogram;
  double mean_title_length = 0.0;
  double mean_caption_length = 0.0;
  double mean_tag_count = 0.0;
  std::set<std::string> unique_words;
};

struct StatsReport {
  CorpusStats first;
  std::optional<CorpusStats> second;
  std::size_t overlap = 0;             // unique words present in both
  double coverage_first_in_second = 0.0;  // % of first's unique words found in second
  double coverage_second_in_first = 0.0;
};

CorpusStats corpus_stats(const std::vector<DatasetRecord>& records, const Lexicon& lexicon);
StatsReport compare_corpora(const CorpusStats& first, const std::optional<CorpusStats>& second);
std::string stats_to_text(const StatsReport& report);

}  // namespace alwig
