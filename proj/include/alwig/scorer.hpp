#pragma once

// Two-stream video-title matching scorer and the threshold filter used to
// curate weakly labeled pre-training data.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "alwig/model.hpp"
#include "alwig/nn.hpp"
#include "alwig/optim.hpp"

namespace alwig {

inline constexpr std::size_t kScorerFrames = 8;
inline constexpr double kDefaultFilterThreshold = 0.3;

struct ScorerConfig {
  std::size_t video_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t shared_dim = 16;
  std::size_t text_layers = 2;
  std::size_t heads = 4;
  std::size_t vocab_size = 256;
  std::size_t max_text_len = 32;
  double tau_init = 0.07;
  double tau_min = 1e-3;

  void validate() const;
  std::map<std::string, std::string> to_metadata() const;
  static ScorerConfig from_metadata(const std::map<std::string, std::string>& meta);
  bool operator==(const ScorerConfig&) const = default;
};

// Frame indices the video tower pools over: all frames when N <= 8, otherwise
// eight at uniform stride floor(i * N / 8).
std::vector<std::size_t> temporal_sample(std::size_t frames);

class TwoStreamModel {
 public:
  TwoStreamModel(ScorerConfig config, std::uint64_t seed);

  const ScorerConfig& config() const noexcept { return config_; }
  ParameterList& parameters() noexcept { return params_; }
  const ParameterList& parameters() const noexcept { return params_; }
  Tensor& parameter(const std::string& name);
  Tensor& temperature() noexcept { return tau_; }
  void clamp_temperature();

  // [1 x d_s] unit rows, differentiable.
  Tensor encode_video(const VideoClipFeatures& video) const;
  Tensor encode_title(const TokenSequence& tokens) const;

  // Text-tower internals exposed for oracle checks.
  Tensor title_states(const TokenSequence& tokens) const;

 private:
  ScorerConfig config_;
  ParameterList params_;
  nn::Linear frame_encoder_;  // per-frame d_v -> d_h, GELU
  nn::Linear video_head_;     // d_h -> d_s
  Tensor token_embedding_;
  Tensor positions_;
  nn::TransformerStack text_stack_;
  nn::Linear text_head_;  // d_h -> d_s
  Tensor tau_;
};

double match_score(std::span<const double> video, std::span<const double> title);

struct ScoredPair {
  std::string video_id;
  std::string title;
  double score = 0.0;
  bool kept = false;
};

struct FilterResult {
  std::vector<ScoredPair> scored;  // one per input, in input order
  std::vector<std::size_t> kept;    // input indices, ascending
  std::vector<std::size_t> removed;
};

// Scores below the threshold are removed; a score equal to it is kept.
FilterResult partition_by_score(std::vector<ScoredPair> pairs, double threshold);

struct ScorerInput {
  std::string video_id;
  std::string title;
  VideoClipFeatures video;
  TokenSequence title_tokens;
};

FilterResult filter_dataset(const std::vector<ScorerInput>& pairs, const TwoStreamModel& model,
                            double threshold = kDefaultFilterThreshold);

struct ScorerTrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  LrSchedule schedule{10, 1e-5, 1e-6, 30};
  AdamWOptions adamw{};
  std::uint64_t seed = 0;
};

// Minimizes symmetric infoNCE over in-batch negatives. Returns the mean loss
// of each epoch. Needs at least two pairs.
std::vector<double> train_two_stream(TwoStreamModel& model, const std::vector<ScorerInput>& pairs,
                                     const ScorerTrainOptions& options);

}  // namespace alwig
