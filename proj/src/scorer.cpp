#include "alwig/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "alwig/error.hpp"

namespace alwig {

void ScorerConfig::validate() const {
  if (video_dim == 0 || hidden_dim == 0 || shared_dim == 0 || shared_dim > hidden_dim) {
    throw ArgumentError("scorer config: need positive dims with shared_dim <= hidden_dim");
  }
  if (heads == 0 || hidden_dim % heads != 0) throw ArgumentError("scorer config: heads must divide hidden_dim");
  if (text_layers == 0) throw ArgumentError("scorer config: text_layers must be positive");
  if (vocab_size <= static_cast<std::size_t>(special::kCaption)) {
    throw ArgumentError("scorer config: vocab_size must cover the reserved tokens");
  }
  if (max_text_len == 0 || !(tau_init > 0) || !(tau_min > 0)) throw ArgumentError("scorer config: bad limits");
}

std::map<std::string, std::string> ScorerConfig::to_metadata() const {
  char tau[64];
  char tmin[64];
  std::snprintf(tau, sizeof tau, "%.17g", tau_init);
  std::snprintf(tmin, sizeof tmin, "%.17g", tau_min);
  return {{"scorer.video_dim", std::to_string(video_dim)},     {"scorer.hidden_dim", std::to_string(hidden_dim)},
          {"scorer.shared_dim", std::to_string(shared_dim)},   {"scorer.text_layers", std::to_string(text_layers)},
          {"scorer.heads", std::to_string(heads)},             {"scorer.vocab_size", std::to_string(vocab_size)},
          {"scorer.max_text_len", std::to_string(max_text_len)}, {"scorer.tau_init", tau},
          {"scorer.tau_min", tmin}};
}

ScorerConfig ScorerConfig::from_metadata(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("scorer checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  ScorerConfig c;
  try {
    c.video_dim = std::stoull(get("scorer.video_dim"));
    c.hidden_dim = std::stoull(get("scorer.hidden_dim"));
    c.shared_dim = std::stoull(get("scorer.shared_dim"));
    c.text_layers = std::stoull(get("scorer.text_layers"));
    c.heads = std::stoull(get("scorer.heads"));
    c.vocab_size = std::stoull(get("scorer.vocab_size"));
    c.max_text_len = std::stoull(get("scorer.max_text_len"));
    c.tau_init = std::stod(get("scorer.tau_init"));
    c.tau_min = std::stod(get("scorer.tau_min"));
  } catch (const std::logic_error& e) {
    throw DataError(std::string("scorer checkpoint metadata: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::size_t> temporal_sample(std::size_t frames) {
  if (frames == 0) throw InputError("video has no frames");
  std::vector<std::size_t> idx;
  if (frames <= kScorerFrames) {
    idx.resize(frames);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (std::size_t i = 0; i < kScorerFrames; ++i) idx.push_back(i * frames / kScorerFrames);
  return idx;
}

TwoStreamModel::TwoStreamModel(ScorerConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nn::ParamFactory f(params_, seed);
  const std::size_t d = config_.hidden_dim;
  frame_encoder_ = nn::Linear::make(f, "video.frame_encoder", config_.video_dim, d);
  video_head_ = nn::Linear::make(f, "video.head", d, config_.shared_dim);
  token_embedding_ = f.normal("text.token_embedding", {config_.vocab_size, d}, 0.5);
  positions_ = f.normal("text.positions", {config_.max_text_len + 1, d}, 0.1);
  text_stack_ = nn::TransformerStack::make(f, "text", d, config_.heads, config_.text_layers);
  text_head_ = nn::Linear::make(f, "text.head", d, config_.shared_dim);
  tau_ = f.constant("head.tau", {1}, config_.tau_init, false);
}

Tensor& TwoStreamModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ArgumentError("no scorer parameter named '" + name + "'");
}

void TwoStreamModel::clamp_temperature() {
  auto t = tau_.mutable_data();
  t[0] = std::max(t[0], config_.tau_min);
}

Tensor TwoStreamModel::encode_video(const VideoClipFeatures& video) const {
  video.validate();
  if (video.dim != config_.video_dim) throw InputError("scorer: video feature dimension mismatch");
  const auto idx = temporal_sample(video.frames);
  std::vector<double> picked;
  picked.reserve(idx.size() * video.dim);
  for (auto i : idx) {
    picked.insert(picked.end(), video.values.begin() + static_cast<std::ptrdiff_t>(i * video.dim),
                  video.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * video.dim));
  }
  const Tensor frames = Tensor::from({idx.size(), video.dim}, std::move(picked));
  const Tensor pooled = mean_rows(gelu(frame_encoder_(frames)));
  return l2_normalize_rows(video_head_(pooled));
}

Tensor TwoStreamModel::title_states(const TokenSequence& tokens) const {
  if (tokens.empty()) throw InputError("scorer: empty title");
  if (tokens.size() > config_.max_text_len) throw InputError("scorer: title exceeds max_text_len");
  TokenSequence ids{special::kCls};
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  const Tensor x = add(gather_rows(token_embedding_, ids), slice_rows(positions_, 0, ids.size()));
  return text_stack_(x);
}

Tensor TwoStreamModel::encode_title(const TokenSequence& tokens) const {
  return l2_normalize_rows(text_head_(slice_rows(title_states(tokens), 0, 1)));
}

double match_score(std::span<const double> video, std::span<const double> title) {
  if (video.size() != title.size()) throw DimensionError("match_score: vectors differ in length");
  // Summation order is symmetric in the two arguments, so the score is too.
  double s = 0.0;
  for (std::size_t i = 0; i < video.size(); ++i) s += video[i] * title[i];
  return s;
}

FilterResult partition_by_score(std::vector<ScoredPair> pairs, double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw ArgumentError("filter threshold " + std::to_string(threshold) + " outside [-1, 1]");
  }
  FilterResult r;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].kept = pairs[i].score >= threshold;
    (pairs[i].kept ? r.kept : r.removed).push_back(i);
  }
  r.scored = std::move(pairs);
  return r;
}

FilterResult filter_dataset(const std::vector<ScorerInput>& pairs, const TwoStreamModel& model, double threshold) {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw ArgumentError("filter threshold " + std::to_string(threshold) + " outside [-1, 1]");
  }
  NoGradGuard no_grad;
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Tensor v = model.encode_video(p.video);
    const Tensor t = model.encode_title(p.title_tokens);
    scored.push_back({p.video_id, p.title, match_score(v.data(), t.data()), false});
  }
  return partition_by_score(std::move(scored), threshold);
}

std::vector<double> train_two_stream(TwoStreamModel& model, const std::vector<ScorerInput>& pairs,
                                     const ScorerTrainOptions& options) {
  if (pairs.size() < 2) throw ArgumentError("train_two_stream: need at least two pairs for in-batch negatives");
  if (options.batch_size < 2) throw ArgumentError("train_two_stream: batch_size must be at least 2");
  std::vector<double> epoch_losses;
  if (options.epochs == 0) return epoch_losses;

  OptimizerState state(options.adamw);
  LrSchedule schedule = options.schedule;
  schedule.total_epochs = static_cast<double>(options.epochs);
  schedule.warmup_epochs = std::min(schedule.warmup_epochs, schedule.total_epochs);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  // Batches of one would have no negatives; fold a trailing singleton into its predecessor.
  std::vector<std::pair<std::size_t, std::size_t>> batches;
  for (std::size_t s = 0; s < pairs.size(); s += options.batch_size) {
    batches.emplace_back(s, std::min(pairs.size(), s + options.batch_size));
  }
  if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
    batches[batches.size() - 2].second = batches.back().second;
    batches.pop_back();
  }

  auto& params = model.parameters();
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<Tensor> vs;
      std::vector<Tensor> ts;
      for (std::size_t i = batches[b].first; i < batches[b].second; ++i) {
        vs.push_back(model.encode_video(pairs[order[i]].video));
        ts.push_back(model.encode_title(pairs[order[i]].title_tokens));
      }
      const Tensor sim = matmul(concat_rows(vs), transpose(concat_rows(ts)));
      const Tensor loss = info_nce(sim, model.temperature());
      if (!std::isfinite(loss.item())) {
        throw NumericError("scorer training: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      total += loss.item();
      zero_grads(params);
      loss.backward();
      const double position = static_cast<double>(epoch) + static_cast<double>(b) / static_cast<double>(batches.size());
      adamw_step(params, state, lr_at(schedule, position));
      model.clamp_temperature();
    }
    epoch_losses.push_back(total / static_cast<double>(batches.size()));
  }
  zero_grads(params);
  return epoch_losses;
}

}  // namespace alwig
