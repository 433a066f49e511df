#include "alwig/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "alwig/error.hpp"

namespace alwig {

Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "no_tag") return Variant::no_tag;
  if (name == "no_gpt") return Variant::no_gpt;
  if (name == "no_pretrain") return Variant::no_pretrain;
  throw ArgumentError("unknown variant '" + name + "' (expected full, no_tag, no_gpt, no_pretrain)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_tag: return "no_tag";
    case Variant::no_gpt: return "no_gpt";
    case Variant::no_pretrain: return "no_pretrain";
  }
  return "full";
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ArgumentError("model config: " + what);
  };
  need(video_dim > 0 && hidden_dim > 0 && shared_dim > 0, "dimensions must be positive");
  need(shared_dim <= hidden_dim, "shared_dim must not exceed hidden_dim");
  need(heads > 0 && hidden_dim % heads == 0, "heads must divide hidden_dim");
  need(encoder_layers > 0 && decoder_layers > 0, "layer counts must be positive");
  need(vocab_size > static_cast<std::size_t>(special::kCaption), "vocab_size must cover the reserved tokens");
  need(max_text_len >= 2 && max_frames >= 1, "max_text_len >= 2 and max_frames >= 1 required");
  need(tau_init > 0 && tau_min > 0, "temperature must be positive");
}

namespace {

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_metadata() const {
  return {
      {"model.video_dim", std::to_string(video_dim)},
      {"model.hidden_dim", std::to_string(hidden_dim)},
      {"model.shared_dim", std::to_string(shared_dim)},
      {"model.encoder_layers", std::to_string(encoder_layers)},
      {"model.decoder_layers", std::to_string(decoder_layers)},
      {"model.heads", std::to_string(heads)},
      {"model.vocab_size", std::to_string(vocab_size)},
      {"model.max_text_len", std::to_string(max_text_len)},
      {"model.max_frames", std::to_string(max_frames)},
      {"model.max_tags", std::to_string(max_tags)},
      {"model.tau_init", real_str(tau_init)},
      {"model.tau_min", real_str(tau_min)},
      {"model.use_tags", use_tags ? "1" : "0"},
      {"model.skip_pretrain", skip_pretrain ? "1" : "0"},
      {"model.variant", variant_name(variant)},
  };
}

ModelConfig ModelConfig::from_metadata(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  auto size = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
  ModelConfig c;
  try {
    c.video_dim = size("model.video_dim");
    c.hidden_dim = size("model.hidden_dim");
    c.shared_dim = size("model.shared_dim");
    c.encoder_layers = size("model.encoder_layers");
    c.decoder_layers = size("model.decoder_layers");
    c.heads = size("model.heads");
    c.vocab_size = size("model.vocab_size");
    c.max_text_len = size("model.max_text_len");
    c.max_frames = size("model.max_frames");
    c.max_tags = size("model.max_tags");
    c.tau_init = std::stod(get("model.tau_init"));
    c.tau_min = std::stod(get("model.tau_min"));
    c.use_tags = get("model.use_tags") == "1";
    c.skip_pretrain = get("model.skip_pretrain") == "1";
    c.variant = parse_variant(get("model.variant"));
  } catch (const std::logic_error& e) {
    throw DataError(std::string("checkpoint metadata: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig ablate(const ModelConfig& config, Variant variant) {
  ModelConfig c = config;
  c.variant = variant;
  switch (variant) {
    case Variant::full: return config;
    case Variant::no_tag: c.use_tags = false; break;
    case Variant::no_gpt: c.decoder_layers = 1; break;
    case Variant::no_pretrain: c.skip_pretrain = true; break;
  }
  return c;
}

void VideoClipFeatures::validate() const {
  if (frames == 0) throw InputError("video has no frames");
  if (dim == 0 || values.size() != frames * dim) throw InputError("video feature payload does not match N x d_v");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InputError("non-finite video feature at frame " + std::to_string(i / dim) + ", component " +
                       std::to_string(i % dim));
    }
  }
}

Tensor VideoClipFeatures::as_tensor() const { return Tensor::from({frames, dim}, values); }

Tensor info_nce(const Tensor& similarity, const Tensor& tau) {
  if (similarity.dim() != 2 || similarity.rows() != similarity.cols()) {
    throw DimensionError("info_nce: similarity must be square, got " + shape_str(similarity.shape()));
  }
  const std::size_t k = similarity.rows();
  std::vector<std::int64_t> diagonal(k);
  std::iota(diagonal.begin(), diagonal.end(), 0);
  const Tensor logits = div_by_scalar(similarity, tau);
  return add(cross_entropy(logits, diagonal), cross_entropy(transpose(logits), diagonal));
}

Tensor total_loss(const Tensor& align, const Tensor& gen) {
  if (!std::isfinite(align.item()) || !std::isfinite(gen.item())) throw NumericError("total_loss: non-finite term");
  return add(align, gen);
}

// ---------------------------------------------------------------------------

AlwigModel::AlwigModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nn::ParamFactory f(params_, seed);
  const std::size_t d = config_.hidden_dim;
  const std::size_t v = config_.vocab_size;
  constexpr double kEmbedStd = 0.5;

  cross_.token_embedding = f.normal("cross.token_embedding", {v, d}, kEmbedStd);
  cross_.frame_projection = nn::Linear::make(f, "cross.frame_projection", config_.video_dim, d);
  cross_.frame_positions = f.normal("cross.frame_positions", {config_.max_frames, d}, 0.1);
  cross_.stack = nn::TransformerStack::make(f, "cross", d, config_.heads, config_.encoder_layers);

  text_.token_embedding = f.normal("text.token_embedding", {v, d}, kEmbedStd);
  text_.positions = f.normal("text.positions", {config_.max_text_len + 1, d}, 0.1);
  text_.stack = nn::TransformerStack::make(f, "text", d, config_.heads, config_.encoder_layers);

  phi_ = nn::Linear::make(f, "head.phi", d, config_.shared_dim);
  psi_ = nn::Linear::make(f, "head.psi", d, config_.shared_dim);
  tau_ = f.constant("head.tau", {1}, config_.tau_init, false);

  decoder_.token_embedding = f.normal("decoder.token_embedding", {v, d}, kEmbedStd);
  decoder_.positions = f.normal("decoder.positions", {config_.max_text_len, d}, 0.1);
  decoder_.stack = nn::TransformerStack::make(f, "decoder", d, config_.heads, config_.decoder_layers);
  decoder_.output = nn::Linear::make(f, "decoder.output", d, v);
}

Tensor& AlwigModel::parameter(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ArgumentError("no parameter named '" + name + "'");
}

std::size_t AlwigModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::size_t AlwigModel::decoder_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind("decoder.", 0) == 0) n += p.value.numel();
  }
  return n;
}

TagEmbeddingSequence AlwigModel::embed_tags(const std::vector<TokenSequence>& tags) const {
  if (tags.size() > config_.max_tags) {
    throw InputError("too many tags: " + std::to_string(tags.size()) + " > " + std::to_string(config_.max_tags));
  }
  TagEmbeddingSequence seq;
  std::vector<Tensor> rows;
  const TokenId cls = special::kCls;
  const TokenId sep = special::kSep;
  rows.push_back(gather_rows(cross_.token_embedding, std::span(&cls, 1)));
  if (config_.use_tags) {
    for (const auto& tag : tags) {
      if (tag.empty()) throw InputError("empty tag");
      rows.push_back(mean_rows(gather_rows(cross_.token_embedding, tag)));
    }
    seq.tag_ids = tags;
  }
  rows.push_back(gather_rows(cross_.token_embedding, std::span(&sep, 1)));
  seq.embeddings = concat_rows(rows);
  return seq;
}

FusionEmbeddings AlwigModel::cross_encode(const TagEmbeddingSequence& tags, const VideoClipFeatures& video) const {
  video.validate();
  if (video.dim != config_.video_dim) {
    throw InputError("video feature dimension " + std::to_string(video.dim) + " does not match model d_v " +
                     std::to_string(config_.video_dim));
  }
  if (video.frames > config_.max_frames) {
    throw InputError("video has " + std::to_string(video.frames) + " frames, model accepts at most " +
                     std::to_string(config_.max_frames));
  }
  Tensor tag_rows = tags.embeddings;
  std::size_t tag_count = tags.tag_count();
  if (!config_.use_tags && tag_count > 0) {
    // CLS and SEP only.
    const std::array<Tensor, 2> ends{slice_rows(tag_rows, 0, 1), slice_rows(tag_rows, tag_rows.rows() - 1, 1)};
    tag_rows = concat_rows(ends);
    tag_count = 0;
  }
  const Tensor frames = add(cross_.frame_projection(video.as_tensor()),
                            slice_rows(cross_.frame_positions, 0, video.frames));
  const std::array<Tensor, 2> parts{tag_rows, frames};
  FusionEmbeddings f;
  f.vectors = cross_.stack(concat_rows(parts));
  f.tag_count = tag_count;
  f.frame_count = video.frames;
  return f;
}

TextEmbeddings AlwigModel::text_encode(const TokenSequence& tokens) const {
  if (tokens.empty()) throw InputError("text_encode: empty token sequence");
  if (tokens.size() > config_.max_text_len) {
    throw InputError("text_encode: " + std::to_string(tokens.size()) + " tokens exceed max_text_len " +
                     std::to_string(config_.max_text_len));
  }
  TokenSequence ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(special::kCls);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  const Tensor x = add(gather_rows(text_.token_embedding, ids), slice_rows(text_.positions, 0, ids.size()));
  return TextEmbeddings{text_.stack(x)};
}

Tensor AlwigModel::project_video(const FusionEmbeddings& f) const { return l2_normalize_rows(phi_(f.fused_cls())); }

Tensor AlwigModel::project_text(const TextEmbeddings& w) const { return l2_normalize_rows(psi_(w.text_cls())); }

Tensor AlwigModel::similarity(const FusionEmbeddings& f, const TextEmbeddings& w) const {
  return sum(mul(project_video(f), project_text(w)));
}

Tensor AlwigModel::align_loss(std::span<const FusionEmbeddings> fs, std::span<const TextEmbeddings> ws) const {
  if (fs.empty()) throw InputError("align_loss: empty batch");
  if (fs.size() != ws.size()) {
    throw InputError("align_loss: " + std::to_string(fs.size()) + " videos vs " + std::to_string(ws.size()) +
                     " texts");
  }
  std::vector<Tensor> vs;
  std::vector<Tensor> ts;
  for (const auto& f : fs) vs.push_back(project_video(f));
  for (const auto& w : ws) ts.push_back(project_text(w));
  const Tensor sim = matmul(concat_rows(vs), transpose(concat_rows(ts)));
  return info_nce(sim, tau_);
}

Tensor AlwigModel::decoder_logits(const Tensor& prompt, const TokenSequence& input) const {
  if (input.empty()) throw InputError("decoder: empty input");
  if (input.size() > config_.max_text_len) {
    throw InputError("decoder: input of " + std::to_string(input.size()) + " tokens exceeds max_text_len " +
                     std::to_string(config_.max_text_len));
  }
  const std::size_t p = prompt.rows();
  const std::size_t l = input.size();
  const Tensor text = add(gather_rows(decoder_.token_embedding, input), slice_rows(decoder_.positions, 0, l));
  const std::array<Tensor, 2> parts{prompt, text};
  const auto mask = nn::prefix_causal_mask(p, l);
  const Tensor h = decoder_.stack(concat_rows(parts), mask);
  return decoder_.output(slice_rows(h, p, l));
}

Tensor AlwigModel::gen_loss(const FusionEmbeddings& f, const TokenSequence& target) const {
  if (target.size() > config_.max_text_len) {
    throw InputError("gen_loss: target of " + std::to_string(target.size()) + " tokens exceeds max_text_len " +
                     std::to_string(config_.max_text_len));
  }
  if (target.size() < 2 || target.front() != special::kBos ||
      std::find(target.begin(), target.end(), special::kEos) == target.end()) {
    throw InputError("gen_loss: target must start with BOS and contain EOS");
  }
  const TokenSequence input(target.begin(), target.end() - 1);
  const std::vector<std::int64_t> labels(target.begin() + 1, target.end());
  return cross_entropy(decoder_logits(f.vectors, input), labels, special::kPad);
}

std::vector<double> AlwigModel::next_token_log_probs(const Tensor& prompt, const TokenSequence& prefix,
                                                     const TokenSequence& generated) const {
  TokenSequence input = prefix;
  input.insert(input.end(), generated.begin(), generated.end());
  const Tensor logits = decoder_logits(prompt, input);
  const Tensor last = slice_rows(logits, input.size() - 1, 1);
  const Tensor lp = log_softmax(last, 1);
  return std::vector<double>(lp.data().begin(), lp.data().end());
}

Hypothesis AlwigModel::beam_search_decode(const FusionEmbeddings& f, const TokenSequence& prefix,
                                          const BeamOptions& options) const {
  if (prefix.empty()) throw InputError("beam_search_decode: empty prefix");
  NoGradGuard no_grad;
  BeamOptions opts = options;
  opts.max_len = std::min(opts.max_len, config_.max_text_len - prefix.size());
  if (opts.max_len == 0) throw InputError("beam_search_decode: prefix leaves no room to generate");
  const Tensor prompt = f.vectors.detach();
  return beam_search([&](const TokenSequence& generated) { return next_token_log_probs(prompt, prefix, generated); },
                     opts);
}

void AlwigModel::clamp_temperature() {
  auto t = tau_.mutable_data();
  t[0] = std::max(t[0], config_.tau_min);
}

}  // namespace alwig
