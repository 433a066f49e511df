#pragma once

// ALWIG: a tag-driven cross-encoder fuses tag embeddings with frame features,
// a textual encoder embeds text, a similarity head aligns the two leading
// vectors under a symmetric infoNCE loss, and a decoder generates text from
// the fusion embeddings used as a soft prompt.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "alwig/decode.hpp"
#include "alwig/nn.hpp"
#include "alwig/optim.hpp"
#include "alwig/tensor.hpp"
#include "alwig/text.hpp"

namespace alwig {

enum class Variant { full, no_tag, no_gpt, no_pretrain };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

// Desk-scale reference dimensions. The full-scale model uses 768-wide BERT/GPT
// hidden states mapped to a 512-wide shared space; the defaults keep a
// comparable d_s <= d_h shape at toy size.
struct ModelConfig {
  std::size_t video_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t shared_dim = 16;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t heads = 4;
  std::size_t vocab_size = 256;
  std::size_t max_text_len = 32;  // decoder target length incl. BOS/EOS; encoder text length
  std::size_t max_frames = 32;
  std::size_t max_tags = 16;
  double tau_init = 0.07;
  double tau_min = 1e-3;
  bool use_tags = true;
  bool skip_pretrain = false;
  Variant variant = Variant::full;

  void validate() const;
  std::map<std::string, std::string> to_metadata() const;
  static ModelConfig from_metadata(const std::map<std::string, std::string>& meta);
  bool operator==(const ModelConfig&) const = default;
};

// no_tag drops the tag slots from the cross-encoder input, no_gpt shrinks the
// decoder to one freshly initialized layer, no_pretrain tells the training
// harness to skip the pre-training stage. full is the identity.
ModelConfig ablate(const ModelConfig& config, Variant variant);

// N frames of dimension d_v, row-major.
struct VideoClipFeatures {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  void validate() const;  // InputError on N = 0 or non-finite values
  Tensor as_tensor() const;
};

struct TagEmbeddingSequence {
  Tensor embeddings;                  // [(M+2) x d_h]: CLS, tags..., SEP
  std::vector<TokenSequence> tag_ids;  // the M source tags

  std::size_t tag_count() const noexcept { return tag_ids.size(); }
};

struct FusionEmbeddings {
  Tensor vectors;  // [(M+2+N) x d_h]
  std::size_t tag_count = 0;
  std::size_t frame_count = 0;

  std::size_t length() const { return vectors.rows(); }
  Tensor fused_cls() const { return slice_rows(vectors, 0, 1); }
};

struct TextEmbeddings {
  Tensor vectors;  // [(L+1) x d_h], CLS first

  std::size_t length() const { return vectors.rows(); }
  Tensor text_cls() const { return slice_rows(vectors, 0, 1); }
};

// Symmetric infoNCE over a K x K similarity matrix (row i's positive is
// column i): mean over the batch of the row-direction plus column-direction
// cross-entropy of sim / tau.
Tensor info_nce(const Tensor& similarity, const Tensor& tau);

Tensor total_loss(const Tensor& align, const Tensor& gen);

class AlwigModel {
 public:
  AlwigModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  ParameterList& parameters() noexcept { return params_; }
  const ParameterList& parameters() const noexcept { return params_; }
  Tensor& parameter(const std::string& name);
  std::size_t parameter_count() const;
  std::size_t decoder_parameter_count() const;

  // Tags are character-id sequences; each tag vector is the mean of its
  // characters' cross-encoder token embeddings.
  TagEmbeddingSequence embed_tags(const std::vector<TokenSequence>& tags) const;
  FusionEmbeddings cross_encode(const TagEmbeddingSequence& tags, const VideoClipFeatures& video) const;
  FusionEmbeddings fuse(const std::vector<TokenSequence>& tags, const VideoClipFeatures& video) const {
    return cross_encode(embed_tags(tags), video);
  }
  TextEmbeddings text_encode(const TokenSequence& tokens) const;

  // phi / psi: linear map to the shared space followed by L2 normalization.
  Tensor project_video(const FusionEmbeddings& f) const;
  Tensor project_text(const TextEmbeddings& w) const;
  Tensor similarity(const FusionEmbeddings& f, const TextEmbeddings& w) const;

  Tensor align_loss(std::span<const FusionEmbeddings> fs, std::span<const TextEmbeddings> ws) const;

  // Decoder logits for every position of `input`, conditioned on `prompt`
  // rows prepended as soft-prompt positions. Returns [input.size() x V].
  Tensor decoder_logits(const Tensor& prompt, const TokenSequence& input) const;
  // Teacher-forced next-token cross-entropy over the target's text positions.
  // `target` starts with BOS and contains EOS; PAD after EOS is ignored.
  Tensor gen_loss(const FusionEmbeddings& f, const TokenSequence& target) const;

  // Log-probabilities of the token after prefix ++ generated.
  std::vector<double> next_token_log_probs(const Tensor& prompt, const TokenSequence& prefix,
                                           const TokenSequence& generated) const;
  // Beam search from `prefix` (e.g. BOS, TITLE). Runs without graph recording.
  Hypothesis beam_search_decode(const FusionEmbeddings& f, const TokenSequence& prefix,
                                const BeamOptions& options) const;

  Tensor& temperature() noexcept { return tau_; }
  const Tensor& temperature() const noexcept { return tau_; }
  void clamp_temperature();

 private:
  struct CrossEncoder {
    Tensor token_embedding;  // [V x d_h]; CLS/SEP rows and tag characters
    nn::Linear frame_projection;
    Tensor frame_positions;  // [max_frames x d_h]
    nn::TransformerStack stack;
  };
  struct TextEncoder {
    Tensor token_embedding;
    Tensor positions;  // [(max_text_len + 1) x d_h]
    nn::TransformerStack stack;
  };
  struct Decoder {
    Tensor token_embedding;
    Tensor positions;  // [max_text_len x d_h]
    nn::TransformerStack stack;
    nn::Linear output;  // d_h -> V
  };

  ModelConfig config_;
  ParameterList params_;
  CrossEncoder cross_;
  TextEncoder text_;
  nn::Linear phi_;
  nn::Linear psi_;
  Tensor tau_;
  Decoder decoder_;
};

}  // namespace alwig
