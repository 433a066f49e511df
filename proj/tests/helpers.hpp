#pragma once

#include <random>
#include <string>
#include <vector>

#include "alwig/model.hpp"
#include "alwig/optim.hpp"
#include "oracles.hpp"

namespace testing {

inline const alwig::Tensor& param(const alwig::ParameterList& params, const std::string& name) {
  for (const auto& p : params) {
    if (p.name == name) return p.value;
  }
  throw std::runtime_error("missing parameter " + name);
}

inline oracle::BlockWeights block_weights(const alwig::ParameterList& ps, const std::string& prefix) {
  oracle::BlockWeights w;
  auto vec = [&](const std::string& n) { return oracle::to_vector(param(ps, prefix + n)); };
  auto mat = [&](const std::string& n) { return oracle::to_matrix(param(ps, prefix + n)); };
  w.ln1_g = vec(".ln1.gain");
  w.ln1_b = vec(".ln1.bias");
  w.ln2_g = vec(".ln2.gain");
  w.ln2_b = vec(".ln2.bias");
  w.wq = mat(".attn.q.weight");
  w.bq = vec(".attn.q.bias");
  w.wk = mat(".attn.k.weight");
  w.bk = vec(".attn.k.bias");
  w.wv = mat(".attn.v.weight");
  w.bv = vec(".attn.v.bias");
  w.wo = mat(".attn.o.weight");
  w.bo = vec(".attn.o.bias");
  w.w1 = mat(".mlp.fc1.weight");
  w.b1 = vec(".mlp.fc1.bias");
  w.w2 = mat(".mlp.fc2.weight");
  w.b2 = vec(".mlp.fc2.bias");
  return w;
}

// Runs every block of the stack `prefix` and its final norm with the oracle.
inline oracle::Matrix stack_forward(const alwig::ParameterList& ps, const std::string& prefix, std::size_t layers,
                                    std::size_t heads, oracle::Matrix x,
                                    const std::function<bool(std::size_t, std::size_t)>& allowed) {
  for (std::size_t l = 0; l < layers; ++l) {
    x = oracle::block(x, block_weights(ps, prefix + ".blocks." + std::to_string(l)), heads, allowed);
  }
  return oracle::layer_norm(x, oracle::to_vector(param(ps, prefix + ".final_ln.gain")),
                            oracle::to_vector(param(ps, prefix + ".final_ln.bias")));
}

inline alwig::ModelConfig tiny_config(std::size_t vocab = 24) {
  alwig::ModelConfig c;
  c.video_dim = 6;
  c.hidden_dim = 8;
  c.shared_dim = 4;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.heads = 2;
  c.vocab_size = vocab;
  c.max_text_len = 10;
  c.max_frames = 6;
  c.max_tags = 6;
  return c;
}

inline alwig::VideoClipFeatures random_video(std::size_t frames, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  alwig::VideoClipFeatures v;
  v.frames = frames;
  v.dim = dim;
  v.values.resize(frames * dim);
  for (auto& x : v.values) x = nd(rng);
  return v;
}

inline alwig::TokenSequence random_tokens(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<alwig::TokenId> d(alwig::special::kCount, static_cast<alwig::TokenId>(vocab) - 1);
  alwig::TokenSequence t(n);
  for (auto& x : t) x = d(rng);
  return t;
}

}  // namespace testing
