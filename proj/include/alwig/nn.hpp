#pragma once

// Transformer building blocks shared by the ALWIG model and the two-stream
// matching scorer. Blocks are pre-norm:
//   h = x + Attn(LN1(x));  y = h + MLP(LN2(h))

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alwig/optim.hpp"
#include "alwig/tensor.hpp"

namespace alwig::nn {

// Registers freshly initialized parameters in a ParameterList.
class ParamFactory {
 public:
  ParamFactory(ParameterList& list, std::uint64_t seed) : list_(list), rng_(seed) {}

  Tensor normal(const std::string& name, Shape shape, double stddev, bool decay = true);
  Tensor constant(const std::string& name, Shape shape, double value, bool decay = false);

 private:
  ParameterList& list_;
  std::mt19937_64 rng_;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear make(ParamFactory& f, const std::string& name, std::size_t in, std::size_t out,
                     double stddev_scale = 1.0);
  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double epsilon = 1e-5;

  static LayerNorm make(ParamFactory& f, const std::string& name, std::size_t dim);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias, epsilon); }
};

struct TransformerBlock {
  LayerNorm ln1, ln2;
  Linear q, k, v, o;
  Linear fc1, fc2;
  std::size_t heads = 1;

  static TransformerBlock make(ParamFactory& f, const std::string& name, std::size_t dim, std::size_t heads,
                               std::size_t layers_in_stack);
  // mask: additive (S x S) with 0 for allowed and -inf for blocked; empty = full attention.
  Tensor operator()(const Tensor& x, std::span<const double> mask) const;
};

// Multi-head scaled dot-product attention over already-normalized input.
Tensor self_attention(const Tensor& x, const Linear& q, const Linear& k, const Linear& v, const Linear& o,
                      std::size_t heads, std::span<const double> mask);

struct TransformerStack {
  std::vector<TransformerBlock> blocks;
  LayerNorm final_ln;

  static TransformerStack make(ParamFactory& f, const std::string& name, std::size_t dim, std::size_t heads,
                               std::size_t layers);
  Tensor operator()(const Tensor& x, std::span<const double> mask = {}) const;
};

// Prefix-LM mask over `prefix` prompt positions followed by `text` positions:
// prompt rows see the whole prompt; text row i sees the prompt and text 0..i.
std::vector<double> prefix_causal_mask(std::size_t prefix, std::size_t text);

}  // namespace alwig::nn
