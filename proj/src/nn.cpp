#include "alwig/nn.hpp"

#include <cmath>
#include <limits>

#include "alwig/error.hpp"

namespace alwig::nn {

Tensor ParamFactory::normal(const std::string& name, Shape shape, double stddev, bool decay) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng_);
  auto t = Tensor::from(std::move(shape), std::move(values), true);
  list_.push_back({name, t, decay});
  return t;
}

Tensor ParamFactory::constant(const std::string& name, Shape shape, double value, bool decay) {
  auto t = Tensor::full(std::move(shape), value, true);
  list_.push_back({name, t, decay});
  return t;
}

Linear Linear::make(ParamFactory& f, const std::string& name, std::size_t in, std::size_t out,
                    double stddev_scale) {
  Linear l;
  l.weight = f.normal(name + ".weight", {in, out}, stddev_scale / std::sqrt(static_cast<double>(in)));
  l.bias = f.constant(name + ".bias", {out}, 0.0);
  return l;
}

LayerNorm LayerNorm::make(ParamFactory& f, const std::string& name, std::size_t dim) {
  LayerNorm n;
  n.gain = f.constant(name + ".gain", {dim}, 1.0);
  n.bias = f.constant(name + ".bias", {dim}, 0.0);
  return n;
}

TransformerBlock TransformerBlock::make(ParamFactory& f, const std::string& name, std::size_t dim,
                                        std::size_t heads, std::size_t layers_in_stack) {
  if (heads == 0 || dim % heads != 0) {
    throw ArgumentError("transformer block: heads (" + std::to_string(heads) + ") must divide width (" +
                        std::to_string(dim) + ")");
  }
  const double residual_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(layers_in_stack));
  TransformerBlock b;
  b.heads = heads;
  b.ln1 = LayerNorm::make(f, name + ".ln1", dim);
  b.q = Linear::make(f, name + ".attn.q", dim, dim);
  b.k = Linear::make(f, name + ".attn.k", dim, dim);
  b.v = Linear::make(f, name + ".attn.v", dim, dim);
  b.o = Linear::make(f, name + ".attn.o", dim, dim, residual_scale);
  b.ln2 = LayerNorm::make(f, name + ".ln2", dim);
  b.fc1 = Linear::make(f, name + ".mlp.fc1", dim, 4 * dim);
  b.fc2 = Linear::make(f, name + ".mlp.fc2", 4 * dim, dim, residual_scale);
  return b;
}

Tensor self_attention(const Tensor& x, const Linear& q, const Linear& k, const Linear& v, const Linear& o,
                      std::size_t heads, std::span<const double> mask) {
  const std::size_t s = x.rows();
  const std::size_t dim = x.cols();
  const std::size_t hd = dim / heads;
  if (!mask.empty() && mask.size() != s * s) throw DimensionError("attention mask does not match sequence length");
  const Tensor qx = q(x);
  const Tensor kx = k(x);
  const Tensor vx = v(x);
  const double inv = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(qx, h * hd, hd);
    const Tensor kh = slice_cols(kx, h * hd, hd);
    const Tensor vh = slice_cols(vx, h * hd, hd);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv);
    if (!mask.empty()) scores = add_mask(scores, mask);
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  return o(heads == 1 ? outs[0] : concat_cols(outs));
}

Tensor TransformerBlock::operator()(const Tensor& x, std::span<const double> mask) const {
  const Tensor h = add(x, self_attention(ln1(x), q, k, v, o, heads, mask));
  return add(h, fc2(gelu(fc1(ln2(h)))));
}

TransformerStack TransformerStack::make(ParamFactory& f, const std::string& name, std::size_t dim,
                                        std::size_t heads, std::size_t layers) {
  TransformerStack s;
  for (std::size_t i = 0; i < layers; ++i) {
    s.blocks.push_back(TransformerBlock::make(f, name + ".blocks." + std::to_string(i), dim, heads, layers));
  }
  s.final_ln = LayerNorm::make(f, name + ".final_ln", dim);
  return s;
}

Tensor TransformerStack::operator()(const Tensor& x, std::span<const double> mask) const {
  Tensor h = x;
  for (const auto& b : blocks) h = b(h, mask);
  return final_ln(h);
}

std::vector<double> prefix_causal_mask(std::size_t prefix, std::size_t text) {
  const std::size_t s = prefix + text;
  const double blocked = -std::numeric_limits<double>::infinity();
  std::vector<double> mask(s * s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const bool allowed = j < prefix || (i >= prefix && j <= i);
      if (!allowed) mask[i * s + j] = blocked;
    }
  }
  return mask;
}

}  // namespace alwig::nn
