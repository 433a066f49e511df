#include "alwig/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "alwig/error.hpp"

namespace alwig {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<detail::Node>;

NodePtr new_node(Shape shape, std::vector<double> data) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return node;
}

// Builds the result node and wires the backward closure when any parent
// participates in differentiation.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<NodePtr> parents,
                   std::function<void(detail::Node&)> backward) {
  auto node = new_node(std::move(shape), std::move(data));
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr& p) { return p->requires_grad; });
    if (any) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ArgumentError(std::string(op) + ": undefined tensor");
}

void require_2d(const Tensor& t, const char* op) {
  require_defined(t, op);
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <class F>
Tensor unary(const Tensor& x, F&& fwd_and_deriv) {
  require_defined(x, "unary");
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  std::vector<double> deriv(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, d] = fwd_and_deriv(in[i]);
    out[i] = y;
    deriv[i] = d;
  }
  return make_result(x.shape(), std::move(out), {x.node()},
                     [deriv = std::move(deriv)](detail::Node& self) {
                       auto& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (std::size_t i = 0; i < deriv.size(); ++i) p.grad[i] += self.grad[i] * deriv[i];
                     });
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  const auto n = shape_numel(shape);
  auto node = new_node(std::move(shape), std::vector<double>(n, value));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
  }
  auto node = new_node(std::move(shape), std::move(values));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::extent(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  require_2d(*this, "at");
  if (row >= rows() || col >= cols()) throw IndexError("at: index out of range");
  return node_->data[row * cols() + col];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
  require_defined(*this, "set_requires_grad");
  node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "mutable_grad");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (defined()) node_->grad.clear();
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (numel() != 1) throw DimensionError("backward() requires a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return Tensor(new_node(node_->shape, node_->data));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](detail::Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](detail::Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return std::pair{v * factor, factor}; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(x, [value](double v) { return std::pair{v + value, 1.0}; });
}

Tensor div_by_scalar(const Tensor& x, const Tensor& s) {
  require_defined(x, "div_by_scalar");
  require_defined(s, "div_by_scalar");
  if (s.numel() != 1) throw DimensionError("div_by_scalar: divisor must have one element, got " + shape_str(s.shape()));
  const double d = s.node()->data[0];
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] / d;
  return make_result(x.shape(), std::move(out), {x.node(), s.node()}, [](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& ps = *self.parents[1];
    const double d = ps.data[0];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i] / d;
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px.data[i];
      ps.ensure_grad();
      ps.grad[0] -= acc / (d * d);
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) {
    const double e = std::exp(v);
    return std::pair{e, e};
  });
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::pair{std::log(v), 1.0 / v}; });
}

Tensor gelu(const Tensor& x) {
  // Exact erf form.
  return unary(x, [](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    return std::pair{v * cdf, cdf + v * pdf};
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0}; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_bias");
  require_defined(bias, "add_bias");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  const auto& in = x.node()->data;
  const auto& b = bias.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] + b[j];
  return make_result(x.shape(), std::move(out), {x.node(), bias.node()}, [m, n](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pb.grad[j] += self.grad[i * n + j];
    }
  });
}

Tensor add_mask(const Tensor& x, std::span<const double> mask) {
  require_defined(x, "add_mask");
  if (mask.size() != x.numel()) throw DimensionError("add_mask: mask size does not match " + shape_str(x.shape()));
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + mask[i];
  return make_result(x.shape(), std::move(out), {x.node()}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double acc = 0.0;
  for (double v : x.node()->data) acc += v;
  return make_result({1}, {acc}, {x.node()}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (auto& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require_defined(x, "mean");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean_rows(const Tensor& x) {
  require_2d(x, "mean_rows");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  const auto& in = x.node()->data;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += in[i * n + j];
  for (auto& v : out) v /= static_cast<double>(m);
  return make_result({1, n}, std::move(out), {x.node()}, [m, n](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j] * inv;
  });
}

// ---------------------------------------------------------------------------
// linear algebra / layout

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents disagree, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      const double* yrow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += xv * yrow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {
      // dA = dOut * B^T
      pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g.data() + i * n;
          const double* brow = pb.data.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          pa.grad[i * k + p] += acc;
        }
    }
    if (pb.requires_grad) {
      // dB = A^T * dOut
      pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.data[i * k + p];
          const double* grow = g.data() + i * n;
          double* brow = pb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& x) {
  require_2d(x, "transpose");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = in[i * n + j];
  return make_result({n, m}, std::move(out), {x.node()}, [m, n](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return make_result(std::move(shape), x.node()->data, {x.node()}, [](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count) {
  require_2d(x, "slice_rows");
  const std::size_t n = x.cols();
  if (count == 0 || start + count > x.rows()) {
    throw IndexError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                     shape_str(x.shape()));
  }
  const auto& in = x.node()->data;
  std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(start * n),
                          in.begin() + static_cast<std::ptrdiff_t>((start + count) * n));
  return make_result({count, n}, std::move(out), {x.node()}, [start, n](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[start * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  require_2d(x, "slice_cols");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  if (count == 0 || start + count > n) {
    throw IndexError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " +
                     shape_str(x.shape()));
  }
  const auto& in = x.node()->data;
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = in[i * n + start + j];
  return make_result({m, count}, std::move(out), {x.node()}, [m, n, start, count](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) p.grad[i * n + start + j] += self.grad[i * count + j];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  for (const auto& t : parts) {
    require_2d(t, "concat_rows");
    if (t.cols() != n) {
      throw DimensionError("concat_rows: width mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(t.shape()));
    }
    offsets.push_back(total * n);
    total += t.rows();
    parents.push_back(t.node());
  }
  std::vector<double> out;
  out.reserve(total * n);
  for (const auto& t : parts) out.insert(out.end(), t.node()->data.begin(), t.node()->data.end());
  return make_result({total, n}, std::move(out), std::move(parents),
                     [offsets = std::move(offsets)](detail::Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         p.ensure_grad();
                         for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[offsets[k] + i];
                       }
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t total = 0;
  std::vector<NodePtr> parents;
  std::vector<std::size_t> offsets;
  for (const auto& t : parts) {
    require_2d(t, "concat_cols");
    if (t.rows() != m) {
      throw DimensionError("concat_cols: height mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(t.shape()));
    }
    offsets.push_back(total);
    total += t.cols();
    parents.push_back(t.node());
  }
  std::vector<double> out(m * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& d = parts[k].node()->data;
    const std::size_t w = parts[k].cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + offsets[k] + j] = d[i * w + j];
  }
  return make_result({m, total}, std::move(out), std::move(parents),
                     [m, total, offsets = std::move(offsets)](detail::Node& self) {
                       for (std::size_t k = 0; k < self.parents.size(); ++k) {
                         auto& p = *self.parents[k];
                         if (!p.requires_grad) continue;
                         p.ensure_grad();
                         const std::size_t w = p.shape[1];
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < w; ++j) p.grad[i * w + j] += self.grad[i * total + offsets[k] + j];
                       }
                     });
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids) {
  require_2d(table, "gather_rows");
  if (ids.empty()) throw ArgumentError("gather_rows: no ids");
  const std::size_t v = table.rows();
  const std::size_t d = table.cols();
  const auto& in = table.node()->data;
  std::vector<double> out(ids.size() * d);
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(v) +
                       " rows");
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(rows[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return make_result({ids.size(), d}, std::move(out), {table.node()},
                     [d, rows = std::move(rows)](detail::Node& self) {
                       auto& p = *self.parents[0];
                       p.ensure_grad();
                       for (std::size_t i = 0; i < rows.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) p.grad[rows[i] * d + j] += self.grad[i * d + j];
                     });
}

// ---------------------------------------------------------------------------
// normalization / probability

namespace {

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  const auto l = axis_layout(x.shape(), axis);
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.len * l.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.len; ++k) mx = std::max(mx, in[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) {
        const double e = std::exp(in[base + k * l.inner] - mx);
        out[base + k * l.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] /= z;
    }
  return make_result(x.shape(), std::move(out), {x.node()}, [l](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.len * l.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < l.len; ++k) dot += g[base + k * l.inner] * y[base + k * l.inner];
        for (std::size_t k = 0; k < l.len; ++k) {
          const std::size_t idx = base + k * l.inner;
          p.grad[idx] += y[idx] * (g[idx] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "log_softmax");
  const auto l = axis_layout(x.shape(), axis);
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < l.outer; ++o)
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.len * l.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < l.len; ++k) mx = std::max(mx, in[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) z += std::exp(in[base + k * l.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] = in[base + k * l.inner] - lz;
    }
  return make_result(x.shape(), std::move(out), {x.node()}, [l](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < l.outer; ++o)
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.len * l.inner + i;
        double gs = 0.0;
        for (std::size_t k = 0; k < l.len; ++k) gs += g[base + k * l.inner];
        for (std::size_t k = 0; k < l.len; ++k) {
          const std::size_t idx = base + k * l.inner;
          p.grad[idx] += g[idx] - std::exp(y[idx]) * gs;
        }
      }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
  require_defined(x, "layer_norm");
  require_defined(gain, "layer_norm");
  require_defined(bias, "layer_norm");
  const std::size_t n = x.shape().back();
  if (gain.numel() != n || bias.numel() != n) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                         " do not match last extent of " + shape_str(x.shape()));
  }
  const std::size_t m = x.numel() / n;
  const auto& in = x.node()->data;
  const auto& g = gain.node()->data;
  const auto& b = bias.node()->data;
  std::vector<double> out(in.size());
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (row[j] - mu) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * g[j] + b[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
                     [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
                       auto& px = *self.parents[0];
                       auto& pg = *self.parents[1];
                       auto& pb = *self.parents[2];
                       const auto& dy = self.grad;
                       if (pg.requires_grad) {
                         pg.ensure_grad();
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t j = 0; j < n; ++j) pg.grad[j] += dy[r * n + j] * xhat[r * n + j];
                       }
                       if (pb.requires_grad) {
                         pb.ensure_grad();
                         for (std::size_t r = 0; r < m; ++r)
                           for (std::size_t j = 0; j < n; ++j) pb.grad[j] += dy[r * n + j];
                       }
                       if (px.requires_grad) {
                         px.ensure_grad();
                         const double nn = static_cast<double>(n);
                         for (std::size_t r = 0; r < m; ++r) {
                           double s1 = 0.0;
                           double s2 = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dxh = dy[r * n + j] * pg.data[j];
                             s1 += dxh;
                             s2 += dxh * xhat[r * n + j];
                           }
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dxh = dy[r * n + j] * pg.data[j];
                             px.grad[r * n + j] += inv_std[r] / nn * (nn * dxh - s1 - xhat[r * n + j] * s2);
                           }
                         }
                       }
                     });
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_2d(x, "l2_normalize_rows");
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  const auto& in = x.node()->data;
  std::vector<double> out(in.size());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += in[i * n + j] * in[i * n + j];
    norms[i] = std::sqrt(s);
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) {
      throw InputError("l2_normalize_rows: row " + std::to_string(i) + " has zero or non-finite norm");
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = in[i * n + j] / norms[i];
  }
  return make_result(x.shape(), std::move(out), {x.node()}, [m, n, norms = std::move(norms)](detail::Node& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const auto& y = self.data;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += (g[i * n + j] - y[i * n + j] * dot) / norms[i];
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets, std::int64_t ignore_index) {
  require_2d(logits, "cross_entropy");
  const std::size_t rows = logits.rows();
  const std::size_t vocab = logits.cols();
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(logits.shape()));
  }
  const auto& in = logits.node()->data;
  std::vector<double> probs(in.size(), 0.0);
  std::vector<std::int64_t> tgt(targets.begin(), targets.end());
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tgt[r] == ignore_index) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(tgt[r]) + " at position " + std::to_string(r) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    const double* row = in.data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[r * vocab + j] = std::exp(row[j] - mx);
      z += probs[r * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[r * vocab + j] /= z;
    total += -(row[tgt[r]] - mx - std::log(z));
    ++counted;
  }
  const double loss = counted ? total / static_cast<double>(counted) : 0.0;
  return make_result({1}, {loss}, {logits.node()},
                     [rows, vocab, counted, ignore_index, probs = std::move(probs),
                      tgt = std::move(tgt)](detail::Node& self) {
                       if (counted == 0) return;
                       auto& p = *self.parents[0];
                       p.ensure_grad();
                       const double w = self.grad[0] / static_cast<double>(counted);
                       for (std::size_t r = 0; r < rows; ++r) {
                         if (tgt[r] == ignore_index) continue;
                         for (std::size_t j = 0; j < vocab; ++j) p.grad[r * vocab + j] += w * probs[r * vocab + j];
                         p.grad[r * vocab + static_cast<std::size_t>(tgt[r])] -= w;
                       }
                     });
}

}  // namespace alwig
