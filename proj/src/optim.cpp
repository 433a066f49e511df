#include "alwig/optim.hpp"

#include <cmath>
#include <numbers>

#include "alwig/error.hpp"

namespace alwig {

void adamw_step(ParameterList& params, OptimizerState& state, double lr) {
  for (const auto& p : params) {
    if (!p.value.has_grad()) continue;
    const auto g = p.value.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("adamw_step: non-finite gradient in '" + p.name + "' at element " + std::to_string(i) +
                           "; update refused");
      }
    }
  }
  if (state.m_.empty()) {
    for (const auto& p : params) {
      state.m_.emplace_back(p.value.numel(), 0.0);
      state.v_.emplace_back(p.value.numel(), 0.0);
    }
  }
  if (state.m_.size() != params.size()) {
    throw DimensionError("adamw_step: optimizer state tracks " + std::to_string(state.m_.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.m_[k].size() != params[k].value.numel()) {
      throw DimensionError("adamw_step: moment shape mismatch for '" + params[k].name + "'");
    }
  }

  const auto& o = state.options_;
  const auto [b1, b2] = o.betas;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto w = p.value.mutable_data();
    const bool has = p.value.has_grad();
    const auto g = has ? p.value.grad() : std::span<const double>{};
    auto& m = state.m_[k];
    auto& v = state.v_[k];
    const double decay = p.decay ? o.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      w[i] -= lr * decay * w[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + o.epsilon);
    }
  }
}

void zero_grads(ParameterList& params) {
  for (auto& p : params) p.value.zero_grad();
}

double lr_at(const LrSchedule& s, double epoch) {
  if (!(s.total_epochs > 0) || s.warmup_epochs < 0 || s.warmup_epochs > s.total_epochs) {
    throw ArgumentError("lr_at: schedule needs 0 <= warmup_epochs <= total_epochs and total_epochs > 0");
  }
  if (!(epoch >= 0.0 && epoch <= s.total_epochs)) {
    throw ArgumentError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(s.total_epochs) +
                        "]");
  }
  if (epoch < s.warmup_epochs) return s.peak_lr * epoch / s.warmup_epochs;
  const double span = s.total_epochs - s.warmup_epochs;
  if (span <= 0.0) return s.peak_lr;
  const double progress = (epoch - s.warmup_epochs) / span;
  return s.final_lr + (s.peak_lr - s.final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace alwig
