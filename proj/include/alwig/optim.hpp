#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alwig/tensor.hpp"

namespace alwig {

// A trainable tensor with its checkpoint name. `decay` selects whether
// decoupled weight decay applies (weights yes; biases, norms, temperature no).
struct NamedParameter {
  std::string name;
  Tensor value;
  bool decay = true;
};

using ParameterList = std::vector<NamedParameter>;

struct AdamWOptions {
  double weight_decay = 0.02;
  std::pair<double, double> betas{0.9, 0.999};
  double epsilon = 1e-8;
};

// First/second moments per parameter plus the shared step counter.
class OptimizerState {
 public:
  explicit OptimizerState(AdamWOptions options = {}) : options_(options) {}

  const AdamWOptions& options() const noexcept { return options_; }
  std::int64_t step() const noexcept { return step_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  friend void adamw_step(ParameterList& params, OptimizerState& state, double lr);

  AdamWOptions options_;
  std::int64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// One AdamW update using each parameter's accumulated gradient (absent grad
// counts as zero). Refuses the whole update with NumericError if any gradient
// entry is non-finite; parameters and state are left untouched in that case.
void adamw_step(ParameterList& params, OptimizerState& state, double lr);

void zero_grads(ParameterList& params);

// Linear warmup from 0 to peak_lr over warmup_epochs, then cosine decay to
// final_lr at total_epochs. Epochs are real-valued so step-level schedules
// can pass fractional positions.
struct LrSchedule {
  double warmup_epochs = 10;
  double peak_lr = 1e-5;
  double final_lr = 1e-6;
  double total_epochs = 30;
};

double lr_at(const LrSchedule& schedule, double epoch);

}  // namespace alwig
