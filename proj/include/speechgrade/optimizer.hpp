#pragma once

#include <cstdint>
#include <vector>

#include "speechgrade/tensor.hpp"

namespace sg {

// Adam with bias correction. Moment arrays are kept per parameter, congruent
// with the parameter shapes; step increases by exactly 1 per apply.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  void init(const std::vector<Tensor>& params);
  bool initialized() const { return !first_moment.empty(); }
};

// Applies one Adam update using each parameter's populated gradient. A
// parameter whose gradient is entirely zero gets moment decay only and is
// left unchanged.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace sg
