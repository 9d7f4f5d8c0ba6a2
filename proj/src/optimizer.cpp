#include "speechgrade/optimizer.hpp"

#include <cmath>

#include "speechgrade/errors.hpp"

namespace sg {

void AdamState::init(const std::vector<Tensor>& params) {
  first_moment.clear();
  second_moment.clear();
  first_moment.reserve(params.size());
  second_moment.reserve(params.size());
  for (const Tensor& p : params) {
    first_moment.emplace_back(p.numel(), 0.0);
    second_moment.emplace_back(p.numel(), 0.0);
  }
  step = 0;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (!state.initialized()) state.init(params);
  if (state.first_moment.size() != params.size())
    throw DimensionError("adam_step: state tracks " +
                         std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    auto& m = state.first_moment[pi];
    auto& v = state.second_moment[pi];
    if (m.size() != p.numel())
      throw DimensionError("adam_step: moment size " + std::to_string(m.size()) +
                           " does not match parameter " +
                           shape_to_string(p.shape()));
    const std::vector<double>& g = p.grad();
    bool all_zero = true;
    for (double gi : g)
      if (gi != 0.0) {
        all_zero = false;
        break;
      }
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    }
    if (all_zero) continue;  // moments decay only
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.data()[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace sg
