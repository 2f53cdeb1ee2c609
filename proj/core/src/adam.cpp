#include "gesturegan/adam.hpp"

#include <cmath>

namespace gesturegan::nn {

Adam::Adam(ParameterList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0f)) {
    throw std::invalid_argument("Adam: learning rate must be positive");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape(), 0.0f);
    v_.emplace_back(p.var.shape(), 0.0f);
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(options_.beta1), static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(options_.beta2), static_cast<double>(step_));
  const float step_size = static_cast<float>(options_.learning_rate / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float b1 = options_.beta1;
  const float b2 = options_.beta2;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var& var = const_cast<Var&>(params_[k].var);
    if (!var.has_grad()) {
      continue;
    }
    const float* g = var.grad().data();
    float* w = var.mutable_value().data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    const std::size_t n = m_[k].numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + options_.epsilon);
    }
  }
}

}  // namespace gesturegan::nn
