#pragma once

#include <cstdint>
#include <vector>

#include "gesturegan/autograd.hpp"

namespace gesturegan::nn {

struct AdamOptions {
  float learning_rate = 0.0002f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Adam with bias correction. Holds first/second moment buffers shaped like the
// parameters it was built over.
class Adam {
public:
  Adam(ParameterList params, AdamOptions options);

  void zero_grad() { zero_grads(params_); }
  // Applies one update from the current gradient buffers. Parameters that have
  // not received any gradient are left untouched but still advance nothing.
  void step();

  std::int64_t steps_taken() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const ParameterList& parameters() const { return params_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  void set_steps_taken(std::int64_t t) { step_ = t; }

private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t step_ = 0;
};

}  // namespace gesturegan::nn
