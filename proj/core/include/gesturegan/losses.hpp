#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "gesturegan/autograd.hpp"
#include "gesturegan/conditioning.hpp"

namespace gesturegan::losses {

enum class Norm { L1, L2 };
std::string_view to_string(Norm n);
std::optional<Norm> parse_norm(std::string_view s);

inline constexpr double kBceEpsilon = 1e-7;

// Weights of the generator objective
//   adv + lambda1 * color + lambda2 * cycle + lambda3 * identity.
struct LossWeights {
  double lambda1 = 100.0;
  double lambda2 = 10.0;
  double lambda3 = 0.1;
  Norm color_norm = Norm::L1;
  ConditioningVariant conditioning = ConditioningVariant::skeleton;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Per-step loss values. Each term already sums both translation directions
// (x->y and y->x); the per-direction parts are kept alongside.
struct LossBreakdown {
  double adv_g = 0.0;
  double adv_d = 0.0;
  double color = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double total = 0.0;
  double lambda3 = 0.0;

  double adv_g_xy = 0.0, adv_g_yx = 0.0;
  double color_xy = 0.0, color_yx = 0.0;
  double cycle_x = 0.0, cycle_y = 0.0;
  double identity_xy = 0.0, identity_yx = 0.0;

  static std::string csv_header();  // step,adv_g,adv_d,color,cycle,identity,total,lambda3
  std::string csv_row(long step) const;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

// ---- value API (double precision) ----------------------------------------

// Mean binary cross entropy of probabilities against a 0/1 target, with
// predictions clamped to [eps, 1 - eps].
double bce(std::span<const float> probabilities, int target);

// Dual-discriminator objective on probability grids:
//   1/2 [bce(D1 real,1) + bce(D1 fake,0)] + 1/2 [bce(D2 real,1) + bce(D2 fake,0)].
double adversarial_d_loss(const nn::Tensor& d1_real, const nn::Tensor& d1_fake,
                          const nn::Tensor& d2_real, const nn::Tensor& d2_fake);
// Single-pair form 1/2 [bce(real,1) + bce(fake,0)].
double adversarial_d_loss(const nn::Tensor& real, const nn::Tensor& fake);
// Non-saturating generator objective bce(D1 fake,1) + bce(D2 fake,1).
double adversarial_g_loss(const nn::Tensor& d1_fake, const nn::Tensor& d2_fake);

// Whole-image reconstruction loss. L1: mean |pred - target| over all elements.
// L2: per sample sqrt of the joint sum of squares over all channels, divided
// by the per-sample element count, averaged over the batch.
double pixel_loss(const nn::Tensor& pred, const nn::Tensor& target, Norm norm);

// Channel-separated loss: for each channel c the norm only sees channel c.
// L1: sum over channels of the per-channel mean |r|. L2: per sample
// sum_c sqrt(sum_hw r_c^2) / (H*W), averaged over the batch.
double color_loss(const nn::Tensor& pred, const nn::Tensor& target, Norm norm);

// Unnormalised norm cores (raw sums as written in the objective), used for
// the analytic checks and the gradient probe.
enum class Reconstruction { pixel_l1, pixel_l2, color_l1, color_l2 };
double reconstruction_core(Reconstruction kind, const nn::Tensor& pred, const nn::Tensor& target);
double reconstruction_core(Reconstruction kind, std::span<const double> residual, nn::Shape shape);

// Change in d(core)/d(pred) restricted to `channel_measured` when the residual
// of `channel_perturbed` is shifted by `perturbation`. Derivatives are central
// finite differences (step 1e-4) in double precision. Returns the largest
// absolute change over the measured channel's elements.
// Throws std::domain_error at non-differentiable points (zero L2 residual, or
// an L1 residual within one step of zero).
double cross_channel_gradient_probe(Reconstruction kind, const nn::Tensor& pred,
                                    const nn::Tensor& target, int channel_perturbed,
                                    int channel_measured, double perturbation = 1.0);

// lambda-weighted recombination (exact in double).
struct LossParts {
  double adv = 0.0;
  double color = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
};
double total_generator_loss(const LossParts& parts, const LossWeights& weights);

// ---- autograd API -----------------------------------------------------------

using GeneratorFn = std::function<nn::Var(const nn::Var& image, const nn::Var& cond)>;
using FeatureFn = std::function<nn::Var(const nn::Var& image)>;

nn::Var bce(const nn::Var& probabilities, int target);
nn::Var adversarial_d_loss(const nn::Var& d1_real, const nn::Var& d1_fake, const nn::Var& d2_real,
                           const nn::Var& d2_fake);
nn::Var adversarial_g_loss(const nn::Var& d1_fake, const nn::Var& d2_fake);
nn::Var pixel_loss(const nn::Var& pred, const nn::Var& target, Norm norm);
nn::Var color_loss(const nn::Var& pred, const nn::Var& target, Norm norm);
nn::Var mean_l1(const nn::Var& a, const nn::Var& b);

// mean|x - G(G(x, S_y), S_x)| + mean|y - G(G(y, S_x), S_y)| with one shared G.
// `noise_a` / `noise_b` are the same generator under the two dropout draws of
// a step: x->y uses noise_a and y->x uses noise_b, in both nesting levels.
nn::Var cycle_loss(const nn::Var& x, const nn::Var& y, const nn::Var& map_x, const nn::Var& map_y,
                   const GeneratorFn& noise_a, const GeneratorFn& noise_b);
nn::Var cycle_loss(const nn::Var& x, const nn::Var& y, const nn::Var& map_x, const nn::Var& map_y,
                   const GeneratorFn& generator);
// Same value when the first-pass translations G(x,S_y) and G(y,S_x) already exist.
nn::Var cycle_loss_from(const nn::Var& x, const nn::Var& y, const nn::Var& generated_xy,
                        const nn::Var& generated_yx, const nn::Var& map_x, const nn::Var& map_y,
                        const GeneratorFn& noise_a, const GeneratorFn& noise_b);

// mean|F(y) - F(G(x,S_y))| + mean|F(x) - F(G(y,S_x))|.
nn::Var identity_loss(const nn::Var& x, const nn::Var& y, const nn::Var& generated_xy,
                      const nn::Var& generated_yx, const FeatureFn& extractor);

nn::Var total_generator_loss(const nn::Var& adv, const nn::Var& color, const nn::Var& cycle,
                             const nn::Var& identity, const LossWeights& weights);

}  // namespace gesturegan::losses
