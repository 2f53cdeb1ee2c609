#include "gesturegan/losses.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gesturegan::losses {

namespace {

constexpr double kProbeStep = 1e-4;

std::vector<double> residual_of(const nn::Tensor& pred, const nn::Tensor& target) {
  nn::require_same_shape(pred, target, "reconstruction loss");
  std::vector<double> r(pred.numel());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = static_cast<double>(pred.data()[i]) - static_cast<double>(target.data()[i]);
  }
  return r;
}

// Value and (optionally) d/d(residual) of a reconstruction loss. `normalized`
// selects the mean-scaled training form over the raw core.
double reconstruction_kernel(Reconstruction kind, std::span<const double> r, nn::Shape s,
                             bool normalized, std::vector<double>* grad) {
  const std::size_t plane = s.plane();
  const std::size_t per_sample = static_cast<std::size_t>(s.c) * plane;
  if (grad) grad->assign(r.size(), 0.0);
  switch (kind) {
    case Reconstruction::pixel_l1:
    case Reconstruction::color_l1: {
      // color_l1 = sum_c mean_c|r| = C * mean|r|; the raw cores coincide.
      double acc = 0.0;
      for (double v : r) acc += std::fabs(v);
      double scale = 1.0;
      if (normalized) {
        scale = 1.0 / static_cast<double>(r.size());
        if (kind == Reconstruction::color_l1) scale *= s.c;
      }
      if (grad) {
        for (std::size_t i = 0; i < r.size(); ++i) {
          (*grad)[i] = r[i] > 0.0 ? scale : (r[i] < 0.0 ? -scale : 0.0);
        }
      }
      return acc * scale;
    }
    case Reconstruction::pixel_l2: {
      const double scale = normalized ? 1.0 / (static_cast<double>(per_sample) * s.n) : 1.0;
      double total = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const std::size_t base = static_cast<std::size_t>(n) * per_sample;
        double ss = 0.0;
        for (std::size_t i = 0; i < per_sample; ++i) ss += r[base + i] * r[base + i];
        const double norm = std::sqrt(ss);
        total += norm;
        if (grad && norm > 0.0) {
          for (std::size_t i = 0; i < per_sample; ++i) (*grad)[base + i] = scale * r[base + i] / norm;
        }
      }
      return total * scale;
    }
    case Reconstruction::color_l2: {
      const double scale = normalized ? 1.0 / (static_cast<double>(plane) * s.n) : 1.0;
      double total = 0.0;
      for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
          const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
          double ss = 0.0;
          for (std::size_t i = 0; i < plane; ++i) ss += r[base + i] * r[base + i];
          const double norm = std::sqrt(ss);
          total += norm;
          if (grad && norm > 0.0) {
            for (std::size_t i = 0; i < plane; ++i) (*grad)[base + i] = scale * r[base + i] / norm;
          }
        }
      }
      return total * scale;
    }
  }
  throw std::invalid_argument("unknown reconstruction kind");
}

Reconstruction kind_for(Norm norm, bool per_channel) {
  if (per_channel) return norm == Norm::L1 ? Reconstruction::color_l1 : Reconstruction::color_l2;
  return norm == Norm::L1 ? Reconstruction::pixel_l1 : Reconstruction::pixel_l2;
}

void require_rgb_pair(const nn::Shape& a, const nn::Shape& b) {
  if (a != b) throw nn::ShapeError("color_loss: shape mismatch " + a.str() + " vs " + b.str());
  if (a.c != 3) throw nn::ShapeError("color_loss: expected 3 channels, got " + a.str());
}

nn::Var reconstruction_var(Reconstruction kind, const nn::Var& pred, const nn::Var& target) {
  std::vector<double> r = residual_of(pred.value(), target.value());
  auto grad = std::make_shared<std::vector<double>>();
  const double value = reconstruction_kernel(kind, r, pred.shape(), true, grad.get());
  return nn::make_result(nn::Tensor::scalar(static_cast<float>(value)), {pred, target},
                         [grad](nn::Node& self) {
                           const double g = self.grad.data()[0];
                           nn::Node& p = *self.inputs[0];
                           nn::Node& t = *self.inputs[1];
                           if (p.requires_grad) {
                             float* gp = p.ensure_grad().data();
                             for (std::size_t i = 0; i < grad->size(); ++i)
                               gp[i] += static_cast<float>(g * (*grad)[i]);
                           }
                           if (t.requires_grad) {
                             float* gt = t.ensure_grad().data();
                             for (std::size_t i = 0; i < grad->size(); ++i)
                               gt[i] -= static_cast<float>(g * (*grad)[i]);
                           }
                         });
}

double bce_kernel(std::span<const float> probs, int target, std::vector<double>* grad) {
  if (target != 0 && target != 1) throw std::invalid_argument("bce: target must be 0 or 1");
  if (probs.empty()) throw std::invalid_argument("bce: empty prediction grid");
  const double n = static_cast<double>(probs.size());
  if (grad) grad->assign(probs.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
    acc += target == 1 ? -std::log(p) : -std::log(1.0 - p);
    if (grad && raw > kBceEpsilon && raw < 1.0 - kBceEpsilon) {
      (*grad)[i] = (target == 1 ? -1.0 / p : 1.0 / (1.0 - p)) / n;
    }
  }
  return acc / n;
}

}  // namespace

std::string_view to_string(Norm n) { return n == Norm::L1 ? "L1" : "L2"; }

std::optional<Norm> parse_norm(std::string_view s) {
  if (s == "L1" || s == "l1") return Norm::L1;
  if (s == "L2" || s == "l2") return Norm::L2;
  return std::nullopt;
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3 >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

std::string LossBreakdown::csv_header() {
  return "step,adv_g,adv_d,color,cycle,identity,total,lambda3";
}

std::string LossBreakdown::csv_row(long step) const {
  std::string row = std::to_string(step);
  char buf[32];
  for (double v : {adv_g, adv_d, color, cycle, identity, total, lambda3}) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    row += ',';
    row.append(buf, res.ptr);
  }
  return row;
}

double bce(std::span<const float> probabilities, int target) {
  return bce_kernel(probabilities, target, nullptr);
}

double adversarial_d_loss(const nn::Tensor& d1_real, const nn::Tensor& d1_fake,
                          const nn::Tensor& d2_real, const nn::Tensor& d2_fake) {
  return adversarial_d_loss(d1_real, d1_fake) + adversarial_d_loss(d2_real, d2_fake);
}

double adversarial_d_loss(const nn::Tensor& real, const nn::Tensor& fake) {
  return 0.5 * (bce(real.span(), 1) + bce(fake.span(), 0));
}

double adversarial_g_loss(const nn::Tensor& d1_fake, const nn::Tensor& d2_fake) {
  return bce(d1_fake.span(), 1) + bce(d2_fake.span(), 1);
}

double pixel_loss(const nn::Tensor& pred, const nn::Tensor& target, Norm norm) {
  const auto r = residual_of(pred, target);
  return reconstruction_kernel(kind_for(norm, false), r, pred.shape(), true, nullptr);
}

double color_loss(const nn::Tensor& pred, const nn::Tensor& target, Norm norm) {
  require_rgb_pair(pred.shape(), target.shape());
  const auto r = residual_of(pred, target);
  return reconstruction_kernel(kind_for(norm, true), r, pred.shape(), true, nullptr);
}

double reconstruction_core(Reconstruction kind, const nn::Tensor& pred, const nn::Tensor& target) {
  const auto r = residual_of(pred, target);
  return reconstruction_kernel(kind, r, pred.shape(), false, nullptr);
}

double reconstruction_core(Reconstruction kind, std::span<const double> residual, nn::Shape shape) {
  if (residual.size() != shape.numel()) {
    throw nn::ShapeError("reconstruction_core: residual size does not match " + shape.str());
  }
  return reconstruction_kernel(kind, residual, shape, false, nullptr);
}

double cross_channel_gradient_probe(Reconstruction kind, const nn::Tensor& pred,
                                    const nn::Tensor& target, int channel_perturbed,
                                    int channel_measured, double perturbation) {
  const nn::Shape s = pred.shape();
  if (channel_perturbed < 0 || channel_perturbed >= s.c || channel_measured < 0 ||
      channel_measured >= s.c || channel_perturbed == channel_measured) {
    throw std::invalid_argument("gradient probe: need two distinct channels in range");
  }
  std::vector<double> r = residual_of(pred, target);
  const std::size_t plane = s.plane();
  auto channel_index = [&](int n, int c, std::size_t i) {
    return (static_cast<std::size_t>(n) * s.c + c) * plane + i;
  };

  auto check_point = [&](const std::vector<double>& res) {
    for (int n = 0; n < s.n; ++n) {
      double measured_ss = 0.0;
      double joint_ss = 0.0;
      for (int c = 0; c < s.c; ++c) {
        for (std::size_t i = 0; i < plane; ++i) {
          const double v = res[channel_index(n, c, i)];
          joint_ss += v * v;
          if (c == channel_measured) {
            measured_ss += v * v;
            if ((kind == Reconstruction::pixel_l1 || kind == Reconstruction::color_l1) &&
                std::fabs(v) <= kProbeStep) {
              throw std::domain_error("gradient probe: L1 residual at the kink |r| = 0");
            }
          }
        }
      }
      if (kind == Reconstruction::color_l2 && measured_ss == 0.0) {
        throw std::domain_error("gradient probe: zero residual in measured channel (L2 root)");
      }
      if (kind == Reconstruction::pixel_l2 && joint_ss == 0.0) {
        throw std::domain_error("gradient probe: zero residual (L2 root)");
      }
    }
  };

  auto measured_gradient = [&](std::vector<double> res) {
    check_point(res);
    std::vector<double> g;
    for (int n = 0; n < s.n; ++n) {
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = channel_index(n, channel_measured, i);
        const double orig = res[k];
        res[k] = orig + kProbeStep;
        const double up = reconstruction_core(kind, res, s);
        res[k] = orig - kProbeStep;
        const double down = reconstruction_core(kind, res, s);
        res[k] = orig;
        g.push_back((up - down) / (2.0 * kProbeStep));
      }
    }
    return g;
  };

  const std::vector<double> before = measured_gradient(r);
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) r[channel_index(n, channel_perturbed, i)] += perturbation;
  }
  const std::vector<double> after = measured_gradient(r);
  double worst = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    worst = std::max(worst, std::fabs(after[i] - before[i]));
  }
  return worst;
}

double total_generator_loss(const LossParts& parts, const LossWeights& weights) {
  weights.validate();
  return parts.adv + weights.lambda1 * parts.color + weights.lambda2 * parts.cycle +
         weights.lambda3 * parts.identity;
}

nn::Var bce(const nn::Var& probabilities, int target) {
  auto grad = std::make_shared<std::vector<double>>();
  const double value = bce_kernel(probabilities.value().span(), target, grad.get());
  return nn::make_result(nn::Tensor::scalar(static_cast<float>(value)), {probabilities},
                         [grad](nn::Node& self) {
                           nn::Node& p = *self.inputs[0];
                           if (!p.requires_grad) return;
                           const double g = self.grad.data()[0];
                           float* gp = p.ensure_grad().data();
                           for (std::size_t i = 0; i < grad->size(); ++i)
                             gp[i] += static_cast<float>(g * (*grad)[i]);
                         });
}

nn::Var adversarial_d_loss(const nn::Var& d1_real, const nn::Var& d1_fake, const nn::Var& d2_real,
                           const nn::Var& d2_fake) {
  nn::Var first = nn::scale(nn::add(bce(d1_real, 1), bce(d1_fake, 0)), 0.5f);
  nn::Var second = nn::scale(nn::add(bce(d2_real, 1), bce(d2_fake, 0)), 0.5f);
  return nn::add(first, second);
}

nn::Var adversarial_g_loss(const nn::Var& d1_fake, const nn::Var& d2_fake) {
  return nn::add(bce(d1_fake, 1), bce(d2_fake, 1));
}

nn::Var pixel_loss(const nn::Var& pred, const nn::Var& target, Norm norm) {
  return reconstruction_var(kind_for(norm, false), pred, target);
}

nn::Var color_loss(const nn::Var& pred, const nn::Var& target, Norm norm) {
  require_rgb_pair(pred.shape(), target.shape());
  return reconstruction_var(kind_for(norm, true), pred, target);
}

nn::Var mean_l1(const nn::Var& a, const nn::Var& b) {
  return reconstruction_var(Reconstruction::pixel_l1, a, b);
}

nn::Var cycle_loss_from(const nn::Var& x, const nn::Var& y, const nn::Var& generated_xy,
                        const nn::Var& generated_yx, const nn::Var& map_x, const nn::Var& map_y,
                        const GeneratorFn& noise_a, const GeneratorFn& noise_b) {
  const nn::Var reconstructed_x = noise_b(generated_xy, map_x);
  const nn::Var reconstructed_y = noise_a(generated_yx, map_y);
  return nn::add(mean_l1(x, reconstructed_x), mean_l1(y, reconstructed_y));
}

nn::Var cycle_loss(const nn::Var& x, const nn::Var& y, const nn::Var& map_x, const nn::Var& map_y,
                   const GeneratorFn& noise_a, const GeneratorFn& noise_b) {
  const nn::Var generated_xy = noise_a(x, map_y);
  const nn::Var generated_yx = noise_b(y, map_x);
  return cycle_loss_from(x, y, generated_xy, generated_yx, map_x, map_y, noise_a, noise_b);
}

nn::Var cycle_loss(const nn::Var& x, const nn::Var& y, const nn::Var& map_x, const nn::Var& map_y,
                   const GeneratorFn& generator) {
  return cycle_loss(x, y, map_x, map_y, generator, generator);
}

nn::Var identity_loss(const nn::Var& x, const nn::Var& y, const nn::Var& generated_xy,
                      const nn::Var& generated_yx, const FeatureFn& extractor) {
  const nn::Var fy = extractor(y.detach());
  const nn::Var fx = extractor(x.detach());
  return nn::add(mean_l1(fy, extractor(generated_xy)), mean_l1(fx, extractor(generated_yx)));
}

nn::Var total_generator_loss(const nn::Var& adv, const nn::Var& color, const nn::Var& cycle,
                             const nn::Var& identity, const LossWeights& weights) {
  weights.validate();
  nn::Var total = nn::add(adv, nn::scale(color, static_cast<float>(weights.lambda1)));
  total = nn::add(total, nn::scale(cycle, static_cast<float>(weights.lambda2)));
  return nn::add(total, nn::scale(identity, static_cast<float>(weights.lambda3)));
}

}  // namespace gesturegan::losses
