#include "gesturegan/training.hpp"

#include <cmath>
#include <ostream>

#include "gesturegan/serialization.hpp"

namespace gesturegan {

namespace {

// Stream labels for mix_seed.
constexpr std::uint64_t kStreamGenerator = 1;
constexpr std::uint64_t kStreamD1 = 2;
constexpr std::uint64_t kStreamD2 = 3;
constexpr std::uint64_t kStreamFeatures = 4;
constexpr std::uint64_t kStreamEpochOrder = 0x100;
constexpr std::uint64_t kStreamStep = 0x200;

nn::AdamOptions adam_options(const TrainConfig& c) {
  nn::AdamOptions o;
  o.learning_rate = static_cast<float>(c.learning_rate);
  o.beta1 = static_cast<float>(c.adam_beta1);
  o.beta2 = static_cast<float>(c.adam_beta2);
  return o;
}

nn::ParameterList concat(const nn::ParameterList& a, const nn::ParameterList& b, const std::string& pa,
                         const std::string& pb) {
  nn::ParameterList out;
  for (const auto& p : a) out.push_back({pa + p.name, p.var});
  for (const auto& p : b) out.push_back({pb + p.name, p.var});
  return out;
}

FeatureExtractor make_features(const TrainConfig& c) {
  return c.feature_weights.empty() ? FeatureExtractor::seeded_random(mix_seed(c.seed, kStreamFeatures))
                                   : FeatureExtractor::pretrained(c.feature_weights);
}

bool finite(const losses::LossBreakdown& b) {
  for (double v : {b.adv_g, b.adv_d, b.color, b.cycle, b.identity, b.total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  weights.validate();
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (!std::isfinite(lambda3_start) || !std::isfinite(lambda3_end) || lambda3_start < 0.0 || lambda3_end < 0.0) {
    throw std::invalid_argument("lambda3 schedule endpoints must be finite and >= 0");
  }
  if (image_size != generator.image_size) {
    throw std::invalid_argument("image_size (" + std::to_string(image_size) + ") differs from generator.image_size (" +
                                std::to_string(generator.image_size) + ")");
  }
  if (image_size % 4 != 0) throw std::invalid_argument("image_size must be a multiple of 4");
  if (discriminator.in_channels != generator.in_channels() + generator.out_channels) {
    throw std::invalid_argument("discriminator.in_channels must equal image + map + candidate channels");
  }
  if (generator.image_channels != 3 || generator.map_channels != 1) {
    throw std::invalid_argument("training expects RGB images and single-channel conditioning maps");
  }
  if (!(keypoint_radius >= 1.0) || !(line_width >= 1.0)) {
    throw std::invalid_argument("keypoint_radius and line_width must be >= 1");
  }
  generator.validate();
  discriminator.validate();
}

double lambda3_at(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs) {
    throw std::out_of_range("lambda3_at: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(config.epochs) + ")");
  }
  if (config.epochs == 1) return config.lambda3_start;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.lambda3_start + (config.lambda3_end - config.lambda3_start) * t;
}

Batch make_batch(const std::vector<TrainingExample>& examples) {
  if (examples.empty()) throw std::invalid_argument("make_batch: empty batch");
  std::vector<nn::Tensor> x, y, mx, my;
  for (const auto& e : examples) {
    x.push_back(e.x);
    y.push_back(e.y);
    mx.push_back(e.map_x);
    my.push_back(e.map_y);
  }
  return {nn::Tensor::stack(x), nn::Tensor::stack(y), nn::Tensor::stack(mx), nn::Tensor::stack(my), {}};
}

Trainer::Trainer(TrainConfig config, std::vector<GesturePair> train_pairs, LoaderOptions loader)
    : config_((config.validate(), std::move(config))),
      pairs_(std::move(train_pairs)),
      loader_(std::move(loader)),
      generator_(config_.generator, mix_seed(config_.seed, kStreamGenerator)),
      d1_(config_.discriminator, mix_seed(config_.seed, kStreamD1)),
      d2_(config_.discriminator, mix_seed(config_.seed, kStreamD2)),
      features_(make_features(config_)),
      opt_g_(generator_.parameters(), adam_options(config_)),
      opt_d_(concat(d1_.parameters(), d2_.parameters(), "D1.", "D2."), adam_options(config_)) {
  if (pairs_.empty()) throw std::invalid_argument("training needs at least one pair");
  loader_.image_size = config_.image_size;
  loader_.variant = config_.weights.conditioning;
  loader_.keypoint_radius = config_.keypoint_radius;
  loader_.line_width = config_.line_width;
}

long Trainer::steps_per_epoch() const {
  const long n = static_cast<long>(pairs_.size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

std::vector<std::size_t> Trainer::epoch_order(int epoch) const {
  std::vector<std::size_t> order(pairs_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(mix_seed(config_.seed, kStreamEpochOrder), static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
  return order;
}

Batch Trainer::next_batch() const {
  const long spe = steps_per_epoch();
  const int ep = static_cast<int>(step_ / spe);
  const long within = step_ % spe;
  const auto order = epoch_order(ep);
  const std::size_t begin = static_cast<std::size_t>(within) * static_cast<std::size_t>(config_.batch_size);
  const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
  Rng flips(mix_seed(mix_seed(config_.seed, kStreamStep), static_cast<std::uint64_t>(step_) * 2));
  std::vector<TrainingExample> examples;
  std::vector<std::string> ids;
  for (std::size_t i = begin; i < end; ++i) {
    const bool flip = flips.bernoulli(0.5) && config_.flip;
    examples.push_back(load_training_example(pairs_[order[i]], flip, loader_));
    ids.push_back(pairs_[order[i]].identifier());
  }
  Batch b = make_batch(examples);
  b.identifiers = std::move(ids);
  return b;
}

losses::LossBreakdown Trainer::train_step(const Batch& batch) {
  if (step_ >= total_steps()) throw std::logic_error("training schedule already finished");
  const int ep = epoch();
  const double lambda3 = lambda3_at(ep, config_);
  Rng noise(mix_seed(mix_seed(config_.seed, kStreamStep), static_cast<std::uint64_t>(step_) * 2 + 1));
  const std::uint64_t z_xy = noise.next_u64();
  const std::uint64_t z_yx = noise.next_u64();

  const nn::Var x = nn::Var::constant(batch.x);
  const nn::Var y = nn::Var::constant(batch.y);
  const nn::Var map_x = nn::Var::constant(batch.map_x);
  const nn::Var map_y = nn::Var::constant(batch.map_y);
  const nn::Var cond_xy = nn::concat_channels(x, map_y);
  const nn::Var cond_yx = nn::concat_channels(y, map_x);

  const nn::Var fake_y = generator_.forward(x, map_y, z_xy);
  const nn::Var fake_x = generator_.forward(y, map_x, z_yx);

  // Discriminator step on detached translations.
  opt_d_.zero_grad();
  const nn::Var adv_d = losses::adversarial_d_loss(
      nn::sigmoid(d1_.forward(cond_xy, y)), nn::sigmoid(d1_.forward(cond_xy, fake_y.detach())),
      nn::sigmoid(d2_.forward(cond_yx, x)), nn::sigmoid(d2_.forward(cond_yx, fake_x.detach())));

  losses::LossBreakdown out;
  out.adv_d = adv_d.item();
  out.lambda3 = lambda3;
  if (!std::isfinite(out.adv_d)) {
    throw NonFiniteLossError("non-finite discriminator loss at step " + std::to_string(step_ + 1), step_ + 1, out);
  }
  nn::backward(adv_d);
  opt_d_.step();

  // Generator step.
  opt_g_.zero_grad();
  const nn::Var p1 = nn::sigmoid(d1_.forward(cond_xy, fake_y));
  const nn::Var p2 = nn::sigmoid(d2_.forward(cond_yx, fake_x));
  const nn::Var adv_g = losses::adversarial_g_loss(p1, p2);
  const nn::Var color_xy = losses::color_loss(fake_y, y, config_.weights.color_norm);
  const nn::Var color_yx = losses::color_loss(fake_x, x, config_.weights.color_norm);
  const nn::Var color = nn::add(color_xy, color_yx);
  const losses::GeneratorFn g_xy = [&](const nn::Var& img, const nn::Var& cond) {
    return generator_.forward(img, cond, z_xy);
  };
  const losses::GeneratorFn g_yx = [&](const nn::Var& img, const nn::Var& cond) {
    return generator_.forward(img, cond, z_yx);
  };
  const nn::Var cycle = losses::cycle_loss_from(x, y, fake_y, fake_x, map_x, map_y, g_xy, g_yx);
  const nn::Var identity = losses::identity_loss(x, y, fake_y, fake_x, [&](const nn::Var& img) { return features_(img); });
  losses::LossWeights w = config_.weights;
  w.lambda3 = lambda3;
  const nn::Var total = losses::total_generator_loss(adv_g, color, cycle, identity, w);

  out.adv_g = adv_g.item();
  out.color = color.item();
  out.color_xy = color_xy.item();
  out.color_yx = color_yx.item();
  out.cycle = cycle.item();
  out.identity = identity.item();
  out.total = total.item();
  if (!finite(out)) {
    throw NonFiniteLossError("non-finite generator loss at step " + std::to_string(step_ + 1), step_ + 1, out);
  }
  nn::backward(total);
  opt_g_.step();

  ++step_;
  history_.push_back(out);
  return out;
}

losses::LossBreakdown Trainer::step_once() { return train_step(next_batch()); }

std::filesystem::path checkpoint_dir_name(const std::filesystem::path& out_dir, long step) {
  std::string digits = std::to_string(step);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return out_dir / "checkpoints" / ("step_" + digits);
}

FitResult fit(Trainer& trainer, const FitOptions& options) {
  FitResult result;
  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  const long total = trainer.total_steps();
  const long spe = trainer.steps_per_epoch();
  const long every = trainer.config().checkpoint_every;
  const auto save = [&] {
    const auto dir = checkpoint_dir_name(options.out_dir, trainer.step());
    trainer.save_checkpoint(dir);
    result.checkpoints.push_back(dir);
  };
  const auto write_losses = [&] {
    if (write) write_file_atomic(options.out_dir / "losses.csv", trainer.loss_csv());
  };

  while (trainer.step() < total) {
    if (options.stop_after_step >= 0 && trainer.step() >= options.stop_after_step) break;
    losses::LossBreakdown b;
    try {
      b = trainer.step_once();
    } catch (NonFiniteLossError& e) {
      if (write) {
        e.snapshot = options.out_dir / "nonfinite_snapshot";
        trainer.save_checkpoint(e.snapshot);
      }
      write_losses();
      throw;
    }
    result.history.push_back(b);
    if (options.on_step) options.on_step(trainer.step(), b);
    const bool scheduled = every > 0 && trainer.step() % every == 0;
    if (write && scheduled) save();
    if (trainer.step() % spe == 0 || trainer.step() == total) {
      write_losses();
      if (options.progress) {
        const long first = (trainer.step() - 1) / spe * spe;
        double sum = 0.0;
        for (long s = first; s < trainer.step(); ++s) sum += trainer.history()[static_cast<std::size_t>(s)].total;
        *options.progress << "progress epoch=" << (trainer.step() - 1) / spe + 1 << "/" << trainer.config().epochs
                          << " mean_total=" << sum / static_cast<double>(trainer.step() - first)
                          << " lambda3=" << b.lambda3 << std::endl;
      }
    }
  }
  write_losses();
  if (write && (result.checkpoints.empty() ||
                result.checkpoints.back() != checkpoint_dir_name(options.out_dir, trainer.step()))) {
    save();
  }
  return result;
}

nn::Tensor translate(const Generator& generator, const nn::Tensor& image, const nn::Tensor& map,
                     std::optional<std::uint64_t> dropout_seed) {
  return generator.forward(nn::Var::constant(image), nn::Var::constant(map), dropout_seed).value();
}

}  // namespace gesturegan
