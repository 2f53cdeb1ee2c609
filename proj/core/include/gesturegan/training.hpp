#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gesturegan/adam.hpp"
#include "gesturegan/dataset.hpp"
#include "gesturegan/losses.hpp"
#include "gesturegan/networks.hpp"

namespace gesturegan {

struct TrainConfig {
  losses::LossWeights weights;
  double learning_rate = 0.0002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 0;
  int image_size = 64;
  long checkpoint_every = 0;  // steps; 0 keeps only the final checkpoint
  double lambda3_start = 0.1;
  double lambda3_end = 0.5;
  bool flip = true;  // left-right flip augmentation, drawn per example
  double keypoint_radius = kDefaultKeypointRadius;
  double line_width = kDefaultLineWidth;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  // Identity-loss feature extractor: empty means seeded-random, otherwise a
  // tensor file with pretrained weights.
  std::string feature_weights;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

// Linear from lambda3_start at epoch 0 to lambda3_end at epoch epochs-1
// (lambda3_start when epochs == 1). Throws std::out_of_range outside [0, epochs).
double lambda3_at(int epoch, const TrainConfig& config);

// Stacked minibatch: images {B,3,S,S}, maps {B,1,S,S}.
struct Batch {
  nn::Tensor x;
  nn::Tensor y;
  nn::Tensor map_x;
  nn::Tensor map_y;
  std::vector<std::string> identifiers;
};

Batch make_batch(const std::vector<TrainingExample>& examples);

class NonFiniteLossError : public std::runtime_error {
public:
  NonFiniteLossError(const std::string& what, long step, losses::LossBreakdown values)
      : std::runtime_error(what), step_(step), values_(values) {}
  long step() const { return step_; }
  const losses::LossBreakdown& values() const { return values_; }
  // Directory holding the state at the failing step, if one was written.
  std::filesystem::path snapshot;

private:
  long step_;
  losses::LossBreakdown values_;
};

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Owns G, D1, D2, both optimisers and the run counters. All randomness in a
// step (epoch order, flips, dropout) is derived from (seed, epoch, step), so a
// checkpoint of counters + parameters + moments pins the whole future run.
class Trainer {
public:
  Trainer(TrainConfig config, std::vector<GesturePair> train_pairs, LoaderOptions loader);

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const { return config_; }
  long steps_per_epoch() const;
  long total_steps() const { return steps_per_epoch() * config_.epochs; }
  long step() const { return step_; }  // completed steps
  int epoch() const { return static_cast<int>(step_ / steps_per_epoch()); }

  // Batch for the next step, drawn in seeded order.
  Batch next_batch() const;

  // One discriminator update then one generator update on `batch`.
  losses::LossBreakdown train_step(const Batch& batch);
  // next_batch + train_step.
  losses::LossBreakdown step_once();

  const Generator& generator() const { return generator_; }
  const Discriminator& discriminator_xy() const { return d1_; }
  const Discriminator& discriminator_yx() const { return d2_; }
  const nn::Adam& generator_optimizer() const { return opt_g_; }
  const nn::Adam& discriminator_optimizer() const { return opt_d_; }
  const FeatureExtractor& features() const { return features_; }
  const std::vector<losses::LossBreakdown>& history() const { return history_; }

  // Checkpoint directory: G.bin, D1.bin, D2.bin, adam_G.bin, adam_D.bin,
  // losses.csv and manifest.json. Written into a temporary sibling and
  // renamed into place.
  void save_checkpoint(const std::filesystem::path& dir) const;
  // Restores parameters, moments, counters and history. The checkpoint's
  // config must equal this trainer's config.
  void load_checkpoint(const std::filesystem::path& dir);

  std::string loss_csv() const;

private:
  std::vector<std::size_t> epoch_order(int epoch) const;

  TrainConfig config_;
  std::vector<GesturePair> pairs_;
  LoaderOptions loader_;
  Generator generator_;
  Discriminator d1_;
  Discriminator d2_;
  FeatureExtractor features_;
  nn::Adam opt_g_;
  nn::Adam opt_d_;
  long step_ = 0;
  std::vector<losses::LossBreakdown> history_;
};

struct FitOptions {
  std::filesystem::path out_dir;       // loss CSV and checkpoints; empty writes nothing
  std::ostream* progress = nullptr;    // one line per finished epoch
  long stop_after_step = -1;           // stop early once this many steps are done
  std::function<void(long, const losses::LossBreakdown&)> on_step;
};

struct FitResult {
  std::vector<losses::LossBreakdown> history;
  std::vector<std::filesystem::path> checkpoints;
};

// Runs the remaining steps of the schedule from trainer.step(). Writes
// <out>/losses.csv after every epoch and checkpoints to
// <out>/checkpoints/step_<N>. A non-finite loss saves <out>/nonfinite_snapshot
// and rethrows.
FitResult fit(Trainer& trainer, const FitOptions& options);

std::filesystem::path checkpoint_dir_name(const std::filesystem::path& out_dir, long step);

// Generator restored from a checkpoint directory (manifest + G.bin).
struct LoadedGenerator {
  TrainConfig config;
  std::unique_ptr<Generator> generator;
};
LoadedGenerator load_generator(const std::filesystem::path& checkpoint_dir);

// One generator pass. image {N,3,S,S} in [-1,1], map {N,1,S,S}.
nn::Tensor translate(const Generator& generator, const nn::Tensor& image, const nn::Tensor& map,
                     std::optional<std::uint64_t> dropout_seed);

}  // namespace gesturegan
