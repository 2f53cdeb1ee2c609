#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gesturegan/autograd.hpp"
#include "gesturegan/serialization.hpp"

namespace gesturegan {

// U-shaped encoder/decoder: stride-2 4x4 convolutions down, mirrored
// transposed convolutions up, skip concatenation between encoder level l and
// the decoder level that restores its resolution. Output passes through tanh.
struct GeneratorConfig {
  int image_size = 64;
  int image_channels = 3;
  int map_channels = 1;
  int out_channels = 3;
  int base_width = 64;
  int depth = 0;  // 0 selects log2(image_size)
  float dropout_rate = 0.5f;
  int dropout_levels = 3;  // innermost decoder levels that apply dropout
  // Three single-channel output heads over a shared trunk instead of one
  // three-channel head.
  bool per_channel_heads = false;

  int in_channels() const { return image_channels + map_channels; }
  int resolved_depth() const;
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

// Patch classifier: `num_scales` stride-2 convolutions, one stride-1
// convolution, then a 1-channel stride-1 score layer. No normalisation layers,
// so every score depends only on its receptive field.
struct DiscriminatorConfig {
  int in_channels = 7;  // source image + conditioning map + candidate
  int num_scales = 3;
  int base_width = 64;

  void validate() const;
  // Side length of the score grid for a square input.
  int score_size(int input_size) const;
  int receptive_field() const;

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

class Generator {
public:
  Generator(GeneratorConfig config, std::uint64_t init_seed);

  // image {N,3,H,W} in [-1,1], cond {N,1,H,W}. With a dropout seed the pass is
  // stochastic (dropout active); without one it is deterministic.
  nn::Var forward(const nn::Var& image, const nn::Var& cond,
                  std::optional<std::uint64_t> dropout_seed) const;

  const GeneratorConfig& config() const { return config_; }
  const nn::ParameterList& parameters() const { return params_; }

  struct Conv {
    nn::Var weight;
    nn::Var bias;
  };
  struct Norm {
    nn::Var gamma;
    nn::Var beta;
  };

private:
  GeneratorConfig config_;
  nn::ParameterList params_;
  std::vector<Conv> down_;
  std::vector<std::optional<Norm>> down_norm_;
  std::vector<Conv> up_;  // up_[l] restores the resolution of encoder level l
  std::vector<std::optional<Norm>> up_norm_;
  std::vector<Conv> heads_;
};

class Discriminator {
public:
  Discriminator(DiscriminatorConfig config, std::uint64_t init_seed);

  // Raw (pre-sigmoid) patch scores {N,1,S,S} for candidate judged against
  // the conditioning stack (source image and target map).
  nn::Var forward(const nn::Var& cond_input, const nn::Var& candidate) const;

  const DiscriminatorConfig& config() const { return config_; }
  const nn::ParameterList& parameters() const { return params_; }

private:
  DiscriminatorConfig config_;
  nn::ParameterList params_;
};

// Mean of sigmoid(scores): the scalar decision reported in logs.
double mean_decision(const nn::Tensor& raw_scores);

// Frozen image -> feature map mapping used by the identity loss. Parameters
// never require gradients; gradients still flow to the input image.
class FeatureExtractor {
public:
  // Seeded random convolutional stack (3 layers, 32 output channels, /4).
  static FeatureExtractor seeded_random(std::uint64_t seed);
  // Same architecture with weights read from a tensor file.
  static FeatureExtractor pretrained(const std::string& path);

  nn::Var operator()(const nn::Var& image) const;
  const std::string& provenance() const { return provenance_; }
  const nn::ParameterList& parameters() const { return params_; }

private:
  FeatureExtractor() = default;
  nn::ParameterList params_;
  std::string provenance_;
};

// Parameter <-> tensor-file bridging (names and shapes must match on load).
std::vector<NamedTensor> export_parameters(const nn::ParameterList& params);
void import_parameters(const nn::ParameterList& params, const std::vector<NamedTensor>& tensors,
                       const std::string& what);

}  // namespace gesturegan
