#include "gesturegan/networks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

namespace gesturegan {

namespace {

constexpr float kInitStd = 0.02f;
constexpr float kLeakySlope = 0.2f;

nn::Tensor normal_tensor(nn::Shape shape, double mean, double stddev, Rng& rng) {
  nn::Tensor t(shape);
  for (float& v : t.span()) {
    v = static_cast<float>(mean + stddev * rng.normal());
  }
  return t;
}

nn::Var add_param(nn::ParameterList& params, std::string name, nn::Tensor value,
                  bool trainable = true) {
  nn::Var v(std::move(value), trainable);
  params.push_back({std::move(name), v});
  return v;
}

int level_width(int base, int level) { return base * std::min(1 << level, 8); }

}  // namespace

int GeneratorConfig::resolved_depth() const {
  if (depth > 0) return depth;
  if (image_size <= 0 || !std::has_single_bit(static_cast<unsigned>(image_size))) return 0;
  return std::countr_zero(static_cast<unsigned>(image_size));
}

void GeneratorConfig::validate() const {
  const int d = resolved_depth();
  if (image_size <= 0 || !std::has_single_bit(static_cast<unsigned>(image_size))) {
    throw std::invalid_argument("generator: image_size must be a power of two");
  }
  if (d < 3) {
    throw std::invalid_argument("generator: depth must be >= 3");
  }
  if ((image_size >> d) < 1 || ((image_size >> d) << d) != image_size) {
    throw std::invalid_argument("generator: image_size must be divisible by 2^depth");
  }
  if (image_channels <= 0 || map_channels <= 0 || base_width <= 0) {
    throw std::invalid_argument("generator: channel counts must be positive");
  }
  // The output is fed back in as an image for the cycle pass.
  if (out_channels != image_channels) {
    throw std::invalid_argument("generator: out_channels must equal image_channels");
  }
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) {
    throw std::invalid_argument("generator: dropout_rate must be in [0,1)");
  }
}

Generator::Generator(GeneratorConfig config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  const int depth = config_.resolved_depth();
  config_.depth = depth;
  Rng rng(init_seed);
  const int base = config_.base_width;

  for (int l = 0; l < depth; ++l) {
    const int in = l == 0 ? config_.in_channels() : level_width(base, l - 1);
    const int out = level_width(base, l);
    const std::string name = "down" + std::to_string(l);
    Conv c;
    c.weight = add_param(params_, name + ".weight", normal_tensor({out, in, 4, 4}, 0.0, kInitStd, rng));
    c.bias = add_param(params_, name + ".bias", nn::Tensor({1, out, 1, 1}));
    down_.push_back(c);
    if (l > 0 && l < depth - 1) {
      Norm n;
      n.gamma = add_param(params_, name + ".norm.gamma",
                          normal_tensor({1, out, 1, 1}, 1.0, kInitStd, rng));
      n.beta = add_param(params_, name + ".norm.beta", nn::Tensor({1, out, 1, 1}));
      down_norm_.push_back(n);
    } else {
      down_norm_.push_back(std::nullopt);
    }
  }

  up_.resize(static_cast<std::size_t>(depth));
  up_norm_.resize(static_cast<std::size_t>(depth));
  for (int l = depth - 1; l >= 1; --l) {
    const int in = l == depth - 1 ? level_width(base, l) : 2 * level_width(base, l);
    const int out = level_width(base, l - 1);
    const std::string name = "up" + std::to_string(l);
    Conv c;
    c.weight = add_param(params_, name + ".weight", normal_tensor({in, out, 4, 4}, 0.0, kInitStd, rng));
    c.bias = add_param(params_, name + ".bias", nn::Tensor({1, out, 1, 1}));
    up_[static_cast<std::size_t>(l)] = c;
    Norm n;
    n.gamma = add_param(params_, name + ".norm.gamma", normal_tensor({1, out, 1, 1}, 1.0, kInitStd, rng));
    n.beta = add_param(params_, name + ".norm.beta", nn::Tensor({1, out, 1, 1}));
    up_norm_[static_cast<std::size_t>(l)] = n;
  }

  const int head_in = 2 * level_width(base, 0);
  const int heads = config_.per_channel_heads ? config_.out_channels : 1;
  const int head_out = config_.per_channel_heads ? 1 : config_.out_channels;
  for (int h = 0; h < heads; ++h) {
    const std::string name = "head" + std::to_string(h);
    Conv c;
    c.weight = add_param(params_, name + ".weight",
                         normal_tensor({head_in, head_out, 4, 4}, 0.0, kInitStd, rng));
    c.bias = add_param(params_, name + ".bias", nn::Tensor({1, head_out, 1, 1}));
    heads_.push_back(c);
  }
}

nn::Var Generator::forward(const nn::Var& image, const nn::Var& cond,
                           std::optional<std::uint64_t> dropout_seed) const {
  const nn::Shape is = image.shape();
  const nn::Shape cs = cond.shape();
  if (is.c != config_.image_channels || cs.c != config_.map_channels) {
    throw nn::ShapeError("generator: expected " + std::to_string(config_.image_channels) +
                         "-channel image and " + std::to_string(config_.map_channels) +
                         "-channel map, got " + is.str() + " and " + cs.str());
  }
  if (is.n != cs.n || is.h != cs.h || is.w != cs.w) {
    throw nn::ShapeError("generator: image " + is.str() + " and map " + cs.str() +
                         " differ in batch or spatial size");
  }
  if (is.h != config_.image_size || is.w != config_.image_size) {
    throw nn::ShapeError("generator: expected " + std::to_string(config_.image_size) +
                         " px square input, got " + is.str());
  }

  const int depth = config_.depth;
  const nn::Conv2dOptions down_opt{2, 1};
  std::vector<nn::Var> skips;
  skips.reserve(static_cast<std::size_t>(depth));
  nn::Var h = nn::concat_channels(image, cond);
  for (int l = 0; l < depth; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    if (l > 0) h = nn::leaky_relu(h, kLeakySlope);
    h = nn::conv2d(h, down_[idx].weight, down_[idx].bias, down_opt);
    if (down_norm_[idx]) h = nn::instance_norm(h, down_norm_[idx]->gamma, down_norm_[idx]->beta);
    skips.push_back(h);
  }

  std::optional<Rng> rng;
  if (dropout_seed) rng.emplace(*dropout_seed);
  for (int l = depth - 1; l >= 1; --l) {
    const auto idx = static_cast<std::size_t>(l);
    h = nn::relu(h);
    h = nn::conv_transpose2d(h, up_[idx].weight, up_[idx].bias, down_opt);
    h = nn::instance_norm(h, up_norm_[idx]->gamma, up_norm_[idx]->beta);
    if (rng && l >= depth - config_.dropout_levels) {
      h = nn::dropout(h, config_.dropout_rate, *rng);
    }
    h = nn::concat_channels(h, skips[idx - 1]);
  }

  h = nn::relu(h);
  nn::Var out;
  for (const Conv& head : heads_) {
    nn::Var y = nn::conv_transpose2d(h, head.weight, head.bias, down_opt);
    out = out.defined() ? nn::concat_channels(out, y) : y;
  }
  return nn::tanh(out);
}

void DiscriminatorConfig::validate() const {
  if (in_channels <= 0 || base_width <= 0 || num_scales < 1) {
    throw std::invalid_argument("discriminator: invalid configuration");
  }
}

int DiscriminatorConfig::score_size(int input_size) const {
  int s = input_size;
  for (int k = 0; k < num_scales; ++k) s = (s + 2 - 4) / 2 + 1;
  s = s + 2 - 4 + 1;
  s = s + 2 - 4 + 1;
  return s;
}

int DiscriminatorConfig::receptive_field() const {
  // Walk back from one score: two stride-1 k4 layers, then stride-2 k4 layers.
  int rf = 1;
  rf = rf + 3;
  rf = rf + 3;
  for (int k = 0; k < num_scales; ++k) rf = 2 * (rf - 1) + 4;
  return rf;
}

Discriminator::Discriminator(DiscriminatorConfig config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  int in = config_.in_channels;
  const int layers = config_.num_scales + 2;
  for (int k = 0; k < layers; ++k) {
    const int out = k == layers - 1 ? 1 : level_width(config_.base_width, k);
    const std::string name = "conv" + std::to_string(k);
    add_param(params_, name + ".weight", normal_tensor({out, in, 4, 4}, 0.0, kInitStd, rng));
    add_param(params_, name + ".bias", nn::Tensor({1, out, 1, 1}));
    in = out;
  }
}

nn::Var Discriminator::forward(const nn::Var& cond_input, const nn::Var& candidate) const {
  nn::Var h = nn::concat_channels(cond_input, candidate);
  if (h.shape().c != config_.in_channels) {
    throw nn::ShapeError("discriminator: expected " + std::to_string(config_.in_channels) +
                         " input channels, got " + std::to_string(h.shape().c));
  }
  const int layers = config_.num_scales + 2;
  for (int k = 0; k < layers; ++k) {
    const auto& w = params_[static_cast<std::size_t>(2 * k)].var;
    const auto& b = params_[static_cast<std::size_t>(2 * k + 1)].var;
    const int stride = k < config_.num_scales ? 2 : 1;
    h = nn::conv2d(h, w, b, {stride, 1});
    if (k < layers - 1) h = nn::leaky_relu(h, kLeakySlope);
  }
  return h;
}

double mean_decision(const nn::Tensor& raw_scores) {
  double acc = 0.0;
  for (float v : raw_scores.span()) acc += 1.0 / (1.0 + std::exp(-static_cast<double>(v)));
  return acc / static_cast<double>(raw_scores.numel());
}

namespace {

struct ExtractorLayer {
  const char* name;
  int in;
  int out;
  int kernel;
  int stride;
  int padding;
};
constexpr ExtractorLayer kExtractorLayers[] = {
    {"feat0", 3, 16, 3, 1, 1},
    {"feat1", 16, 32, 4, 2, 1},
    {"feat2", 32, 32, 4, 2, 1},
};

}  // namespace

FeatureExtractor FeatureExtractor::seeded_random(std::uint64_t seed) {
  FeatureExtractor fx;
  Rng rng(seed);
  for (const auto& l : kExtractorLayers) {
    const double fan_in = static_cast<double>(l.in * l.kernel * l.kernel);
    add_param(fx.params_, std::string(l.name) + ".weight",
              normal_tensor({l.out, l.in, l.kernel, l.kernel}, 0.0, std::sqrt(2.0 / fan_in), rng),
              false);
    add_param(fx.params_, std::string(l.name) + ".bias", nn::Tensor({1, l.out, 1, 1}), false);
  }
  fx.provenance_ = "seeded-random:" + std::to_string(seed);
  return fx;
}

FeatureExtractor FeatureExtractor::pretrained(const std::string& path) {
  FeatureExtractor fx = seeded_random(0);
  import_parameters(fx.params_, read_tensor_file(path), "feature extractor");
  fx.provenance_ = "pretrained:" + path;
  return fx;
}

nn::Var FeatureExtractor::operator()(const nn::Var& image) const {
  const nn::Shape s = image.shape();
  if (s.c != 3 || s.h < 4 || s.w < 4 || s.h % 4 != 0 || s.w % 4 != 0) {
    throw nn::ShapeError("feature extractor: unsupported input " + s.str() +
                         " (needs 3 channels, sides divisible by 4)");
  }
  nn::Var h = image;
  for (std::size_t k = 0; k < std::size(kExtractorLayers); ++k) {
    const auto& l = kExtractorLayers[k];
    h = nn::conv2d(h, params_[2 * k].var, params_[2 * k + 1].var, {l.stride, l.padding});
    if (k + 1 < std::size(kExtractorLayers)) h = nn::leaky_relu(h, kLeakySlope);
  }
  return h;
}

std::vector<NamedTensor> export_parameters(const nn::ParameterList& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.var.value()});
  return out;
}

void import_parameters(const nn::ParameterList& params, const std::vector<NamedTensor>& tensors,
                       const std::string& what) {
  std::map<std::string, const nn::Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t.tensor;
  if (by_name.size() != params.size()) {
    throw FormatError(what + ": expected " + std::to_string(params.size()) + " tensors, found " +
                      std::to_string(by_name.size()));
  }
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw FormatError(what + ": missing tensor '" + p.name + "'");
    }
    if (it->second->shape() != p.var.shape()) {
      throw FormatError(what + ": tensor '" + p.name + "' has shape " + it->second->shape().str() +
                        ", expected " + p.var.shape().str());
    }
    const_cast<nn::Var&>(p.var).mutable_value() = *it->second;
  }
}

}  // namespace gesturegan
