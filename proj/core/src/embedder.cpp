#include "gesturegan/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gesturegan/networks.hpp"
#include "gesturegan/rng.hpp"
#include "gesturegan/serialization.hpp"

namespace gesturegan {

namespace {

struct Layer {
  int in, out, kernel, stride, padding;
};
constexpr Layer kLayers[] = {{3, 16, 4, 2, 1}, {16, 32, 4, 2, 1}, {32, 64, 4, 2, 1}, {64, 128, 3, 1, 1}};
constexpr int kPooled = 128;

nn::Tensor he_normal(nn::Shape shape, int fan_in, Rng& rng) {
  nn::Tensor t(shape);
  const double std = std::sqrt(2.0 / fan_in);
  for (float& v : t.values()) v = static_cast<float>(rng.normal() * std);
  return t;
}

}  // namespace

std::string to_string(EmbedderKind kind) {
  return kind == EmbedderKind::pretrained ? "pretrained" : "seeded-random";
}

EmbedderKind parse_embedder_kind(const std::string& s) {
  if (s == "seeded-random") return EmbedderKind::seeded_random;
  if (s == "pretrained") return EmbedderKind::pretrained;
  throw std::invalid_argument("embedder kind must be 'seeded-random' or 'pretrained', got '" + s + "'");
}

void EmbedderSpec::validate() const {
  if (feature_dim < 1 || num_classes < 2) {
    throw std::invalid_argument("embedder: feature_dim >= 1 and num_classes >= 2 required");
  }
  if (kind == EmbedderKind::pretrained && weights.empty()) {
    throw std::invalid_argument("embedder: pretrained kind needs a weights path");
  }
}

Embedder::Embedder(const EmbedderSpec& spec) : spec_(spec) {
  spec_.validate();
  Rng rng(spec_.seed);
  for (std::size_t k = 0; k < std::size(kLayers); ++k) {
    const Layer& l = kLayers[k];
    const std::string name = "conv" + std::to_string(k);
    params_.push_back({name + ".weight", nn::Var::constant(he_normal({l.out, l.in, l.kernel, l.kernel},
                                                                     l.in * l.kernel * l.kernel, rng))});
    params_.push_back({name + ".bias", nn::Var::constant(nn::Tensor({1, l.out, 1, 1}))});
  }
  params_.push_back({"feature.weight", nn::Var::constant(he_normal({spec_.feature_dim, kPooled, 1, 1}, kPooled, rng))});
  params_.push_back({"feature.bias", nn::Var::constant(nn::Tensor({1, spec_.feature_dim, 1, 1}))});
  params_.push_back({"classes.weight", nn::Var::constant(he_normal({spec_.num_classes, spec_.feature_dim, 1, 1},
                                                                   spec_.feature_dim, rng))});
  params_.push_back({"classes.bias", nn::Var::constant(nn::Tensor({1, spec_.num_classes, 1, 1}))});

  if (spec_.kind == EmbedderKind::pretrained) {
    if (!std::filesystem::exists(spec_.weights)) {
      throw EmbedderError("embedder weights not found: " + spec_.weights +
                          "");
    }
    try {
      import_parameters(params_, read_tensor_file(spec_.weights), "embedder");
    } catch (const std::exception& e) {
      throw EmbedderError(std::string("cannot load embedder weights: ") + e.what());
    }
  }
}

std::vector<double> Embedder::features(const Image8& image) const {
  const Image8 rgb = resize_area(to_rgb(image), kInputSize, kInputSize);
  nn::Var h = nn::Var::constant(image_to_tensor(rgb));
  for (std::size_t k = 0; k < std::size(kLayers); ++k) {
    h = nn::conv2d(h, params_[2 * k].var, params_[2 * k + 1].var, {kLayers[k].stride, kLayers[k].padding});
    h = nn::leaky_relu(h, 0.2f);
  }
  h = nn::spatial_mean(h);
  const std::size_t f = 2 * std::size(kLayers);
  h = nn::linear(h, params_[f].var, params_[f + 1].var);
  const auto& v = h.value().values();
  return {v.begin(), v.end()};
}

std::vector<double> Embedder::probabilities(const std::vector<double>& features) const {
  if (features.size() != static_cast<std::size_t>(spec_.feature_dim)) {
    throw std::invalid_argument("embedder: feature vector has the wrong length");
  }
  const std::size_t f = 2 * std::size(kLayers) + 2;
  const nn::Tensor& w = params_[f].var.value();
  const nn::Tensor& b = params_[f + 1].var.value();
  const std::size_t classes = static_cast<std::size_t>(spec_.num_classes);
  std::vector<double> logits(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double acc = b.values()[c];
    for (std::size_t i = 0; i < features.size(); ++i) acc += w.values()[c * features.size() + i] * features[i];
    logits[c] = acc;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& l : logits) {
    l = std::exp(l - peak);
    sum += l;
  }
  for (double& l : logits) l /= sum;
  return logits;
}

}  // namespace gesturegan
