#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gesturegan/autograd.hpp"
#include "gesturegan/image.hpp"

namespace gesturegan {

class EmbedderError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class EmbedderKind { seeded_random, pretrained };
std::string to_string(EmbedderKind kind);
EmbedderKind parse_embedder_kind(const std::string& s);  // "seeded-random" | "pretrained"

struct EmbedderSpec {
  EmbedderKind kind = EmbedderKind::seeded_random;
  std::uint64_t seed = 0;
  int feature_dim = 1000;
  int num_classes = 1000;
  std::string weights;  // tensor file, pretrained only

  void validate() const;
  friend bool operator==(const EmbedderSpec&, const EmbedderSpec&) = default;
};

// Frozen image classifier stand-in: conv stack -> global pool -> feature
// vector -> softmax class head. Inputs are resized to 64x64 first.
class Embedder {
public:
  static constexpr int kInputSize = 64;

  explicit Embedder(const EmbedderSpec& spec);

  const EmbedderSpec& spec() const { return spec_; }

  std::vector<double> features(const Image8& image) const;
  // Softmax over the class head applied to `features`.
  std::vector<double> probabilities(const std::vector<double>& features) const;

  // Parameter names and shapes a pretrained weight file must provide.
  const nn::ParameterList& parameters() const { return params_; }

private:
  EmbedderSpec spec_;
  nn::ParameterList params_;
};

}  // namespace gesturegan
