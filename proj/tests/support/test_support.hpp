#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include "gesturegan/autograd.hpp"
#include "gesturegan/conditioning.hpp"
#include "gesturegan/hand_annotations.hpp"
#include "gesturegan/rng.hpp"
#include "gesturegan/synthetic_corpus.hpp"
#include "gesturegan/training.hpp"

namespace testing {

using namespace gesturegan;

class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("gesturegan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
  std::filesystem::path path_;
};

// Keypoints anywhere in [-margin, W - 1 + margin] on the snapping grid.
inline HandPose random_pose(Rng& rng, int width, int height, double margin = 4.0) {
  HandPose pose;
  pose.image_width = width;
  pose.image_height = height;
  for (auto& kp : pose.keypoints) {
    kp.p = -margin + rng.uniform() * (width - 1 + 2 * margin);
    kp.q = -margin + rng.uniform() * (height - 1 + 2 * margin);
    kp.c = rng.uniform();
  }
  return snap_pose(pose);
}

// Rounding written independently of the library: nearest integer, ties
// toward the image centre.
inline int oracle_round(double v, int extent) {
  const double f = std::floor(v);
  if (v - f < 0.5) return static_cast<int>(f);
  if (v - f > 0.5) return static_cast<int>(f) + 1;
  return v < 0.5 * (extent - 1) ? static_cast<int>(f) + 1 : static_cast<int>(f);
}

// Distance to a segment by clamped projection.
inline double oracle_segment_distance2(double x, double y, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = ax + t * dx, cy = ay + t * dy;
  return (x - cx) * (x - cx) + (y - cy) * (y - cy);
}

// Per-pixel brute force: value at (u, v) is the max over joints / bones that
// cover it.
inline std::vector<float> oracle_keypoint_map(const HandPose& pose, bool weighted, double radius) {
  std::vector<float> out(static_cast<std::size_t>(pose.image_width) * pose.image_height, 0.0f);
  for (int v = 0; v < pose.image_height; ++v) {
    for (int u = 0; u < pose.image_width; ++u) {
      float best = 0.0f;
      for (const auto& kp : pose.keypoints) {
        const double du = u - oracle_round(kp.p, pose.image_width);
        const double dv = v - oracle_round(kp.q, pose.image_height);
        if (du * du + dv * dv <= radius * radius) best = std::max(best, weighted ? static_cast<float>(kp.c) : 1.0f);
      }
      out[static_cast<std::size_t>(v) * pose.image_width + u] = best;
    }
  }
  return out;
}

inline std::vector<float> oracle_skeleton_map(const HandPose& pose, bool weighted, double width) {
  std::vector<float> out(static_cast<std::size_t>(pose.image_width) * pose.image_height, 0.0f);
  const double half2 = 0.25 * width * width;
  for (int v = 0; v < pose.image_height; ++v) {
    for (int u = 0; u < pose.image_width; ++u) {
      float best = 0.0f;
      for (const auto& e : kHandSkeleton) {
        const auto& a = pose.keypoints[static_cast<std::size_t>(e.a)];
        const auto& b = pose.keypoints[static_cast<std::size_t>(e.b)];
        if (oracle_segment_distance2(u, v, a.p, a.q, b.p, b.q) <= half2) {
          best = std::max(best, weighted ? static_cast<float>(b.c) : 1.0f);
        }
      }
      out[static_cast<std::size_t>(v) * pose.image_width + u] = best;
    }
  }
  return out;
}

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(shape);
  for (float& v : t.values()) v = static_cast<float>(lo + (hi - lo) * rng.uniform());
  return t;
}

// Scalar sum_i w_i y_i, built from the public graph API so gradient checks do
// not rely on the ops under test.
inline nn::Var weighted_sum(const nn::Var& y, const nn::Tensor& w) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.numel(); ++i) acc += static_cast<double>(w.values()[i]) * y.value().values()[i];
  return nn::make_result(nn::Tensor::scalar(static_cast<float>(acc)), {y}, [w](nn::Node& self) {
    nn::Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    float* g = in.ensure_grad().data();
    for (std::size_t i = 0; i < w.numel(); ++i) g[i] += self.grad.data()[0] * w.values()[i];
  });
}

// Largest |analytic - numeric| / max(1, |numeric|) over every entry of each
// input, with central differences evaluated in double on the float graph.
inline double gradient_error(const std::function<nn::Var(const std::vector<nn::Var>&)>& f,
                             std::vector<nn::Tensor> inputs, Rng& rng, double h = 1e-2) {
  std::vector<nn::Var> vars;
  for (auto& t : inputs) vars.push_back(nn::Var::parameter(t));
  const nn::Var out = f(vars);
  const nn::Tensor w = random_tensor(out.shape(), rng);
  nn::backward(weighted_sum(out, w));
  const auto eval = [&](const std::vector<nn::Tensor>& xs) {
    std::vector<nn::Var> cs;
    for (const auto& t : xs) cs.push_back(nn::Var::constant(t));
    const nn::Var y = f(cs);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.numel(); ++i) acc += static_cast<double>(w.values()[i]) * y.value().values()[i];
    return acc;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[k].values()[i] += static_cast<float>(h);
      minus[k].values()[i] -= static_cast<float>(h);
      const double numeric = (eval(plus) - eval(minus)) / (2 * h);
      const double analytic = vars[k].has_grad() ? vars[k].grad().values()[i] : 0.0;
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

// Small networks for fast training tests (32x32 images).
inline TrainConfig tiny_train_config(int epochs, std::uint64_t seed = 5) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.image_size = 32;
  c.batch_size = 4;
  c.generator.image_size = 32;
  c.generator.base_width = 4;
  c.discriminator.base_width = 4;
  return c;
}

struct SmallCorpus {
  Corpus corpus;
  std::vector<GesturePair> pairs;
};

inline SmallCorpus make_corpus(const std::filesystem::path& dir, int subjects, int gestures, int images = 1,
                               int image_size = 32, std::uint64_t seed = 3) {
  SyntheticCorpusOptions o;
  o.subjects = subjects;
  o.gestures = gestures;
  o.images_per_gesture = images;
  o.image_size = image_size;
  o.seed = seed;
  const auto paths = write_synthetic_corpus(dir, o);
  SmallCorpus sc;
  sc.corpus = load_corpus(paths.manifest, paths.annotations);
  sc.pairs = enumerate_pairs(sc.corpus.records);
  return sc;
}

}  // namespace testing
