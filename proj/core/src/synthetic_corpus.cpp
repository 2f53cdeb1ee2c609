#include "gesturegan/synthetic_corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/rng.hpp"
#include "gesturegan/serialization.hpp"

namespace gesturegan {

void SyntheticCorpusOptions::validate() const {
  if (subjects < 1 || gestures < 1 || images_per_gesture < 1) {
    throw std::invalid_argument("synthetic corpus needs at least one subject, gesture and image");
  }
  if (image_size < 16) throw std::invalid_argument("synthetic image_size must be >= 16");
}

namespace {

struct Rgb {
  double r, g, b;
};

// Extended-finger bitmask for gesture g: thumb is bit 0, little finger bit 4.
unsigned finger_mask(int gesture) {
  static constexpr std::array<unsigned, 10> kMasks = {0b00010, 0b00110, 0b01110, 0b11110, 0b11111,
                                                      0b00000, 0b00011, 0b10010, 0b10001, 0b00111};
  return kMasks[static_cast<std::size_t>(gesture) % kMasks.size()];
}

Rgb hsv(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Rgb out{0, 0, 0};
  if (hp < 1) out = {c, x, 0};
  else if (hp < 2) out = {x, c, 0};
  else if (hp < 3) out = {0, c, x};
  else if (hp < 4) out = {0, x, c};
  else if (hp < 5) out = {x, 0, c};
  else out = {c, 0, x};
  const double m = v - c;
  return {out.r + m, out.g + m, out.b + m};
}

struct Capsule {
  double ax, ay, bx, by, radius;
};

}  // namespace

SyntheticSample render_synthetic_hand(const SyntheticCorpusOptions& options, int subject, int gesture,
                                      int index) {
  const int size = options.image_size;
  Rng subject_rng(mix_seed(options.seed, 0x5000u + static_cast<std::uint64_t>(subject)));
  const Rgb background = hsv(subject_rng.uniform(), 0.35 + 0.3 * subject_rng.uniform(),
                             0.35 + 0.4 * subject_rng.uniform());
  const Rgb stripe = hsv(subject_rng.uniform(), 0.5, 0.3 + 0.5 * subject_rng.uniform());
  const double stripe_freq = 0.15 + 0.35 * subject_rng.uniform();
  const double stripe_angle = std::numbers::pi * subject_rng.uniform();
  const Rgb skin = hsv(0.03 + 0.06 * subject_rng.uniform(), 0.3 + 0.35 * subject_rng.uniform(),
                       0.55 + 0.4 * subject_rng.uniform());
  const double hand_scale = 0.8 + 0.2 * subject_rng.uniform();

  Rng rng(mix_seed(options.seed, (static_cast<std::uint64_t>(subject) << 32) ^
                                      (static_cast<std::uint64_t>(gesture) << 16) ^
                                      static_cast<std::uint64_t>(index)));
  const double rotation = 0.3 * (rng.uniform() - 0.5);
  const double cx = size * (0.5 + 0.08 * (rng.uniform() - 0.5));
  const double cy = size * (0.55 + 0.08 * (rng.uniform() - 0.5));
  const double unit = size * 0.42 * hand_scale;

  // Hand model in a unit frame: wrist at the origin, fingers pointing to -y.
  struct Finger {
    double base_x, base_y, angle;
    std::array<double, 3> lengths;
  };
  static constexpr std::array<Finger, 5> kFingers = {{
      {-0.28, -0.35, -1.0, {0.22, 0.17, 0.14}},
      {-0.16, -0.75, -0.12, {0.26, 0.17, 0.13}},
      {-0.02, -0.80, 0.0, {0.28, 0.19, 0.14}},
      {0.12, -0.77, 0.1, {0.26, 0.17, 0.13}},
      {0.25, -0.68, 0.25, {0.20, 0.14, 0.11}},
  }};
  const unsigned mask = finger_mask(gesture);

  std::array<std::array<double, 2>, 21> local{};
  local[0] = {0.0, 0.0};
  for (std::size_t f = 0; f < 5; ++f) {
    const Finger& fin = kFingers[f];
    const bool extended = (mask >> f) & 1u;
    const double jitter = 0.08 * (rng.uniform() - 0.5);
    double x = fin.base_x;
    double y = fin.base_y;
    double angle = fin.angle + jitter;
    local[1 + 4 * f] = {x, y};
    for (std::size_t j = 0; j < 3; ++j) {
      double len = fin.lengths[j];
      if (!extended) {
        // folded: bend toward the palm and shorten
        angle += (f == 0 ? 1.1 : 1.25) * (j == 0 ? 1.0 : 0.9);
        len *= 0.7;
      }
      x += len * std::sin(angle);
      y -= len * std::cos(angle);
      local[2 + 4 * f + j] = {x, y};
    }
  }

  HandPose pose;
  pose.image_width = size;
  pose.image_height = size;
  const double cr = std::cos(rotation);
  const double sr = std::sin(rotation);
  for (std::size_t k = 0; k < 21; ++k) {
    const double lx = local[k][0];
    const double ly = local[k][1] + 0.45;  // centre the hand on (cx, cy)
    pose.keypoints[k].p = cx + unit * (cr * lx - sr * ly);
    pose.keypoints[k].q = cy + unit * (sr * lx + cr * ly);
    pose.keypoints[k].c = 0.6 + 0.4 * rng.uniform();
  }
  pose = snap_pose(pose);

  std::vector<Capsule> shape;
  const auto pt = [&](std::size_t k) { return pose.keypoints[k]; };
  const double palm_r = unit * 0.16;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto a = pt(0);
    const auto b = pt(1 + 4 * f);
    shape.push_back({a.p, a.q, b.p, b.q, f == 0 ? unit * 0.1 : palm_r});
  }
  for (std::size_t f = 1; f + 1 < 5; ++f) {
    const auto a = pt(1 + 4 * f);
    const auto b = pt(1 + 4 * (f + 1));
    shape.push_back({a.p, a.q, b.p, b.q, palm_r * 0.8});
  }
  const double finger_r = unit * 0.065;
  for (const auto& [from, to] : kHandSkeleton) {
    if (from == 0) continue;
    const auto a = pt(from);
    const auto b = pt(to);
    shape.push_back({a.p, a.q, b.p, b.q, finger_r});
  }

  Image8 img;
  img.width = size;
  img.height = size;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(size) * size * 3);
  const double ca = std::cos(stripe_angle);
  const double sa = std::sin(stripe_angle);
  for (int yy = 0; yy < size; ++yy) {
    for (int xx = 0; xx < size; ++xx) {
      const double t = 0.5 + 0.5 * std::sin(stripe_freq * (ca * xx + sa * yy));
      Rgb c{background.r + (stripe.r - background.r) * 0.5 * t,
            background.g + (stripe.g - background.g) * 0.5 * t,
            background.b + (stripe.b - background.b) * 0.5 * t};
      double best = 1e300;
      for (const Capsule& cap : shape) {
        const double d = std::sqrt(squared_distance_to_segment(xx, yy, cap.ax, cap.ay, cap.bx, cap.by)) - cap.radius;
        best = std::min(best, d);
      }
      if (best <= 0.0) {
        const double shade = 0.8 + 0.2 * std::min(1.0, -best / (unit * 0.1));
        c = {skin.r * shade, skin.g * shade, skin.b * shade};
      } else if (best < 1.0) {
        const double a = 1.0 - best;
        c = {c.r + (skin.r * 0.8 - c.r) * a, c.g + (skin.g * 0.8 - c.g) * a, c.b + (skin.b * 0.8 - c.b) * a};
      }
      const double noise = 0.03 * (rng.uniform() - 0.5);
      const std::array<double, 3> rgb{c.r + noise, c.g + noise, c.b + noise};
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(rgb[static_cast<std::size_t>(ch)], 0.0, 1.0);
        img.pixels[(static_cast<std::size_t>(yy) * size + xx) * 3 + ch] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  return {std::move(img), pose};
}

SyntheticCorpusPaths write_synthetic_corpus(const std::filesystem::path& out_dir,
                                            const SyntheticCorpusOptions& options) {
  options.validate();
  std::filesystem::create_directories(out_dir / "images");
  std::ostringstream manifest;
  std::vector<AnnotatedPose> records;
  for (int s = 0; s < options.subjects; ++s) {
    for (int g = 0; g < options.gestures; ++g) {
      for (int k = 0; k < options.images_per_gesture; ++k) {
        SyntheticSample sample = render_synthetic_hand(options, s, g, k);
        const std::string id = "images/s" + std::to_string(s) + "_g" + std::to_string(g) + "_" +
                               std::to_string(k) + ".png";
        write_png(out_dir / id, sample.image);
        manifest << id << " subject" << s << " gesture" << g << "\n";
        records.push_back({id, sample.pose});
      }
    }
  }
  SyntheticCorpusPaths paths;
  paths.manifest = out_dir / "manifest.txt";
  paths.annotations = out_dir / "annotations.txt";
  paths.images = records.size();
  write_file_atomic(paths.annotations, serialize_annotations(records));
  write_file_atomic(paths.manifest, manifest.str());
  return paths;
}

}  // namespace gesturegan
