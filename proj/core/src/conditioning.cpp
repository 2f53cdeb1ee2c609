#include "gesturegan/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gesturegan {

namespace {

ConditioningMap blank(const HandPose& pose, ConditioningVariant variant) {
  if (pose.image_width <= 0 || pose.image_height <= 0) {
    throw std::invalid_argument("rasterize: pose has no image dimensions");
  }
  ConditioningMap m;
  m.width = pose.image_width;
  m.height = pose.image_height;
  m.variant = variant;
  m.pixels.assign(static_cast<std::size_t>(m.width) * m.height, 0.0f);
  return m;
}

void stamp_max(ConditioningMap& m, int u, int v, float value) {
  float& px = m.pixels[static_cast<std::size_t>(v) * m.width + u];
  px = std::max(px, value);
}

}  // namespace

std::string_view to_string(ConditioningVariant v) {
  switch (v) {
    case ConditioningVariant::keypoints: return "K";
    case ConditioningVariant::confidence_keypoints: return "Khat";
    case ConditioningVariant::skeleton: return "S";
    case ConditioningVariant::confidence_skeleton: return "Shat";
  }
  return "?";
}

std::optional<ConditioningVariant> parse_variant(std::string_view name) {
  if (name == "K") return ConditioningVariant::keypoints;
  if (name == "Khat") return ConditioningVariant::confidence_keypoints;
  if (name == "S") return ConditioningVariant::skeleton;
  if (name == "Shat") return ConditioningVariant::confidence_skeleton;
  return std::nullopt;
}

std::size_t ConditioningMap::nonzero_count() const {
  return static_cast<std::size_t>(
      std::count_if(pixels.begin(), pixels.end(), [](float v) { return v != 0.0f; }));
}

ConditioningMap ConditioningMap::mirrored() const {
  ConditioningMap out = *this;
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      out.pixels[static_cast<std::size_t>(v) * width + u] = at(width - 1 - u, v);
    }
  }
  return out;
}

int nearest_pixel(double coordinate, int extent) {
  const double lower = std::floor(coordinate);
  const double frac = coordinate - lower;
  double chosen;
  if (frac < 0.5) {
    chosen = lower;
  } else if (frac > 0.5) {
    chosen = lower + 1.0;
  } else {
    const double centre = 0.5 * (extent - 1);
    chosen = coordinate < centre ? lower + 1.0 : lower;
  }
  // Far off-image keypoints only need to land somewhere outside the image.
  return static_cast<int>(std::clamp(chosen, -1.0e6, 1.0e6));
}

double squared_distance_to_segment(double x, double y, double ax, double ay, double bx,
                                   double by) {
  const double dx = bx - ax;
  const double dy = by - ay;
  const double px = x - ax;
  const double py = y - ay;
  const double along = px * dx + py * dy;
  if (along <= 0.0) {
    return px * px + py * py;
  }
  const double len2 = dx * dx + dy * dy;
  if (along >= len2) {
    const double qx = x - bx;
    const double qy = y - by;
    return qx * qx + qy * qy;
  }
  const double cross = px * dy - py * dx;
  return cross * cross / len2;
}

ConditioningMap rasterize_keypoints(const HandPose& pose, bool confidence_weighted, double radius) {
  if (!(radius >= 1.0)) {
    throw std::invalid_argument("rasterize_keypoints: radius must be >= 1");
  }
  ConditioningMap m = blank(pose, confidence_weighted ? ConditioningVariant::confidence_keypoints
                                                      : ConditioningVariant::keypoints);
  m.radius = radius;
  const double r2 = radius * radius;
  const int reach = static_cast<int>(std::floor(radius));
  for (const Keypoint& kp : pose.keypoints) {
    const int cu = nearest_pixel(kp.p, m.width);
    const int cv = nearest_pixel(kp.q, m.height);
    const float value = confidence_weighted ? static_cast<float>(kp.c) : 1.0f;
    const int v0 = std::max(cv - reach, 0);
    const int v1 = std::min(cv + reach, m.height - 1);
    const int u0 = std::max(cu - reach, 0);
    const int u1 = std::min(cu + reach, m.width - 1);
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        const double du = u - cu;
        const double dv = v - cv;
        if (du * du + dv * dv <= r2) {
          stamp_max(m, u, v, value);
        }
      }
    }
  }
  return m;
}

ConditioningMap rasterize_skeleton(const HandPose& pose, bool confidence_weighted,
                                   double line_width) {
  if (!(line_width >= 1.0)) {
    throw std::invalid_argument("rasterize_skeleton: line width must be >= 1");
  }
  ConditioningMap m = blank(pose, confidence_weighted ? ConditioningVariant::confidence_skeleton
                                                      : ConditioningVariant::skeleton);
  m.line_width = line_width;
  const double half = 0.5 * line_width;
  const double half2 = half * half;
  for (const SkeletonEdge& e : kHandSkeleton) {
    const Keypoint& a = pose.keypoints[static_cast<std::size_t>(e.a)];
    const Keypoint& b = pose.keypoints[static_cast<std::size_t>(e.b)];
    const float value = confidence_weighted ? static_cast<float>(b.c) : 1.0f;
    const double lo_u = std::min(a.p, b.p) - half;
    const double hi_u = std::max(a.p, b.p) + half;
    const double lo_v = std::min(a.q, b.q) - half;
    const double hi_v = std::max(a.q, b.q) + half;
    if (hi_u < 0.0 || hi_v < 0.0 || lo_u > m.width - 1 || lo_v > m.height - 1) {
      continue;
    }
    const int u0 = std::max(0, static_cast<int>(std::floor(lo_u)));
    const int u1 = std::min(m.width - 1, static_cast<int>(std::ceil(hi_u)));
    const int v0 = std::max(0, static_cast<int>(std::floor(lo_v)));
    const int v1 = std::min(m.height - 1, static_cast<int>(std::ceil(hi_v)));
    for (int v = v0; v <= v1; ++v) {
      for (int u = u0; u <= u1; ++u) {
        if (squared_distance_to_segment(u, v, a.p, a.q, b.p, b.q) <= half2) {
          stamp_max(m, u, v, value);
        }
      }
    }
  }
  return m;
}

ConditioningMap rasterize(const HandPose& pose, ConditioningVariant variant, double radius,
                          double line_width) {
  switch (variant) {
    case ConditioningVariant::keypoints: return rasterize_keypoints(pose, false, radius);
    case ConditioningVariant::confidence_keypoints: return rasterize_keypoints(pose, true, radius);
    case ConditioningVariant::skeleton: return rasterize_skeleton(pose, false, line_width);
    case ConditioningVariant::confidence_skeleton: return rasterize_skeleton(pose, true, line_width);
  }
  throw std::invalid_argument("rasterize: unknown variant");
}

}  // namespace gesturegan
