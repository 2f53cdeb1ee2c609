#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gesturegan/hand_annotations.hpp"

namespace gesturegan {

// Which hand-structure image conditions the generator:
//   keypoints            disks of value 1
//   confidence_keypoints disks filled with the joint confidence
//   skeleton             bones of value 1
//   confidence_skeleton  bones filled with the confidence of the outer joint
enum class ConditioningVariant { keypoints, confidence_keypoints, skeleton, confidence_skeleton };

// Names used on the command line and in configs: K, Khat, S, Shat.
std::string_view to_string(ConditioningVariant v);
std::optional<ConditioningVariant> parse_variant(std::string_view name);
inline constexpr std::string_view kVariantNames = "K, Khat, S, Shat";

inline constexpr double kDefaultKeypointRadius = 4.0;
inline constexpr double kDefaultLineWidth = 4.0;

// Single-channel H x W map with values in [0, 1]; untouched pixels are 0.
struct ConditioningMap {
  int width = 0;
  int height = 0;
  ConditioningVariant variant = ConditioningVariant::skeleton;
  double radius = kDefaultKeypointRadius;
  double line_width = kDefaultLineWidth;
  std::vector<float> pixels;  // row-major, size width * height

  float at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  std::size_t nonzero_count() const;
  // Horizontal mirror (column u -> width - 1 - u).
  ConditioningMap mirrored() const;

  friend bool operator==(const ConditioningMap&, const ConditioningMap&) = default;
};

// Nearest integer pixel for a keypoint coordinate. Exact half-pixel ties go
// toward the image centre so that rounding commutes with flip_pose.
int nearest_pixel(double coordinate, int extent);

// Stamps a closed disk (du^2 + dv^2 <= radius^2 around the rounded keypoint)
// for each joint. Values are 1, or c_i when confidence_weighted; overlaps keep
// the maximum. Off-image parts are clipped.
ConditioningMap rasterize_keypoints(const HandPose& pose, bool confidence_weighted,
                                    double radius = kDefaultKeypointRadius);

// Draws each bone of the 20-edge hand tree as a capsule: every pixel whose
// centre lies within line_width / 2 of the real-valued segment. Values are 1,
// or c_b of the outer joint when confidence_weighted; overlaps keep the maximum.
ConditioningMap rasterize_skeleton(const HandPose& pose, bool confidence_weighted,
                                   double line_width = kDefaultLineWidth);

ConditioningMap rasterize(const HandPose& pose, ConditioningVariant variant,
                          double radius = kDefaultKeypointRadius,
                          double line_width = kDefaultLineWidth);

// Squared distance from (x, y) to the segment [a, b].
double squared_distance_to_segment(double x, double y, double ax, double ay, double bx, double by);

}  // namespace gesturegan
