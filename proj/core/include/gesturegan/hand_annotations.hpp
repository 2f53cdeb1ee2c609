#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gesturegan {

inline constexpr int kNumHandJoints = 21;
inline constexpr int kNumHandEdges = 20;

// One detected hand joint: image-space position and detector confidence.
// Positions may fall outside the image; only rasterisation clips.
struct Keypoint {
  double p = 0.0;  // horizontal pixel coordinate
  double q = 0.0;  // vertical pixel coordinate
  double c = 1.0;  // confidence in [0, 1]

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

// 21 joints in OpenPose hand order: 0 wrist, then four joints per finger from
// palm to tip (thumb 1-4, index 5-8, middle 9-12, ring 13-16, little 17-20).
struct HandPose {
  std::array<Keypoint, kNumHandJoints> keypoints{};
  int image_width = 0;
  int image_height = 0;

  friend bool operator==(const HandPose&, const HandPose&) = default;
};

// Bone from joint `a` to joint `b`; `b` is the joint farther from the wrist and
// supplies the confidence for confidence-weighted skeleton maps.
struct SkeletonEdge {
  int a = 0;
  int b = 0;
};

inline constexpr std::array<SkeletonEdge, kNumHandEdges> kHandSkeleton{{
    {0, 1}, {1, 2}, {2, 3}, {3, 4},        // thumb
    {0, 5}, {5, 6}, {6, 7}, {7, 8},        // index
    {0, 9}, {9, 10}, {10, 11}, {11, 12},   // middle
    {0, 13}, {13, 14}, {14, 15}, {15, 16}, // ring
    {0, 17}, {17, 18}, {18, 19}, {19, 20}, // little
}};

struct AnnotatedPose {
  std::string identifier;
  HandPose pose;

  friend bool operator==(const AnnotatedPose&, const AnnotatedPose&) = default;
};

// Parse failure. `record()` is the zero-based record index (-1 for file-level
// problems such as a missing size header).
class AnnotationError : public std::runtime_error {
public:
  AnnotationError(long record, const std::string& message);
  long record() const { return record_; }

private:
  long record_;
};

// Line format: "#width=<W> height=<H>" sets the dimensions of all following
// records; each record line is "<id> p0 q0 c0 ... p20 q20 c20". Blank lines and
// other lines starting with '#' are ignored.
std::vector<AnnotatedPose> parse_annotations(std::string_view source);
std::vector<AnnotatedPose> load_annotations(const std::string& path);

// Inverse of parse_annotations; a new size header is emitted whenever the
// dimensions change. Coordinates are written with round-trip precision.
std::string serialize_annotations(const std::vector<AnnotatedPose>& records);

// Coordinates are kept on a dyadic grid of 2^-36 pixel. On that grid the
// reflection (W - 1) - p is computed exactly for |p|, W < 2^16, which makes
// flip_pose an exact involution. parse_annotations and scale_pose snap their
// outputs; poses built by hand should pass coordinates through snap_coordinate.
double snap_coordinate(double v);
HandPose snap_pose(const HandPose& pose);

// Left-right mirror: p' = (W - 1) - p. An involution on snapped poses.
HandPose flip_pose(const HandPose& pose);

// Rescales coordinates to a new image size; confidence is kept.
HandPose scale_pose(const HandPose& pose, int new_width, int new_height);

}  // namespace gesturegan
