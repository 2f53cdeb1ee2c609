#include "gesturegan/hand_annotations.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gesturegan/serialization.hpp"

namespace gesturegan {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// "#width=64 height=48"
bool parse_size_header(std::string_view line, int& width, int& height) {
  auto fields = split_ws(line.substr(1));
  if (fields.size() != 2) return false;
  auto value_of = [](std::string_view field, std::string_view key, int& out) {
    if (field.substr(0, key.size()) != key) return false;
    return parse_int(field.substr(key.size()), out);
  };
  return value_of(fields[0], "width=", width) && value_of(fields[1], "height=", height);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double snap_coordinate(double v) {
  constexpr int kGridBits = 36;
  if (!std::isfinite(v) || std::fabs(v) >= 0x1.0p16) {
    return v;
  }
  return std::ldexp(std::nearbyint(std::ldexp(v, kGridBits)), -kGridBits);
}

HandPose snap_pose(const HandPose& pose) {
  HandPose out = pose;
  for (Keypoint& kp : out.keypoints) {
    kp.p = snap_coordinate(kp.p);
    kp.q = snap_coordinate(kp.q);
  }
  return out;
}

AnnotationError::AnnotationError(long record, const std::string& message)
    : std::runtime_error(record >= 0 ? "annotation record " + std::to_string(record) + ": " + message
                                     : "annotations: " + message),
      record_(record) {}

std::vector<AnnotatedPose> parse_annotations(std::string_view source) {
  std::vector<AnnotatedPose> out;
  int width = 0;
  int height = 0;
  long record = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    std::size_t end = source.find('\n', pos);
    if (end == std::string_view::npos) end = source.size();
    std::string_view line = source.substr(pos, end - pos);
    pos = end + 1;

    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) continue;
    line = line.substr(first);
    if (line.front() == '#') {
      if (line.substr(0, 7) == "#width=") {
        if (!parse_size_header(line, width, height) || width <= 0 || height <= 0) {
          throw AnnotationError(-1, "malformed size header '" + std::string(line) + "'");
        }
      }
      continue;
    }

    const auto fields = split_ws(line);
    if (width <= 0) {
      throw AnnotationError(record, "record precedes the '#width=<W> height=<H>' header");
    }
    const std::size_t expected = 1 + 3 * kNumHandJoints;
    if (fields.size() != expected) {
      if (fields.size() > 1 && (fields.size() - 1) % 3 == 0) {
        throw AnnotationError(record, "expected 21 keypoints, found " +
                                          std::to_string((fields.size() - 1) / 3));
      }
      throw AnnotationError(record, "expected " + std::to_string(expected) + " fields, found " +
                                        std::to_string(fields.size()));
    }
    AnnotatedPose rec;
    rec.identifier = std::string(fields[0]);
    rec.pose.image_width = width;
    rec.pose.image_height = height;
    for (int j = 0; j < kNumHandJoints; ++j) {
      Keypoint& kp = rec.pose.keypoints[static_cast<std::size_t>(j)];
      const std::size_t base = 1 + 3 * static_cast<std::size_t>(j);
      if (!parse_double(fields[base], kp.p) || !parse_double(fields[base + 1], kp.q) ||
          !parse_double(fields[base + 2], kp.c)) {
        throw AnnotationError(record, "joint " + std::to_string(j) + ": non-numeric field");
      }
      if (!std::isfinite(kp.p) || !std::isfinite(kp.q)) {
        throw AnnotationError(record, "joint " + std::to_string(j) + ": non-finite coordinate");
      }
      kp.p = snap_coordinate(kp.p);
      kp.q = snap_coordinate(kp.q);
      if (!(kp.c >= 0.0 && kp.c <= 1.0)) {
        throw AnnotationError(record, "joint " + std::to_string(j) + ": confidence " +
                                          format_double(kp.c) + " outside [0,1]");
      }
    }
    out.push_back(std::move(rec));
    ++record;
  }
  return out;
}

std::vector<AnnotatedPose> load_annotations(const std::string& path) {
  return parse_annotations(read_file(path));
}

std::string serialize_annotations(const std::vector<AnnotatedPose>& records) {
  std::string out;
  int width = 0;
  int height = 0;
  for (const auto& rec : records) {
    if (rec.pose.image_width != width || rec.pose.image_height != height) {
      width = rec.pose.image_width;
      height = rec.pose.image_height;
      out += "#width=" + std::to_string(width) + " height=" + std::to_string(height) + "\n";
    }
    out += rec.identifier;
    for (const Keypoint& kp : rec.pose.keypoints) {
      out += ' ';
      out += format_double(kp.p);
      out += ' ';
      out += format_double(kp.q);
      out += ' ';
      out += format_double(kp.c);
    }
    out += '\n';
  }
  return out;
}

HandPose flip_pose(const HandPose& pose) {
  HandPose out = pose;
  const double edge = static_cast<double>(pose.image_width - 1);
  for (Keypoint& kp : out.keypoints) {
    kp.p = edge - kp.p;
  }
  return out;
}

HandPose scale_pose(const HandPose& pose, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) {
    throw std::invalid_argument("scale_pose: target dimensions must be positive");
  }
  HandPose out = pose;
  const double sx = static_cast<double>(new_width) / pose.image_width;
  const double sy = static_cast<double>(new_height) / pose.image_height;
  for (Keypoint& kp : out.keypoints) {
    kp.p = snap_coordinate(kp.p * sx);
    kp.q = snap_coordinate(kp.q * sy);
  }
  out.image_width = new_width;
  out.image_height = new_height;
  return out;
}

}  // namespace gesturegan
