#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/hand_annotations.hpp"
#include "gesturegan/image.hpp"
#include "gesturegan/tensor.hpp"

namespace gesturegan {

class DatasetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CorpusRecord {
  std::string image_id;  // path as written in the manifest (also the annotation key)
  std::string subject;
  std::string gesture;
  HandPose pose;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

// Same subject, different gesture.
struct GesturePair {
  CorpusRecord source;
  CorpusRecord target;

  std::string identifier() const { return source.image_id + "->" + target.image_id; }
  friend bool operator==(const GesturePair&, const GesturePair&) = default;
};

struct Corpus {
  std::filesystem::path image_root;  // manifest image paths are relative to this
  std::vector<CorpusRecord> records;
};

// Manifest lines: "<image-path> <subject-id> <gesture-label>"; '#' comments and
// blank lines are skipped. Every image must have an annotation record whose
// identifier equals its manifest path.
Corpus load_corpus(const std::filesystem::path& manifest, const std::filesystem::path& annotations);

// All ordered (a, b) with a.subject == b.subject and a.gesture != b.gesture,
// sorted by (source id, target id).
std::vector<GesturePair> enumerate_pairs(std::span<const CorpusRecord> records);

struct SplitSpec {
  std::uint64_t seed = 0;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

// Index lists into the canonical pair order.
struct PairSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  friend bool operator==(const PairSplit&, const PairSplit&) = default;
};

// Seeded Fisher-Yates shuffle of [0, pair_count); the first test_pairs indices
// form the test set and the next train_pairs the training set.
PairSplit split_pairs(std::size_t pair_count, const SplitSpec& spec);

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(items[i]);
  return out;
}

// Text format: "# pairs=<N> seed=<S>", then "train i j ..." and "test i j ...".
void write_split_file(const std::filesystem::path& path, const PairSplit& split,
                      std::size_t pair_count, std::uint64_t seed);
PairSplit read_split_file(const std::filesystem::path& path, std::size_t pair_count);

struct LoaderOptions {
  std::filesystem::path image_root;
  int image_size = 64;
  ConditioningVariant variant = ConditioningVariant::skeleton;
  double keypoint_radius = kDefaultKeypointRadius;
  double line_width = kDefaultLineWidth;
};

// x is the source image, y the target; map_x / map_y are the conditioning
// maps of their poses. Images are in [-1,1], {1,3,S,S}; maps are {1,1,S,S}.
struct TrainingExample {
  nn::Tensor x;
  nn::Tensor y;
  nn::Tensor map_x;
  nn::Tensor map_y;
  HandPose pose_x;
  HandPose pose_y;
  bool flipped = false;
};

// Reads both images, area-resizes them to image_size, scales the poses to
// match, mirrors images and poses together when `flip` is set, then
// rasterises the conditioning maps.
TrainingExample load_training_example(const GesturePair& pair, bool flip, const LoaderOptions& options);

// Loads one corpus image as RGB at the loader's image size.
Image8 load_corpus_image(const std::string& image_id, const LoaderOptions& options);

}  // namespace gesturegan
