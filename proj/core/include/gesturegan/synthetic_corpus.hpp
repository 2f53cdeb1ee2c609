#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gesturegan/hand_annotations.hpp"
#include "gesturegan/image.hpp"

namespace gesturegan {

// Procedural hands on textured backgrounds. Subject sets skin tone, background
// and hand size; gesture sets which fingers are extended.
struct SyntheticCorpusOptions {
  int subjects = 4;
  int gestures = 2;
  int images_per_gesture = 1;
  int image_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const SyntheticCorpusOptions&, const SyntheticCorpusOptions&) = default;
};

struct SyntheticSample {
  Image8 image;
  HandPose pose;
};

// Deterministic in (options.seed, subject, gesture, index).
SyntheticSample render_synthetic_hand(const SyntheticCorpusOptions& options, int subject, int gesture,
                                      int index);

struct SyntheticCorpusPaths {
  std::filesystem::path manifest;
  std::filesystem::path annotations;
  std::size_t images = 0;
};

// Writes images/<subject>_<gesture>_<k>.png, manifest.txt and annotations.txt.
SyntheticCorpusPaths write_synthetic_corpus(const std::filesystem::path& out_dir,
                                            const SyntheticCorpusOptions& options);

}  // namespace gesturegan
