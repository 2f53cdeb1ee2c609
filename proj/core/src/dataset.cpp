#include "gesturegan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "gesturegan/rng.hpp"
#include "gesturegan/serialization.hpp"

namespace gesturegan {

Corpus load_corpus(const std::filesystem::path& manifest, const std::filesystem::path& annotations) {
  if (!std::filesystem::exists(manifest)) {
    throw DatasetError("corpus manifest not found: " + manifest.string());
  }
  if (!std::filesystem::exists(annotations)) {
    throw DatasetError("annotation file not found: " + annotations.string());
  }
  std::map<std::string, HandPose> poses;
  for (auto& rec : load_annotations(annotations.string())) {
    poses[rec.identifier] = rec.pose;
  }

  Corpus corpus;
  corpus.image_root = manifest.parent_path();
  std::istringstream in(read_file(manifest));
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string path, subject, gesture, extra;
    if (!(fields >> path) || path.front() == '#') continue;
    if (!(fields >> subject >> gesture) || (fields >> extra)) {
      throw DatasetError(manifest.string() + ":" + std::to_string(line_no) +
                         ": expected '<image-path> <subject-id> <gesture-label>'");
    }
    auto it = poses.find(path);
    if (it == poses.end()) {
      throw DatasetError("no annotation for image '" + path + "'");
    }
    corpus.records.push_back({path, subject, gesture, it->second});
  }
  return corpus;
}

std::vector<GesturePair> enumerate_pairs(std::span<const CorpusRecord> records) {
  std::vector<const CorpusRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const CorpusRecord* a, const CorpusRecord* b) { return a->image_id < b->image_id; });
  std::vector<GesturePair> pairs;
  for (const CorpusRecord* a : sorted) {
    for (const CorpusRecord* b : sorted) {
      if (a != b && a->subject == b->subject && a->gesture != b->gesture) {
        pairs.push_back({*a, *b});
      }
    }
  }
  return pairs;
}

PairSplit split_pairs(std::size_t pair_count, const SplitSpec& spec) {
  if (spec.train_pairs + spec.test_pairs > pair_count) {
    throw DatasetError("split needs " + std::to_string(spec.train_pairs) + " train + " +
                       std::to_string(spec.test_pairs) + " test pairs but only " +
                       std::to_string(pair_count) + " exist");
  }
  std::vector<std::size_t> order(pair_count);
  for (std::size_t i = 0; i < pair_count; ++i) order[i] = i;
  Rng rng(spec.seed);
  for (std::size_t i = pair_count; i > 1; --i) {
    const std::size_t j = rng.uniform_index(i);
    std::swap(order[i - 1], order[j]);
  }
  PairSplit split;
  split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.test_pairs));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(spec.test_pairs),
                     order.begin() + static_cast<std::ptrdiff_t>(spec.test_pairs + spec.train_pairs));
  return split;
}

void write_split_file(const std::filesystem::path& path, const PairSplit& split,
                      std::size_t pair_count, std::uint64_t seed) {
  std::ostringstream os;
  os << "# pairs=" << pair_count << " seed=" << seed << "\n";
  os << "train";
  for (std::size_t i : split.train) os << ' ' << i;
  os << "\ntest";
  for (std::size_t i : split.test) os << ' ' << i;
  os << "\n";
  write_file_atomic(path, os.str());
}

PairSplit read_split_file(const std::filesystem::path& path, std::size_t pair_count) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DatasetError("split file not found: " + path.string());
  }
  std::istringstream in(read_file(path));
  std::string line;
  PairSplit split;
  bool have_train = false;
  bool have_test = false;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string tag;
    if (!(fields >> tag)) continue;
    if (tag.front() == '#') {
      std::string field;
      while (fields >> field) {
        if (field.rfind("pairs=", 0) == 0 && field.substr(6) != std::to_string(pair_count)) {
          throw DatasetError("split file " + path.string() + " was written for " + field.substr(6) +
                             " pairs, corpus has " + std::to_string(pair_count));
        }
      }
      continue;
    }
    std::vector<std::size_t>* dst = nullptr;
    if (tag == "train") {
      dst = &split.train;
      have_train = true;
    } else if (tag == "test") {
      dst = &split.test;
      have_test = true;
    } else {
      throw DatasetError("split file " + path.string() + ": unknown line '" + tag + "'");
    }
    std::size_t v;
    while (fields >> v) {
      if (v >= pair_count) {
        throw DatasetError("split file " + path.string() + ": pair index " + std::to_string(v) +
                           " out of range (" + std::to_string(pair_count) + " pairs)");
      }
      dst->push_back(v);
    }
    if (!fields.eof()) {
      throw DatasetError("split file " + path.string() + ": malformed index list");
    }
  }
  if (!have_train || !have_test) {
    throw DatasetError("split file " + path.string() + ": missing train or test line");
  }
  std::vector<bool> seen(pair_count, false);
  for (const auto* list : {&split.train, &split.test}) {
    for (std::size_t v : *list) {
      if (seen[v]) {
        throw DatasetError("split file " + path.string() + ": pair index " + std::to_string(v) +
                           " listed twice");
      }
      seen[v] = true;
    }
  }
  return split;
}

Image8 load_corpus_image(const std::string& image_id, const LoaderOptions& options) {
  Image8 raw;
  try {
    raw = read_png(options.image_root / image_id);
  } catch (const ImageError& e) {
    throw DatasetError(std::string("unreadable image '") + image_id + "': " + e.what());
  }
  return resize_area(to_rgb(raw), options.image_size, options.image_size);
}

TrainingExample load_training_example(const GesturePair& pair, bool flip,
                                      const LoaderOptions& options) {
  TrainingExample ex;
  Image8 x = load_corpus_image(pair.source.image_id, options);
  Image8 y = load_corpus_image(pair.target.image_id, options);
  ex.pose_x = scale_pose(pair.source.pose, options.image_size, options.image_size);
  ex.pose_y = scale_pose(pair.target.pose, options.image_size, options.image_size);
  if (flip) {
    x = mirror_horizontal(x);
    y = mirror_horizontal(y);
    ex.pose_x = flip_pose(ex.pose_x);
    ex.pose_y = flip_pose(ex.pose_y);
  }
  ex.flipped = flip;
  ex.x = image_to_tensor(x);
  ex.y = image_to_tensor(y);
  ex.map_x = map_to_tensor(rasterize(ex.pose_x, options.variant, options.keypoint_radius, options.line_width));
  ex.map_y = map_to_tensor(rasterize(ex.pose_y, options.variant, options.keypoint_radius, options.line_width));
  return ex;
}

}  // namespace gesturegan
