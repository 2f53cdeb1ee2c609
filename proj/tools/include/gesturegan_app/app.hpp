#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gesturegan/dataset.hpp"
#include "gesturegan/embedder.hpp"
#include "gesturegan/synthetic_corpus.hpp"
#include "gesturegan/training.hpp"

namespace gesturegan::app {

// Bad input from the user (paths, config values, corrupt files): exit 1.
class UserError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CorpusConfig {
  std::string manifest;
  std::string annotations;
  std::string split_file;  // optional; overrides the seeded split
  long train_pairs = -1;   // -1: every pair not in the test set
  long test_pairs = -1;    // -1: a fifth of the pairs, at least one when two exist
  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

struct AppConfig {
  TrainConfig train;
  CorpusConfig corpus;
  std::string out_dir = "run";
  EmbedderSpec embedder;
  int is_splits = 1;
  bool inference_dropout = true;  // generator dropout stays on when translating
  SyntheticCorpusOptions synthetic;

  void validate() const;
  friend bool operator==(const AppConfig&, const AppConfig&);
};

std::string to_json(const AppConfig& config);
AppConfig app_config_from_json(const std::string& text);

// Every leaf key of the config as a dotted path, e.g. "train.loss.lambda1".
std::vector<std::string> config_keys();
// Applies "key=value" overrides; the value is read as JSON when it parses,
// otherwise as a string.
AppConfig apply_overrides(const AppConfig& base, const std::vector<std::pair<std::string, std::string>>& overrides);

struct Output {
  std::ostream& out;
  std::ostream& err;
};

int cmd_train(const AppConfig& config, const std::optional<std::filesystem::path>& resume, Output io);

struct TranslateRequest {
  std::filesystem::path checkpoint;
  std::filesystem::path source_image;
  std::string target_id;  // identifier in the corpus annotations
  bool random_target = false;
  std::filesystem::path output;  // default <out>/translated.png
  std::optional<std::uint64_t> dropout_seed;
};
int cmd_translate(const AppConfig& config, const TranslateRequest& request, Output io);

struct EvaluateRequest {
  std::filesystem::path checkpoint;
  bool oracle_generator = false;  // emit ground truth instead of running G
  std::filesystem::path output;   // default <out>/metrics.csv
};
int cmd_evaluate(const AppConfig& config, const EvaluateRequest& request, Output io);

int cmd_rasterize(const std::filesystem::path& annotations, const std::string& variant,
                  const std::filesystem::path& out_dir, double radius, double line_width, Output io);

int cmd_make_synthetic_corpus(const SyntheticCorpusOptions& options, const std::filesystem::path& out_dir, Output io);

// Loads the corpus named by the config and splits its pairs.
struct PreparedCorpus {
  Corpus corpus;
  std::vector<GesturePair> pairs;
  PairSplit split;
};
PreparedCorpus prepare_corpus(const AppConfig& config);

// Full command line, argv[0] included. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gesturegan::app
