#include <algorithm>
#include <ostream>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/metrics.hpp"
#include "gesturegan/rng.hpp"
#include "gesturegan/serialization.hpp"
#include "gesturegan_app/app.hpp"

namespace gesturegan::app {

namespace {

constexpr std::uint64_t kStreamRandomTarget = 0x7a01;
constexpr std::uint64_t kStreamInferenceDropout = 0x7a02;

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UserError(what + " path is not set");
  if (!std::filesystem::exists(path)) throw UserError(what + " not found: " + path);
}

LoaderOptions loader_for(const AppConfig& config, const Corpus& corpus) {
  LoaderOptions lo;
  lo.image_root = corpus.image_root;
  lo.image_size = config.train.image_size;
  lo.variant = config.train.weights.conditioning;
  lo.keypoint_radius = config.train.keypoint_radius;
  lo.line_width = config.train.line_width;
  return lo;
}

// The generator must have been trained for the same maps and image size.
std::unique_ptr<Generator> checked_generator(const AppConfig& config, const std::filesystem::path& checkpoint) {
  if (checkpoint.empty()) throw UserError("--checkpoint is required");
  LoadedGenerator loaded = load_generator(checkpoint);
  const TrainConfig& have = loaded.config;
  const TrainConfig& want = config.train;
  std::string diff;
  if (!(have.generator == want.generator)) diff = "generator architecture";
  else if (have.image_size != want.image_size) diff = "image_size";
  else if (have.weights.conditioning != want.weights.conditioning) diff = "conditioning variant";
  else if (have.keypoint_radius != want.keypoint_radius || have.line_width != want.line_width) diff = "map geometry";
  if (!diff.empty()) {
    throw UserError("checkpoint " + checkpoint.string() + " does not match the config (" + diff + " differs)");
  }
  return std::move(loaded.generator);
}

std::optional<std::uint64_t> inference_seed(const AppConfig& config, std::uint64_t index) {
  if (!config.inference_dropout) return std::nullopt;
  return mix_seed(mix_seed(config.train.seed, kStreamInferenceDropout), index);
}

std::string file_stem_for(const std::string& identifier) {
  std::string s = identifier;
  const auto dot = s.rfind('.');
  const auto slash = s.find_last_of("/\\");
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) s.erase(dot);
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == ':') c = '_';
  }
  return s;
}

}  // namespace

PreparedCorpus prepare_corpus(const AppConfig& config) {
  require_file(config.corpus.manifest, "corpus manifest");
  require_file(config.corpus.annotations, "annotation file");
  PreparedCorpus p;
  p.corpus = load_corpus(config.corpus.manifest, config.corpus.annotations);
  p.pairs = enumerate_pairs(p.corpus.records);
  const long n = static_cast<long>(p.pairs.size());
  if (!config.corpus.split_file.empty()) {
    require_file(config.corpus.split_file, "split file");
    p.split = read_split_file(config.corpus.split_file, p.pairs.size());
    return p;
  }
  const long test = config.corpus.test_pairs >= 0 ? config.corpus.test_pairs : (n >= 2 ? std::max(1L, n / 5) : 0L);
  const long train = config.corpus.train_pairs >= 0 ? config.corpus.train_pairs : n - test;
  if (test < 0 || train < 0) throw UserError("corpus has too few pairs for the requested split");
  p.split = split_pairs(p.pairs.size(), {config.train.seed, static_cast<std::size_t>(train), static_cast<std::size_t>(test)});
  return p;
}

int cmd_train(const AppConfig& config, const std::optional<std::filesystem::path>& resume, Output io) {
  config.validate();
  PreparedCorpus prepared = prepare_corpus(config);
  auto train_pairs = select<GesturePair>(prepared.pairs, prepared.split.train);
  if (train_pairs.empty()) throw UserError("the training split is empty");

  const std::filesystem::path out = config.out_dir;
  std::filesystem::create_directories(out);
  write_split_file(out / "split.txt", prepared.split, prepared.pairs.size(), config.train.seed);
  write_file_atomic(out / "config.json", to_json(config));

  Trainer trainer(config.train, std::move(train_pairs), loader_for(config, prepared.corpus));
  if (resume) trainer.load_checkpoint(*resume);
  io.out << "training on " << prepared.split.train.size() << " pairs, " << trainer.total_steps() << " steps ("
         << trainer.steps_per_epoch() << " per epoch)\n";
  FitOptions fo;
  fo.out_dir = out;
  fo.progress = &io.out;
  const FitResult result = fit(trainer, fo);
  io.out << "done: step " << trainer.step() << ", last checkpoint "
         << (result.checkpoints.empty() ? std::string("none") : result.checkpoints.back().string()) << "\n";
  return 0;
}

int cmd_translate(const AppConfig& config, const TranslateRequest& request, Output io) {
  config.validate();
  const int size = config.train.image_size;
  std::unique_ptr<Generator> generator = checked_generator(config, request.checkpoint);

  std::filesystem::path source = request.source_image;
  HandPose target;
  std::string target_id = request.target_id;
  if (request.random_target) {
    PreparedCorpus prepared = prepare_corpus(config);
    if (prepared.split.test.empty()) throw UserError("--random-target needs a non-empty test split");
    Rng rng(mix_seed(config.train.seed, kStreamRandomTarget));
    const GesturePair& pair = prepared.pairs[prepared.split.test[rng.uniform_index(prepared.split.test.size())]];
    target_id = pair.target.image_id;
    target = pair.target.pose;
    if (source.empty()) source = prepared.corpus.image_root / pair.source.image_id;
  } else {
    if (target_id.empty()) throw UserError("give --target-id or --random-target");
    require_file(config.corpus.annotations, "annotation file");
    bool found = false;
    for (const auto& rec : load_annotations(config.corpus.annotations)) {
      if (rec.identifier == target_id) {
        target = rec.pose;
        found = true;
        break;
      }
    }
    if (!found) throw UserError("no annotation with identifier '" + target_id + "'");
  }
  if (source.empty()) throw UserError("--source is required");
  if (!std::filesystem::exists(source)) throw UserError("source image not found: " + source.string());

  const Image8 image = resize_area(to_rgb(read_png(source)), size, size);
  const ConditioningMap map = rasterize(scale_pose(target, size, size), config.train.weights.conditioning,
                                        config.train.keypoint_radius, config.train.line_width);
  const auto seed = request.dropout_seed ? request.dropout_seed : inference_seed(config, 0);
  const nn::Tensor generated = translate(*generator, image_to_tensor(image), map_to_tensor(map), seed);

  const std::filesystem::path output =
      request.output.empty() ? std::filesystem::path(config.out_dir) / "translated.png" : request.output;
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  write_png(output, side_by_side({tensor_to_image(generated), map_to_image(map)}));
  io.out << "target " << target_id << "\n" << "wrote " << output.string() << "\n";
  return 0;
}

int cmd_evaluate(const AppConfig& config, const EvaluateRequest& request, Output io) {
  config.validate();
  const Embedder embedder(config.embedder);
  std::unique_ptr<Generator> generator;
  if (!request.oracle_generator) generator = checked_generator(config, request.checkpoint);

  PreparedCorpus prepared = prepare_corpus(config);
  if (prepared.split.test.empty()) throw UserError("the test split is empty");
  const LoaderOptions loader = loader_for(config, prepared.corpus);

  std::vector<std::string> ids;
  std::vector<Image8> real, generated;
  for (std::size_t k = 0; k < prepared.split.test.size(); ++k) {
    const GesturePair& pair = prepared.pairs[prepared.split.test[k]];
    try {
      const TrainingExample ex = load_training_example(pair, false, loader);
      real.push_back(tensor_to_image(ex.y));
      if (generator) {
        generated.push_back(tensor_to_image(translate(*generator, ex.x, ex.map_y, inference_seed(config, k))));
      } else {
        generated.push_back(tensor_to_image(ex.y));
      }
    } catch (const DatasetError& e) {
      throw DatasetError("pair " + pair.identifier() + ": " + e.what());
    }
    ids.push_back(pair.identifier());
  }
  const metrics::MetricReport report = metrics::evaluate(ids, real, generated, embedder, config.is_splits);

  const std::filesystem::path output =
      request.output.empty() ? std::filesystem::path(config.out_dir) / "metrics.csv" : request.output;
  if (output.has_parent_path()) std::filesystem::create_directories(output.parent_path());
  write_file_atomic(output, report.to_csv());
  io.out << "pairs " << report.n << "  mse " << report.mse << "  psnr " << report.psnr << "  is " << report.is_mean
         << " +- " << report.is_std << "  fid " << report.fid << "  frd " << report.frd << "\n"
         << "wrote " << output.string() << "\n";
  return 0;
}

int cmd_rasterize(const std::filesystem::path& annotations, const std::string& variant,
                  const std::filesystem::path& out_dir, double radius, double line_width, Output io) {
  const auto parsed = parse_variant(variant);
  if (!parsed) {
    throw UserError("unknown variant '" + variant + "' (expected one of " + std::string(kVariantNames) + ")");
  }
  require_file(annotations.string(), "annotation file");
  const auto records = load_annotations(annotations.string());
  std::filesystem::create_directories(out_dir);
  for (const auto& rec : records) {
    const ConditioningMap map = rasterize(rec.pose, *parsed, radius, line_width);
    write_png(out_dir / (file_stem_for(rec.identifier) + "_" + variant + ".png"), map_to_image(map));
  }
  io.out << "wrote " << records.size() << " maps to " << out_dir.string() << "\n";
  return 0;
}

int cmd_make_synthetic_corpus(const SyntheticCorpusOptions& options, const std::filesystem::path& out_dir, Output io) {
  try {
    options.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
  const SyntheticCorpusPaths paths = write_synthetic_corpus(out_dir, options);
  io.out << "wrote " << paths.images << " images\nmanifest " << paths.manifest.string() << "\nannotations "
         << paths.annotations.string() << "\n";
  return 0;
}

}  // namespace gesturegan::app
