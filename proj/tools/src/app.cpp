#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "gesturegan/hand_annotations.hpp"
#include "gesturegan/image.hpp"
#include "gesturegan/serialization.hpp"
#include "gesturegan_app/app.hpp"
#include "json.hpp"

namespace gesturegan::app {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw UserError(where + ": expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw UserError("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

json to_json_value(const AppConfig& c) {
  return {{"train", json::parse(train_config_to_json(c.train))},
          {"corpus",
           {{"manifest", c.corpus.manifest},
            {"annotations", c.corpus.annotations},
            {"split_file", c.corpus.split_file},
            {"train_pairs", c.corpus.train_pairs},
            {"test_pairs", c.corpus.test_pairs}}},
          {"out_dir", c.out_dir},
          {"embedder",
           {{"kind", to_string(c.embedder.kind)},
            {"seed", c.embedder.seed},
            {"feature_dim", c.embedder.feature_dim},
            {"num_classes", c.embedder.num_classes},
            {"weights", c.embedder.weights}}},
          {"evaluate", {{"is_splits", c.is_splits}}},
          {"translate", {{"dropout", c.inference_dropout}}},
          {"synthetic",
           {{"subjects", c.synthetic.subjects},
            {"gestures", c.synthetic.gestures},
            {"images_per_gesture", c.synthetic.images_per_gesture},
            {"image_size", c.synthetic.image_size},
            {"seed", c.synthetic.seed}}}};
}

AppConfig from_json_value(const json& j) {
  check_keys(j, {"train", "corpus", "out_dir", "embedder", "evaluate", "translate", "synthetic"}, "config");
  AppConfig c;
  if (auto it = j.find("train"); it != j.end()) {
    try {
      c.train = train_config_from_json(it->dump());
    } catch (const std::invalid_argument& e) {
      throw UserError(std::string("config.train: ") + e.what());
    }
  }
  if (auto it = j.find("corpus"); it != j.end()) {
    check_keys(*it, {"manifest", "annotations", "split_file", "train_pairs", "test_pairs"}, "corpus");
    read_opt(*it, "manifest", c.corpus.manifest);
    read_opt(*it, "annotations", c.corpus.annotations);
    read_opt(*it, "split_file", c.corpus.split_file);
    read_opt(*it, "train_pairs", c.corpus.train_pairs);
    read_opt(*it, "test_pairs", c.corpus.test_pairs);
  }
  read_opt(j, "out_dir", c.out_dir);
  if (auto it = j.find("embedder"); it != j.end()) {
    check_keys(*it, {"kind", "seed", "feature_dim", "num_classes", "weights"}, "embedder");
    if (auto k = it->find("kind"); k != it->end()) {
      try {
        c.embedder.kind = parse_embedder_kind(k->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw UserError(e.what());
      }
    }
    read_opt(*it, "seed", c.embedder.seed);
    read_opt(*it, "feature_dim", c.embedder.feature_dim);
    read_opt(*it, "num_classes", c.embedder.num_classes);
    read_opt(*it, "weights", c.embedder.weights);
  }
  if (auto it = j.find("evaluate"); it != j.end()) {
    check_keys(*it, {"is_splits"}, "evaluate");
    read_opt(*it, "is_splits", c.is_splits);
  }
  if (auto it = j.find("translate"); it != j.end()) {
    check_keys(*it, {"dropout"}, "translate");
    read_opt(*it, "dropout", c.inference_dropout);
  }
  if (auto it = j.find("synthetic"); it != j.end()) {
    check_keys(*it, {"subjects", "gestures", "images_per_gesture", "image_size", "seed"}, "synthetic");
    read_opt(*it, "subjects", c.synthetic.subjects);
    read_opt(*it, "gestures", c.synthetic.gestures);
    read_opt(*it, "images_per_gesture", c.synthetic.images_per_gesture);
    read_opt(*it, "image_size", c.synthetic.image_size);
    read_opt(*it, "seed", c.synthetic.seed);
  }
  return c;
}

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) collect_leaves(value, path, out);
    else out.push_back(path);
  }
}

}  // namespace

void AppConfig::validate() const {
  try {
    train.validate();
    embedder.validate();
    synthetic.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(std::string("invalid config: ") + e.what());
  }
  if (is_splits < 1) throw UserError("invalid config: evaluate.is_splits must be >= 1");
}

bool operator==(const AppConfig& a, const AppConfig& b) {
  return a.train == b.train && a.corpus == b.corpus && a.out_dir == b.out_dir && a.embedder == b.embedder &&
         a.is_splits == b.is_splits && a.inference_dropout == b.inference_dropout && a.synthetic == b.synthetic;
}

std::string to_json(const AppConfig& config) { return to_json_value(config).dump(2) + "\n"; }

AppConfig app_config_from_json(const std::string& text) {
  try {
    return from_json_value(json::parse(text));
  } catch (const json::exception& e) {
    throw UserError(std::string("config: ") + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_leaves(to_json_value(AppConfig{}), "", keys);
  return keys;
}

AppConfig apply_overrides(const AppConfig& base, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = to_json_value(base);
  for (const auto& [key, text] : overrides) {
    json* node = &j;
    std::string::size_type start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      auto it = node->find(part);
      if (!node->is_object() || it == node->end()) throw UserError("unknown config key '" + key + "'");
      node = &*it;
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (node->is_object()) throw UserError("config key '" + key + "' is a section, not a value");
    if (node->is_string()) {
      *node = text;
    } else {
      try {
        *node = json::parse(text);
      } catch (const json::exception&) {
        throw UserError("invalid value '" + text + "' for config key '" + key + "'");
      }
    }
  }
  try {
    return from_json_value(j);
  } catch (const json::exception& e) {
    throw UserError(std::string("config override: ") + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Gesture-conditioned hand image translation: training, inference and evaluation"};
  cli.name(args.empty() ? "gesturegan" : args.front());
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  cli.add_option("--config", config_path, "JSON config file");
  cli.add_option("--seed", seed, "run seed (train.seed and synthetic.seed)");
  cli.add_option("--out", out_dir, "output directory (out_dir)");

  const std::vector<std::string> keys = config_keys();
  std::map<std::string, std::string> key_values;
  for (const auto& key : keys) {
    if (key == "out_dir") continue;
    cli.add_option("--" + key, key_values[key], "config key " + key)->group("Config keys");
  }

  auto* train = cli.add_subcommand("train", "train G, D1 and D2 on the configured corpus");
  std::string resume;
  train->add_option("--resume", resume, "checkpoint directory to continue from");

  auto* translate = cli.add_subcommand("translate", "translate one image toward a target pose");
  TranslateRequest treq;
  std::string t_checkpoint, t_source, t_output;
  std::optional<std::uint64_t> t_dropout;
  translate->add_option("--checkpoint", t_checkpoint, "checkpoint directory")->required();
  translate->add_option("--source", t_source, "source image");
  translate->add_option("--target-id", treq.target_id, "annotation identifier of the target pose");
  translate->add_flag("--random-target", treq.random_target, "draw the target from the test split");
  translate->add_option("--output", t_output, "output image (default <out>/translated.png)");
  translate->add_option("--dropout-seed", t_dropout, "dropout noise seed");

  auto* evaluate = cli.add_subcommand("evaluate", "translate every test pair and write metrics.csv");
  EvaluateRequest ereq;
  std::string e_checkpoint, e_output;
  evaluate->add_option("--checkpoint", e_checkpoint, "checkpoint directory");
  evaluate->add_flag("--oracle-generator", ereq.oracle_generator, "emit the ground truth instead of running G");
  evaluate->add_option("--output", e_output, "metrics CSV (default <out>/metrics.csv)");

  auto* rasterize = cli.add_subcommand("rasterize", "write conditioning maps for an annotation file");
  std::string r_annotations, r_variant = "S";
  std::optional<double> r_radius, r_width;
  rasterize->add_option("--annotations", r_annotations, "annotation file")->required();
  rasterize->add_option("--variant", r_variant, "K, Khat, S or Shat");
  rasterize->add_option("--radius", r_radius, "keypoint disk radius");
  rasterize->add_option("--line-width", r_width, "skeleton line width");

  auto* synth = cli.add_subcommand("make-synthetic-corpus", "write a procedural hand corpus");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    cli.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const Output io{out, err};
  try {
    AppConfig config;
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path)) throw UserError("config file not found: " + config_path);
      config = app_config_from_json(read_file(config_path));
    }
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& key : keys) {
      if (key == "out_dir") continue;
      if (cli.count("--" + key) > 0) overrides.emplace_back(key, key_values[key]);
    }
    config = apply_overrides(config, overrides);
    if (seed) {
      config.train.seed = *seed;
      config.synthetic.seed = *seed;
    }
    if (!out_dir.empty()) config.out_dir = out_dir;
    config.validate();

    if (*train) {
      std::optional<std::filesystem::path> from;
      if (!resume.empty()) from = resume;
      return cmd_train(config, from, io);
    }
    if (*translate) {
      treq.checkpoint = t_checkpoint;
      treq.source_image = t_source;
      treq.output = t_output;
      treq.dropout_seed = t_dropout;
      return cmd_translate(config, treq, io);
    }
    if (*evaluate) {
      ereq.checkpoint = e_checkpoint;
      ereq.output = e_output;
      return cmd_evaluate(config, ereq, io);
    }
    if (*rasterize) {
      return cmd_rasterize(r_annotations, r_variant, config.out_dir, r_radius.value_or(config.train.keypoint_radius),
                           r_width.value_or(config.train.line_width), io);
    }
    if (*synth) return cmd_make_synthetic_corpus(config.synthetic, config.out_dir, io);
    err << "error: no command given\n";
    return 1;
  } catch (const NonFiniteLossError& e) {
    err << "error: " << e.what();
    if (!e.snapshot.empty()) err << " (state saved to " << e.snapshot.string() << ")";
    err << "\n";
    return 2;
  } catch (const EmbedderError& e) {
    err << "error: " << e.what() << "\n"
        << "hint: pass --embedder.kind seeded-random to evaluate without pretrained assets\n";
    return 1;
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const DatasetError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const AnnotationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ImageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace gesturegan::app
