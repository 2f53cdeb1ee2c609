#include <charconv>
#include <set>
#include <sstream>

#include "gesturegan/serialization.hpp"
#include "gesturegan/training.hpp"
#include "json.hpp"

namespace gesturegan {

using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;

// Rejects keys the reader does not know so that typos in config files fail loudly.
void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

json generator_json(const GeneratorConfig& g) {
  return {{"image_size", g.image_size},         {"image_channels", g.image_channels},
          {"map_channels", g.map_channels},     {"out_channels", g.out_channels},
          {"base_width", g.base_width},         {"depth", g.depth},
          {"dropout_rate", g.dropout_rate},     {"dropout_levels", g.dropout_levels},
          {"per_channel_heads", g.per_channel_heads}};
}

GeneratorConfig generator_from(const json& j) {
  check_keys(j, {"image_size", "image_channels", "map_channels", "out_channels", "base_width", "depth",
                 "dropout_rate", "dropout_levels", "per_channel_heads"},
             "generator");
  GeneratorConfig g;
  read_opt(j, "image_size", g.image_size);
  read_opt(j, "image_channels", g.image_channels);
  read_opt(j, "map_channels", g.map_channels);
  read_opt(j, "out_channels", g.out_channels);
  read_opt(j, "base_width", g.base_width);
  read_opt(j, "depth", g.depth);
  read_opt(j, "dropout_rate", g.dropout_rate);
  read_opt(j, "dropout_levels", g.dropout_levels);
  read_opt(j, "per_channel_heads", g.per_channel_heads);
  return g;
}

json discriminator_json(const DiscriminatorConfig& d) {
  return {{"in_channels", d.in_channels}, {"num_scales", d.num_scales}, {"base_width", d.base_width}};
}

DiscriminatorConfig discriminator_from(const json& j) {
  check_keys(j, {"in_channels", "num_scales", "base_width"}, "discriminator");
  DiscriminatorConfig d;
  read_opt(j, "in_channels", d.in_channels);
  read_opt(j, "num_scales", d.num_scales);
  read_opt(j, "base_width", d.base_width);
  return d;
}

json config_json(const TrainConfig& c) {
  return {{"loss",
           {{"lambda1", c.weights.lambda1},
            {"lambda2", c.weights.lambda2},
            {"lambda3", c.weights.lambda3},
            {"color_norm", std::string(losses::to_string(c.weights.color_norm))},
            {"conditioning", std::string(to_string(c.weights.conditioning))}}},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"image_size", c.image_size},
          {"checkpoint_every", c.checkpoint_every},
          {"lambda3_start", c.lambda3_start},
          {"lambda3_end", c.lambda3_end},
          {"flip", c.flip},
          {"keypoint_radius", c.keypoint_radius},
          {"line_width", c.line_width},
          {"generator", generator_json(c.generator)},
          {"discriminator", discriminator_json(c.discriminator)},
          {"feature_weights", c.feature_weights}};
}

TrainConfig config_from(const json& j) {
  check_keys(j, {"loss", "learning_rate", "adam_beta1", "adam_beta2", "batch_size", "epochs", "seed",
                 "image_size", "checkpoint_every", "lambda3_start", "lambda3_end", "flip",
                 "keypoint_radius", "line_width", "generator", "discriminator", "feature_weights"},
             "train");
  TrainConfig c;
  if (auto it = j.find("loss"); it != j.end()) {
    check_keys(*it, {"lambda1", "lambda2", "lambda3", "color_norm", "conditioning"}, "loss");
    read_opt(*it, "lambda1", c.weights.lambda1);
    read_opt(*it, "lambda2", c.weights.lambda2);
    read_opt(*it, "lambda3", c.weights.lambda3);
    if (auto n = it->find("color_norm"); n != it->end()) {
      auto parsed = losses::parse_norm(n->get<std::string>());
      if (!parsed) throw std::invalid_argument("loss.color_norm must be L1 or L2");
      c.weights.color_norm = *parsed;
    }
    if (auto v = it->find("conditioning"); v != it->end()) {
      auto parsed = parse_variant(v->get<std::string>());
      if (!parsed) throw std::invalid_argument("loss.conditioning must be one of K, Khat, S, Shat");
      c.weights.conditioning = *parsed;
    }
  }
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "adam_beta1", c.adam_beta1);
  read_opt(j, "adam_beta2", c.adam_beta2);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "seed", c.seed);
  read_opt(j, "image_size", c.image_size);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "lambda3_start", c.lambda3_start);
  read_opt(j, "lambda3_end", c.lambda3_end);
  read_opt(j, "flip", c.flip);
  read_opt(j, "keypoint_radius", c.keypoint_radius);
  read_opt(j, "line_width", c.line_width);
  if (auto it = j.find("generator"); it != j.end()) c.generator = generator_from(*it);
  if (auto it = j.find("discriminator"); it != j.end()) c.discriminator = discriminator_from(*it);
  read_opt(j, "feature_weights", c.feature_weights);
  return c;
}

std::vector<NamedTensor> export_moments(const nn::Adam& opt) {
  std::vector<NamedTensor> out;
  const auto& params = opt.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({"m." + params[i].name, opt.first_moments()[i]});
    out.push_back({"v." + params[i].name, opt.second_moments()[i]});
  }
  return out;
}

void import_moments(nn::Adam& opt, const std::vector<NamedTensor>& tensors, const std::string& what) {
  const auto& params = opt.parameters();
  if (tensors.size() != 2 * params.size()) {
    throw CheckpointError(what + ": expected " + std::to_string(2 * params.size()) + " moment tensors, found " +
                          std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = tensors[2 * i];
    const auto& v = tensors[2 * i + 1];
    if (m.name != "m." + params[i].name || v.name != "v." + params[i].name) {
      throw CheckpointError(what + ": moment names do not match parameter '" + params[i].name + "'");
    }
    if (m.tensor.shape() != params[i].var.shape() || v.tensor.shape() != params[i].var.shape()) {
      throw CheckpointError(what + ": moment shape mismatch for '" + params[i].name + "'");
    }
    opt.first_moments()[i] = m.tensor;
    opt.second_moments()[i] = v.tensor;
  }
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw CheckpointError("malformed number '" + std::string(s) + "' in loss history");
  }
  return v;
}

std::vector<losses::LossBreakdown> parse_loss_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != losses::LossBreakdown::csv_header()) {
    throw CheckpointError("loss history has an unexpected header");
  }
  std::vector<losses::LossBreakdown> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() != 8) throw CheckpointError("loss history row has " + std::to_string(cells.size()) + " cells");
    losses::LossBreakdown b;
    b.adv_g = parse_double(cells[1]);
    b.adv_d = parse_double(cells[2]);
    b.color = parse_double(cells[3]);
    b.cycle = parse_double(cells[4]);
    b.identity = parse_double(cells[5]);
    b.total = parse_double(cells[6]);
    b.lambda3 = parse_double(cells[7]);
    rows.push_back(b);
  }
  return rows;
}

json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw CheckpointError("checkpoint manifest not found: " + path.string());
  json m;
  try {
    m = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint manifest " + path.string() + ": " + e.what());
  }
  if (m.value("format", "") != "gesturegan-checkpoint" || m.value("version", 0) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format in " + path.string());
  }
  return m;
}

template <typename Fn>
auto wrap_format_errors(const std::filesystem::path& file, Fn&& fn) {
  try {
    return fn();
  } catch (const FormatError& e) {
    throw CheckpointError("corrupt checkpoint file " + file.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("checkpoint file " + file.string() + " does not match the model: " + e.what());
  }
}

}  // namespace

std::string train_config_to_json(const TrainConfig& config) { return config_json(config).dump(2) + "\n"; }

TrainConfig train_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

std::string Trainer::loss_csv() const {
  std::string out = losses::LossBreakdown::csv_header() + "\n";
  for (std::size_t i = 0; i < history_.size(); ++i) {
    out += history_[i].csv_row(static_cast<long>(i + 1));
    out += '\n';
  }
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  write_tensor_file(tmp / "G.bin", export_parameters(generator_.parameters()));
  write_tensor_file(tmp / "D1.bin", export_parameters(d1_.parameters()));
  write_tensor_file(tmp / "D2.bin", export_parameters(d2_.parameters()));
  write_tensor_file(tmp / "adam_G.bin", export_moments(opt_g_));
  write_tensor_file(tmp / "adam_D.bin", export_moments(opt_d_));
  write_file_atomic(tmp / "losses.csv", loss_csv());

  // Mean of the steps completed so far in the current epoch.
  losses::LossBreakdown running;
  const long spe = steps_per_epoch();
  const long begin = step_ - step_ % spe;
  for (long s = begin; s < step_; ++s) {
    const auto& h = history_[static_cast<std::size_t>(s)];
    running.adv_g += h.adv_g;
    running.adv_d += h.adv_d;
    running.color += h.color;
    running.cycle += h.cycle;
    running.identity += h.identity;
    running.total += h.total;
  }
  const double n = std::max<long>(1, step_ - begin);
  json manifest = {
      {"format", "gesturegan-checkpoint"},
      {"version", kCheckpointVersion},
      {"train", config_json(config_)},
      {"epoch", epoch()},
      {"step", step_},
      {"seed", config_.seed},
      {"optimizer_steps", {{"G", opt_g_.steps_taken()}, {"D", opt_d_.steps_taken()}}},
      {"feature_extractor", features_.provenance()},
      {"running_mean",
       {{"steps", step_ - begin},
        {"adv_g", running.adv_g / n},
        {"adv_d", running.adv_d / n},
        {"color", running.color / n},
        {"cycle", running.cycle / n},
        {"identity", running.identity / n},
        {"total", running.total / n}}},
  };
  write_file_atomic(tmp / "manifest.json", manifest.dump(2) + "\n");

  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

void Trainer::load_checkpoint(const std::filesystem::path& dir) {
  const json manifest = read_manifest(dir);
  const TrainConfig stored = config_from(manifest.at("train"));
  if (!(stored == config_)) {
    throw CheckpointError("checkpoint " + dir.string() + " was written with a different training config");
  }
  const long step = manifest.at("step").get<long>();
  if (step < 0 || step > total_steps()) throw CheckpointError("checkpoint step out of range");

  wrap_format_errors(dir / "G.bin", [&] {
    import_parameters(generator_.parameters(), read_tensor_file(dir / "G.bin"), "G");
    return 0;
  });
  wrap_format_errors(dir / "D1.bin", [&] {
    import_parameters(d1_.parameters(), read_tensor_file(dir / "D1.bin"), "D1");
    return 0;
  });
  wrap_format_errors(dir / "D2.bin", [&] {
    import_parameters(d2_.parameters(), read_tensor_file(dir / "D2.bin"), "D2");
    return 0;
  });
  wrap_format_errors(dir / "adam_G.bin", [&] {
    import_moments(opt_g_, read_tensor_file(dir / "adam_G.bin"), "adam_G");
    return 0;
  });
  wrap_format_errors(dir / "adam_D.bin", [&] {
    import_moments(opt_d_, read_tensor_file(dir / "adam_D.bin"), "adam_D");
    return 0;
  });
  opt_g_.set_steps_taken(manifest.at("optimizer_steps").at("G").get<std::int64_t>());
  opt_d_.set_steps_taken(manifest.at("optimizer_steps").at("D").get<std::int64_t>());
  history_ = parse_loss_csv(read_file(dir / "losses.csv"));
  if (static_cast<long>(history_.size()) != step) {
    throw CheckpointError("checkpoint loss history length does not match its step count");
  }
  step_ = step;
}

LoadedGenerator load_generator(const std::filesystem::path& checkpoint_dir) {
  const json manifest = read_manifest(checkpoint_dir);
  LoadedGenerator out;
  try {
    out.config = config_from(manifest.at("train"));
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint manifest has an invalid config: " + std::string(e.what()));
  }
  out.generator = std::make_unique<Generator>(out.config.generator, 0);
  const auto path = checkpoint_dir / "G.bin";
  wrap_format_errors(path, [&] {
    import_parameters(out.generator->parameters(), read_tensor_file(path), "G");
    return 0;
  });
  return out;
}

}  // namespace gesturegan
