// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gesturegan/conditioning.hpp"
#include "gesturegan/losses.hpp"
#include "gesturegan/metrics.hpp"
#include "gesturegan/serialization.hpp"
#include "gesturegan/training.hpp"
#include "gesturegan_app/app.hpp"
#include "test_support.hpp"

using namespace gesturegan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

nn::Tensor pixel(float r, float g, float b) { return nn::Tensor({1, 3, 1, 1}, std::vector<float>{r, g, b}); }

Outcome channel_pollution() {
  Outcome o;
  Rng rng(101);
  double worst_color = 0.0, weakest_joint = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    const nn::Tensor pred = testing::random_tensor({1, 3, 4, 4}, rng);
    // Targets offset by >= 1 keep every residual away from zero.
    nn::Tensor target = testing::random_tensor({1, 3, 4, 4}, rng, 1.5, 2.5);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (a == b) continue;
        using losses::Reconstruction;
        worst_color = std::max({worst_color, losses::cross_channel_gradient_probe(Reconstruction::color_l1, pred, target, a, b),
                                losses::cross_channel_gradient_probe(Reconstruction::color_l2, pred, target, a, b)});
        weakest_joint = std::min(weakest_joint,
                                 losses::cross_channel_gradient_probe(Reconstruction::pixel_l2, pred, target, a, b));
      }
    }
  }
  const double witness =
      losses::cross_channel_gradient_probe(losses::Reconstruction::pixel_l2, pixel(0, 0, 0), pixel(3, 4, 0), 1, 0);
  o.require(worst_color <= 1e-6, "color cross-channel gradient " + num(worst_color));
  o.require(witness >= 1e-3, "joint L2 witness coupling " + num(witness));
  o.require(weakest_joint >= 1e-3, "joint L2 coupling " + num(weakest_joint));
  o.detail = o.pass ? "color max " + num(worst_color) + ", joint witness " + num(witness) : o.detail;
  return o;
}

Outcome analytic_losses() {
  Outcome o;
  const double joint = losses::reconstruction_core(losses::Reconstruction::pixel_l2, pixel(0, 0, 0), pixel(3, 4, 0));
  const double color = losses::reconstruction_core(losses::Reconstruction::color_l2, pixel(0, 0, 0), pixel(3, 4, 0));
  o.require(joint == 5.0, "joint L2 core " + num(joint));
  o.require(color == 7.0, "color L2 core " + num(color));
  const std::vector<float> half(36, 0.5f);
  o.require(std::abs(losses::bce(half, 1) - std::log(2.0)) <= 1e-9, "bce(0.5) != ln 2");
  const nn::Tensor grid({1, 1, 6, 6}, 0.5f);
  const double d = losses::adversarial_d_loss(grid, grid, grid, grid);
  o.require(std::abs(d - 2 * std::log(2.0)) <= 1e-9, "dual D loss " + num(d));
  Rng rng(102);
  for (int i = 0; i < 1000; ++i) {
    const losses::LossParts p{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    losses::LossWeights w;
    w.lambda1 = 200 * rng.uniform();
    w.lambda2 = 20 * rng.uniform();
    w.lambda3 = rng.uniform();
    const double expect = p.adv + w.lambda1 * p.color + w.lambda2 * p.cycle + w.lambda3 * p.identity;
    o.require(losses::total_generator_loss(p, w) == expect, "recombination differs at draw " + std::to_string(i));
  }
  if (o.pass) o.detail = "cores 5 and 7, bce ln 2, 1000 exact recombinations";
  return o;
}

double brute_frechet(const std::vector<double>& a, const std::vector<double>& b, std::size_t i, std::size_t j) {
  const double here = std::abs(a[i] - b[j]);
  if (i + 1 == a.size() && j + 1 == b.size()) return here;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, brute_frechet(a, b, i + 1, j));
  if (j + 1 < b.size()) best = std::min(best, brute_frechet(a, b, i, j + 1));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, brute_frechet(a, b, i + 1, j + 1));
  return std::max(here, best);
}

Outcome frechet_oracle() {
  Outcome o;
  Rng rng(103);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(1 + rng.uniform_index(6)), b(1 + rng.uniform_index(6));
    for (auto& v : a) v = 10 * rng.uniform() - 5;
    for (auto& v : b) v = 10 * rng.uniform() - 5;
    const double fast = metrics::discrete_frechet(a, b);
    const double slow = brute_frechet(a, b, 0, 0);
    o.require(fast == slow, "pair " + std::to_string(t) + ": " + num(fast) + " vs " + num(slow));
  }
  if (o.pass) o.detail = "200 pairs";
  return o;
}

metrics::GaussianStats diag(std::vector<double> mu, std::vector<double> var) {
  metrics::GaussianStats s;
  s.mu = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  s.sigma = Eigen::Map<Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size())).asDiagonal();
  return s;
}

Outcome fid_sanity() {
  Outcome o;
  Rng rng(104);
  std::vector<std::vector<double>> f(64, std::vector<double>(8));
  for (auto& r : f)
    for (auto& v : r) v = rng.uniform();
  const metrics::GaussianStats s = metrics::gaussian_stats(f);
  const double self = metrics::fid(s, s);
  o.require(std::abs(self) <= 1e-8, "fid(s,s) = " + num(self));
  metrics::GaussianStats shifted = s;
  shifted.mu[3] += 1.0;
  const double mean_only = metrics::fid(s, shifted);
  o.require(std::abs(mean_only - 1.0) <= 1e-8, "mean-shift case " + num(mean_only));
  // (sqrt 1 - sqrt 4)^2 = 1.
  const double one_d = metrics::fid(diag({0}, {1}), diag({0}, {4}));
  o.require(std::abs(one_d - 1.0) <= 1e-8, "1-D case " + num(one_d));
  if (o.pass) o.detail = "self " + num(self) + ", mean shift " + num(mean_only) + ", 1-D " + num(one_d);
  return o;
}

Outcome rasterization_oracle() {
  Outcome o;
  Rng rng(105);
  for (int i = 0; i < 100; ++i) {
    const HandPose pose = testing::random_pose(rng, 32, 32);
    for (bool weighted : {false, true}) {
      o.require(rasterize_keypoints(pose, weighted).pixels == testing::oracle_keypoint_map(pose, weighted, 4.0),
                "disk map differs on pose " + std::to_string(i));
      o.require(rasterize_skeleton(pose, weighted).pixels == testing::oracle_skeleton_map(pose, weighted, 4.0),
                "capsule map differs on pose " + std::to_string(i));
    }
  }
  HandPose centred;
  centred.image_width = 32;
  centred.image_height = 32;
  for (auto& kp : centred.keypoints) kp = {16, 16, 1};
  const std::size_t disk = rasterize_keypoints(centred, false, 4.0).nonzero_count();
  o.require(disk == 49, "radius-4 disk has " + std::to_string(disk) + " pixels");
  if (o.pass) o.detail = "100 poses, disk 49 px";
  return o;
}

app::AppConfig determinism_config(const fs::path& corpus, const fs::path& out) {
  app::AppConfig c;
  c.train = testing::tiny_train_config(50, 21);
  c.train.generator.base_width = 8;
  c.train.discriminator.base_width = 8;
  c.train.batch_size = 8;  // 8 pairs: one step per epoch
  c.corpus.manifest = (corpus / "manifest.txt").string();
  c.corpus.annotations = (corpus / "annotations.txt").string();
  c.corpus.test_pairs = 0;
  c.out_dir = out.string();
  return c;
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  std::ostringstream sink;
  const app::Output io{sink, sink};
  SyntheticCorpusOptions so;
  so.image_size = 32;
  write_synthetic_corpus(work / "corpus32", so);

  const auto a = determinism_config(work / "corpus32", work / "det_a");
  auto b = a;
  b.out_dir = (work / "det_b").string();
  auto interrupted = a;
  interrupted.out_dir = (work / "det_c").string();
  interrupted.train.checkpoint_every = 25;
  auto resumed = interrupted;
  resumed.out_dir = (work / "det_d").string();

  o.require(app::cmd_train(a, std::nullopt, io) == 0, "run A failed");
  o.require(app::cmd_train(b, std::nullopt, io) == 0, "run B failed");
  const std::string csv_a = read_file(work / "det_a" / "losses.csv");
  o.require(csv_a == read_file(work / "det_b" / "losses.csv"), "loss CSVs differ");
  const std::size_t rows = static_cast<std::size_t>(std::count(csv_a.begin(), csv_a.end(), '\n'));
  o.require(rows == 51, "loss CSV has " + std::to_string(rows) + " lines");

  // Stop halfway through a run, then resume the checkpoint in a fresh process state.
  const auto prepared = app::prepare_corpus(interrupted);
  {
    Trainer t(interrupted.train, select<GesturePair>(prepared.pairs, prepared.split.train),
              {prepared.corpus.image_root, 32});
    FitOptions fo;
    fo.out_dir = interrupted.out_dir;
    fo.stop_after_step = 25;
    fit(t, fo);
  }
  const fs::path half = checkpoint_dir_name(interrupted.out_dir, 25);
  o.require(app::cmd_train(resumed, half, io) == 0, "resumed run failed");
  const fs::path end_a = checkpoint_dir_name(a.out_dir, 50);
  const fs::path end_d = checkpoint_dir_name(resumed.out_dir, 50);
  for (const char* f : {"G.bin", "D1.bin", "D2.bin", "adam_G.bin", "adam_D.bin"}) {
    o.require(read_file(end_a / f) == read_file(end_d / f), std::string("resumed ") + f + " differs");
  }
  o.require(read_file(work / "det_d" / "losses.csv") == csv_a, "resumed loss CSV differs");
  if (o.pass) o.detail = "50 steps x2 identical, resume at 25 bitwise";
  return o;
}

Outcome smoke(const fs::path& work) {
  Outcome o;
  SyntheticCorpusOptions so;  // 4 subjects x 2 gestures at 64 px: 8 ordered pairs
  write_synthetic_corpus(work / "corpus64", so);

  app::AppConfig c;
  c.train.image_size = 64;
  c.train.generator.image_size = 64;
  c.train.generator.base_width = 16;
  c.train.discriminator.base_width = 16;
  c.train.batch_size = 8;
  c.train.epochs = 200;
  c.train.seed = 7;
  c.corpus.manifest = (work / "corpus64" / "manifest.txt").string();
  c.corpus.annotations = (work / "corpus64" / "annotations.txt").string();
  c.corpus.test_pairs = 0;
  c.out_dir = (work / "smoke").string();

  const auto prepared = app::prepare_corpus(c);
  o.require(prepared.pairs.size() == 8, "corpus has " + std::to_string(prepared.pairs.size()) + " pairs");
  Trainer t(c.train, select<GesturePair>(prepared.pairs, prepared.split.train), {prepared.corpus.image_root, 64});
  o.require(t.total_steps() == 200, "schedule has " + std::to_string(t.total_steps()) + " steps");
  FitOptions fo;
  fo.out_dir = c.out_dir;
  const FitResult r = fit(t, fo);
  const auto& h = r.history;
  o.require(h.size() == 200, "ran " + std::to_string(h.size()) + " steps");
  if (!o.pass) return o;
  for (const auto& b : h) {
    o.require(std::isfinite(b.total) && std::isfinite(b.adv_d), "non-finite loss");
  }
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += h[static_cast<std::size_t>(i)].color / 10;
    late += h[static_cast<std::size_t>(190 + i)].color / 10;
  }
  o.require(late <= 0.8 * early, "color " + num(early) + " -> " + num(late));
  o.require(h.front().lambda3 == 0.1 && h.back().lambda3 == 0.5, "lambda3 schedule endpoints");
  if (o.pass) o.detail = "color mean steps 1-10 " + num(early) + " -> steps 191-200 " + num(late);
  return o;
}

Outcome metric_self_comparison(const fs::path& work) {
  Outcome o;
  app::AppConfig c;
  c.train.image_size = 64;
  c.corpus.manifest = (work / "corpus64" / "manifest.txt").string();
  c.corpus.annotations = (work / "corpus64" / "annotations.txt").string();
  c.corpus.test_pairs = 8;
  c.corpus.train_pairs = 0;
  c.out_dir = (work / "oracle").string();
  c.embedder.kind = EmbedderKind::seeded_random;
  if (!fs::exists(c.corpus.manifest)) write_synthetic_corpus(work / "corpus64", SyntheticCorpusOptions{});
  std::ostringstream sink;
  app::EvaluateRequest req;
  req.oracle_generator = true;
  o.require(app::cmd_evaluate(c, req, {sink, sink}) == 0, "evaluate failed");
  const std::string csv = read_file(work / "oracle" / "metrics.csv");
  const std::string header = "mse,psnr,is_mean,is_std,fid,frd,N\n";
  const auto pos = csv.find(header);
  o.require(pos != std::string::npos, "summary header missing");
  if (!o.pass) return o;
  std::istringstream line(csv.substr(pos + header.size()));
  std::vector<double> v;
  std::string cell;
  while (std::getline(line, cell, ',')) v.push_back(std::stod(cell));
  o.require(v.size() == 7, "summary has " + std::to_string(v.size()) + " fields");
  if (!o.pass) return o;
  o.require(v[0] == 0.0, "mse " + num(v[0]));
  o.require(v[1] == metrics::kPsnrSentinel, "psnr " + num(v[1]));
  o.require(std::abs(v[4]) <= 1e-6, "fid " + num(v[4]));
  o.require(v[5] == 0.0, "frd " + num(v[5]));
  if (o.pass) o.detail = "N=" + num(v[6]) + " mse 0, psnr 100, fid " + num(v[4]) + ", frd 0";
  return o;
}

Outcome flip_equivariance() {
  Outcome o;
  Rng rng(106);
  const ConditioningVariant variants[] = {ConditioningVariant::keypoints, ConditioningVariant::confidence_keypoints,
                                          ConditioningVariant::skeleton, ConditioningVariant::confidence_skeleton};
  for (int i = 0; i < 50; ++i) {
    const HandPose pose = testing::random_pose(rng, 32 + (i % 2), 32);
    for (auto v : variants) {
      o.require(rasterize(flip_pose(pose), v).pixels == rasterize(pose, v).mirrored().pixels,
                "pose " + std::to_string(i) + " variant " + std::string(to_string(v)));
    }
  }
  if (o.pass) o.detail = "50 poses x 4 variants";
  return o;
}

}  // namespace

int main() {
  testing::TempDir work("acceptance");
  const std::vector<Criterion> criteria{
      {"channel-pollution", channel_pollution},
      {"analytic-loss-values", analytic_losses},
      {"frechet-oracle", frechet_oracle},
      {"fid-sanity", fid_sanity},
      {"rasterization-oracle", rasterization_oracle},
      {"determinism", [&] { return determinism(work.path()); }},
      {"training-smoke", [&] { return smoke(work.path()); }},
      {"metric-self-comparison", [&] { return metric_self_comparison(work.path()); }},
      {"flip-equivariance", flip_equivariance},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = c.check();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s (%.1f s) %s\n", r.pass ? "PASS" : "FAIL", index, c.name, secs, r.detail.c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
