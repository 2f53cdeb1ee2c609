#include "doctest.h"
#include "gesturegan/networks.hpp"
#include "test_support.hpp"

using namespace gesturegan;
using namespace gesturegan::nn;
using testing::random_tensor;

namespace {

GeneratorConfig small_generator(int size = 64) {
  GeneratorConfig g;
  g.image_size = size;
  g.base_width = 4;
  return g;
}

// Input-row interval seen by score index i, walking back through the layers.
std::pair<int, int> receptive_interval(const DiscriminatorConfig& d, int i) {
  int lo = i, hi = i;
  const int layers = d.num_scales + 2;
  for (int k = layers - 1; k >= 0; --k) {
    const int stride = k < d.num_scales ? 2 : 1;
    lo = lo * stride - 1;
    hi = hi * stride - 1 + 3;
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("generator shape contract and determinism") {
  const Generator g(small_generator(), 1);
  Rng rng(1);
  const Var x = Var::constant(random_tensor({2, 3, 64, 64}, rng));
  const Var s = Var::constant(random_tensor({2, 1, 64, 64}, rng, 0.0, 1.0));
  const Var a = g.forward(x, s, std::nullopt);
  CHECK(a.shape() == Shape{2, 3, 64, 64});
  CHECK(g.forward(x, s, std::nullopt).value() == a.value());
  for (float v : a.value().values()) {
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= 1.0f);
  }
  const Var d1 = g.forward(x, s, 1);
  CHECK(g.forward(x, s, 1).value() == d1.value());
  CHECK_FALSE(g.forward(x, s, 2).value() == d1.value());

  CHECK(Generator(small_generator(), 1).forward(x, s, std::nullopt).value() == a.value());
  CHECK_FALSE(Generator(small_generator(), 2).forward(x, s, std::nullopt).value() == a.value());
}

TEST_CASE("generator conditioning and skips both reach the output") {
  const Generator g(small_generator(32), 3);
  Rng rng(2);
  const Tensor x = random_tensor({1, 3, 32, 32}, rng);
  const Tensor s = random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0);
  Tensor s2 = s;
  s2.at(0, 0, 5, 5) += 1.0f;
  CHECK_FALSE(g.forward(Var::constant(x), Var::constant(s), std::nullopt).value() ==
              g.forward(Var::constant(x), Var::constant(s2), std::nullopt).value());
  // Gradient reaches every parameter.
  const Var out = g.forward(Var::constant(x), Var::constant(s), 7);
  backward(testing::weighted_sum(out, random_tensor(out.shape(), rng)));
  for (const auto& p : g.parameters()) CHECK_MESSAGE(p.var.has_grad(), p.name);
}

TEST_CASE("generator per-channel heads and validation") {
  GeneratorConfig c = small_generator(32);
  c.per_channel_heads = true;
  const Generator g(c, 4);
  Rng rng(3);
  CHECK(g.forward(Var::constant(random_tensor({1, 3, 32, 32}, rng)),
                  Var::constant(random_tensor({1, 1, 32, 32}, rng)), std::nullopt)
            .shape() == Shape{1, 3, 32, 32});

  GeneratorConfig bad = small_generator(48);
  CHECK_THROWS(bad.validate());
  bad = small_generator(64);
  bad.depth = 2;
  CHECK_THROWS(bad.validate());
  bad = small_generator(64);
  bad.out_channels = 1;
  CHECK_THROWS(bad.validate());

  const Generator g64(small_generator(64), 1);
  CHECK_THROWS_AS(g64.forward(Var::constant(Tensor({1, 3, 32, 32})), Var::constant(Tensor({1, 1, 32, 32})),
                              std::nullopt),
                  ShapeError);
  CHECK_THROWS_AS(g64.forward(Var::constant(Tensor({1, 3, 64, 64})), Var::constant(Tensor({2, 1, 64, 64})),
                              std::nullopt),
                  ShapeError);
  CHECK_THROWS_AS(g64.forward(Var::constant(Tensor({1, 4, 64, 64})), Var::constant(Tensor({1, 1, 64, 64})),
                              std::nullopt),
                  ShapeError);
}

TEST_CASE("discriminator score grid and receptive field") {
  DiscriminatorConfig dc;
  dc.base_width = 4;
  CHECK(dc.score_size(64) == 6);
  CHECK(dc.receptive_field() == 70);
  const auto [lo, hi] = receptive_interval(dc, 0);
  CHECK(hi - lo + 1 == dc.receptive_field());

  const Discriminator d(dc, 5);
  Rng rng(4);
  const Tensor cond = random_tensor({1, 4, 64, 64}, rng);
  const Tensor cand = random_tensor({1, 3, 64, 64}, rng);
  const Var base = d.forward(Var::constant(cond), Var::constant(cand));
  REQUIRE(base.shape() == Shape{1, 1, 6, 6});

  // Perturb one candidate pixel; exactly the scores whose receptive field
  // covers it may change.
  for (auto [r, c] : {std::pair{3, 60}, std::pair{40, 10}, std::pair{63, 63}}) {
    Tensor moved = cand;
    moved.at(0, 1, r, c) += 5.0f;
    const Var out = d.forward(Var::constant(cond), Var::constant(moved));
    int changed_inside = 0;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        const auto [rl, rh] = receptive_interval(dc, i);
        const auto [cl, ch] = receptive_interval(dc, j);
        const bool inside = r >= rl && r <= rh && c >= cl && c <= ch;
        const bool same = out.value().at(0, 0, i, j) == base.value().at(0, 0, i, j);
        if (!inside) CHECK(same);
        if (inside && !same) ++changed_inside;
      }
    }
    CHECK(changed_inside > 0);
  }
}

TEST_CASE("zero discriminator scores 0 everywhere") {
  DiscriminatorConfig dc;
  dc.base_width = 4;
  const Discriminator d(dc, 1);
  for (const auto& p : d.parameters()) const_cast<Var&>(p.var).mutable_value().fill(0.0f);
  Rng rng(5);
  const Var s = d.forward(Var::constant(random_tensor({2, 4, 64, 64}, rng)),
                          Var::constant(random_tensor({2, 3, 64, 64}, rng)));
  for (float v : s.value().values()) CHECK(v == 0.0f);
  CHECK(mean_decision(s.value()) == 0.5);
  CHECK_THROWS_AS(d.forward(Var::constant(Tensor({1, 3, 64, 64})), Var::constant(Tensor({1, 3, 64, 64}))),
                  ShapeError);
}

TEST_CASE("feature extractor is frozen, deterministic and differentiable in its input") {
  const FeatureExtractor f = FeatureExtractor::seeded_random(7);
  const FeatureExtractor g = FeatureExtractor::seeded_random(7);
  Rng rng(6);
  const Tensor x = random_tensor({1, 3, 16, 16}, rng);
  CHECK(f(Var::constant(x)).value() == g(Var::constant(x)).value());
  for (const auto& p : f.parameters()) CHECK_FALSE(p.var.requires_grad());
  const Var xi = Var::parameter(x);
  backward(mean(f(xi)));
  CHECK(xi.has_grad());
  for (const auto& p : f.parameters()) CHECK_FALSE(p.var.has_grad());
  CHECK_THROWS_AS(f(Var::constant(Tensor({1, 3, 10, 10}))), ShapeError);
  CHECK_THROWS(FeatureExtractor::pretrained("/nonexistent/weights.bin"));
}

TEST_CASE("parameter export / import") {
  testing::TempDir dir("params");
  const Generator a(small_generator(32), 1);
  const Generator b(small_generator(32), 2);
  import_parameters(b.parameters(), export_parameters(a.parameters()), "G");
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    CHECK(a.parameters()[i].var.value() == b.parameters()[i].var.value());
  }
  GeneratorConfig wider = small_generator(32);
  wider.base_width = 8;
  const Generator c(wider, 1);
  CHECK_THROWS(import_parameters(c.parameters(), export_parameters(a.parameters()), "G"));

  write_tensor_file(dir / "fx.bin", export_parameters(FeatureExtractor::seeded_random(3).parameters()));
  const FeatureExtractor loaded = FeatureExtractor::pretrained((dir / "fx.bin").string());
  Rng rng(1);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng);
  CHECK(loaded(Var::constant(x)).value() == FeatureExtractor::seeded_random(3)(Var::constant(x)).value());
}
