#include <cmath>
#include <limits>

#include "doctest.h"
#include "gesturegan/metrics.hpp"
#include "test_support.hpp"

using namespace gesturegan;
using namespace gesturegan::metrics;

namespace {

Image8 flat_image(int w, int h, std::uint8_t v) { return Image8(w, h, 3, v); }

Image8 noise_image(Rng& rng, int w = 24, int h = 24) {
  Image8 im(w, h, 3);
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.uniform() * 256);
  return im;
}

std::vector<std::vector<double>> random_rows(Rng& rng, int n, int d, double scale = 1.0) {
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& r : out)
    for (auto& v : r) v = scale * (2 * rng.uniform() - 1);
  return out;
}

// Two-pass textbook estimates.
GaussianStats oracle_stats(const std::vector<std::vector<double>>& f) {
  const std::size_t n = f.size(), d = f[0].size();
  GaussianStats s{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& r : f)
    for (std::size_t i = 0; i < d; ++i) s.mu[i] += r[i] / n;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0;
      for (const auto& r : f) acc += (r[i] - s.mu[i]) * (r[j] - s.mu[j]);
      s.sigma(i, j) = acc / (n - 1);
    }
  return s;
}

// Minimum over every monotone coupling of the maximum matched distance,
// enumerated by walking all lattice paths.
double brute_frechet(const std::vector<double>& a, const std::vector<double>& b, std::size_t i = 0,
                     std::size_t j = 0) {
  const double here = std::abs(a[i] - b[j]);
  if (i + 1 == a.size() && j + 1 == b.size()) return here;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, brute_frechet(a, b, i + 1, j));
  if (j + 1 < b.size()) best = std::min(best, brute_frechet(a, b, i, j + 1));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, brute_frechet(a, b, i + 1, j + 1));
  return std::max(here, best);
}

GaussianStats diag_stats(std::vector<double> mu, std::vector<double> var) {
  GaussianStats s{Eigen::Map<Eigen::VectorXd>(mu.data(), mu.size()),
                  Eigen::MatrixXd(Eigen::Map<Eigen::VectorXd>(var.data(), var.size()).asDiagonal())};
  return s;
}

EmbedderSpec small_embedder() {
  EmbedderSpec s;
  s.seed = 9;
  s.feature_dim = 16;
  s.num_classes = 10;
  return s;
}

}  // namespace

TEST_CASE("mse and psnr") {
  CHECK(mse(flat_image(4, 4, 0), flat_image(4, 4, 255)) == 65025.0);
  CHECK(psnr(flat_image(4, 4, 0), flat_image(4, 4, 255)) == doctest::Approx(0.0));
  CHECK(psnr_from_mse(1.0) == doctest::Approx(48.1308).epsilon(1e-6));
  CHECK(mse(flat_image(4, 4, 10), flat_image(4, 4, 10)) == 0.0);
  CHECK(psnr(flat_image(4, 4, 10), flat_image(4, 4, 10)) == kPsnrSentinel);
  CHECK(psnr_from_mse(1e-30) == kPsnrSentinel);
  Image8 a = flat_image(2, 1, 0);
  Image8 b = a;
  b.at(0, 0, 0) = 6;  // one of six values differs by 6
  CHECK(mse(a, b) == 6.0);
  const std::vector<double> u{1, 2, 3}, v{1, 2, 6};
  CHECK(mse(u, v) == 3.0);
  CHECK_THROWS(mse(flat_image(4, 4, 0), flat_image(4, 5, 0)));
  CHECK_THROWS(psnr_from_mse(-1));
  CHECK_THROWS(mse(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("inception score") {
  const std::vector<std::vector<double>> uniform(5, std::vector<double>(4, 0.25));
  CHECK(inception_score(uniform).mean == doctest::Approx(1.0));
  std::vector<std::vector<double>> onehot;
  for (int i = 0; i < 4; ++i) {
    onehot.emplace_back(4, 0.0);
    onehot.back()[i] = 1.0;
  }
  CHECK(inception_score(onehot).mean == doctest::Approx(4.0));
  const std::vector<std::vector<double>> same(6, std::vector<double>{1.0, 0.0, 0.0});
  CHECK(inception_score(same).mean == doctest::Approx(1.0));

  auto doubled = onehot;
  doubled.insert(doubled.end(), onehot.begin(), onehot.end());
  const InceptionScore s = inception_score(doubled, 2);
  CHECK(s.mean == doctest::Approx(4.0));
  CHECK(s.stddev == doctest::Approx(0.0));

  // Two chunks scoring 4 and 1: mean 2.5, population std 1.5.
  auto mixed = onehot;
  mixed.insert(mixed.end(), 4, std::vector<double>{1, 0, 0, 0});
  const InceptionScore m = inception_score(mixed, 2);
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.stddev == doctest::Approx(1.5));

  CHECK_THROWS(inception_score({}));
  CHECK_THROWS(inception_score(onehot, 5));
  CHECK_THROWS(inception_score(onehot, 0));
  CHECK_THROWS(inception_score({{0.5, 0.6}}));
  CHECK_THROWS(inception_score({{1.5, -0.5}}));
  CHECK_THROWS(inception_score({{1.0, 0.0}, {1.0}}));
}

TEST_CASE("gaussian statistics") {
  const GaussianStats s = gaussian_stats({{1, 2}, {3, 4}, {5, 0}});
  CHECK(s.mu[0] == doctest::Approx(3));
  CHECK(s.mu[1] == doctest::Approx(2));
  CHECK(s.sigma(0, 0) == doctest::Approx(4));
  CHECK(s.sigma(1, 1) == doctest::Approx(4));
  CHECK(s.sigma(0, 1) == doctest::Approx(-2));
  CHECK(s.sigma(1, 0) == s.sigma(0, 1));

  Rng rng(3);
  const auto f = random_rows(rng, 40, 6, 3.0);
  const GaussianStats g = gaussian_stats(f);
  const GaussianStats o = oracle_stats(f);
  CHECK((g.mu - o.mu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g.sigma - o.sigma).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g.sigma == g.sigma.transpose());

  CHECK_THROWS(gaussian_stats({{1, 2}}));
  CHECK_THROWS(gaussian_stats({{1, 2}, {1}}));
}

TEST_CASE("frechet inception distance") {
  Rng rng(4);
  const auto f = random_rows(rng, 30, 5);
  const GaussianStats s = gaussian_stats(f);
  CHECK(std::abs(fid(s, s)) <= 1e-9);

  // 1-D: (mu1 - mu2)^2 + (sigma1 - sigma2)^2.
  CHECK(fid(diag_stats({0}, {1}), diag_stats({0}, {4})) == doctest::Approx(1.0));
  CHECK(fid(diag_stats({0}, {1}), diag_stats({3}, {4})) == doctest::Approx(10.0));
  // Diagonal: sum of per-axis terms.
  CHECK(fid(diag_stats({1, 0}, {1, 9}), diag_stats({0, 2}, {4, 1})) == doctest::Approx(1 + 4 + 1 + 4));

  for (int trial = 0; trial < 10; ++trial) {
    const GaussianStats a = gaussian_stats(random_rows(rng, 25, 4, 1 + trial));
    const GaussianStats b = gaussian_stats(random_rows(rng, 25, 4, 2.0));
    const double v = fid(a, b);
    CHECK(v >= 0.0);
    CHECK(v == doctest::Approx(fid_product_eigen(a, b)).epsilon(1e-6));
    CHECK(v == doctest::Approx(fid(b, a)).epsilon(1e-9));
  }

  // Rank-deficient covariances (fewer samples than dimensions) stay finite.
  const GaussianStats r1 = gaussian_stats(random_rows(rng, 3, 8));
  const GaussianStats r2 = gaussian_stats(random_rows(rng, 3, 8));
  CHECK(std::isfinite(fid(r1, r2)));
  CHECK(fid(r1, r2) >= 0.0);
  CHECK(std::abs(fid(r1, r1)) <= 1e-9);
  CHECK_THROWS(fid(s, r1));
}

TEST_CASE("discrete frechet distance") {
  const std::vector<double> z{0}, five{5};
  CHECK(discrete_frechet(z, five) == 5.0);
  const std::vector<double> a{0, 1, 2}, b{0, 1, 2, 3};
  CHECK(discrete_frechet(a, a) == 0.0);
  CHECK(discrete_frechet(a, b) == 1.0);
  CHECK(discrete_frechet(b, a) == 1.0);
  const std::vector<double> c{0, 0, 0}, d{1, 1, 1};
  CHECK(discrete_frechet(c, d) == 1.0);
  const std::vector<double> e{0, 10, 0}, g{0, 0};
  CHECK(discrete_frechet(e, g) == 10.0);
  CHECK(discrete_frechet(c, d, [](double x, double y) { return (x - y) * (x - y) * 3; }) == 3.0);
  CHECK_THROWS(discrete_frechet(std::vector<double>{}, a));

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + static_cast<int>(rng.uniform() * 6)), q(1 + static_cast<int>(rng.uniform() * 6));
    for (auto& v : p) v = std::round(rng.uniform() * 20) / 4;
    for (auto& v : q) v = std::round(rng.uniform() * 20) / 4;
    CHECK(discrete_frechet(p, q) == brute_frechet(p, q));
    CHECK(discrete_frechet(p, q) == discrete_frechet(q, p));
    CHECK(discrete_frechet(p, q) >= std::abs(p.front() - q.front()));
    CHECK(discrete_frechet(p, q) >= std::abs(p.back() - q.back()));
  }
}

TEST_CASE("frechet distance over feature curves") {
  const std::vector<std::vector<double>> r{{0, 1, 2}, {5, 5}};
  const std::vector<std::vector<double>> g{{0, 1, 2, 3}, {5, 7}};
  CHECK(frd(r, r) == 0.0);
  CHECK(frd(r, g) == doctest::Approx(1.5));
  CHECK_THROWS(frd(r, std::vector<std::vector<double>>{{1.0}}));
  CHECK_THROWS(frd({}, {}));

  const Embedder emb(small_embedder());
  Rng rng(6);
  const std::vector<Image8> ims{noise_image(rng), noise_image(rng)};
  CHECK(frd(ims, ims, emb) == 0.0);
  const std::vector<Image8> other{noise_image(rng), noise_image(rng)};
  const double v = frd(ims, other, emb);
  CHECK(v > 0.0);
  CHECK(v == doctest::Approx(frd({emb.features(ims[0]), emb.features(ims[1])},
                                  {emb.features(other[0]), emb.features(other[1])})));
}

TEST_CASE("embedder") {
  const Embedder a(small_embedder());
  const Embedder b(small_embedder());
  Rng rng(7);
  const Image8 im = noise_image(rng, 40, 30);
  const auto fa = a.features(im);
  CHECK(fa.size() == 16);
  CHECK(fa == b.features(im));
  const auto p = a.probabilities(fa);
  CHECK(p.size() == 10);
  double sum = 0;
  for (double v : p) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0));
  EmbedderSpec other = small_embedder();
  other.seed = 10;
  CHECK(Embedder(other).features(im) != fa);

  EmbedderSpec pre = small_embedder();
  pre.kind = EmbedderKind::pretrained;
  pre.weights = "/nonexistent/embedder.bin";
  CHECK_THROWS_AS(Embedder{pre}, EmbedderError);
  CHECK(parse_embedder_kind("seeded-random") == EmbedderKind::seeded_random);
  CHECK(to_string(EmbedderKind::pretrained) == "pretrained");
  CHECK_THROWS(parse_embedder_kind("inception"));

  // Pretrained weights round-trip through a tensor file.
  testing::TempDir dir("embedder");
  write_tensor_file(dir.path() / "w.bin", export_parameters(a.parameters()));
  pre.weights = (dir.path() / "w.bin").string();
  CHECK(Embedder(pre).features(im) == fa);
}

TEST_CASE("evaluation report") {
  const Embedder emb(small_embedder());
  Rng rng(8);
  const std::vector<Image8> real{noise_image(rng), noise_image(rng), noise_image(rng)};
  const std::vector<std::string> ids{"a->b", "b->a", "c->d"};
  const MetricReport self = evaluate(ids, real, real, emb);
  CHECK(self.n == 3);
  CHECK(self.mse == 0.0);
  CHECK(self.psnr == kPsnrSentinel);
  CHECK(std::abs(self.fid) <= 1e-6);
  CHECK(self.frd == 0.0);
  CHECK(self.is_mean >= 1.0 - 1e-9);
  REQUIRE(self.rows.size() == 3);
  CHECK(self.rows[2].identifier == "c->d");

  std::vector<Image8> gen = real;
  for (auto& p : gen[0].pixels) p = static_cast<std::uint8_t>(255 - p);
  const MetricReport r = evaluate(ids, real, gen, emb);
  CHECK(r.rows[0].mse > 0.0);
  CHECK(r.rows[1].mse == 0.0);
  CHECK(r.mse == doctest::Approx(r.rows[0].mse / 3));
  CHECK(r.psnr == doctest::Approx((r.rows[0].psnr + 2 * kPsnrSentinel) / 3));
  CHECK(r.fid > 0.0);

  const std::string csv = self.to_csv();
  CHECK(csv.rfind("identifier,mse,psnr,frd\na->b,0,100,0\n", 0) == 0);
  CHECK(csv.find("\n\nmse,psnr,is_mean,is_std,fid,frd,N\n") != std::string::npos);
  CHECK(csv.back() == '\n');

  const MetricReport one = evaluate({"x"}, {real[0]}, {real[0]}, emb);
  CHECK(std::isnan(one.fid));
  CHECK(one.to_csv().find(",nan,") != std::string::npos);
  CHECK_THROWS(evaluate({"x", "y"}, {real[0]}, {real[0]}, emb));
  CHECK_THROWS(evaluate({}, {}, {}, emb));
  // More IS splits than pairs falls back to one pair per split.
  CHECK(evaluate(ids, real, gen, emb, 4).is_mean == doctest::Approx(evaluate(ids, real, gen, emb, 3).is_mean));
  CHECK_THROWS(evaluate(ids, real, real, emb, 0));
}
