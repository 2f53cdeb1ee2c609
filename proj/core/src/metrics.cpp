#include "gesturegan/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gesturegan::metrics {

namespace {

void check_same(const Image8& a, const Image8& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw std::invalid_argument("metrics: image shapes differ (" + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                                std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                                std::to_string(b.channels) + ")");
  }
}

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_dims(const GaussianStats& x, const GaussianStats& y) {
  const auto d = x.mu.size();
  if (y.mu.size() != d || x.sigma.rows() != d || x.sigma.cols() != d || y.sigma.rows() != d ||
      y.sigma.cols() != d) {
    throw std::invalid_argument("fid: dimension mismatch");
  }
}

}  // namespace

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("mse: length mismatch");
  if (a.empty()) throw std::invalid_argument("mse: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double mse(const Image8& a, const Image8& b) {
  check_same(a, b);
  if (a.pixels.empty()) throw std::invalid_argument("mse: empty image");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const int d = static_cast<int>(a.pixels[i]) - static_cast<int>(b.pixels[i]);
    acc += static_cast<std::uint64_t>(d * d);
  }
  return static_cast<double>(acc) / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse_value) {
  if (!(mse_value >= 0.0)) throw std::invalid_argument("psnr: mse must be >= 0");
  if (mse_value == 0.0) return kPsnrSentinel;
  return std::min(kPsnrSentinel, 10.0 * std::log10(kPeak * kPeak / mse_value));
}

double psnr(const Image8& a, const Image8& b) { return psnr_from_mse(mse(a, b)); }

InceptionScore inception_score(const std::vector<std::vector<double>>& probabilities, int splits) {
  if (probabilities.empty()) throw std::invalid_argument("inception_score: no samples");
  if (splits < 1 || static_cast<std::size_t>(splits) > probabilities.size()) {
    throw std::invalid_argument("inception_score: splits must lie in [1, N]");
  }
  const std::size_t classes = probabilities.front().size();
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const auto& p = probabilities[i];
    if (p.size() != classes || classes == 0) {
      throw std::invalid_argument("inception_score: sample " + std::to_string(i) + " has the wrong length");
    }
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("inception_score: sample " + std::to_string(i) + " has a negative or non-finite entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("inception_score: sample " + std::to_string(i) + " does not sum to 1");
    }
  }

  const std::size_t n = probabilities.size();
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const std::size_t begin = n * static_cast<std::size_t>(s) / static_cast<std::size_t>(splits);
    const std::size_t end = n * static_cast<std::size_t>(s + 1) / static_cast<std::size_t>(splits);
    std::vector<double> marginal(classes, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t c = 0; c < classes; ++c) marginal[c] += probabilities[i][c];
    }
    for (double& m : marginal) m /= static_cast<double>(end - begin);
    double kl_sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = probabilities[i][c];
        if (p > 0.0) kl_sum += p * (std::log(p) - std::log(marginal[c]));
      }
    }
    scores.push_back(std::exp(kl_sum / static_cast<double>(end - begin)));
  }
  InceptionScore out;
  for (double s : scores) out.mean += s;
  out.mean /= static_cast<double>(scores.size());
  for (double s : scores) out.stddev += (s - out.mean) * (s - out.mean);
  out.stddev = std::sqrt(out.stddev / static_cast<double>(scores.size()));
  return out;
}

GaussianStats gaussian_stats(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) throw std::invalid_argument("gaussian_stats: need at least 2 vectors");
  const std::size_t d = features.front().size();
  if (d == 0) throw std::invalid_argument("gaussian_stats: empty feature vectors");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != d) throw std::invalid_argument("gaussian_stats: ragged feature vectors");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = features[i][j];
  }
  GaussianStats s;
  s.mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - s.mu.transpose();
  s.sigma = centered.transpose() * centered / static_cast<double>(features.size() - 1);
  s.sigma = (0.5 * (s.sigma + s.sigma.transpose())).eval();
  return s;
}

double fid(const GaussianStats& x, const GaussianStats& y) {
  check_dims(x, y);
  const Eigen::MatrixXd root_x = psd_sqrt(x.sigma);
  const Eigen::MatrixXd inner = root_x * y.sigma * root_x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (x.mu - y.mu).squaredNorm() + x.sigma.trace() + y.sigma.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, value);
}

double fid_product_eigen(const GaussianStats& x, const GaussianStats& y) {
  check_dims(x, y);
  Eigen::EigenSolver<Eigen::MatrixXd> es(x.sigma * y.sigma, false);
  double tr_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    tr_sqrt += std::sqrt(std::max(0.0, es.eigenvalues()[i].real()));
  }
  const double value = (x.mu - y.mu).squaredNorm() + x.sigma.trace() + y.sigma.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, value);
}

double absolute_difference(double a, double b) { return std::abs(a - b); }

double discrete_frechet(std::span<const double> a, std::span<const double> b, const PointDistance& d) {
  if (a.empty() || b.empty()) throw std::invalid_argument("discrete_frechet: empty sequence");
  std::vector<double> prev(b.size());
  std::vector<double> cur(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double cost = d(a[i], b[j]);
      double reach;
      if (i == 0 && j == 0) reach = cost;
      else if (i == 0) reach = cur[j - 1];
      else if (j == 0) reach = prev[0];
      else reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = std::max(cost, reach);
    }
    std::swap(prev, cur);
  }
  return prev.back();
}

double frd(const std::vector<std::vector<double>>& real_features,
           const std::vector<std::vector<double>>& generated_features) {
  if (real_features.size() != generated_features.size()) {
    throw std::invalid_argument("frd: " + std::to_string(real_features.size()) + " real vs " +
                                std::to_string(generated_features.size()) + " generated items");
  }
  if (real_features.empty()) throw std::invalid_argument("frd: no pairs");
  double acc = 0.0;
  for (std::size_t i = 0; i < real_features.size(); ++i) {
    acc += discrete_frechet(generated_features[i], real_features[i]);
  }
  return acc / static_cast<double>(real_features.size());
}

double frd(const std::vector<Image8>& real, const std::vector<Image8>& generated, const Embedder& embedder) {
  if (real.size() != generated.size()) throw std::invalid_argument("frd: image count mismatch");
  std::vector<std::vector<double>> fr, fg;
  for (const auto& im : real) fr.push_back(embedder.features(im));
  for (const auto& im : generated) fg.push_back(embedder.features(im));
  return frd(fr, fg);
}

std::string MetricReport::to_csv() const {
  std::string out = "identifier,mse,psnr,frd\n";
  for (const auto& r : rows) {
    out += r.identifier + "," + fmt(r.mse) + "," + fmt(r.psnr) + "," + fmt(r.frd) + "\n";
  }
  out += "\nmse,psnr,is_mean,is_std,fid,frd,N\n";
  out += fmt(mse) + "," + fmt(psnr) + "," + fmt(is_mean) + "," + fmt(is_std) + "," + fmt(fid) + "," + fmt(frd) +
         "," + std::to_string(n) + "\n";
  return out;
}

MetricReport evaluate(const std::vector<std::string>& identifiers, const std::vector<Image8>& real,
                      const std::vector<Image8>& generated, const Embedder& embedder, int is_splits) {
  if (real.size() != generated.size() || identifiers.size() != real.size()) {
    throw std::invalid_argument("evaluate: identifiers, real and generated counts differ");
  }
  if (real.empty()) throw std::invalid_argument("evaluate: nothing to evaluate");
  MetricReport report;
  report.n = real.size();
  std::vector<std::vector<double>> fr, fg, probs;
  for (std::size_t i = 0; i < real.size(); ++i) {
    MetricRow row;
    row.identifier = identifiers[i];
    try {
      row.mse = mse(real[i], generated[i]);
      row.psnr = psnr_from_mse(row.mse);
      fr.push_back(embedder.features(real[i]));
      fg.push_back(embedder.features(generated[i]));
    } catch (const std::exception& e) {
      throw std::runtime_error("pair " + identifiers[i] + ": " + e.what());
    }
    row.frd = discrete_frechet(fg.back(), fr.back());
    probs.push_back(embedder.probabilities(fg.back()));
    report.mse += row.mse;
    report.psnr += row.psnr;
    report.frd += row.frd;
    report.rows.push_back(row);
  }
  const double n = static_cast<double>(report.n);
  report.mse /= n;
  report.psnr /= n;
  report.frd /= n;
  const InceptionScore is = inception_score(probs, std::min<int>(is_splits, static_cast<int>(probs.size())));
  report.is_mean = is.mean;
  report.is_std = is.stddev;
  report.fid = report.n >= 2 ? fid(gaussian_stats(fr), gaussian_stats(fg)) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace gesturegan::metrics
