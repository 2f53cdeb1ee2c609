#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gesturegan/embedder.hpp"
#include "gesturegan/image.hpp"

namespace gesturegan::metrics {

// PSNR reported for identical images.
inline constexpr double kPsnrSentinel = 100.0;
inline constexpr double kPeak = 255.0;

// Mean squared difference in the 8-bit domain.
double mse(const Image8& a, const Image8& b);
double mse(std::span<const double> a, std::span<const double> b);
// 10 log10(255^2 / mse), capped at kPsnrSentinel.
double psnr_from_mse(double mse_value);
double psnr(const Image8& a, const Image8& b);

struct InceptionScore {
  double mean = 0.0;
  double stddev = 0.0;
};
// Each row is a class distribution. The N rows are cut into `splits`
// contiguous chunks; the score of a chunk is exp(mean KL(p || chunk marginal)).
// stddev is the population deviation over chunks.
InceptionScore inception_score(const std::vector<std::vector<double>>& probabilities, int splits = 1);

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};
// Sample mean and unbiased covariance (N-1), symmetrised.
GaussianStats gaussian_stats(const std::vector<std::vector<double>>& features);

// ||mu_x - mu_y||^2 + Tr(Sx + Sy - 2 (Sx Sy)^{1/2}), clamped at 0.
// Tr (Sx Sy)^{1/2} is evaluated as the trace of the PSD square root of the
// symmetric matrix Sx^{1/2} Sy Sx^{1/2}, which shares its eigenvalues with Sx Sy.
double fid(const GaussianStats& x, const GaussianStats& y);
// Reference form: eigenvalues of the (non-symmetric) product Sx Sy, negative
// and imaginary parts dropped.
double fid_product_eigen(const GaussianStats& x, const GaussianStats& y);

using PointDistance = std::function<double(double, double)>;
double absolute_difference(double a, double b);

// Discrete Frechet distance by the O(|a||b|) coupling recurrence.
double discrete_frechet(std::span<const double> a, std::span<const double> b,
                        const PointDistance& d = absolute_difference);

// Mean discrete Frechet distance between paired feature curves.
double frd(const std::vector<std::vector<double>>& real_features,
           const std::vector<std::vector<double>>& generated_features);
double frd(const std::vector<Image8>& real, const std::vector<Image8>& generated, const Embedder& embedder);

struct MetricRow {
  std::string identifier;
  double mse = 0.0;
  double psnr = 0.0;
  double frd = 0.0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mse = 0.0;
  double psnr = 0.0;
  double is_mean = 0.0;
  double is_std = 0.0;
  double fid = 0.0;  // NaN when fewer than two pairs
  double frd = 0.0;
  std::size_t n = 0;

  // Rows "identifier,mse,psnr,frd", a blank line, then
  // "mse,psnr,is_mean,is_std,fid,frd,N" and its values.
  std::string to_csv() const;
};

// generated[i] is compared with real[i].
MetricReport evaluate(const std::vector<std::string>& identifiers, const std::vector<Image8>& real,
                      const std::vector<Image8>& generated, const Embedder& embedder, int is_splits = 1);

}  // namespace gesturegan::metrics
