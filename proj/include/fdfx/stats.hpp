#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fdfx/error.hpp"

namespace fdfx {

// z such that P(N(0,1) <= z) = prob.
inline double normal_quantile(double prob) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

// Empirical quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7, R's default).
inline double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) fail(ErrorKind::Config, "insufficient-replicates", "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Sample covariance of the rows of `draws` (divisor B - 1).
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws) {
  const auto b = draws.rows();
  if (b < 2) return Eigen::MatrixXd::Zero(draws.cols(), draws.cols());
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Eigen::MatrixXd centered = draws.rowwise() - mean;
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(b - 1);
  return 0.5 * (cov + cov.transpose());
}

// Kolmogorov-Smirnov distance between the empirical law of `p` and U[0, 1].
inline double ks_distance_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = std::clamp(p[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace fdfx
