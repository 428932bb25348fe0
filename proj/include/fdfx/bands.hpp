#pragma once

// Pointwise confidence intervals and simulation-based joint bands for
// B(t, x)' beta on an evaluation grid.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fdfx/bootstrap.hpp"
#include "fdfx/error.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/splinebasis.hpp"
#include "fdfx/stats.hpp"

namespace fdfx {

inline std::vector<double> equispaced(double lo, double hi, std::size_t count) {
  if (count == 0) fail(ErrorKind::Config, "invalid-parameter", "grid size must be positive");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  if (count > 1) out.back() = hi;
  return out;
}

// Evaluation points and the matching stacked design rows. Surface grids are
// ordered t-major: point g = g_t * G_x + g_x. Curve and coefficient grids
// leave x_points empty.
struct EvalGrid {
  std::vector<double> t_points;
  std::vector<double> x_points;
  Eigen::MatrixXd design;  // G x dim(beta)

  std::size_t size() const { return static_cast<std::size_t>(design.rows()); }
  Eigen::VectorXd values(const Eigen::VectorXd& beta) const { return design * beta; }

  static EvalGrid surface(const MeanStructure& ms, double t_lo, double t_hi, std::size_t g_t, double x_lo,
                          double x_hi, std::size_t g_x) {
    EvalGrid grid;
    grid.t_points = equispaced(t_lo, t_hi, g_t);
    grid.x_points = equispaced(x_lo, x_hi, g_x);
    grid.design.resize(static_cast<Eigen::Index>(g_t * g_x), ms.dim());
    for (std::size_t a = 0; a < g_t; ++a) {
      for (std::size_t b = 0; b < g_x; ++b) {
        grid.design.row(static_cast<Eigen::Index>(a * g_x + b)) =
            design_row(ms, grid.t_points[a], grid.x_points[b]).transpose();
      }
    }
    return grid;
  }

  // Surface over the basis domains of a structure (t and x bases required).
  static EvalGrid surface(const MeanStructure& ms, std::size_t g_t, std::size_t g_x) {
    if (ms.kind() != MeanKind::BivariateSmooth) {
      fail(ErrorKind::Config, "invalid-structure", "surface grid without explicit domains needs a bivariate structure");
    }
    return surface(ms, ms.t_basis()->lo(), ms.t_basis()->hi(), g_t, ms.x_basis()->lo(), ms.x_basis()->hi(), g_x);
  }

  // The smooth t-term alone: B^t(t)' beta_t with every other coefficient
  // weighted zero. For partial-linear fits this is f(t).
  static EvalGrid t_component(const MeanStructure& ms, std::size_t g_t) {
    if (ms.kind() != MeanKind::PartialLinear && ms.kind() != MeanKind::TimeSmooth) {
      fail(ErrorKind::Config, "invalid-structure", "t-component grid needs a partial-linear or time-smooth structure");
    }
    const auto& tb = *ms.t_basis();
    EvalGrid grid;
    grid.t_points = equispaced(tb.lo(), tb.hi(), g_t);
    grid.design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g_t), ms.dim());
    for (std::size_t a = 0; a < g_t; ++a) {
      grid.design.row(static_cast<Eigen::Index>(a)).head(tb.num_basis()) = tb.eval(grid.t_points[a]).transpose();
    }
    return grid;
  }

  // A single coefficient beta_k.
  static EvalGrid coefficient(const MeanStructure& ms, int k) {
    if (k < 0 || k >= ms.dim()) fail(ErrorKind::Config, "invalid-parameter", "coefficient index out of range");
    EvalGrid grid;
    grid.design = Eigen::MatrixXd::Zero(1, ms.dim());
    grid.design(0, k) = 1.0;
    return grid;
  }
};

enum class BandKind { PointwiseNormal, PointwiseQuantile, Joint };

inline const char* to_string(BandKind k) {
  switch (k) {
    case BandKind::PointwiseNormal: return "pointwise-normal";
    case BandKind::PointwiseQuantile: return "pointwise-quantile";
    case BandKind::Joint: return "joint";
  }
  return "unknown";
}

struct BandResult {
  BandKind kind = BandKind::PointwiseNormal;
  double alpha = 0.05;
  Eigen::VectorXd center;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd s;                // bootstrap SD of B(t,x)' beta-hat
  double q_hat = 0.0;               // joint multiplier
  std::size_t excluded_points = 0;  // zero-variance points left out of the max
  std::vector<double> max_stats;    // joint only: the R simulated maxima

  double average_length() const { return (upper - lower).mean(); }
};

inline void materialize_surfaces(BootstrapEnsemble& ens, const EvalGrid& grid) {
  ens.surface_draws = ens.betas * grid.design.transpose();
}

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::Config, "invalid-parameter", "alpha must lie in (0, 1)");
}

inline void check_grid(const EvalGrid& grid, const BootstrapEnsemble& ens) {
  if (grid.design.cols() != ens.betas.cols()) {
    fail(ErrorKind::Config, "structure", "evaluation grid does not match the ensemble's coefficient dimension");
  }
}

inline Eigen::VectorXd pointwise_sd(const EvalGrid& grid, const Eigen::MatrixXd& v) {
  const Eigen::VectorXd var = (grid.design * v).cwiseProduct(grid.design).rowwise().sum();
  return var.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace detail

enum class PointwiseMethod { Normal, Quantile };

inline BandResult pointwise_band(const FitResult& fit, const BootstrapEnsemble& ens, const EvalGrid& grid,
                                 double alpha, PointwiseMethod method) {
  detail::check_alpha(alpha);
  detail::check_grid(grid, ens);
  if (fit.beta.size() != grid.design.cols()) {
    fail(ErrorKind::Config, "structure", "evaluation grid does not match the fit's mean structure");
  }
  BandResult band;
  band.alpha = alpha;
  band.center = grid.values(fit.beta);
  band.s = detail::pointwise_sd(grid, ens.v_beta);
  if (method == PointwiseMethod::Normal) {
    band.kind = BandKind::PointwiseNormal;
    const double z = normal_quantile(1.0 - alpha / 2.0);
    band.lower = band.center - z * band.s;
    band.upper = band.center + z * band.s;
    return band;
  }
  band.kind = BandKind::PointwiseQuantile;
  if (static_cast<double>(ens.B) * alpha / 2.0 < 1.0) {
    fail(ErrorKind::Config, "insufficient-replicates",
         "quantile band at alpha=" + std::to_string(alpha) + " needs B * alpha / 2 >= 1, but B=" + std::to_string(ens.B));
  }
  const Eigen::MatrixXd draws = (ens.surface_draws && ens.surface_draws->cols() == grid.design.rows())
                                    ? *ens.surface_draws
                                    : Eigen::MatrixXd(ens.betas * grid.design.transpose());
  const auto g = static_cast<Eigen::Index>(grid.size());
  band.lower.resize(g);
  band.upper.resize(g);
  std::vector<double> col(ens.B);
  for (Eigen::Index k = 0; k < g; ++k) {
    for (std::size_t b = 0; b < ens.B; ++b) col[b] = draws(static_cast<Eigen::Index>(b), k);
    band.lower[k] = empirical_quantile(col, alpha / 2.0);
    band.upper[k] = empirical_quantile(col, 1.0 - alpha / 2.0);
  }
  return band;
}

enum class BandCenter { BootstrapMean, Fit };

struct JointBandOptions {
  std::size_t R = 1000;
  std::uint64_t seed = 1;
  // Divide and multiply by sqrt(s) instead of s (the fourth root of the
  // variance), for comparison with that variant of the construction.
  bool legacy_sqrt_s = false;
  BandCenter center = BandCenter::BootstrapMean;
  const FitResult* fit = nullptr;  // required when center == Fit
};

// PSD square root F of v (v = F F'); eigenvalues in [-1e-10 |v|, 0) are
// clipped to zero.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (v + v.transpose()));
  if (eig.info() != Eigen::Success) fail(ErrorKind::Numerical, "covariance", "eigendecomposition of V failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() < -1e-10 * scale) {
    fail(ErrorKind::Numerical, "covariance",
         "coefficient covariance is indefinite (smallest eigenvalue " + std::to_string(ev.minCoeff()) + ")");
  }
  return eig.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline BandResult joint_band(const BootstrapEnsemble& ens, const EvalGrid& grid, double alpha,
                             const JointBandOptions& opt = {}) {
  detail::check_alpha(alpha);
  detail::check_grid(grid, ens);
  if (opt.R < 1) fail(ErrorKind::Config, "invalid-parameter", "joint band needs R >= 1");
  BandResult band;
  band.kind = BandKind::Joint;
  band.alpha = alpha;
  if (opt.center == BandCenter::Fit) {
    if (opt.fit == nullptr) fail(ErrorKind::Config, "invalid-parameter", "band centered at the fit needs the fit");
    band.center = grid.values(opt.fit->beta);
  } else {
    band.center = grid.values(ens.mean_beta());
  }
  band.s = detail::pointwise_sd(grid, ens.v_beta);

  const Eigen::MatrixXd factor = psd_factor(ens.v_beta);
  const Eigen::MatrixXd w = grid.design * factor;
  const auto g = w.rows();
  Eigen::VectorXd scale = opt.legacy_sqrt_s ? Eigen::VectorXd(band.s.cwiseSqrt()) : band.s;
  const double smax = band.s.size() ? band.s.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < g; ++k) {
    if (band.s[k] > 1e-12 * smax && band.s[k] > 0.0) keep.push_back(k);
  }
  band.excluded_points = static_cast<std::size_t>(g) - keep.size();
  if (keep.empty()) {
    band.lower = band.center;
    band.upper = band.center;
    return band;
  }
  Eigen::VectorXd inv_scale = Eigen::VectorXd::Zero(g);
  for (auto k : keep) inv_scale[k] = 1.0 / scale[k];

  Rng rng = Rng(opt.seed).substream(stream::kBand);
  const auto dim = factor.cols();
  constexpr std::size_t kChunk = 128;
  band.max_stats.reserve(opt.R);
  for (std::size_t r0 = 0; r0 < opt.R; r0 += kChunk) {
    const auto cols = static_cast<Eigen::Index>(std::min(kChunk, opt.R - r0));
    Eigen::MatrixXd draws(dim, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index d = 0; d < dim; ++d) draws(d, c) = rng.normal();
    }
    const Eigen::MatrixXd q = w * draws;
    for (Eigen::Index c = 0; c < cols; ++c) {
      band.max_stats.push_back((q.col(c).cwiseAbs().cwiseProduct(inv_scale)).maxCoeff());
    }
  }
  band.q_hat = empirical_quantile(band.max_stats, 1.0 - alpha);
  band.lower = band.center - band.q_hat * scale;
  band.upper = band.center + band.q_hat * scale;
  // Excluded points have zero variance; the band collapses there.
  for (Eigen::Index k = 0; k < g; ++k) {
    if (inv_scale[k] == 0.0) band.lower[k] = band.upper[k] = band.center[k];
  }
  return band;
}

// True when the band leaves out f0 at some grid point.
inline bool band_excludes(const BandResult& band, const Eigen::VectorXd& f0) {
  for (Eigen::Index k = 0; k < band.lower.size(); ++k) {
    if (band.lower[k] > f0[k] || band.upper[k] < f0[k]) return true;
  }
  return false;
}

inline bool band_excludes_zero(const BandResult& band) {
  return band_excludes(band, Eigen::VectorXd::Zero(band.lower.size()));
}

}  // namespace fdfx
