#pragma once

// Penalized least squares under working independence, with GCV selection of
// the smoothing parameters.
//
// Stacked rows are ordered subject (outer), visit (middle), grid point
// (inner); columns are the mean-structure coefficients followed by the p
// nuisance coefficients.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fdfx/dataset.hpp"
#include "fdfx/error.hpp"
#include "fdfx/splinebasis.hpp"

namespace fdfx {

struct DesignMatrices {
  Eigen::MatrixXd M;
  Eigen::VectorXd Y;
};

// Materializes the full stacked design. Fine for small problems and tests;
// fit() never builds it.
inline DesignMatrices assemble_design(const FunctionalDataset& ds, const MeanStructure& ms) {
  ds.validate();
  const auto L = static_cast<Eigen::Index>(ds.L());
  const auto dim = static_cast<Eigen::Index>(ms.dim());
  const auto p = static_cast<Eigen::Index>(ds.p());
  DesignMatrices out;
  out.M.resize(static_cast<Eigen::Index>(ds.total_observations()), dim + p);
  out.Y.resize(out.M.rows());
  Eigen::Index row = 0;
  for (std::size_t v = 0; v < ds.rows(); ++v) {
    const auto vi = static_cast<Eigen::Index>(v);
    for (Eigen::Index l = 0; l < L; ++l, ++row) {
      out.M.row(row).head(dim) = design_row(ms, ds.grid[static_cast<std::size_t>(l)], ds.x[v]).transpose();
      if (p > 0) out.M.row(row).tail(p) = ds.z.row(vi);
      out.Y[row] = ds.y(vi, l);
    }
  }
  return out;
}

// Embeds a mean-structure penalty into the full coefficient space (zero rows
// and columns for the nuisance coefficients).
inline Eigen::MatrixXd pad_penalty(const PenaltyMatrix& pen, std::size_t p) {
  const auto d = pen.rows();
  const auto n = d + static_cast<Eigen::Index>(p);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  out.topLeftCorner(d, d) = pen;
  return out;
}

struct SolveResult {
  Eigen::VectorXd coef;
  double edf = 0.0;
  double sse = 0.0;
};

namespace detail {

inline constexpr double kMinRcond = 1e-13;

// Factorizes A + P; returns false when the system is numerically singular.
inline bool factorize(const Eigen::MatrixXd& system, Eigen::LLT<Eigen::MatrixXd>& llt) {
  llt.compute(system);
  if (llt.info() != Eigen::Success) return false;
  const double rc = llt.rcond();
  return std::isfinite(rc) && rc >= kMinRcond;
}

inline double trace_of_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b.transpose()).sum();
}

}  // namespace detail

// Dense reference solve of (M'M + P) coef = M'Y.
inline SolveResult solve_penalized(const Eigen::MatrixXd& M, const Eigen::VectorXd& Y, const Eigen::MatrixXd& P) {
  if (M.rows() != Y.size() || P.rows() != M.cols() || P.cols() != M.cols()) {
    fail(ErrorKind::Data, "structure", "solve_penalized: dimension mismatch between M, Y and P");
  }
  const Eigen::MatrixXd gram = M.transpose() * M;
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!detail::factorize(gram + P, llt)) {
    fail(ErrorKind::Numerical, "numerical-rank",
         "penalized normal equations are singular: the design columns are collinear within the "
         "penalty null space");
  }
  SolveResult out;
  out.coef = llt.solve(M.transpose() * Y);
  out.edf = detail::trace_of_product(llt.solve(Eigen::MatrixXd::Identity(M.cols(), M.cols())), gram);
  out.sse = (Y - M * out.coef).squaredNorm();
  return out;
}

inline double gcv_from(double n_obs, double sse, double edf) {
  if (!(edf < n_obs)) {
    fail(ErrorKind::Numerical, "degenerate-smoothing",
         "effective degrees of freedom (" + std::to_string(edf) + ") reach the number of observations");
  }
  const double denom = n_obs - edf;
  return n_obs * sse / (denom * denom);
}

// GCV(lambda) = N * SSE / (N - tr H)^2.
inline double gcv_score(const Eigen::MatrixXd& M, const Eigen::VectorXd& Y, const Eigen::MatrixXd& P) {
  const SolveResult s = solve_penalized(M, Y, P);
  return gcv_from(static_cast<double>(M.rows()), s.sse, s.edf);
}

struct FitResult {
  MeanStructure structure = MeanStructure::linear();
  Eigen::VectorXd beta;
  Eigen::VectorXd tau;
  Lambda lambda;
  double edf = 0.0;
  double sse = 0.0;
  double gcv = 0.0;
  std::size_t n_obs = 0;

  // Estimated mean B(t, x)' beta (nuisance part excluded).
  double mean(double t, double x) const { return design_row(structure, t, x).dot(beta); }
  double operator()(double t, double x) const { return mean(t, x); }

  Eigen::VectorXd coefficients() const {
    Eigen::VectorXd c(beta.size() + tau.size());
    c << beta, tau;
    return c;
  }
};

// Cross-products of the design, computed from the Kronecker structure
// B(t_l, x_v) = S (phi(t_l) kron psi(x_v)) without materializing the stacked
// rows. Everything here depends on covariates only, so a plan can be reused
// for any response with the same covariate layout.
class FitPlan {
 public:
  FitPlan(const FunctionalDataset& ds, MeanStructure ms, std::vector<Lambda> grid)
      : ms_(std::move(ms)), grid_(std::move(grid)) {
    ds.validate();
    if (grid_.empty()) fail(ErrorKind::Config, "invalid-parameter", "lambda grid is empty");
    for (const auto& lam : grid_) {
      if (!(lam.t >= 0.0) || !(lam.x >= 0.0)) {
        fail(ErrorKind::Config, "invalid-parameter", "smoothing parameters must be non-negative");
      }
      if (!ms_.penalized() && (lam.t != 0.0 || lam.x != 0.0)) {
        fail(ErrorKind::Config, "invalid-parameter",
             std::string("structure '") + to_string(ms_.kind()) + "' is unpenalized; use the grid {(0, 0)}");
      }
    }
    x_ = ds.x;
    z_ = ds.z;
    n_obs_ = ds.total_observations();
    L_ = ds.L();
    build_features(ds);
    build_gram();
    build_systems();
  }

  const MeanStructure& structure() const { return ms_; }
  const std::vector<Lambda>& grid() const { return grid_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  std::size_t n_obs() const { return n_obs_; }
  int width() const { return static_cast<int>(gram_.rows()); }

  bool same_design(const FunctionalDataset& ds) const {
    if (ds.L() != L_ || ds.x != x_ || ds.z.rows() != z_.rows() || ds.z.cols() != z_.cols()) return false;
    return ds.z == z_;
  }

  // M'Y split into the lifted mean part and the nuisance part, plus Y'Y.
  struct Moments {
    Eigen::VectorXd rhs;
    double yty = 0.0;
  };

  Moments moments(const FunctionalDataset& ds) const {
    const int dphi = ms_.t_features();
    const int dpsi = ms_.x_features();
    const Eigen::MatrixXd w = ds.y.transpose() * psi_;   // L x dpsi
    const Eigen::MatrixXd u = phi_.transpose() * w;      // dphi x dpsi
    Eigen::VectorXd lifted(dphi * dpsi);
    for (int a = 0; a < dphi; ++a) {
      for (int r = 0; r < dpsi; ++r) lifted[a * dpsi + r] = u(a, r);
    }
    Moments m;
    const auto dim = static_cast<Eigen::Index>(ms_.dim());
    m.rhs.resize(width());
    if (ms_.lift_is_identity()) {
      m.rhs.head(dim) = lifted;
    } else {
      m.rhs.head(dim) = ms_.lift() * lifted;
    }
    if (ds.p() > 0) m.rhs.tail(static_cast<Eigen::Index>(ds.p())) = ds.z.transpose() * ds.y.rowwise().sum();
    m.yty = ds.y.squaredNorm();
    return m;
  }

  // Fitted values (rows x L) for a coefficient vector laid out as (beta, tau).
  RowMatrix fitted(const Eigen::VectorXd& coef) const {
    const int dphi = ms_.t_features();
    const int dpsi = ms_.x_features();
    const auto dim = static_cast<Eigen::Index>(ms_.dim());
    const Eigen::VectorXd lifted =
        ms_.lift_is_identity() ? Eigen::VectorXd(coef.head(dim)) : Eigen::VectorXd(ms_.lift().transpose() * coef.head(dim));
    Eigen::MatrixXd k(dphi, dpsi);
    for (int a = 0; a < dphi; ++a) {
      for (int r = 0; r < dpsi; ++r) k(a, r) = lifted[a * dpsi + r];
    }
    RowMatrix out = psi_ * k.transpose() * phi_.transpose();
    if (z_.cols() > 0) {
      const Eigen::VectorXd zt = z_ * coef.tail(z_.cols());
      out.colwise() += zt;
    }
    return out;
  }

  FitResult fit(const FunctionalDataset& ds) const {
    if (!same_design(ds)) fail(ErrorKind::Data, "structure", "response layout does not match the fit plan");
    const Moments mom = moments(ds);
    const double n_obs = static_cast<double>(n_obs_);
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_coef;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      const System& sys = systems_[g];
      if (!sys.ok) continue;
      Eigen::VectorXd coef = sys.llt.solve(mom.rhs);
      const double sse = std::max(0.0, mom.yty - 2.0 * coef.dot(mom.rhs) + coef.dot(gram_ * coef));
      const double score = n_obs * sse / ((n_obs - sys.edf) * (n_obs - sys.edf));
      if (best < 0 || better(score, grid_[g], best_score, grid_[static_cast<std::size_t>(best)])) {
        best = static_cast<int>(g);
        best_score = score;
        best_coef = std::move(coef);
      }
    }
    if (best < 0) throw_no_valid_system();
    FitResult res;
    res.structure = ms_;
    const auto dim = static_cast<Eigen::Index>(ms_.dim());
    res.beta = best_coef.head(dim);
    res.tau = best_coef.tail(width() - dim);
    res.lambda = grid_[static_cast<std::size_t>(best)];
    res.edf = systems_[static_cast<std::size_t>(best)].edf;
    res.sse = (ds.y - fitted(best_coef)).squaredNorm();
    res.n_obs = n_obs_;
    res.gcv = gcv_from(n_obs, res.sse, res.edf);
    return res;
  }

 private:
  struct System {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double edf = 0.0;
    bool ok = false;
    bool singular = false;
  };

  // Smaller score wins; near-ties go to the smoother candidate.
  static bool better(double score, Lambda lam, double best_score, Lambda best_lam) {
    const double scale = std::max(std::abs(score), std::abs(best_score));
    if (std::abs(score - best_score) <= 1e-12 * scale) {
      if (lam.t != best_lam.t) return lam.t > best_lam.t;
      return lam.x > best_lam.x;
    }
    return score < best_score;
  }

  void build_features(const FunctionalDataset& ds) {
    const int dphi = ms_.t_features();
    const int dpsi = ms_.x_features();
    phi_.resize(static_cast<Eigen::Index>(L_), dphi);
    std::vector<double> buf(static_cast<std::size_t>(std::max(dphi, dpsi)));
    for (std::size_t l = 0; l < L_; ++l) {
      ms_.t_features(ds.grid[l], buf.data());
      for (int a = 0; a < dphi; ++a) phi_(static_cast<Eigen::Index>(l), a) = buf[static_cast<std::size_t>(a)];
    }
    psi_.resize(static_cast<Eigen::Index>(x_.size()), dpsi);
    for (std::size_t v = 0; v < x_.size(); ++v) {
      ms_.x_features(x_[v], buf.data());
      for (int r = 0; r < dpsi; ++r) psi_(static_cast<Eigen::Index>(v), r) = buf[static_cast<std::size_t>(r)];
    }
  }

  void build_gram() {
    const int dphi = ms_.t_features();
    const int dpsi = ms_.x_features();
    const auto dim = static_cast<Eigen::Index>(ms_.dim());
    const auto p = z_.cols();
    const Eigen::MatrixXd gt = phi_.transpose() * phi_;
    const Eigen::VectorXd st = phi_.colwise().sum().transpose();
    const Eigen::MatrixXd gpsi = psi_.transpose() * psi_;
    const int D = dphi * dpsi;
    Eigen::MatrixXd lifted(D, D);
    for (int a = 0; a < dphi; ++a) {
      for (int b = 0; b < dphi; ++b) {
        lifted.block(a * dpsi, b * dpsi, dpsi, dpsi) = gt(a, b) * gpsi;
      }
    }
    gram_.resize(dim + p, dim + p);
    if (ms_.lift_is_identity()) {
      gram_.topLeftCorner(dim, dim) = lifted;
    } else {
      gram_.topLeftCorner(dim, dim) = ms_.lift() * lifted * ms_.lift().transpose();
    }
    if (p > 0) {
      const Eigen::MatrixXd cpz = psi_.transpose() * z_;  // dpsi x p
      Eigen::MatrixXd cross(D, p);
      for (int a = 0; a < dphi; ++a) cross.middleRows(a * dpsi, dpsi) = st[a] * cpz;
      const Eigen::MatrixXd c12 = ms_.lift_is_identity() ? cross : Eigen::MatrixXd(ms_.lift() * cross);
      gram_.topRightCorner(dim, p) = c12;
      gram_.bottomLeftCorner(p, dim) = c12.transpose();
      gram_.bottomRightCorner(p, p) = static_cast<double>(L_) * (z_.transpose() * z_);
    }
  }

  void build_systems() {
    const auto n = gram_.rows();
    const double n_obs = static_cast<double>(n_obs_);
    const auto p = static_cast<std::size_t>(z_.cols());
    systems_.resize(grid_.size());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      System& sys = systems_[g];
      const Eigen::MatrixXd system = gram_ + pad_penalty(tensor_penalty(ms_, grid_[g].t, grid_[g].x), p);
      if (!detail::factorize(system, sys.llt)) {
        sys.singular = true;
        continue;
      }
      sys.edf = detail::trace_of_product(sys.llt.solve(eye), gram_);
      sys.ok = sys.edf < n_obs;
    }
  }

  [[noreturn]] void throw_no_valid_system() const {
    for (const auto& s : systems_) {
      if (s.singular) {
        fail(ErrorKind::Numerical, "numerical-rank",
             std::string("penalized normal equations are singular for mean structure '") + to_string(ms_.kind()) +
                 "' (check that the covariate of interest and nuisance covariates vary and are not collinear)");
      }
    }
    fail(ErrorKind::Numerical, "degenerate-smoothing",
         "every smoothing candidate leaves no residual degrees of freedom (tr H >= N)");
  }

  MeanStructure ms_;
  std::vector<Lambda> grid_;
  std::vector<double> x_;
  RowMatrix z_;
  std::size_t n_obs_ = 0;
  std::size_t L_ = 0;
  Eigen::MatrixXd phi_;  // L x dphi
  Eigen::MatrixXd psi_;  // rows x dpsi
  Eigen::MatrixXd gram_;
  std::vector<System> systems_;
};

inline FitResult fit(const FunctionalDataset& ds, const MeanStructure& ms, const std::vector<Lambda>& grid) {
  return FitPlan(ds, ms, grid).fit(ds);
}

inline RowMatrix fitted_values(const FunctionalDataset& ds, const FitResult& res) {
  return FitPlan(ds, res.structure, {Lambda{}}).fitted(res.coefficients());
}

// Builds a structure whose bases span the dataset: t over the grid range,
// x over [min X, max X].
inline MeanStructure make_structure(MeanKind kind, const FunctionalDataset& ds, int d_t = 7, int d_x = 7,
                                    int degree = 3) {
  const double tlo = ds.grid.front();
  const double thi = ds.grid.back();
  switch (kind) {
    case MeanKind::Linear: return MeanStructure::linear();
    case MeanKind::LinearInteraction: return MeanStructure::linear_interaction();
    case MeanKind::PartialLinear:
      return MeanStructure::partial_linear(UnivariateBasis::clamped_uniform(tlo, thi, d_t, degree));
    case MeanKind::TimeSmooth:
      return MeanStructure::time_smooth(UnivariateBasis::clamped_uniform(tlo, thi, d_t, degree));
    case MeanKind::BivariateSmooth:
      return MeanStructure::bivariate(UnivariateBasis::clamped_uniform(tlo, thi, d_t, degree),
                                      UnivariateBasis::clamped_uniform(ds.x_min(), ds.x_max(), d_x, degree));
  }
  fail(ErrorKind::Config, "invalid-structure", "unknown mean structure");
}

}  // namespace fdfx
