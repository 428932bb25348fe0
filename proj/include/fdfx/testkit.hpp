#pragma once

// L2 test of H0: mu(t, x) = eta(t) against a mean that also depends on x,
// with the null distribution approximated by a subject bootstrap.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fdfx/bands.hpp"
#include "fdfx/bootstrap.hpp"
#include "fdfx/dataset.hpp"
#include "fdfx/error.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/splinebasis.hpp"

namespace fdfx {

enum class Quadrature { Simpson, Trapezoid };

inline const char* to_string(Quadrature q) { return q == Quadrature::Simpson ? "simpson" : "trapezoid"; }

inline Quadrature parse_quadrature(const std::string& s) {
  if (s == "simpson") return Quadrature::Simpson;
  if (s == "trapezoid") return Quadrature::Trapezoid;
  fail(ErrorKind::Config, "invalid-parameter", "unknown quadrature '" + s + "' (expected simpson|trapezoid)");
}

// Weights for equally spaced points. Simpson needs an odd count >= 3 and
// falls back to the trapezoid rule otherwise.
inline std::vector<double> quadrature_weights(const std::vector<double>& pts, Quadrature rule) {
  const std::size_t n = pts.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  const double h = (pts.back() - pts.front()) / static_cast<double>(n - 1);
  if (rule == Quadrature::Simpson && n >= 3 && n % 2 == 1) {
    for (std::size_t k = 0; k < n; ++k) {
      const double c = (k == 0 || k == n - 1) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      w[k] = c * h / 3.0;
    }
    return w;
  }
  for (std::size_t k = 0; k < n; ++k) w[k] = (k == 0 || k == n - 1) ? h / 2.0 : h;
  return w;
}

// Integration grid over D_t x D_x.
inline EvalGrid integration_grid(double t_lo, double t_hi, std::size_t g_t, double x_lo, double x_hi,
                                 std::size_t g_x) {
  if (g_t < 2 || g_x < 2) fail(ErrorKind::Config, "invalid-parameter", "integration grid needs at least 2 points per axis");
  EvalGrid grid;
  grid.t_points = equispaced(t_lo, t_hi, g_t);
  grid.x_points = equispaced(x_lo, x_hi, g_x);
  return grid;
}

// T = int int {mu_a(t, x) - mu_0(t)}^2 dt dx by tensor quadrature on the
// grid's points.
template <class SurfaceFn, class CurveFn>
double test_statistic(const SurfaceFn& mu_a, const CurveFn& mu_0, const EvalGrid& grid,
                      Quadrature rule = Quadrature::Simpson) {
  const auto wt = quadrature_weights(grid.t_points, rule);
  const auto wx = quadrature_weights(grid.x_points, rule);
  double total = 0.0;
  for (std::size_t a = 0; a < grid.t_points.size(); ++a) {
    const double t = grid.t_points[a];
    const double m0 = mu_0(t);
    double row = 0.0;
    for (std::size_t b = 0; b < grid.x_points.size(); ++b) {
      const double d = mu_a(t, grid.x_points[b]) - m0;
      row += wx[b] * d * d;
    }
    total += wt[a] * row;
  }
  return total;
}

// Precomputed evaluation of T for fitted coefficient vectors.
class StatisticPlan {
 public:
  StatisticPlan(const MeanStructure& alt, const MeanStructure& null, const EvalGrid& points, Quadrature rule)
      : g_t_(points.t_points.size()), g_x_(points.x_points.size()) {
    const EvalGrid s = EvalGrid::surface(alt, points.t_points.front(), points.t_points.back(), g_t_,
                                         points.x_points.front(), points.x_points.back(), g_x_);
    alt_design_ = s.design;
    null_design_.resize(static_cast<Eigen::Index>(g_t_), null.dim());
    for (std::size_t a = 0; a < g_t_; ++a) {
      null_design_.row(static_cast<Eigen::Index>(a)) = design_row(null, points.t_points[a], 0.0).transpose();
    }
    const auto wt = quadrature_weights(points.t_points, rule);
    const auto wx = quadrature_weights(points.x_points, rule);
    weights_.resize(static_cast<Eigen::Index>(g_t_ * g_x_));
    for (std::size_t a = 0; a < g_t_; ++a) {
      for (std::size_t b = 0; b < g_x_; ++b) weights_[static_cast<Eigen::Index>(a * g_x_ + b)] = wt[a] * wx[b];
    }
  }

  double operator()(const Eigen::VectorXd& beta_alt, const Eigen::VectorXd& beta_null) const {
    const Eigen::VectorXd a = alt_design_ * beta_alt;
    const Eigen::VectorXd m0 = null_design_ * beta_null;
    double total = 0.0;
    for (std::size_t i = 0; i < g_t_; ++i) {
      for (std::size_t j = 0; j < g_x_; ++j) {
        const auto k = static_cast<Eigen::Index>(i * g_x_ + j);
        const double d = a[k] - m0[static_cast<Eigen::Index>(i)];
        total += weights_[k] * d * d;
      }
    }
    return total;
  }

 private:
  std::size_t g_t_;
  std::size_t g_x_;
  Eigen::MatrixXd alt_design_;
  Eigen::MatrixXd null_design_;
  Eigen::VectorXd weights_;
};

inline MeanStructure null_structure(const FunctionalDataset& ds, int d_t, int degree = 3) {
  return make_structure(MeanKind::TimeSmooth, ds, d_t, 7, degree);
}

// mu(t) = B(t)' beta plus linear nuisance effects, lambda_t by GCV.
inline FitResult fit_null(const FunctionalDataset& ds, int d_t, const std::vector<Lambda>& lambda_grid = {}) {
  const MeanStructure ms = null_structure(ds, d_t);
  return fit(ds, ms, lambda_grid.empty() ? default_lambda_grid(ms) : lambda_grid);
}

enum class NullResampling { Subjects, Residuals };

inline const char* to_string(NullResampling r) { return r == NullResampling::Subjects ? "subjects" : "residuals"; }

inline NullResampling parse_null_resampling(const std::string& s) {
  if (s == "subjects") return NullResampling::Subjects;
  if (s == "residuals") return NullResampling::Residuals;
  fail(ErrorKind::Config, "invalid-parameter", "unknown null resampling '" + s + "' (expected subjects|residuals)");
}

struct TestOptions {
  std::size_t B = 300;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  int null_d_t = 7;
  std::vector<Lambda> alt_grid;   // empty: default grid for the structure
  std::vector<Lambda> null_grid;  // empty: default grid for the null
  NullResampling resampling = NullResampling::Subjects;
  std::size_t g_t = 101;
  std::size_t g_x = 101;
  Quadrature rule = Quadrature::Simpson;
  IndexSampler sampler;
  double max_failure_rate = 0.05;
};

struct TestOutcome {
  double t_obs = 0.0;
  std::vector<double> null_draws;
  double p_value = 1.0;
  std::size_t B = 0;
  std::pair<std::size_t, std::size_t> integration_grid{0, 0};
  FitResult alt;
  FitResult null;
  std::size_t failures = 0;
  std::uint64_t seed = 0;

  bool rejects(double alpha) const { return p_value <= alpha; }
};

// Fraction of draws above t_obs. A draw equal to t_obs counts as above, so
// an exactly degenerate statistic (all zeros) gives p = 1.
inline double p_value_from(const std::vector<double>& draws, double t_obs) {
  if (draws.empty()) return 1.0;
  std::size_t above = 0;
  for (double d : draws) above += d >= t_obs ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(draws.size());
}

// Fits the alternative and the null, then rebuilds B datasets under the null
// from the alternative's residual blocks, refitting both models each time.
// With Subjects resampling the drawn subjects bring their covariates along;
// with Residuals every subject keeps its own covariates.
inline TestOutcome bootstrap_null_test(const FunctionalDataset& ds, const MeanStructure& ms_alt,
                                       const TestOptions& opt = {}) {
  ds.validate();
  const MeanStructure ms_null = null_structure(ds, opt.null_d_t);
  const std::vector<Lambda> alt_grid = opt.alt_grid.empty() ? default_lambda_grid(ms_alt) : opt.alt_grid;
  const std::vector<Lambda> null_grid = opt.null_grid.empty() ? default_lambda_grid(ms_null) : opt.null_grid;
  if (opt.resampling == NullResampling::Residuals && !ds.covariates_visit_invariant()) {
    fail(ErrorKind::Data, "precondition",
         "residual resampling for the test requires covariates that do not change across visits");
  }

  const FitPlan alt_plan(ds, ms_alt, alt_grid);
  const FitPlan null_plan(ds, ms_null, null_grid);
  TestOutcome out;
  out.alt = alt_plan.fit(ds);
  out.null = null_plan.fit(ds);
  out.B = opt.B;
  out.seed = opt.seed;
  out.integration_grid = {opt.g_t, opt.g_x};

  double x_lo = ds.x_min();
  double x_hi = ds.x_max();
  if (ms_alt.x_basis()) {
    x_lo = ms_alt.x_basis()->lo();
    x_hi = ms_alt.x_basis()->hi();
  }
  if (!(x_hi > x_lo)) fail(ErrorKind::Data, "structure", "covariate of interest does not vary");
  const EvalGrid points = integration_grid(ds.grid.front(), ds.grid.back(), opt.g_t, x_lo, x_hi, opt.g_x);
  const StatisticPlan statistic(ms_alt, ms_null, points, opt.rule);
  out.t_obs = statistic(out.alt.beta, out.null.beta);

  const RowMatrix resid = ds.y - alt_plan.fitted(out.alt.coefficients());
  Eigen::RowVectorXd mu0(static_cast<Eigen::Index>(ds.L()));
  for (std::size_t l = 0; l < ds.L(); ++l) {
    mu0[static_cast<Eigen::Index>(l)] = out.null.mean(ds.grid[l], 0.0);
  }
  const auto L = static_cast<Eigen::Index>(ds.L());
  const auto p = static_cast<Eigen::Index>(ds.p());
  const Eigen::VectorXd tau_alt = out.alt.tau;

  auto make = [&](const std::vector<std::size_t>& idx) {
    FunctionalDataset rep;
    rep.grid = ds.grid;
    std::size_t total = 0;
    bool same_layout = true;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      total += ds.visits(idx[i]);
      same_layout = same_layout && ds.visits(idx[i]) == ds.visits(i);
    }
    rep.x.reserve(total);
    rep.y.resize(static_cast<Eigen::Index>(total), L);
    rep.z.resize(static_cast<Eigen::Index>(total), p);
    rep.subject_ids.reserve(idx.size());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = static_cast<Eigen::Index>(ds.offsets[idx[i]]);
      const auto m = static_cast<Eigen::Index>(ds.visits(idx[i]));
      const auto cov = opt.resampling == NullResampling::Subjects ? src : static_cast<Eigen::Index>(ds.offsets[i]);
      rep.y.middleRows(r, m) = resid.middleRows(src, m);
      rep.y.middleRows(r, m).rowwise() += mu0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto cj = opt.resampling == NullResampling::Subjects ? cov + j : cov;
        rep.x.push_back(ds.x[static_cast<std::size_t>(cj)]);
        if (p > 0) {
          rep.z.row(r + j) = ds.z.row(cj);
          rep.y.row(r + j).array() += ds.z.row(cj).dot(tau_alt);
        }
      }
      rep.subject_ids.push_back(ds.subject_ids[idx[i]]);
      r += m;
      rep.offsets.push_back(static_cast<std::size_t>(r));
    }
    if (opt.resampling == NullResampling::Residuals && same_layout) {
      return statistic(alt_plan.fit(rep).beta, null_plan.fit(rep).beta);
    }
    const FitResult a = FitPlan(rep, ms_alt, alt_grid).fit(rep);
    const FitResult n0 = FitPlan(rep, ms_null, null_grid).fit(rep);
    return statistic(a.beta, n0.beta);
  };

  auto run = detail::run_replicates<double>(ds.n(), opt.B, opt.seed, opt.threads, opt.sampler,
                                            opt.max_failure_rate, make);
  out.null_draws = std::move(run.results);
  out.failures = run.failures;
  out.p_value = p_value_from(out.null_draws, out.t_obs);
  return out;
}

}  // namespace fdfx
