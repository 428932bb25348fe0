#pragma once

// Simulated correlated functional data and Monte Carlo experiments for the
// bands (coverage, length) and the L2 test (size, power).

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdfx/bands.hpp"
#include "fdfx/bootstrap.hpp"
#include "fdfx/dataset.hpp"
#include "fdfx/error.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/parallel.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/testkit.hpp"

namespace fdfx {

// True means: (a) linear, (b) linear with interaction, (c) cos(2 pi t) plus a
// linear x effect, (d) cos(2 pi t) plus a cubic deviation delta (x/4 - t)^3.
enum class TrueMean { Linear, Interaction, CosLinear, CosCubic };

inline const char* to_string(TrueMean m) {
  switch (m) {
    case TrueMean::Linear: return "linear";
    case TrueMean::Interaction: return "interaction";
    case TrueMean::CosLinear: return "cos-linear";
    case TrueMean::CosCubic: return "cos-cubic";
  }
  return "unknown";
}

inline TrueMean parse_true_mean(const std::string& s) {
  if (s == "linear") return TrueMean::Linear;
  if (s == "interaction") return TrueMean::Interaction;
  if (s == "cos-linear") return TrueMean::CosLinear;
  if (s == "cos-cubic") return TrueMean::CosCubic;
  fail(ErrorKind::Config, "invalid-parameter",
       "unknown true mean '" + s + "' (expected linear|interaction|cos-linear|cos-cubic)");
}

enum class ScoreLaw { Gaussian, Uniform };

inline const char* to_string(ScoreLaw s) { return s == ScoreLaw::Gaussian ? "gaussian" : "uniform"; }

inline ScoreLaw parse_score_law(const std::string& s) {
  if (s == "gaussian") return ScoreLaw::Gaussian;
  if (s == "uniform") return ScoreLaw::Uniform;
  fail(ErrorKind::Config, "invalid-parameter", "unknown score law '" + s + "' (expected gaussian|uniform)");
}

struct DgpConfig {
  std::size_t n = 100;
  std::size_t m_min = 5;  // visits drawn uniformly from {m_min..m_max}
  std::size_t m_max = 5;
  std::size_t L = 101;
  std::array<double, 3> eigenvalues{3.0, 2.0, 1.0 / 3.0};
  double rho = 0.2;
  double sigma2 = 5.33;
  TrueMean mean = TrueMean::Linear;
  double beta0 = 5.0;
  double beta_t = 2.0;
  double beta_x = 3.0;
  double beta_tx = 7.0;
  double cos_amplitude = 1.0;
  double delta = 4.0;
  bool with_z = true;
  double tau = 8.0;
  bool visit_varying_x = false;
  // X on the integers 30..90 (ages); the cubic deviation then uses
  // (x - 30) / 60 so that it keeps the same scale.
  bool blsa_mimic = false;
  ScoreLaw scores = ScoreLaw::Gaussian;
  std::uint64_t seed = 1;

  double snr() const { return (eigenvalues[0] + eigenvalues[1] + eigenvalues[2]) / sigma2; }

  void validate() const {
    if (n < 2) fail(ErrorKind::Config, "invalid-parameter", "simulation needs n >= 2");
    if (m_min < 1 || m_max < m_min) fail(ErrorKind::Config, "invalid-parameter", "visit range must satisfy 1 <= m_min <= m_max");
    if (L < 2) fail(ErrorKind::Config, "invalid-parameter", "simulation grid needs L >= 2");
    if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorKind::Config, "invalid-parameter", "rho must lie in [0, 1)");
    for (double ev : eigenvalues) {
      if (!(ev >= 0.0)) fail(ErrorKind::Config, "invalid-parameter", "eigenvalues must be non-negative");
    }
    if (!(sigma2 >= 0.0)) fail(ErrorKind::Config, "invalid-parameter", "sigma2 must be non-negative");
  }

  double deviation_x(double x) const { return blsa_mimic ? (x - 30.0) / 60.0 : x; }

  // The true mean of interest (nuisance part excluded).
  double mu(double t, double x) const {
    switch (mean) {
      case TrueMean::Linear: return beta0 + beta_t * t + beta_x * x;
      case TrueMean::Interaction: return beta0 + beta_t * t + beta_x * x + beta_tx * t * x;
      case TrueMean::CosLinear: return cos_amplitude * std::cos(2.0 * std::numbers::pi * t) + beta_x * x;
      case TrueMean::CosCubic: {
        const double d = deviation_x(x) / 4.0 - t;
        return cos_amplitude * std::cos(2.0 * std::numbers::pi * t) + delta * d * d * d;
      }
    }
    return 0.0;
  }
};

inline double eigenfunction(int l, double t) {
  const double c = std::numbers::sqrt2;
  const double w = 2.0 * std::numbers::pi * t;
  switch (l) {
    case 0: return c * std::cos(w);
    case 1: return c * std::sin(w);
    default: return c * std::cos(2.0 * w);
  }
}

// Lower Cholesky factor of the m x m matrix rho^|j - j'|.
inline Eigen::MatrixXd ar1_factor(std::size_t m, double rho) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          std::pow(rho, std::abs(static_cast<double>(j) - static_cast<double>(k)));
    }
  }
  return Eigen::LLT<Eigen::MatrixXd>(c).matrixL();
}

// Scores for one subject: visits x 3, column l with covariance lambda_l rho^|j-j'|.
inline Eigen::MatrixXd draw_scores(const DgpConfig& cfg, const Eigen::MatrixXd& factor, Rng& rng) {
  const auto m = factor.rows();
  Eigen::MatrixXd g(m, 3);
  for (Eigen::Index l = 0; l < 3; ++l) {
    for (Eigen::Index j = 0; j < m; ++j) {
      g(j, l) = cfg.scores == ScoreLaw::Gaussian ? rng.normal() : std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
    }
  }
  Eigen::MatrixXd xi = factor * g;
  for (Eigen::Index l = 0; l < 3; ++l) xi.col(l) *= std::sqrt(cfg.eigenvalues[static_cast<std::size_t>(l)]);
  return xi;
}

inline FunctionalDataset generate_dataset(const DgpConfig& cfg, Rng rng) {
  cfg.validate();
  FunctionalDataset ds;
  ds.grid = equispaced(0.0, 1.0, cfg.L);
  const auto L = static_cast<Eigen::Index>(cfg.L);
  Eigen::MatrixXd phi(3, L);
  for (Eigen::Index a = 0; a < L; ++a) {
    for (int l = 0; l < 3; ++l) phi(l, a) = eigenfunction(l, ds.grid[static_cast<std::size_t>(a)]);
  }
  std::vector<Eigen::MatrixXd> factors(cfg.m_max + 1);
  const double sigma = std::sqrt(cfg.sigma2);
  const Eigen::Index p = cfg.with_z ? 1 : 0;

  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t m = cfg.m_min + static_cast<std::size_t>(rng.index(cfg.m_max - cfg.m_min + 1));
    if (factors[m].size() == 0) factors[m] = ar1_factor(m, cfg.rho);
    auto draw_x = [&] {
      return cfg.blsa_mimic ? 30.0 + static_cast<double>(rng.index(61)) : rng.uniform();
    };
    std::vector<double> xs(m, draw_x());
    if (cfg.visit_varying_x) {
      for (std::size_t j = 1; j < m; ++j) xs[j] = draw_x();
    }
    const double zi = cfg.with_z ? rng.uniform() : 0.0;
    const Eigen::MatrixXd xi = draw_scores(cfg, factors[m], rng);
    RowMatrix y(static_cast<Eigen::Index>(m), L);
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      for (Eigen::Index a = 0; a < L; ++a) {
        const double t = ds.grid[static_cast<std::size_t>(a)];
        double v = cfg.mu(t, xs[j]) + cfg.tau * zi;
        v += xi.row(jj).dot(phi.col(a));
        if (sigma > 0.0) v += sigma * rng.normal();
        y(jj, a) = v;
      }
    }
    RowMatrix z = RowMatrix::Constant(static_cast<Eigen::Index>(m), p, zi);
    ds.add_subject("s" + std::to_string(i + 1), xs, z, y);
  }
  return ds;
}

inline FunctionalDataset generate_dataset(const DgpConfig& cfg) {
  return generate_dataset(cfg, Rng(cfg.seed).substream(stream::kData));
}

// Mean structure matching the true mean, with the given basis sizes.
inline MeanStructure correct_structure(const DgpConfig& cfg, const FunctionalDataset& ds, int d_t = 7, int d_x = 7) {
  switch (cfg.mean) {
    case TrueMean::Linear: return make_structure(MeanKind::Linear, ds);
    case TrueMean::Interaction: return make_structure(MeanKind::LinearInteraction, ds);
    case TrueMean::CosLinear: return make_structure(MeanKind::PartialLinear, ds, d_t);
    case TrueMean::CosCubic: return make_structure(MeanKind::BivariateSmooth, ds, d_t, d_x);
  }
  return make_structure(MeanKind::Linear, ds);
}

// Summary of one estimated quantity in the layout of a coverage table row.
struct TargetSummary {
  std::string name;
  bool functional = false;
  double bias = 0.0;      // scalar: mean - truth; function: grid-averaged bias
  double sd = 0.0;        // scalar: SD over replicates; function: sqrt of the integrated variance
  double acp_point = 0.0;
  double acp_point_se = 0.0;
  double al_point = 0.0;
  double al_point_se = 0.0;
  std::optional<double> acp_joint;
  std::optional<double> acp_joint_se;
  std::optional<double> al_joint;
  std::optional<double> al_joint_se;
};

struct CoverageReport {
  DgpConfig dgp;
  std::size_t nsim = 0;
  std::size_t B = 0;
  double alpha = 0.05;
  BootstrapKind bootstrap_kind = BootstrapKind::Residual;
  std::size_t g_t = 0;
  std::size_t g_x = 0;
  std::vector<TargetSummary> targets;
  std::size_t bootstrap_failures = 0;
};

struct CoverageOptions {
  std::size_t nsim = 200;
  std::size_t B = 300;
  double alpha = 0.05;
  BootstrapKind bootstrap_kind = BootstrapKind::Residual;
  PointwiseMethod pointwise = PointwiseMethod::Normal;
  std::size_t R = 1000;
  std::size_t g_t = 101;
  std::size_t g_x = 101;
  bool legacy_sqrt_s = false;
  BandCenter center = BandCenter::BootstrapMean;
  int d_t = 7;
  int d_x = 7;
  unsigned threads = 1;
  std::function<void(std::size_t)> progress;  // called with the replicate index when it finishes
};

namespace detail {

// Closed containment with a relative tolerance, so zero-width bands around an
// exact fit still cover.
inline bool covers(double lower, double upper, double truth) {
  const double tol = 1e-9 * std::max(1.0, std::abs(truth));
  return lower - tol <= truth && truth <= upper + tol;
}

struct TargetRecord {
  Eigen::VectorXd estimate;  // on the target's grid
  Eigen::VectorXd truth;
  double cover_point = 0.0;  // fraction of grid points
  double len_point = 0.0;
  bool cover_joint = false;
  double len_joint = 0.0;
};

struct TargetSpec {
  std::string name;
  bool functional = false;
  bool joint = false;
  EvalGrid grid;             // empty design for the nuisance coefficient
  Eigen::VectorXd truth;
  bool nuisance = false;
};

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double se_of_mean(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline std::vector<TargetSpec> coverage_targets(const DgpConfig& cfg, const MeanStructure& ms,
                                                const FunctionalDataset& ds, const CoverageOptions& opt) {
  std::vector<TargetSpec> out;
  auto scalar = [&](const std::string& name, int k, double truth) {
    TargetSpec s;
    s.name = name;
    s.grid = EvalGrid::coefficient(ms, k);
    s.truth = Eigen::VectorXd::Constant(1, truth);
    out.push_back(std::move(s));
  };
  switch (cfg.mean) {
    case TrueMean::Linear:
    case TrueMean::Interaction:
      scalar("beta0", 0, cfg.beta0);
      scalar("beta_t", 1, cfg.beta_t);
      scalar("beta_x", 2, cfg.beta_x);
      if (cfg.mean == TrueMean::Interaction) scalar("beta_tx", 3, cfg.beta_tx);
      break;
    case TrueMean::CosLinear: {
      TargetSpec f;
      f.name = "f(t)";
      f.functional = true;
      f.joint = true;
      f.grid = EvalGrid::t_component(ms, opt.g_t);
      f.truth.resize(static_cast<Eigen::Index>(opt.g_t));
      for (std::size_t a = 0; a < opt.g_t; ++a) {
        f.truth[static_cast<Eigen::Index>(a)] = cfg.cos_amplitude * std::cos(2.0 * std::numbers::pi * f.grid.t_points[a]);
      }
      out.push_back(std::move(f));
      scalar("beta_x", ms.dim() - 1, cfg.beta_x);
      break;
    }
    case TrueMean::CosCubic: {
      TargetSpec f;
      f.name = "mu(t,x)";
      f.functional = true;
      f.joint = true;
      f.grid = EvalGrid::surface(ms, opt.g_t, opt.g_x);
      f.truth.resize(static_cast<Eigen::Index>(f.grid.size()));
      for (std::size_t a = 0; a < opt.g_t; ++a) {
        for (std::size_t b = 0; b < opt.g_x; ++b) {
          f.truth[static_cast<Eigen::Index>(a * opt.g_x + b)] = cfg.mu(f.grid.t_points[a], f.grid.x_points[b]);
        }
      }
      out.push_back(std::move(f));
      break;
    }
  }
  if (ds.p() > 0) {
    TargetSpec t;
    t.name = "tau";
    t.nuisance = true;
    t.truth = Eigen::VectorXd::Constant(1, cfg.tau);
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

// One replicate: generate, fit the correct structure, bootstrap, and score
// pointwise and joint bands for every target.
inline CoverageReport run_coverage_experiment(const DgpConfig& cfg, const CoverageOptions& opt) {
  cfg.validate();
  if (opt.nsim < 2) fail(ErrorKind::Config, "invalid-parameter", "coverage experiment needs Nsim >= 2");
  std::vector<std::vector<detail::TargetRecord>> records(opt.nsim);
  std::vector<std::string> names;
  std::vector<char> functional;
  std::vector<char> joint;
  std::vector<std::size_t> failures(opt.nsim, 0);
  const Rng root(cfg.seed);
  const double z = normal_quantile(1.0 - opt.alpha / 2.0);

  auto one = [&](std::size_t rep) {
    const Rng rng = root.substream(rep);
    const FunctionalDataset ds = generate_dataset(cfg, rng.substream(stream::kData));
    const MeanStructure ms = correct_structure(cfg, ds, opt.d_t, opt.d_x);
    const auto grid = default_lambda_grid(ms);
    const FitResult base = FitPlan(ds, ms, grid).fit(ds);
    BootstrapOptions bo;
    bo.B = opt.B;
    bo.seed = rng.substream(stream::kBootstrap).key();
    bo.threads = 1;
    const BootstrapEnsemble ens = bootstrap(opt.bootstrap_kind, ds, ms, grid, bo);
    failures[rep] = ens.failures;
    auto targets = detail::coverage_targets(cfg, ms, ds, opt);
    std::vector<detail::TargetRecord> recs;
    for (const auto& tg : targets) {
      detail::TargetRecord rec;
      rec.truth = tg.truth;
      if (tg.nuisance) {
        const double est = base.tau[0];
        const double sd = std::sqrt(std::max(0.0, ens.v_tau()(0, 0)));
        rec.estimate = Eigen::VectorXd::Constant(1, est);
        rec.cover_point = detail::covers(est - z * sd, est + z * sd, tg.truth[0]) ? 1.0 : 0.0;
        rec.len_point = 2.0 * z * sd;
        recs.push_back(std::move(rec));
        continue;
      }
      const BandResult pb = pointwise_band(base, ens, tg.grid, opt.alpha, opt.pointwise);
      rec.estimate = pb.center;
      const auto g = pb.center.size();
      double covered = 0.0;
      for (Eigen::Index k = 0; k < g; ++k) covered += detail::covers(pb.lower[k], pb.upper[k], tg.truth[k]) ? 1.0 : 0.0;
      rec.cover_point = covered / static_cast<double>(g);
      rec.len_point = pb.average_length();
      if (tg.joint) {
        JointBandOptions jo;
        jo.R = opt.R;
        jo.seed = rng.substream(stream::kBand).key();
        jo.legacy_sqrt_s = opt.legacy_sqrt_s;
        jo.center = opt.center;
        jo.fit = &base;
        const BandResult jb = joint_band(ens, tg.grid, opt.alpha, jo);
        bool all = true;
        for (Eigen::Index k = 0; k < g && all; ++k) all = detail::covers(jb.lower[k], jb.upper[k], tg.truth[k]);
        rec.cover_joint = all;
        rec.len_joint = jb.average_length();
      }
      recs.push_back(std::move(rec));
    }
    records[rep] = std::move(recs);
    if (rep == 0) {
      for (const auto& tg : targets) {
        names.push_back(tg.name);
        functional.push_back(tg.functional ? 1 : 0);
        joint.push_back(tg.joint ? 1 : 0);
      }
    }
    if (opt.progress) opt.progress(rep);
  };
  try {
    parallel_for(opt.nsim, opt.threads, one);
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), std::string("coverage experiment: ") + e.what());
  }

  CoverageReport report;
  report.dgp = cfg;
  report.nsim = opt.nsim;
  report.B = opt.B;
  report.alpha = opt.alpha;
  report.bootstrap_kind = opt.bootstrap_kind;
  report.g_t = opt.g_t;
  report.g_x = opt.g_x;
  for (auto f : failures) report.bootstrap_failures += f;
  const double ns = static_cast<double>(opt.nsim);
  for (std::size_t k = 0; k < names.size(); ++k) {
    TargetSummary s;
    s.name = names[k];
    s.functional = functional[k] != 0;
    const auto g = records[0][k].estimate.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(g);
    for (const auto& r : records) mean += r[k].estimate;
    mean /= ns;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(g);
    std::vector<double> cp, lp, cj, lj;
    Eigen::VectorXd bias_acc = Eigen::VectorXd::Zero(g);
    for (const auto& r : records) {
      var += (r[k].estimate - mean).cwiseAbs2();
      bias_acc += r[k].truth;
      cp.push_back(r[k].cover_point);
      lp.push_back(r[k].len_point);
      cj.push_back(r[k].cover_joint ? 1.0 : 0.0);
      lj.push_back(r[k].len_joint);
    }
    var /= (ns - 1.0);
    // Truth can move with the replicate's domain; compare to its average.
    bias_acc /= ns;
    s.bias = (mean - bias_acc).mean();
    s.sd = std::sqrt(var.mean());
    s.acp_point = detail::mean_of(cp);
    s.acp_point_se = detail::se_of_mean(cp);
    s.al_point = detail::mean_of(lp);
    s.al_point_se = detail::se_of_mean(lp);
    if (joint[k] != 0) {
      const double pj = detail::mean_of(cj);
      s.acp_joint = pj;
      s.acp_joint_se = std::sqrt(pj * (1.0 - pj) / ns);
      s.al_joint = detail::mean_of(lj);
      s.al_joint_se = detail::se_of_mean(lj);
    }
    report.targets.push_back(std::move(s));
  }
  return report;
}

struct SizePowerRow {
  DgpConfig dgp;
  std::size_t nsim = 0;
  std::size_t B = 0;
  std::map<double, double> rejection;  // alpha -> rate
  std::map<double, double> se;         // alpha -> sqrt(p (1 - p) / Nsim)
  std::vector<double> p_values;
  std::size_t failures = 0;
};

struct SizePowerOptions {
  std::size_t nsim = 200;
  std::vector<double> alphas{0.05, 0.10, 0.15};
  TestOptions test;  // B, resampling, quadrature, basis for the null
  int d_t = 7;
  int d_x = 7;
  unsigned threads = 1;
  std::function<void(std::size_t)> progress;
};

// Rejection rates of the L2 test for one data-generating configuration.
inline SizePowerRow run_size_power_scenario(const DgpConfig& cfg, const SizePowerOptions& opt) {
  cfg.validate();
  if (opt.nsim < 1) fail(ErrorKind::Config, "invalid-parameter", "size/power experiment needs Nsim >= 1");
  SizePowerRow row;
  row.dgp = cfg;
  row.nsim = opt.nsim;
  row.B = opt.test.B;
  row.p_values.assign(opt.nsim, 1.0);
  std::vector<std::size_t> failures(opt.nsim, 0);
  const Rng root(cfg.seed);
  auto one = [&](std::size_t rep) {
    const Rng rng = root.substream(rep);
    const FunctionalDataset ds = generate_dataset(cfg, rng.substream(stream::kData));
    const MeanStructure alt = make_structure(MeanKind::BivariateSmooth, ds, opt.d_t, opt.d_x);
    TestOptions to = opt.test;
    to.seed = rng.substream(stream::kTest).key();
    to.threads = 1;
    const TestOutcome out = bootstrap_null_test(ds, alt, to);
    row.p_values[rep] = out.p_value;
    failures[rep] = out.failures;
    if (opt.progress) opt.progress(rep);
  };
  try {
    parallel_for(opt.nsim, opt.threads, one);
  } catch (const Error& e) {
    throw Error(e.kind(), e.code(), std::string("size/power experiment: ") + e.what());
  }
  for (auto f : failures) row.failures += f;
  const double ns = static_cast<double>(opt.nsim);
  for (double a : opt.alphas) {
    std::size_t rej = 0;
    for (double p : row.p_values) rej += p <= a ? 1 : 0;
    const double rate = static_cast<double>(rej) / ns;
    row.rejection[a] = rate;
    row.se[a] = std::sqrt(rate * (1.0 - rate) / ns);
  }
  return row;
}

inline std::vector<SizePowerRow> run_size_power_experiment(const std::vector<DgpConfig>& family,
                                                           const SizePowerOptions& opt) {
  std::vector<SizePowerRow> rows;
  rows.reserve(family.size());
  for (const auto& cfg : family) rows.push_back(run_size_power_scenario(cfg, opt));
  return rows;
}

struct McReport {
  std::vector<CoverageReport> coverage;
  std::vector<SizePowerRow> size_power;
};

inline nlohmann::json to_json(const DgpConfig& c) {
  return {{"n", c.n},
          {"m_min", c.m_min},
          {"m_max", c.m_max},
          {"L", c.L},
          {"eigenvalues", c.eigenvalues},
          {"rho", c.rho},
          {"sigma2", c.sigma2},
          {"snr", c.snr()},
          {"mean", to_string(c.mean)},
          {"beta0", c.beta0},
          {"beta_t", c.beta_t},
          {"beta_x", c.beta_x},
          {"beta_tx", c.beta_tx},
          {"cos_amplitude", c.cos_amplitude},
          {"delta", c.delta},
          {"with_z", c.with_z},
          {"tau", c.tau},
          {"visit_varying_x", c.visit_varying_x},
          {"blsa_mimic", c.blsa_mimic},
          {"scores", to_string(c.scores)},
          {"seed", c.seed}};
}

namespace detail {

inline std::string alpha_key(double a) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << a;
  return os.str();
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace detail

inline nlohmann::json to_json(const McReport& r) {
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& c : r.coverage) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : c.targets) {
      targets.push_back({{"parameter", t.name},
                         {"functional", t.functional},
                         {"integrated_bias", t.bias},
                         {"integrated_variance", t.sd * t.sd},
                         {"sd", t.sd},
                         {"acp_point", t.acp_point},
                         {"acp_point_se", t.acp_point_se},
                         {"al_point", t.al_point},
                         {"al_point_se", t.al_point_se},
                         {"acp_joint", detail::opt_json(t.acp_joint)},
                         {"acp_joint_se", detail::opt_json(t.acp_joint_se)},
                         {"al_joint", detail::opt_json(t.al_joint)},
                         {"al_joint_se", detail::opt_json(t.al_joint_se)}});
    }
    cov.push_back({{"dgp", to_json(c.dgp)},
                   {"nsim", c.nsim},
                   {"B", c.B},
                   {"alpha", c.alpha},
                   {"bootstrap", to_string(c.bootstrap_kind)},
                   {"grid", {c.g_t, c.g_x}},
                   {"bootstrap_failures", c.bootstrap_failures},
                   {"targets", targets}});
  }
  nlohmann::json sp = nlohmann::json::array();
  for (const auto& s : r.size_power) {
    nlohmann::json size_by_alpha = nlohmann::json::object();
    nlohmann::json se_by_alpha = nlohmann::json::object();
    for (const auto& [a, v] : s.rejection) size_by_alpha[detail::alpha_key(a)] = v;
    for (const auto& [a, v] : s.se) se_by_alpha[detail::alpha_key(a)] = v;
    sp.push_back({{"dgp", to_json(s.dgp)},
                  {"n", s.dgp.n},
                  {"rho", s.dgp.rho},
                  {"delta", s.dgp.delta},
                  {"tau", s.dgp.with_z ? s.dgp.tau : 0.0},
                  {"nsim", s.nsim},
                  {"B", s.B},
                  {s.dgp.delta == 0.0 ? "size_by_alpha" : "power_by_alpha", size_by_alpha},
                  {"se_by_alpha", se_by_alpha},
                  {"failures", s.failures},
                  {"p_values", s.p_values}});
  }
  return {{"coverage", cov}, {"size_power", sp}};
}

// Coverage rows: one line per (scenario, parameter).
inline std::string coverage_csv(const McReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "mean,parameter,n,rho,tau,bootstrap,nsim,B,alpha,bias,sd,acp_point,acp_point_se,al_point,al_point_se,"
        "acp_joint,acp_joint_se,al_joint,al_joint_se\n";
  auto opt = [](const std::optional<double>& v) {
    std::ostringstream s;
    s << std::setprecision(10);
    if (v) s << *v;
    return s.str();
  };
  for (const auto& c : r.coverage) {
    for (const auto& t : c.targets) {
      os << to_string(c.dgp.mean) << ',' << t.name << ',' << c.dgp.n << ',' << c.dgp.rho << ','
         << (c.dgp.with_z ? c.dgp.tau : 0.0) << ',' << to_string(c.bootstrap_kind) << ',' << c.nsim << ',' << c.B
         << ',' << c.alpha << ',' << t.bias << ',' << t.sd << ',' << t.acp_point << ',' << t.acp_point_se << ','
         << t.al_point << ',' << t.al_point_se << ',' << opt(t.acp_joint) << ',' << opt(t.acp_joint_se) << ','
         << opt(t.al_joint) << ',' << opt(t.al_joint_se) << '\n';
    }
  }
  return os.str();
}

// Size/power rows: one line per (n, rho, delta, tau) with a column pair per alpha.
inline std::string size_power_csv(const McReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  std::vector<double> alphas;
  for (const auto& s : r.size_power) {
    for (const auto& [a, v] : s.rejection) {
      if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
    }
  }
  std::sort(alphas.begin(), alphas.end());
  os << "n,rho,delta,tau,nsim,B";
  for (double a : alphas) os << ",reject_" << detail::alpha_key(a) << ",se_" << detail::alpha_key(a);
  os << '\n';
  for (const auto& s : r.size_power) {
    os << s.dgp.n << ',' << s.dgp.rho << ',' << s.dgp.delta << ',' << (s.dgp.with_z ? s.dgp.tau : 0.0) << ','
       << s.nsim << ',' << s.B;
    for (double a : alphas) {
      const auto it = s.rejection.find(a);
      if (it == s.rejection.end()) {
        os << ",,";
      } else {
        os << ',' << it->second << ',' << s.se.at(a);
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fdfx
