#pragma once

// Command-line front end: configuration, the fit / bands / test / simulate
// commands, and report files.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "fdfx/bands.hpp"
#include "fdfx/bootstrap.hpp"
#include "fdfx/error.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/io.hpp"
#include "fdfx/simlab.hpp"
#include "fdfx/testkit.hpp"

namespace fdfx {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  std::string command;
  std::string input;
  std::string output_dir = "fdfx-out";
  bool log1p = false;
  unsigned threads = 0;  // 0: all hardware threads

  std::string mean = "bivariate";
  int d_t = 7;
  int d_x = 7;
  int degree = 3;
  int lambda_points = 7;
  double lambda_min = 1e-4;
  double lambda_max = 1e4;

  std::string bootstrap_kind = "residual";
  std::size_t bootstrap_B = 300;
  std::uint64_t bootstrap_seed = 1;

  double band_alpha = 0.05;
  std::size_t band_g_t = 101;
  std::size_t band_g_x = 101;
  std::size_t band_R = 1000;
  std::string band_method = "all";  // normal | quantile | joint | all
  bool band_legacy_sqrt_s = false;
  std::string band_center = "mean";  // mean | fit

  std::size_t test_B = 300;
  std::uint64_t test_seed = 1;
  int test_null_d_t = 7;
  std::string test_resampling = "subjects";
  std::size_t test_g_t = 101;
  std::size_t test_g_x = 101;
  std::string test_quadrature = "simpson";

  std::string sim_experiment = "coverage";  // coverage | size-power
  std::size_t sim_nsim = 200;
  std::size_t sim_n = 100;
  std::size_t sim_m_min = 5;
  std::size_t sim_m_max = 5;
  std::size_t sim_L = 101;
  double sim_rho = 0.2;
  double sim_sigma2 = 5.33;
  std::vector<double> sim_eigenvalues{3.0, 2.0, 1.0 / 3.0};
  std::string sim_mean = "linear";
  double sim_beta0 = 5.0;
  double sim_beta_t = 2.0;
  double sim_beta_x = 3.0;
  double sim_beta_tx = 7.0;
  double sim_cos_amplitude = 1.0;
  double sim_delta = 4.0;
  bool sim_with_z = true;
  double sim_tau = 8.0;
  bool sim_visit_varying_x = false;
  bool sim_blsa_mimic = false;
  std::string sim_scores = "gaussian";
  std::uint64_t sim_seed = 1;
  std::vector<double> sim_alphas{0.05, 0.10, 0.15};
  std::vector<double> sim_deltas;  // size-power: one row per delta (empty: sim-delta only)
  std::vector<double> sim_rhos;    // size-power: one row per rho (empty: sim-rho only)
  std::string sim_export_dataset;  // write one generated dataset here and skip the experiment

  bool operator==(const RunConfig&) const = default;
};

// Calls f(name, field, help) for every field. Names double as long options
// and config-file keys; "command" is the positional argument.
template <class C, class F>
void for_each_field(C& c, F&& f) {
  f("command", c.command, "fit | bands | test | simulate");
  f("input", c.input, "long-format CSV (subject_id, visit, t, y, x, z1..zp)");
  f("output-dir", c.output_dir, "directory for reports");
  f("log1p", c.log1p, "transform responses with log(1 + y)");
  f("threads", c.threads, "worker threads (0: all hardware threads, 1: serial)");

  f("mean", c.mean, "linear | interaction | partial-linear | bivariate | time-smooth");
  f("d-t", c.d_t, "B-spline basis size in t");
  f("d-x", c.d_x, "B-spline basis size in x");
  f("degree", c.degree, "spline degree");
  f("lambda-points", c.lambda_points, "grid points per smoothing parameter");
  f("lambda-min", c.lambda_min, "smallest smoothing parameter");
  f("lambda-max", c.lambda_max, "largest smoothing parameter");

  f("bootstrap-kind", c.bootstrap_kind, "data | residual");
  f("bootstrap-B", c.bootstrap_B, "bootstrap replicates");
  f("bootstrap-seed", c.bootstrap_seed, "bootstrap seed");

  f("band-alpha", c.band_alpha, "1 - confidence level");
  f("band-g-t", c.band_g_t, "evaluation points in t");
  f("band-g-x", c.band_g_x, "evaluation points in x");
  f("band-R", c.band_R, "normal draws for the joint band");
  f("band-method", c.band_method, "normal | quantile | joint | all");
  f("band-legacy-sqrt-s", c.band_legacy_sqrt_s, "standardize the joint band by sqrt(s)");
  f("band-center", c.band_center, "joint band center: mean | fit");

  f("test-B", c.test_B, "bootstrap replicates for the test");
  f("test-seed", c.test_seed, "test seed");
  f("test-null-d-t", c.test_null_d_t, "basis size of the null model");
  f("test-resampling", c.test_resampling, "subjects | residuals");
  f("test-g-t", c.test_g_t, "integration points in t");
  f("test-g-x", c.test_g_x, "integration points in x");
  f("test-quadrature", c.test_quadrature, "simpson | trapezoid");

  f("sim-experiment", c.sim_experiment, "coverage | size-power");
  f("sim-nsim", c.sim_nsim, "Monte Carlo replicates");
  f("sim-n", c.sim_n, "subjects");
  f("sim-m-min", c.sim_m_min, "fewest visits per subject");
  f("sim-m-max", c.sim_m_max, "most visits per subject");
  f("sim-L", c.sim_L, "grid points on [0, 1]");
  f("sim-rho", c.sim_rho, "visit autocorrelation of the scores");
  f("sim-sigma2", c.sim_sigma2, "white-noise variance");
  f("sim-eigenvalues", c.sim_eigenvalues, "three score variances, comma separated");
  f("sim-mean", c.sim_mean, "linear | interaction | cos-linear | cos-cubic");
  f("sim-beta0", c.sim_beta0, "intercept");
  f("sim-beta-t", c.sim_beta_t, "slope in t");
  f("sim-beta-x", c.sim_beta_x, "slope in x");
  f("sim-beta-tx", c.sim_beta_tx, "interaction slope");
  f("sim-cos-amplitude", c.sim_cos_amplitude, "amplitude of cos(2 pi t)");
  f("sim-delta", c.sim_delta, "size of the cubic deviation");
  f("sim-with-z", c.sim_with_z, "include the nuisance covariate");
  f("sim-tau", c.sim_tau, "nuisance effect");
  f("sim-visit-varying-x", c.sim_visit_varying_x, "draw X afresh at every visit");
  f("sim-blsa-mimic", c.sim_blsa_mimic, "X on the integers 30..90");
  f("sim-scores", c.sim_scores, "gaussian | uniform");
  f("sim-seed", c.sim_seed, "simulation seed");
  f("sim-alphas", c.sim_alphas, "test levels, comma separated");
  f("sim-deltas", c.sim_deltas, "deviation sizes for size-power, comma separated");
  f("sim-rhos", c.sim_rhos, "correlations for size-power, comma separated");
  f("sim-export-dataset", c.sim_export_dataset, "write one generated dataset as CSV and stop");
}

inline void bind_options(CLI::App& app, RunConfig& c) {
  app.option_defaults()->always_capture_default();
  for_each_field(c, [&](const std::string& name, auto& field, const std::string& help) {
    using T = std::decay_t<decltype(field)>;
    if (name == "command") {
      app.add_option(name, field, help)->check(CLI::IsMember({"fit", "bands", "test", "simulate"}));
    } else if constexpr (std::is_same_v<T, bool>) {
      app.add_flag("--" + name + ",!--no-" + name, field, help);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      app.add_option("--" + name, field, help)->delimiter(',');
    } else {
      app.add_option("--" + name, field, help);
    }
  });
}

// Config file text (key = value) holding every field of `c`. Empty strings
// and lists are left out and fall back to their defaults.
inline std::string to_config_text(const RunConfig& c) {
  std::ostringstream os;
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  };
  for_each_field(c, [&](const std::string& name, const auto& field, const std::string&) {
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, std::string>) {
      if (!field.empty()) os << name << " = \"" << field << "\"\n";
    } else if constexpr (std::is_same_v<T, bool>) {
      os << name << " = " << (field ? "true" : "false") << '\n';
    } else if constexpr (std::is_same_v<T, double>) {
      os << name << " = " << num(field) << '\n';
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (field.empty()) return;
      os << name << " = [";
      for (std::size_t k = 0; k < field.size(); ++k) os << (k ? "," : "") << num(field[k]);
      os << "]\n";
    } else {
      os << name << " = " << field << '\n';
    }
  });
  return os.str();
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  CLI::App app;
  bind_options(app, c);
  std::istringstream in(text);
  app.parse_from_stream(in);
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  for_each_field(c, [&](const std::string& name, const auto& field, const std::string&) { j[name] = field; });
  return j;
}

namespace detail {

inline std::vector<Lambda> lambda_grid_for(const RunConfig& c, const MeanStructure& ms) {
  if (c.lambda_points < 1) fail(ErrorKind::Config, "invalid-parameter", "lambda-points must be >= 1");
  if (!(c.lambda_min > 0.0 && c.lambda_max >= c.lambda_min)) {
    fail(ErrorKind::Config, "invalid-parameter", "lambda range must satisfy 0 < lambda-min <= lambda-max");
  }
  return default_lambda_grid(ms, c.lambda_points, c.lambda_min, c.lambda_max);
}

inline DgpConfig dgp_from(const RunConfig& c) {
  DgpConfig d;
  d.n = c.sim_n;
  d.m_min = c.sim_m_min;
  d.m_max = c.sim_m_max;
  d.L = c.sim_L;
  if (c.sim_eigenvalues.size() != 3) fail(ErrorKind::Config, "invalid-parameter", "sim-eigenvalues needs 3 values");
  for (std::size_t k = 0; k < 3; ++k) d.eigenvalues[k] = c.sim_eigenvalues[k];
  d.rho = c.sim_rho;
  d.sigma2 = c.sim_sigma2;
  d.mean = parse_true_mean(c.sim_mean);
  d.beta0 = c.sim_beta0;
  d.beta_t = c.sim_beta_t;
  d.beta_x = c.sim_beta_x;
  d.beta_tx = c.sim_beta_tx;
  d.cos_amplitude = c.sim_cos_amplitude;
  d.delta = c.sim_delta;
  d.with_z = c.sim_with_z;
  d.tau = c.sim_tau;
  d.visit_varying_x = c.sim_visit_varying_x;
  d.blsa_mimic = c.sim_blsa_mimic;
  d.scores = parse_score_law(c.sim_scores);
  d.seed = c.sim_seed;
  d.validate();
  return d;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Writer {
 public:
  explicit Writer(const RunConfig& c) : dir_(c.output_dir), header_(to_json(c)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::Config, "io", "cannot create output directory '" + dir_.string() + "'");
  }

  void json(const std::string& name, nlohmann::json body, const RunConfig& c, std::uint64_t seed) const {
    nlohmann::json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = c.command;
    doc["seed"] = seed;
    doc["config"] = header_;
    doc["result"] = std::move(body);
    write(name, doc.dump(2) + "\n");
  }

  void csv(const std::string& name, const std::string& body, std::uint64_t seed) const {
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << " seed=" << seed << '\n' << body;
    write(name, os.str());
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) fail(ErrorKind::Config, "io", "cannot write '" + (dir_ / name).string() + "'");
    out << text;
  }

 private:
  std::filesystem::path dir_;
  nlohmann::json header_;
};

inline std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline nlohmann::json fit_json(const FitResult& f) {
  return {{"structure", to_string(f.structure.kind())},
          {"dim", f.structure.dim()},
          {"lambda", {{"t", f.lambda.t}, {"x", f.lambda.x}}},
          {"edf", f.edf},
          {"sse", f.sse},
          {"gcv", f.gcv},
          {"n_obs", f.n_obs},
          {"beta", to_vector(f.beta)},
          {"tau", to_vector(f.tau)}};
}

// Evaluation surface over the fitted t range and the observed x range.
inline EvalGrid report_grid(const FunctionalDataset& ds, const MeanStructure& ms, std::size_t g_t, std::size_t g_x) {
  if (g_t < 1 || g_x < 1) fail(ErrorKind::Config, "invalid-parameter", "evaluation grid needs at least one point per axis");
  double x_lo = ds.x_min();
  double x_hi = ds.x_max();
  if (ms.x_basis()) {
    x_lo = ms.x_basis()->lo();
    x_hi = ms.x_basis()->hi();
  }
  return EvalGrid::surface(ms, ds.grid.front(), ds.grid.back(), g_t, x_lo, x_hi, g_x);
}

inline std::string surface_csv(const EvalGrid& grid, const Eigen::VectorXd& values) {
  std::ostringstream os;
  os << "t,x,mu\n";
  const std::size_t gx = grid.x_points.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    os << fmt(grid.t_points[k / gx]) << ',' << fmt(grid.x_points[k % gx]) << ','
       << fmt(values[static_cast<Eigen::Index>(k)]) << '\n';
  }
  return os.str();
}

inline std::string band_csv(const EvalGrid& grid, const BandResult& b) {
  std::ostringstream os;
  os << "t,x,lower,center,upper,s\n";
  const std::size_t gx = grid.x_points.size();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    os << fmt(grid.t_points[k / gx]) << ',' << fmt(grid.x_points[k % gx]) << ',' << fmt(b.lower[i]) << ','
       << fmt(b.center[i]) << ',' << fmt(b.upper[i]) << ',' << fmt(b.s[i]) << '\n';
  }
  return os.str();
}

inline nlohmann::json band_json(const BandResult& b) {
  nlohmann::json j = {{"kind", to_string(b.kind)},
                      {"alpha", b.alpha},
                      {"average_length", b.average_length()},
                      {"excludes_zero", band_excludes_zero(b)}};
  if (b.kind == BandKind::Joint) {
    j["q_hat"] = b.q_hat;
    j["excluded_points"] = b.excluded_points;
  }
  return j;
}

inline std::string histogram_csv(const std::vector<double>& draws, double t_obs, std::size_t bins = 30) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,count\n";
  if (draws.empty()) return os.str();
  double lo = std::min(*std::min_element(draws.begin(), draws.end()), t_obs);
  double hi = std::max(*std::max_element(draws.begin(), draws.end()), t_obs);
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<std::size_t> count(bins, 0);
  for (double d : draws) {
    auto k = static_cast<std::size_t>((d - lo) / (hi - lo) * static_cast<double>(bins));
    count[std::min(k, bins - 1)]++;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double a = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    const double b = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(bins);
    os << fmt(a) << ',' << fmt(b) << ',' << count[k] << '\n';
  }
  return os.str();
}

inline FunctionalDataset load_input(const RunConfig& c) {
  if (c.input.empty()) fail(ErrorKind::Config, "invalid-parameter", "command '" + c.command + "' needs --input");
  IngestOptions io;
  io.log1p = c.log1p;
  return ingest_csv(c.input, io);
}

inline void run_fit_like(const RunConfig& c, const Writer& w, bool with_bands) {
  const FunctionalDataset ds = load_input(c);
  const MeanStructure ms = make_structure(parse_mean_kind(c.mean), ds, c.d_t, c.d_x, c.degree);
  const auto grid = lambda_grid_for(c, ms);
  const FitPlan plan(ds, ms, grid);
  const FitResult res = plan.fit(ds);
  const EvalGrid eval = report_grid(ds, ms, c.band_g_t, c.band_g_x);
  const std::uint64_t seed = with_bands ? c.bootstrap_seed : 0;

  std::ostringstream coef;
  coef << "index,block,value\n";
  for (Eigen::Index k = 0; k < res.beta.size(); ++k) coef << k << ",beta," << fmt(res.beta[k]) << '\n';
  for (Eigen::Index k = 0; k < res.tau.size(); ++k) coef << k << ",tau," << fmt(res.tau[k]) << '\n';
  w.csv("coefficients.csv", coef.str(), seed);
  w.csv("surface.csv", surface_csv(eval, eval.values(res.beta)), seed);
  if (!with_bands) {
    w.json("fit.json", fit_json(res), c, seed);
    return;
  }

  const std::string method = c.band_method;
  if (method != "normal" && method != "quantile" && method != "joint" && method != "all") {
    fail(ErrorKind::Config, "invalid-parameter", "band-method must be normal|quantile|joint|all");
  }
  if (c.band_center != "mean" && c.band_center != "fit") {
    fail(ErrorKind::Config, "invalid-parameter", "band-center must be mean|fit");
  }
  if ((method == "quantile" || method == "all") && static_cast<double>(c.bootstrap_B) * c.band_alpha / 2.0 < 1.0) {
    fail(ErrorKind::Config, "insufficient-replicates",
         "quantile band at alpha=" + fmt(c.band_alpha) + " needs B * alpha / 2 >= 1, but B=" +
             std::to_string(c.bootstrap_B));
  }
  BootstrapOptions bo;
  bo.B = c.bootstrap_B;
  bo.seed = c.bootstrap_seed;
  bo.threads = c.threads;
  const BootstrapEnsemble ens = bootstrap(parse_bootstrap_kind(c.bootstrap_kind), ds, ms, grid, bo);

  nlohmann::json bands = nlohmann::json::object();
  if (method == "normal" || method == "all") {
    const BandResult b = pointwise_band(res, ens, eval, c.band_alpha, PointwiseMethod::Normal);
    w.csv("band_pointwise_normal.csv", band_csv(eval, b), seed);
    bands["pointwise_normal"] = band_json(b);
  }
  if (method == "quantile" || method == "all") {
    const BandResult b = pointwise_band(res, ens, eval, c.band_alpha, PointwiseMethod::Quantile);
    w.csv("band_pointwise_quantile.csv", band_csv(eval, b), seed);
    bands["pointwise_quantile"] = band_json(b);
  }
  if (method == "joint" || method == "all") {
    JointBandOptions jo;
    jo.R = c.band_R;
    jo.seed = c.bootstrap_seed;
    jo.legacy_sqrt_s = c.band_legacy_sqrt_s;
    jo.center = c.band_center == "fit" ? BandCenter::Fit : BandCenter::BootstrapMean;
    jo.fit = &res;
    const BandResult b = joint_band(ens, eval, c.band_alpha, jo);
    w.csv("band_joint.csv", band_csv(eval, b), seed);
    bands["joint"] = band_json(b);
  }
  nlohmann::json body = {{"fit", fit_json(res)},
                         {"bootstrap",
                          {{"kind", c.bootstrap_kind},
                           {"B", ens.B},
                           {"failures", ens.failures},
                           {"v_tau", to_vector(Eigen::VectorXd(ens.v_tau().diagonal()))}}},
                         {"grid", {eval.t_points.size(), eval.x_points.size()}},
                         {"bands", bands}};
  w.json("bands.json", body, c, seed);
}

inline void run_test(const RunConfig& c, const Writer& w) {
  const FunctionalDataset ds = load_input(c);
  const MeanStructure alt = make_structure(parse_mean_kind(c.mean), ds, c.d_t, c.d_x, c.degree);
  if (!alt.uses_x()) fail(ErrorKind::Config, "invalid-structure", "the alternative model must depend on x");
  TestOptions to;
  to.B = c.test_B;
  to.seed = c.test_seed;
  to.threads = c.threads;
  to.null_d_t = c.test_null_d_t;
  to.alt_grid = lambda_grid_for(c, alt);
  to.null_grid = lambda_grid_for(c, null_structure(ds, c.test_null_d_t));
  to.resampling = parse_null_resampling(c.test_resampling);
  to.g_t = c.test_g_t;
  to.g_x = c.test_g_x;
  to.rule = parse_quadrature(c.test_quadrature);
  const TestOutcome out = bootstrap_null_test(ds, alt, to);

  std::ostringstream draws;
  draws << "b,T\n";
  for (std::size_t b = 0; b < out.null_draws.size(); ++b) draws << b << ',' << fmt(out.null_draws[b]) << '\n';
  w.csv("null_draws.csv", draws.str(), c.test_seed);
  w.csv("null_histogram.csv", histogram_csv(out.null_draws, out.t_obs), c.test_seed);
  w.json("test.json",
         {{"t_obs", out.t_obs},
          {"p_value", out.p_value},
          {"B", out.B},
          {"integration_grid", {out.integration_grid.first, out.integration_grid.second}},
          {"quadrature", to_string(to.rule)},
          {"resampling", to_string(to.resampling)},
          {"failures", out.failures},
          {"alternative", fit_json(out.alt)},
          {"null", fit_json(out.null)},
          {"null_draws", out.null_draws}},
         c, c.test_seed);
}

inline void run_simulate(const RunConfig& c, const Writer& w) {
  const DgpConfig dgp = dgp_from(c);
  McReport report;
  if (c.sim_experiment == "coverage") {
    CoverageOptions co;
    co.nsim = c.sim_nsim;
    co.B = c.bootstrap_B;
    co.alpha = c.band_alpha;
    co.bootstrap_kind = parse_bootstrap_kind(c.bootstrap_kind);
    co.R = c.band_R;
    co.g_t = c.band_g_t;
    co.g_x = c.band_g_x;
    co.legacy_sqrt_s = c.band_legacy_sqrt_s;
    co.center = c.band_center == "fit" ? BandCenter::Fit : BandCenter::BootstrapMean;
    co.d_t = c.d_t;
    co.d_x = c.d_x;
    co.threads = c.threads;
    report.coverage.push_back(run_coverage_experiment(dgp, co));
    w.csv("coverage.csv", coverage_csv(report), c.sim_seed);
  } else if (c.sim_experiment == "size-power") {
    SizePowerOptions so;
    so.nsim = c.sim_nsim;
    so.alphas = c.sim_alphas;
    so.test.B = c.test_B;
    so.test.null_d_t = c.test_null_d_t;
    so.test.resampling = parse_null_resampling(c.test_resampling);
    so.test.g_t = c.test_g_t;
    so.test.g_x = c.test_g_x;
    so.test.rule = parse_quadrature(c.test_quadrature);
    so.d_t = c.d_t;
    so.d_x = c.d_x;
    so.threads = c.threads;
    std::vector<DgpConfig> family;
    const std::vector<double> deltas = c.sim_deltas.empty() ? std::vector<double>{c.sim_delta} : c.sim_deltas;
    const std::vector<double> rhos = c.sim_rhos.empty() ? std::vector<double>{c.sim_rho} : c.sim_rhos;
    for (double r : rhos) {
      for (double d : deltas) {
        DgpConfig g = dgp;
        g.mean = TrueMean::CosCubic;
        g.rho = r;
        g.delta = d;
        g.validate();
        family.push_back(g);
      }
    }
    report.size_power = run_size_power_experiment(family, so);
    w.csv("size_power.csv", size_power_csv(report), c.sim_seed);
  } else {
    fail(ErrorKind::Config, "invalid-parameter", "sim-experiment must be coverage|size-power");
  }
  w.json("report.json", to_json(report), c, c.sim_seed);
}

}  // namespace detail

inline void run(const RunConfig& c) {
  if (c.command == "simulate" && !c.sim_export_dataset.empty()) {
    write_csv(c.sim_export_dataset, generate_dataset(detail::dgp_from(c)));
    return;
  }
  const detail::Writer w(c);
  if (c.command == "fit") {
    detail::run_fit_like(c, w, false);
  } else if (c.command == "bands") {
    detail::run_fit_like(c, w, true);
  } else if (c.command == "test") {
    detail::run_test(c, w);
  } else if (c.command == "simulate") {
    detail::run_simulate(c, w);
  } else {
    fail(ErrorKind::Config, "invalid-parameter", "unknown command '" + c.command + "'");
  }
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Numerical: return 4;
  }
  return 1;
}

inline std::string error_json(ErrorKind kind, const std::string& code, const std::string& message) {
  return nlohmann::json{{"error", {{"kind", to_string(kind)}, {"code", code}, {"message", message}}},
                        {"exit_code", exit_code(kind)}}
      .dump();
}

// Parses argv, runs the command and maps failures to exit codes with a JSON
// error document on `err`.
inline int main_entry(int argc, char** argv, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app("Fixed-effects inference for correlated functional data", "fdfx");
  bind_options(app, cfg);
  app.set_config("--config", "", "config file (key = value); command-line flags override it");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    err << error_json(ErrorKind::Config, "invalid-arguments", e.what()) << '\n';
    return 2;
  }
  try {
    if (cfg.command.empty()) fail(ErrorKind::Config, "invalid-arguments", "a command is required");
    run(cfg);
  } catch (const Error& e) {
    err << error_json(e.kind(), e.code(), e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << error_json(ErrorKind::Numerical, "internal", e.what()) << '\n';
    return 4;
  }
  return 0;
}

}  // namespace fdfx
