// One PASS/FAIL line per acceptance criterion. Usage: fdfx_acceptance [N|5-n300|all]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "fdfx/cli.hpp"
#include "fdfx/fdfx.hpp"
#include "../unit/helpers.hpp"

using namespace fdfx;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [out of tolerance]");
  }
};

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol + 1e-12; }

unsigned threads() { return default_threads(); }

void progress_line(const char* what, std::size_t total) {
  std::fprintf(stderr, "  running %s (%zu replicates, %u threads)\n", what, total, threads());
}

// ---------------------------------------------------------------------------
// 1. Solver against an explicit inverse built from independent pieces.

Eigen::MatrixXd second_difference(int d) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(d - 2, d);
  for (int k = 0; k < d - 2; ++k) D.row(k).segment(k, 3) << 1.0, -2.0, 1.0;
  return D.transpose() * D;
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  }
  return out;
}

Verdict criterion_1() {
  Verdict v;
  Rng rng(1001);
  const MeanKind kinds[] = {MeanKind::Linear, MeanKind::LinearInteraction, MeanKind::PartialLinear,
                            MeanKind::BivariateSmooth, MeanKind::TimeSmooth};
  double worst_direct = 0.0, worst_plan = 0.0, worst_edf = 0.0;
  int instances = 0;
  for (int rep = 0; rep < 8; ++rep) {
    for (MeanKind kind : kinds) {
      const std::size_t n = 2 + rng.index(4);
      const std::size_t L = 4 + rng.index(4);
      const std::size_t p = rng.index(2);
      const int dt = 4 + static_cast<int>(rng.index(3));
      const int dx = 4 + static_cast<int>(rng.index(3));
      const auto ds = fixtures::random_dataset(rng, n, 1 + rng.index(3), L, p, rng.index(2) == 0);
      const auto ms = fixtures::structure_for(kind, dt, dx);
      const double lt = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
      const double lx = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
      const bool pen = ms.penalized();
      const Lambda lam{pen ? lt : 0.0, kind == MeanKind::BivariateSmooth ? lx : 0.0};

      // Design from the recursive basis oracle.
      const int dim = ms.dim();
      const auto rows = static_cast<Eigen::Index>(ds.total_observations());
      Eigen::MatrixXd M(rows, dim + static_cast<int>(p));
      Eigen::VectorXd Y(rows);
      const auto bt = UnivariateBasis::clamped_uniform(0, 1, dt);
      const auto bx = UnivariateBasis::clamped_uniform(0, 1, dx);
      Eigen::Index r = 0;
      for (std::size_t row = 0; row < ds.rows(); ++row) {
        const double x = ds.x[row];
        for (std::size_t l = 0; l < L; ++l, ++r) {
          const double t = ds.grid[l];
          Eigen::VectorXd b(dim);
          switch (kind) {
            case MeanKind::Linear: b << 1.0, t, x; break;
            case MeanKind::LinearInteraction: b << 1.0, t, x, t * x; break;
            case MeanKind::PartialLinear: b << fixtures::oracle_basis(bt, t), x; break;
            case MeanKind::TimeSmooth: b = fixtures::oracle_basis(bt, t); break;
            case MeanKind::BivariateSmooth: {
              const Eigen::VectorXd a = fixtures::oracle_basis(bt, t);
              const Eigen::VectorXd c = fixtures::oracle_basis(bx, x);
              for (int i = 0; i < dt; ++i) b.segment(i * dx, dx) = a[i] * c;
              break;
            }
          }
          M.row(r).head(dim) = b.transpose();
          for (std::size_t k = 0; k < p; ++k) M(r, dim + static_cast<int>(k)) = ds.z(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k));
          Y[r] = ds.y(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(l));
        }
      }
      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(M.cols(), M.cols());
      if (kind == MeanKind::PartialLinear || kind == MeanKind::TimeSmooth) {
        P.topLeftCorner(dt, dt) = lam.t * second_difference(dt);
      } else if (kind == MeanKind::BivariateSmooth) {
        P.topLeftCorner(dim, dim) = lam.t * kron(second_difference(dt), Eigen::MatrixXd::Identity(dx, dx)) +
                                    lam.x * kron(Eigen::MatrixXd::Identity(dt, dt), second_difference(dx));
      }
      const Eigen::MatrixXd A = M.transpose() * M + P;
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
      if (!lu.isInvertible()) continue;  // an unpenalized draw can be rank deficient
      const Eigen::MatrixXd inv = lu.inverse();
      const Eigen::VectorXd oracle = inv * M.transpose() * Y;
      const double edf_oracle = (M * inv * M.transpose()).trace();

      const auto design = assemble_design(ds, ms);
      const auto pen_lib = pad_penalty(tensor_penalty(ms, lam.t, lam.x), p);
      SolveResult s;
      FitResult f;
      try {
        s = solve_penalized(design.M, design.Y, pen_lib);
        f = FitPlan(ds, ms, {lam}).fit(ds);
      } catch (const Error& e) {
        v.check(false, std::string("instance threw: ") + e.what());
        continue;
      }
      ++instances;
      worst_direct = std::max(worst_direct, (s.coef - oracle).norm() / oracle.norm());
      worst_plan = std::max(worst_plan, (f.coefficients() - oracle).norm() / oracle.norm());
      worst_edf = std::max(worst_edf, std::abs(s.edf - edf_oracle) / edf_oracle);
    }
  }
  v.check(instances >= 20, std::to_string(instances) + " instances");
  v.check(worst_direct <= 1e-8, "max rel error dense " + sci(worst_direct));
  v.check(worst_plan <= 1e-8, "max rel error structured " + sci(worst_plan));
  v.check(worst_edf <= 1e-8, "max rel error edf " + sci(worst_edf));
  return v;
}

// ---------------------------------------------------------------------------
// 2. Basis and penalty properties for d = 3..12.

Verdict criterion_2() {
  Verdict v;
  double pou = 0.0, ends = 0.0, nulls = 0.0;
  bool ranks = true;
  for (int d = 3; d <= 12; ++d) {
    for (int deg = 1; deg <= std::min(3, d - 1); ++deg) {
      const auto b = UnivariateBasis::clamped_uniform(0.0, 1.0, d, deg);
      for (int k = 0; k <= 1000; ++k) {
        const Eigen::VectorXd e = b.eval(k / 1000.0);
        pou = std::max(pou, std::abs(e.sum() - 1.0));
        if ((e.array() < -1e-14).any()) pou = 1.0;
      }
      const Eigen::VectorXd lo = b.eval(0.0), hi = b.eval(1.0);
      Eigen::VectorXd unit_lo = Eigen::VectorXd::Zero(d), unit_hi = Eigen::VectorXd::Zero(d);
      unit_lo[0] = 1.0;
      unit_hi[d - 1] = 1.0;
      ends = std::max({ends, (lo - unit_lo).cwiseAbs().maxCoeff(), (hi - unit_hi).cwiseAbs().maxCoeff()});
    }
    const Eigen::MatrixXd P = second_difference_penalty(d);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(d);
    const Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(d, 0.0, d - 1.0);
    nulls = std::max({nulls, (P * one).cwiseAbs().maxCoeff(), (P * lin).cwiseAbs().maxCoeff()});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
    const double top = eig.eigenvalues().maxCoeff();
    int rank = 0;
    for (double ev : eig.eigenvalues()) rank += ev > 1e-10 * top;
    ranks = ranks && rank == d - 2 && eig.eigenvalues().minCoeff() > -1e-12 * top;
  }
  v.check(pou <= 1e-12, "partition of unity " + sci(pou));
  v.check(ends <= 1e-12, "clamped endpoints " + sci(ends));
  v.check(nulls <= 1e-12, "null-space annihilation " + sci(nulls));
  v.check(ranks, "rank d-2 and PSD");
  return v;
}

// ---------------------------------------------------------------------------
// 3-4. Coverage tables.

const TargetSummary& target(const CoverageReport& r, const std::string& name) {
  for (const auto& t : r.targets) {
    if (t.name == name) return t;
  }
  fail(ErrorKind::Config, "internal", "missing target " + name);
}

CoverageReport coverage(DgpConfig cfg, std::size_t nsim, std::size_t B) {
  CoverageOptions opt;
  opt.nsim = nsim;
  opt.B = B;
  opt.threads = threads();
  progress_line((std::string("coverage ") + to_string(cfg.mean) + " rho=" + num(cfg.rho, 1)).c_str(), nsim);
  return run_coverage_experiment(cfg, opt);
}

Verdict criterion_3() {
  Verdict v;
  for (double rho : {0.2, 0.9}) {
    DgpConfig cfg;
    cfg.mean = TrueMean::Linear;
    cfg.rho = rho;
    cfg.seed = 3001;
    const auto rep = coverage(cfg, 200, 300);
    const auto& bx = target(rep, "beta_x");
    const std::string tag = "rho=" + num(rho, 1) + " beta_x ";
    v.check(within(bx.acp_point, 0.95, 0.03), tag + "ACP " + num(bx.acp_point, 3) + " (0.95+-0.03)");
    v.check(within(bx.al_point, 0.14, 0.02), tag + "AL " + num(bx.al_point, 4) + " (0.14+-0.02)");
  }
  return v;
}

Verdict criterion_4() {
  Verdict v;
  DgpConfig c;
  c.mean = TrueMean::CosLinear;
  c.rho = 0.2;
  c.seed = 4001;
  const auto rc = coverage(c, 200, 300);
  const auto& f = target(rc, "f(t)");
  v.check(within(*f.acp_joint, 0.92, 0.04), "(c) f(t) ACP_joint " + num(*f.acp_joint, 3) + " (0.92+-0.04)");
  v.check(within(*f.al_joint, 0.95, 0.10), "(c) f(t) AL_joint " + num(*f.al_joint, 3) + " (0.95+-0.10)");
  DgpConfig d;
  d.mean = TrueMean::CosCubic;
  d.delta = 4.0;
  d.rho = 0.2;
  d.seed = 4002;
  const auto rd = coverage(d, 200, 300);
  const auto& mu = target(rd, "mu(t,x)");
  v.check(within(*mu.acp_joint, 0.93, 0.04), "(d) mu ACP_joint " + num(*mu.acp_joint, 3) + " (0.93+-0.04)");
  v.check(within(*mu.al_joint, 3.23, 0.30), "(d) mu AL_joint " + num(*mu.al_joint, 3) + " (3.23+-0.30)");
  v.detail += "; context: (c) ACP_point " + num(f.acp_point, 3) + " AL_point " + num(f.al_point, 3) +
              ", (d) ACP_point " + num(mu.acp_point, 3) + " AL_point " + num(mu.al_point, 3);
  return v;
}

// ---------------------------------------------------------------------------
// 5, 6, 8. Size, power and null p-values of the L2 test.

DgpConfig test_dgp(std::size_t n, double rho, double delta, double amplitude, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.mean = TrueMean::CosCubic;
  cfg.cos_amplitude = amplitude;
  cfg.delta = delta;
  cfg.n = n;
  cfg.rho = rho;
  cfg.with_z = false;
  cfg.tau = 0.0;
  cfg.seed = seed;
  return cfg;
}

SizePowerRow size_power(const DgpConfig& cfg, std::size_t nsim, std::size_t B) {
  SizePowerOptions opt;
  opt.nsim = nsim;
  opt.test.B = B;
  opt.threads = threads();
  progress_line(("test n=" + std::to_string(cfg.n) + " rho=" + num(cfg.rho, 1) + " delta=" + num(cfg.delta, 2)).c_str(),
                nsim);
  return run_size_power_scenario(cfg, opt);
}

Verdict criterion_5() {
  Verdict v;
  const auto row = size_power(test_dgp(100, 0.2, 0.0, 1.0, 5001), 500, 300);
  v.check(within(row.rejection.at(0.05), 0.08, 0.03), "size@0.05 " + num(row.rejection.at(0.05), 3) + " (0.08+-0.03)");
  v.check(within(row.rejection.at(0.10), 0.14, 0.03), "size@0.10 " + num(row.rejection.at(0.10), 3) + " (0.14+-0.03)");
  v.detail += "; context: size@0.15 " + num(row.rejection.at(0.15), 3);
  return v;
}

Verdict criterion_5_n300() {
  Verdict v;
  const auto row = size_power(test_dgp(300, 0.2, 0.0, 1.0, 5002), 500, 300);
  v.check(within(row.rejection.at(0.05), 0.06, 0.02), "n=300 size@0.05 " + num(row.rejection.at(0.05), 3) + " (0.06+-0.02)");
  return v;
}

Verdict criterion_6() {
  Verdict v;
  std::map<double, double> power;
  for (double delta : {0.01, 2.0, 4.0, 6.0}) {
    power[delta] = size_power(test_dgp(100, 0.2, delta, 2.0, 6001), 200, 300).rejection.at(0.05);
  }
  const double strong = size_power(test_dgp(100, 0.9, 2.0, 2.0, 6001), 200, 300).rejection.at(0.05);
  v.check(power[0.01] < power[2.0] && power[2.0] < power[4.0],
          "power(0.01, 2, 4) = " + num(power[0.01], 3) + ", " + num(power[2.0], 3) + ", " + num(power[4.0], 3) +
              " strictly increasing");
  v.check(power[4.0] >= 0.8 * power[6.0], "power(4) " + num(power[4.0], 3) + " >= 0.8 power(6) " + num(0.8 * power[6.0], 3));
  v.check(power[2.0] >= strong, "delta=2 power rho=0.2 " + num(power[2.0], 3) + " >= rho=0.9 " + num(strong, 3));
  return v;
}

Verdict criterion_8() {
  Verdict v;
  const auto row = size_power(test_dgp(100, 0.2, 0.0, 1.0, 8001), 200, 300);
  const double ks = ks_distance_uniform(row.p_values);
  v.check(ks < 0.10, "KS distance " + num(ks, 4) + " (< 0.10)");
  return v;
}

// ---------------------------------------------------------------------------
// 7. Algorithm contracts.

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict criterion_7() {
  Verdict v;
  DgpConfig cfg;
  cfg.mean = TrueMean::CosCubic;
  cfg.n = 40;
  cfg.seed = 7001;
  const auto ds = generate_dataset(cfg);
  const auto ms = correct_structure(cfg, ds, 6, 6);
  const auto grid = default_lambda_grid(ms);
  const auto base = fit(ds, ms, grid);

  BootstrapOptions id;
  id.B = 2;
  id.sampler = [](std::size_t, Rng&, std::vector<std::size_t>& out) { std::iota(out.begin(), out.end(), std::size_t{0}); };
  const auto data_ens = bootstrap_data(ds, ms, grid, id);
  bool exact = true;
  for (Eigen::Index b = 0; b < 2; ++b) exact = exact && data_ens.betas.row(b).transpose() == base.beta;
  v.check(exact, "identity data bootstrap reproduces the fit bit for bit");
  const auto res_ens = bootstrap_residuals(ds, ms, grid, id);
  const double dev = (res_ens.betas.row(0).transpose() - base.beta).cwiseAbs().maxCoeff();
  v.check(dev <= 1e-10 * base.beta.cwiseAbs().maxCoeff(), "identity residual bootstrap max deviation " + sci(dev));

  DgpConfig quiet = cfg;
  quiet.mean = TrueMean::Linear;
  quiet.eigenvalues = {0.0, 0.0, 0.0};
  quiet.sigma2 = 0.0;
  const auto qds = generate_dataset(quiet);
  BootstrapOptions zb;
  zb.B = 50;
  const auto zens = bootstrap_residuals(qds, MeanStructure::linear(), {Lambda{}}, zb);
  const double vmax = zens.v_beta.cwiseAbs().maxCoeff();
  v.check(vmax <= 1e-20, "zero-residual V_beta max " + sci(vmax));

  TestOptions to;
  to.B = 37;
  to.seed = 7002;
  const auto out = bootstrap_null_test(ds, ms, to);
  const double scaled = out.p_value * 37.0;
  std::size_t above = 0;
  for (double d : out.null_draws) above += d >= out.t_obs;
  v.check(std::abs(scaled - std::round(scaled)) < 1e-9 && out.p_value == above / 37.0,
          "p-value " + num(out.p_value, 4) + " on the 1/B lattice and recomputable");

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fdfx-acceptance-7";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_csv((dir / "data.csv").string(), ds);
  bool identical = true;
  for (const char* command : {"bands", "test"}) {
    std::vector<std::string> first;
    for (unsigned th : {1u, 2u, 1u}) {
      RunConfig rc;
      rc.command = command;
      rc.input = (dir / "data.csv").string();
      rc.d_t = rc.d_x = 6;
      rc.bootstrap_B = 60;
      rc.test_B = 20;
      rc.band_g_t = rc.band_g_x = 21;
      rc.threads = th;
      rc.output_dir = (dir / (std::string(command) + std::to_string(th))).string();
      run(rc);
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(rc.output_dir)) {
        if (e.path().extension() == ".csv") files.push_back(e.path().filename().string());
      }
      std::sort(files.begin(), files.end());
      std::vector<std::string> contents;
      for (const auto& f : files) contents.push_back(f + "\n" + slurp(fs::path(rc.output_dir) / f));
      if (first.empty()) {
        first = contents;
      } else {
        identical = identical && contents == first;
      }
    }
  }
  fs::remove_all(dir);
  v.check(identical, "seeded CLI outputs byte-identical across runs and thread counts");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<Verdict()>> criteria{
      {"1", criterion_1}, {"2", criterion_2}, {"3", criterion_3}, {"4", criterion_4},      {"5", criterion_5},
      {"5-n300", criterion_5_n300}, {"6", criterion_6}, {"7", criterion_7}, {"8", criterion_8}};
  std::vector<std::string> which;
  if (argc < 2 || std::string(argv[1]) == "all") {
    which = {"1", "2", "3", "4", "5", "6", "7", "8"};
  } else {
    for (int k = 1; k < argc; ++k) which.emplace_back(argv[k]);
  }
  bool all = true;
  for (const auto& id : which) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %s: %s  %s  [%.1f s]\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
