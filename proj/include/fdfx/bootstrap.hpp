#pragma once

// Subject-level bootstrap: resampling whole subjects (data or residual
// blocks) with replacement, refitting each replicate with its own GCV
// selection, and summarizing the replicate coefficients.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fdfx/dataset.hpp"
#include "fdfx/error.hpp"
#include "fdfx/fit.hpp"
#include "fdfx/parallel.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/stats.hpp"

namespace fdfx {

enum class BootstrapKind { Data, Residual };

inline const char* to_string(BootstrapKind k) { return k == BootstrapKind::Data ? "data" : "residual"; }

inline BootstrapKind parse_bootstrap_kind(const std::string& s) {
  if (s == "data") return BootstrapKind::Data;
  if (s == "residual") return BootstrapKind::Residual;
  fail(ErrorKind::Config, "invalid-parameter", "unknown bootstrap kind '" + s + "' (expected data|residual)");
}

// Fills `out` (size n) with the subject indices of replicate b.
using IndexSampler = std::function<void(std::size_t b, Rng& rng, std::vector<std::size_t>& out)>;

inline void sample_with_replacement(std::size_t, Rng& rng, std::vector<std::size_t>& out) {
  for (auto& i : out) i = static_cast<std::size_t>(rng.index(out.size()));
}

struct BootstrapOptions {
  std::size_t B = 300;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  IndexSampler sampler;              // empty: uniform with replacement
  double max_failure_rate = 0.05;
};

struct BootstrapEnsemble {
  std::size_t B = 0;
  Eigen::MatrixXd betas;  // B x dim(beta)
  Eigen::MatrixXd taus;   // B x p
  std::vector<Lambda> lambdas;
  Eigen::MatrixXd v_beta;
  std::optional<Eigen::MatrixXd> surface_draws;  // B x G, filled on demand
  std::uint64_t seed = 0;
  std::size_t failures = 0;

  Eigen::VectorXd mean_beta() const { return betas.colwise().mean().transpose(); }
  Eigen::MatrixXd v_tau() const { return sample_covariance(taus); }
};

// e_ij(t_l) = Y_ij(t_l) - fitted, kept as one block per subject.
struct ResidualStore {
  RowMatrix e;                       // rows x L, same layout as the dataset
  std::vector<std::size_t> offsets;  // n + 1

  std::size_t n() const { return offsets.size() - 1; }
  std::size_t visits(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  auto block(std::size_t i) const {
    return e.middleRows(static_cast<Eigen::Index>(offsets[i]), static_cast<Eigen::Index>(visits(i)));
  }
};

inline ResidualStore residual_store(const FunctionalDataset& ds, const FitPlan& plan, const FitResult& res) {
  return ResidualStore{ds.y - plan.fitted(res.coefficients()), ds.offsets};
}

namespace detail {

template <class Result>
struct ReplicateRun {
  std::vector<Result> results;
  std::size_t failures = 0;
};

// Runs B replicates; replicate b draws its subject indices from substream b
// of the seed and is redrawn on a numerical failure. More than
// max_failure_rate * B failures abort the run.
template <class Result, class MakeResult>
ReplicateRun<Result> run_replicates(std::size_t n_subjects, std::size_t B, std::uint64_t seed, unsigned threads,
                                    const IndexSampler& custom_sampler, double max_failure_rate,
                                    MakeResult&& make_result) {
  if (B < 2) fail(ErrorKind::Config, "invalid-parameter", "bootstrap needs B >= 2");
  const IndexSampler sampler = custom_sampler ? custom_sampler : IndexSampler(sample_with_replacement);
  const Rng root(seed);
  const auto max_failures = static_cast<std::size_t>(max_failure_rate * static_cast<double>(B));

  ReplicateRun<Result> run;
  run.results.resize(B);
  std::vector<std::size_t> failures(B, 0);
  std::vector<std::string> last_error(B);
  parallel_for(B, threads, [&](std::size_t b) {
    Rng rng = root.substream(b);
    std::vector<std::size_t> idx(n_subjects);
    for (;;) {
      sampler(b, rng, idx);
      try {
        run.results[b] = make_result(idx);
        return;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numerical) throw;
        last_error[b] = e.what();
        if (++failures[b] > max_failures) {
          fail(ErrorKind::Numerical, "bootstrap-failures",
               "bootstrap replicate " + std::to_string(b) + " failed repeatedly: " + last_error[b]);
        }
      }
    }
  });
  for (auto f : failures) run.failures += f;
  if (run.failures > max_failures) {
    std::string last;
    for (const auto& s : last_error) {
      if (!s.empty()) last = s;
    }
    fail(ErrorKind::Numerical, "bootstrap-failures",
         std::to_string(run.failures) + " failed bootstrap draws for " + std::to_string(B) +
             " replicates exceed the allowed fraction; last error: " + last);
  }
  return run;
}

template <class MakeFit>
BootstrapEnsemble run_ensemble(std::size_t n_subjects, int dim, int p, const BootstrapOptions& opt,
                               MakeFit&& make_fit) {
  auto run = run_replicates<FitResult>(n_subjects, opt.B, opt.seed, opt.threads, opt.sampler,
                                       opt.max_failure_rate, std::forward<MakeFit>(make_fit));
  BootstrapEnsemble ens;
  ens.B = opt.B;
  ens.seed = opt.seed;
  ens.failures = run.failures;
  ens.betas.resize(static_cast<Eigen::Index>(opt.B), dim);
  ens.taus.resize(static_cast<Eigen::Index>(opt.B), p);
  for (std::size_t b = 0; b < opt.B; ++b) {
    ens.betas.row(static_cast<Eigen::Index>(b)) = run.results[b].beta.transpose();
    if (p > 0) ens.taus.row(static_cast<Eigen::Index>(b)) = run.results[b].tau.transpose();
    ens.lambdas.push_back(run.results[b].lambda);
  }
  ens.v_beta = sample_covariance(ens.betas);
  return ens;
}

}  // namespace detail

// Resamples subjects with all of their (Y, X, Z) visits and refits.
inline BootstrapEnsemble bootstrap_data(const FunctionalDataset& ds, const MeanStructure& ms,
                                        const std::vector<Lambda>& grid, const BootstrapOptions& opt) {
  ds.validate();
  return detail::run_ensemble(ds.n(), ms.dim(), static_cast<int>(ds.p()), opt,
                                [&](const std::vector<std::size_t>& idx) {
                                  const FunctionalDataset rep = ds.resample(idx);
                                  return FitPlan(rep, ms, grid).fit(rep);
                                });
}

// Keeps every subject's covariates and fitted mean, and attaches the residual
// block of the subject drawn in its place. Subject i of a replicate gets as
// many visits as the drawn subject has.
inline BootstrapEnsemble bootstrap_residuals(const FunctionalDataset& ds, const MeanStructure& ms,
                                             const std::vector<Lambda>& grid, const BootstrapOptions& opt) {
  ds.validate();
  if (!ds.covariates_visit_invariant()) {
    fail(ErrorKind::Data, "precondition",
         "residual bootstrap requires covariates that do not change across visits; use the subject-level "
         "data bootstrap instead");
  }
  const FitPlan plan(ds, ms, grid);
  const FitResult base = plan.fit(ds);
  const RowMatrix fitted = plan.fitted(base.coefficients());
  const ResidualStore store{ds.y - fitted, ds.offsets};
  const auto L = static_cast<Eigen::Index>(ds.L());
  const auto p = static_cast<Eigen::Index>(ds.p());

  return detail::run_ensemble(ds.n(), ms.dim(), static_cast<int>(p), opt, [&](const std::vector<std::size_t>& idx) {
    bool same_layout = true;
    std::size_t total = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      total += store.visits(idx[i]);
      same_layout = same_layout && store.visits(idx[i]) == ds.visits(i);
    }
    FunctionalDataset rep;
    rep.grid = ds.grid;
    rep.subject_ids = ds.subject_ids;
    rep.x.reserve(total);
    rep.y.resize(static_cast<Eigen::Index>(total), L);
    rep.z.resize(static_cast<Eigen::Index>(total), p);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto own = static_cast<Eigen::Index>(ds.offsets[i]);
      const auto m = static_cast<Eigen::Index>(store.visits(idx[i]));
      rep.y.middleRows(r, m) = store.block(idx[i]);
      rep.y.middleRows(r, m).rowwise() += fitted.row(own);
      if (p > 0) rep.z.middleRows(r, m).rowwise() = ds.z.row(own);
      rep.x.insert(rep.x.end(), static_cast<std::size_t>(m), ds.x[static_cast<std::size_t>(own)]);
      r += m;
      rep.offsets.push_back(static_cast<std::size_t>(r));
    }
    if (same_layout) return plan.fit(rep);
    return FitPlan(rep, ms, grid).fit(rep);
  });
}

inline BootstrapEnsemble bootstrap(BootstrapKind kind, const FunctionalDataset& ds, const MeanStructure& ms,
                                   const std::vector<Lambda>& grid, const BootstrapOptions& opt) {
  return kind == BootstrapKind::Data ? bootstrap_data(ds, ms, grid, opt) : bootstrap_residuals(ds, ms, grid, opt);
}

}  // namespace fdfx
