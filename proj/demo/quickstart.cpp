// Simulate a small study, fit a bivariate mean, band it and test for
// dependence on x.

#include <cstdio>

#include "fdfx/fdfx.hpp"

int main() {
  using namespace fdfx;

  DgpConfig cfg;
  cfg.n = 60;
  cfg.mean = TrueMean::CosLinear;
  cfg.delta = 4.0;
  cfg.seed = 7;
  const FunctionalDataset ds = generate_dataset(cfg);
  std::printf("%zu subjects, %zu visits, %zu grid points\n", ds.n(), ds.rows(), ds.L());

  const MeanStructure ms = make_structure(MeanKind::BivariateSmooth, ds, 6, 6);
  const auto grid = default_lambda_grid(ms);
  const FitResult res = fit(ds, ms, grid);
  std::printf("lambda = (%g, %g), edf = %.2f, tau = %.3f\n", res.lambda.t, res.lambda.x, res.edf, res.tau[0]);

  BootstrapOptions bopt;
  bopt.B = 100;
  bopt.seed = 11;
  const BootstrapEnsemble ens = bootstrap_residuals(ds, ms, grid, bopt);
  const EvalGrid eval = EvalGrid::surface(ms, 21, 21);
  JointBandOptions jopt;
  jopt.seed = 11;
  const BandResult band = joint_band(ens, eval, 0.05, jopt);
  std::printf("joint band: q = %.3f, average length = %.3f\n", band.q_hat, band.average_length());

  TestOptions topt;
  topt.B = 100;
  topt.seed = 13;
  topt.g_t = topt.g_x = 51;
  const TestOutcome out = bootstrap_null_test(ds, ms, topt);
  std::printf("T = %.4f, p = %.3f, reject at 0.05: %s\n", out.t_obs, out.p_value, out.rejects(0.05) ? "yes" : "no");
}
