#include <gtest/gtest.h>

#include "fdfx/bands.hpp"
#include "helpers.hpp"

using namespace fdfx;
using fdfx::fixtures::random_dataset;

namespace {

// Ensemble whose replicate betas are mean + F * N(0, I).
BootstrapEnsemble synthetic_ensemble(const Eigen::VectorXd& mean, const Eigen::MatrixXd& F, std::size_t B,
                                     std::uint64_t seed) {
  Rng rng(seed);
  BootstrapEnsemble ens;
  ens.B = B;
  ens.betas.resize(static_cast<Eigen::Index>(B), mean.size());
  for (std::size_t b = 0; b < B; ++b) {
    Eigen::VectorXd u(F.cols());
    for (auto& v : u) v = rng.normal();
    ens.betas.row(static_cast<Eigen::Index>(b)) = (mean + F * u).transpose();
  }
  ens.taus.resize(static_cast<Eigen::Index>(B), 0);
  ens.v_beta = sample_covariance(ens.betas);
  return ens;
}

FitResult fit_with_beta(const MeanStructure& ms, const Eigen::VectorXd& beta) {
  FitResult f;
  f.structure = ms;
  f.beta = beta;
  return f;
}

MeanStructure small_bivariate() {
  return MeanStructure::bivariate(UnivariateBasis::clamped_uniform(0, 1, 4), UnivariateBasis::clamped_uniform(0, 1, 4));
}

double type7(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * p;
  const auto j = static_cast<std::size_t>(h);
  return j + 1 < v.size() ? v[j] + (h - j) * (v[j + 1] - v[j]) : v[j];
}

}  // namespace

TEST(Stats, QuantilesAndCovariance) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({10, 20}, 0.25), 12.5);
  Eigen::MatrixXd d(3, 2);
  d << 1, 2, 3, 4, 5, 9;
  const auto c = sample_covariance(d);
  EXPECT_DOUBLE_EQ(c(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 7.0);
  EXPECT_NEAR(ks_distance_uniform({0.5}), 0.5, 1e-15);
}

TEST(EvalGrid, SurfaceOrderingAndValues) {
  const auto ms = small_bivariate();
  const auto g = EvalGrid::surface(ms, 3, 5);
  ASSERT_EQ(g.size(), 15u);
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(16, 0.0, 1.0);
  const auto v = g.values(beta);
  EXPECT_NEAR(v[1 * 5 + 3], design_row(ms, 0.5, 0.75).dot(beta), 1e-14);
  EXPECT_THROW(EvalGrid::surface(MeanStructure::linear(), 3, 3), Error);
  const auto c = EvalGrid::coefficient(MeanStructure::linear(), 2);
  EXPECT_EQ(c.values(Eigen::Vector3d(1, 2, 3))[0], 3.0);
}

TEST(PointwiseBand, NormalWidthIsTwoZTimesSd) {
  const auto ms = small_bivariate();
  Eigen::MatrixXd F = Eigen::MatrixXd::Random(16, 16) * 0.1;
  const auto ens = synthetic_ensemble(Eigen::VectorXd::Ones(16), F, 200, 1);
  const auto grid = EvalGrid::surface(ms, 7, 7);
  const auto f = fit_with_beta(ms, Eigen::VectorXd::Ones(16));
  const auto band = pointwise_band(f, ens, grid, 0.05, PointwiseMethod::Normal);
  for (Eigen::Index k = 0; k < band.s.size(); ++k) {
    const double sd = std::sqrt(grid.design.row(k) * ens.v_beta * grid.design.row(k).transpose());
    EXPECT_NEAR(band.s[k], sd, 1e-12);
    EXPECT_NEAR(band.upper[k] - band.lower[k], 2.0 * 1.959964 * sd, 1e-6 * sd + 1e-15);
    EXPECT_NEAR(band.center[k], 1.0, 1e-12);
  }
}

TEST(PointwiseBand, QuantileMethodUsesType7PerPoint) {
  const auto ms = MeanStructure::linear_interaction();
  const auto ens = synthetic_ensemble(Eigen::Vector4d(1, 2, 3, 4), Eigen::Matrix4d::Identity(), 80, 2);
  const auto grid = EvalGrid::coefficient(ms, 2);
  const auto band = pointwise_band(fit_with_beta(ms, Eigen::Vector4d::Zero()), ens, grid, 0.1, PointwiseMethod::Quantile);
  std::vector<double> col(ens.betas.col(2).data(), ens.betas.col(2).data() + 80);
  EXPECT_DOUBLE_EQ(band.lower[0], type7(col, 0.05));
  EXPECT_DOUBLE_EQ(band.upper[0], type7(col, 0.95));
}

TEST(PointwiseBand, QuantileNeedsEnoughReplicates) {
  const auto ms = MeanStructure::linear();
  const auto ens = synthetic_ensemble(Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity(), 20, 3);
  try {
    pointwise_band(fit_with_beta(ms, Eigen::Vector3d::Zero()), ens, EvalGrid::coefficient(ms, 0), 0.05,
                   PointwiseMethod::Quantile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_EQ(e.code(), "insufficient-replicates");
  }
  EXPECT_NO_THROW(pointwise_band(fit_with_beta(ms, Eigen::Vector3d::Zero()), ens, EvalGrid::coefficient(ms, 0), 0.1,
                                 PointwiseMethod::Quantile));
}

TEST(JointBand, ZeroVarianceCollapsesToTheCenter) {
  const auto ms = small_bivariate();
  const auto ens = synthetic_ensemble(Eigen::VectorXd::Constant(16, 2.0), Eigen::MatrixXd::Zero(16, 1), 10, 4);
  const auto grid = EvalGrid::surface(ms, 5, 5);
  const auto joint = joint_band(ens, grid, 0.05);
  EXPECT_EQ(joint.excluded_points, 25u);
  EXPECT_EQ(joint.lower, joint.upper);
  EXPECT_NEAR(joint.center.maxCoeff(), 2.0, 1e-12);
  const auto pw = pointwise_band(fit_with_beta(ms, ens.mean_beta()), ens, grid, 0.05, PointwiseMethod::Normal);
  EXPECT_EQ(pw.lower, pw.upper);
}

TEST(JointBand, QuantileMonotoneInAlphaAndDeterministic) {
  const auto ms = small_bivariate();
  Rng rng(5);
  Eigen::MatrixXd F(16, 16);
  for (auto& v : F.reshaped()) v = rng.normal();
  const auto ens = synthetic_ensemble(Eigen::VectorXd::Zero(16), F, 100, 6);
  const auto grid = EvalGrid::surface(ms, 9, 9);
  JointBandOptions opt;
  opt.R = 2000;
  opt.seed = 3;
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {0.01, 0.05, 0.1, 0.2, 0.5}) {
    const auto band = joint_band(ens, grid, a, opt);
    EXPECT_LE(band.q_hat, prev);
    EXPECT_EQ(band.max_stats.size(), 2000u);
    prev = band.q_hat;
  }
  const auto a = joint_band(ens, grid, 0.05, opt);
  const auto b = joint_band(ens, grid, 0.05, opt);
  EXPECT_EQ(a.q_hat, b.q_hat);
  EXPECT_EQ(a.lower, b.lower);
  // A joint band is at least as wide as the normal pointwise band.
  EXPECT_GE(a.q_hat, normal_quantile(0.975));
}

TEST(JointBand, ContainsPointwiseBandWithCommonCenter) {
  const auto ms = small_bivariate();
  Rng rng(7);
  Eigen::MatrixXd F(16, 4);
  for (auto& v : F.reshaped()) v = rng.normal();
  const auto ens = synthetic_ensemble(Eigen::VectorXd::Zero(16), F, 150, 8);
  const auto grid = EvalGrid::surface(ms, 11, 11);
  const auto f = fit_with_beta(ms, Eigen::VectorXd::Constant(16, 0.3));
  JointBandOptions opt;
  opt.center = BandCenter::Fit;
  opt.fit = &f;
  const auto joint = joint_band(ens, grid, 0.05, opt);
  const auto pw = pointwise_band(f, ens, grid, 0.05, PointwiseMethod::Normal);
  ASSERT_GE(joint.q_hat, 1.959964);
  EXPECT_TRUE(((joint.lower.array() <= pw.lower.array() + 1e-12) && (joint.upper.array() >= pw.upper.array() - 1e-12)).all());
}

TEST(JointBand, SimultaneousCoverageOfGaussianSurfaces) {
  const auto ms = small_bivariate();
  Rng rng(9);
  Eigen::MatrixXd F(16, 16);
  for (auto& v : F.reshaped()) v = rng.normal();
  BootstrapEnsemble ens;
  ens.B = 1000;
  ens.betas = Eigen::MatrixXd::Zero(2, 16);
  ens.v_beta = F * F.transpose();
  const auto grid = EvalGrid::surface(ms, 15, 15);
  JointBandOptions opt;
  opt.R = 4000;
  opt.seed = 10;
  const auto band = joint_band(ens, grid, 0.05, opt);
  // Fresh Gaussian surfaces with covariance D V D' fall inside the band at
  // the nominal rate.
  Rng fresh(11);
  const int trials = 20000;
  int inside = 0;
  for (int k = 0; k < trials; ++k) {
    Eigen::VectorXd u(16);
    for (auto& v : u) v = fresh.normal();
    const Eigen::VectorXd surf = band.center + grid.design * (F * u);
    inside += !band_excludes(band, surf);
  }
  const double rate = static_cast<double>(inside) / trials;
  EXPECT_NEAR(rate, 0.95, 3.0 / std::sqrt(4000.0));
}

TEST(JointBand, LegacyScalingUsesRootOfSd) {
  const auto ms = MeanStructure::linear_interaction();
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity() * 0.2;
  const auto ens = synthetic_ensemble(Eigen::Vector4d::Zero(), F, 60, 12);
  const auto grid = EvalGrid::coefficient(ms, 1);
  JointBandOptions opt;
  opt.legacy_sqrt_s = true;
  const auto band = joint_band(ens, grid, 0.05, opt);
  EXPECT_NEAR(band.upper[0] - band.center[0], band.q_hat * std::sqrt(band.s[0]), 1e-12);
  EXPECT_NEAR(band.center[0], ens.mean_beta()[1], 1e-14);
}

TEST(JointBand, PsdFactorAndIndefiniteCovariance) {
  Eigen::Matrix3d v;
  v << 4, 2, 0, 2, 3, 0, 0, 0, 0;
  const auto f = psd_factor(v);
  EXPECT_LT((f * f.transpose() - v).cwiseAbs().maxCoeff(), 1e-12);
  v(2, 2) = -1.0;
  EXPECT_THROW(psd_factor(v), Error);
}

TEST(BandExcludes, ClosedIntervals) {
  BandResult band;
  band.lower = Eigen::Vector3d(-1.0, 0.0, -2.0);
  band.upper = Eigen::Vector3d(1.0, 2.0, 0.0);
  EXPECT_FALSE(band_excludes_zero(band));
  band.lower[1] = 0.5;
  EXPECT_TRUE(band_excludes_zero(band));
  EXPECT_TRUE(band_excludes(band, Eigen::Vector3d(0.0, 1.0, 0.1)));
  EXPECT_FALSE(band_excludes(band, Eigen::Vector3d(1.0, 2.0, -2.0)));
}

TEST(BandExcludes, StrongXEffectIsDetected) {
  Rng rng(13);
  auto ds = random_dataset(rng, 30, 2, 11, 0);
  fixtures::set_noiseless(ds, [](double, double x) { return x; });
  for (Eigen::Index k = 0; k < ds.y.size(); ++k) ds.y.data()[k] += 0.01 * rng.normal();
  const auto ms = MeanStructure::linear();
  const auto res = fit(ds, ms, {Lambda{}});
  BootstrapOptions bopt;
  bopt.B = 50;
  const auto ens = bootstrap_data(ds, ms, {Lambda{}}, bopt);
  const auto grid = EvalGrid::coefficient(ms, 2);
  EXPECT_TRUE(band_excludes_zero(pointwise_band(res, ens, grid, 0.05, PointwiseMethod::Normal)));
  EXPECT_TRUE(band_excludes_zero(joint_band(ens, grid, 0.05)));
  EXPECT_FALSE(band_excludes(joint_band(ens, grid, 0.05), Eigen::VectorXd::Ones(1)));
}
