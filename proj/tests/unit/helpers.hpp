#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "fdfx/dataset.hpp"
#include "fdfx/rng.hpp"
#include "fdfx/splinebasis.hpp"

namespace fdfx::fixtures {

// Cox-de Boor recursion straight from the definition, 0/0 := 0.
inline double bspline_oracle(const std::vector<double>& k, int i, int p, double u, bool last_span) {
  if (p == 0) {
    if (k[i] <= u && u < k[i + 1]) return 1.0;
    // Right end of the domain belongs to the last non-empty span.
    return (last_span && u == k[i + 1] && k[i] < k[i + 1]) ? 1.0 : 0.0;
  }
  double a = 0.0;
  double b = 0.0;
  const double d1 = k[i + p] - k[i];
  const double d2 = k[i + p + 1] - k[i + 1];
  if (d1 > 0.0) a = (u - k[i]) / d1 * bspline_oracle(k, i, p - 1, u, last_span);
  if (d2 > 0.0) b = (k[i + p + 1] - u) / d2 * bspline_oracle(k, i + 1, p - 1, u, last_span);
  return a + b;
}

inline Eigen::VectorXd oracle_basis(const UnivariateBasis& basis, double u) {
  const auto& k = basis.knots();
  Eigen::VectorXd out(basis.num_basis());
  const bool at_end = u == basis.hi();
  for (int i = 0; i < basis.num_basis(); ++i) out[i] = bspline_oracle(k, i, basis.degree(), u, at_end);
  return out;
}

// Small dataset with random responses and covariates.
inline FunctionalDataset random_dataset(Rng& rng, std::size_t n, std::size_t m, std::size_t L, std::size_t p,
                                        bool invariant = true) {
  FunctionalDataset ds;
  for (std::size_t l = 0; l < L; ++l) ds.grid.push_back(static_cast<double>(l) / static_cast<double>(L - 1));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> xs(m, rng.uniform());
    RowMatrix z(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < z.cols(); ++k) z.col(k).setConstant(rng.uniform());
    if (!invariant) {
      for (std::size_t j = 0; j < m; ++j) {
        xs[j] = rng.uniform();
        for (Eigen::Index k = 0; k < z.cols(); ++k) z(static_cast<Eigen::Index>(j), k) = rng.uniform();
      }
    }
    RowMatrix y(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(L));
    for (Eigen::Index a = 0; a < y.size(); ++a) y.data()[a] = rng.normal();
    ds.add_subject("s" + std::to_string(i), xs, z, y);
  }
  return ds;
}

// Fills responses with f(t, x) + sum_k z_k * tau_k.
template <class F>
void set_noiseless(FunctionalDataset& ds, F f, const std::vector<double>& tau = {}) {
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t l = 0; l < ds.L(); ++l) {
      double v = f(ds.grid[l], ds.x[r]);
      for (std::size_t k = 0; k < tau.size(); ++k) v += tau[k] * ds.z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      ds.y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(l)) = v;
    }
  }
}

inline MeanStructure structure_for(MeanKind kind, int dt = 4, int dx = 4) {
  switch (kind) {
    case MeanKind::Linear: return MeanStructure::linear();
    case MeanKind::LinearInteraction: return MeanStructure::linear_interaction();
    case MeanKind::PartialLinear: return MeanStructure::partial_linear(UnivariateBasis::clamped_uniform(0, 1, dt));
    case MeanKind::TimeSmooth: return MeanStructure::time_smooth(UnivariateBasis::clamped_uniform(0, 1, dt));
    case MeanKind::BivariateSmooth:
      return MeanStructure::bivariate(UnivariateBasis::clamped_uniform(0, 1, dt),
                                      UnivariateBasis::clamped_uniform(0, 1, dx));
  }
  return MeanStructure::linear();
}

}  // namespace fdfx::fixtures
