#pragma once

// B-spline bases, difference penalties and the design rows of the supported
// mean structures.
//
// Coefficient ordering of the bivariate tensor basis is l-major: the entry for
// B^t_l(t) * B^x_r(x) sits at index l * d_x + r. design_row, tensor_penalty and
// the structured assembly in fit.hpp all follow this ordering.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdfx/error.hpp"

namespace fdfx {

using PenaltyMatrix = Eigen::MatrixXd;

class UnivariateBasis {
 public:
  // Clamped knot vector: lo and hi repeated degree+1 times, interior knots
  // equally spaced.
  static UnivariateBasis clamped_uniform(double lo, double hi, int num_basis, int degree = 3) {
    if (degree < 0) fail(ErrorKind::Config, "invalid-dimension", "spline degree must be >= 0");
    if (num_basis < degree + 1) {
      fail(ErrorKind::Config, "invalid-dimension",
           "number of basis functions (" + std::to_string(num_basis) +
               ") must be at least degree + 1 (" + std::to_string(degree + 1) + ")");
    }
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
      fail(ErrorKind::Data, "domain",
           "basis domain must be a non-empty finite interval, got [" + std::to_string(lo) + ", " +
               std::to_string(hi) + "]");
    }
    const int interior = num_basis - degree - 1;
    std::vector<double> knots;
    knots.reserve(static_cast<std::size_t>(num_basis + degree + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(lo);
    for (int k = 1; k <= interior; ++k) {
      knots.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(interior + 1));
    }
    for (int i = 0; i <= degree; ++i) knots.push_back(hi);
    return UnivariateBasis(std::move(knots), degree);
  }

  UnivariateBasis(std::vector<double> knots, int degree) : degree_(degree), knots_(std::move(knots)) {
    const int m = static_cast<int>(knots_.size());
    num_basis_ = m - degree_ - 1;
    if (degree_ < 0 || num_basis_ < degree_ + 1) {
      fail(ErrorKind::Config, "invalid-dimension", "knot vector too short for the requested degree");
    }
    for (int i = 1; i < m; ++i) {
      if (knots_[i] < knots_[i - 1]) fail(ErrorKind::Config, "invalid-knots", "knots must be non-decreasing");
    }
    for (int i = 1; i <= degree_; ++i) {
      if (knots_[i] != knots_[0] || knots_[m - 1 - i] != knots_[m - 1]) {
        fail(ErrorKind::Config, "invalid-knots", "end knots must be repeated degree+1 times");
      }
    }
    lo_ = knots_.front();
    hi_ = knots_.back();
    if (!(hi_ > lo_)) fail(ErrorKind::Config, "invalid-knots", "degenerate knot span");
  }

  int degree() const { return degree_; }
  int num_basis() const { return num_basis_; }
  int interior_knots() const { return num_basis_ - degree_ - 1; }
  const std::vector<double>& knots() const { return knots_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  // Maps u into the domain, tolerating round-off at the ends.
  double checked(double u) const {
    const double tol = 1e-12 * (hi_ - lo_);
    if (!(u >= lo_ - tol && u <= hi_ + tol)) {
      fail(ErrorKind::Data, "domain",
           "evaluation point " + std::to_string(u) + " outside basis domain [" + std::to_string(lo_) + ", " +
               std::to_string(hi_) + "]");
    }
    return std::clamp(u, lo_, hi_);
  }

  // Index s of the knot span with knots[s] <= u < knots[s+1]; the right end
  // of the domain belongs to the last non-empty span.
  int span(double u) const {
    if (u >= knots_[num_basis_]) return num_basis_ - 1;
    const auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + num_basis_ + 1, u);
    return static_cast<int>(it - knots_.begin()) - 1;
  }

  // Writes the degree+1 possibly-nonzero values B_{s-degree}(u) .. B_s(u) into
  // `local` and returns s.
  int eval_local(double u, double* local) const {
    u = checked(u);
    const int s = span(u);
    double left[16];
    double right[16];
    local[0] = 1.0;
    for (int j = 1; j <= degree_; ++j) {
      left[j] = u - knots_[s + 1 - j];
      right[j] = knots_[s + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = local[r] / (right[r + 1] + left[j - r]);
        local[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      local[j] = saved;
    }
    return s;
  }

  Eigen::VectorXd eval(double u) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(num_basis_);
    double local[16];
    const int s = eval_local(u, local);
    for (int j = 0; j <= degree_; ++j) out[s - degree_ + j] = local[j];
    return out;
  }

  friend bool operator==(const UnivariateBasis& a, const UnivariateBasis& b) {
    return a.degree_ == b.degree_ && a.knots_ == b.knots_;
  }

 private:
  int degree_;
  int num_basis_;
  std::vector<double> knots_;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

inline Eigen::VectorXd eval_bspline(const UnivariateBasis& basis, double u) {
  if (basis.degree() > 14) fail(ErrorKind::Config, "invalid-dimension", "spline degree above 14 not supported");
  return basis.eval(u);
}

// D2' D2 with D2 the (d-2) x d second-difference operator.
inline PenaltyMatrix second_difference_penalty(int d) {
  if (d < 3) {
    fail(ErrorKind::Config, "invalid-dimension",
         "second-difference penalty needs dimension >= 3, got " + std::to_string(d));
  }
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(d - 2, d);
  for (int k = 0; k < d - 2; ++k) {
    diff(k, k) = 1.0;
    diff(k, k + 1) = -2.0;
    diff(k, k + 2) = 1.0;
  }
  return diff.transpose() * diff;
}

enum class MeanKind {
  Linear,             // b0 + bt t + bx x
  LinearInteraction,  // b0 + bt t + bx x + btx t x
  PartialLinear,      // f(t) + bx x, f in the t basis
  BivariateSmooth,    // h(t, x) in the tensor basis
  TimeSmooth,         // f(t) only; the null model of the covariate-effect test
};

inline const char* to_string(MeanKind k) {
  switch (k) {
    case MeanKind::Linear: return "linear";
    case MeanKind::LinearInteraction: return "interaction";
    case MeanKind::PartialLinear: return "partial-linear";
    case MeanKind::BivariateSmooth: return "bivariate";
    case MeanKind::TimeSmooth: return "time-smooth";
  }
  return "unknown";
}

inline MeanKind parse_mean_kind(const std::string& s) {
  if (s == "linear") return MeanKind::Linear;
  if (s == "interaction") return MeanKind::LinearInteraction;
  if (s == "partial-linear") return MeanKind::PartialLinear;
  if (s == "bivariate") return MeanKind::BivariateSmooth;
  if (s == "time-smooth") return MeanKind::TimeSmooth;
  fail(ErrorKind::Config, "invalid-parameter", "unknown mean structure '" + s + "'");
}

class MeanStructure {
 public:
  static MeanStructure linear() { return MeanStructure(MeanKind::Linear, std::nullopt, std::nullopt); }
  static MeanStructure linear_interaction() {
    return MeanStructure(MeanKind::LinearInteraction, std::nullopt, std::nullopt);
  }
  static MeanStructure partial_linear(UnivariateBasis t_basis) {
    return MeanStructure(MeanKind::PartialLinear, std::move(t_basis), std::nullopt);
  }
  static MeanStructure bivariate(UnivariateBasis t_basis, UnivariateBasis x_basis) {
    return MeanStructure(MeanKind::BivariateSmooth, std::move(t_basis), std::move(x_basis));
  }
  static MeanStructure time_smooth(UnivariateBasis t_basis) {
    return MeanStructure(MeanKind::TimeSmooth, std::move(t_basis), std::nullopt);
  }

  MeanKind kind() const { return kind_; }
  const std::optional<UnivariateBasis>& t_basis() const { return t_basis_; }
  const std::optional<UnivariateBasis>& x_basis() const { return x_basis_; }
  bool penalized() const { return t_basis_.has_value(); }
  bool uses_x() const { return kind_ != MeanKind::TimeSmooth; }

  int dim() const {
    switch (kind_) {
      case MeanKind::Linear: return 3;
      case MeanKind::LinearInteraction: return 4;
      case MeanKind::PartialLinear: return t_basis_->num_basis() + 1;
      case MeanKind::BivariateSmooth: return t_basis_->num_basis() * x_basis_->num_basis();
      case MeanKind::TimeSmooth: return t_basis_->num_basis();
    }
    return 0;
  }

  // Every design row factors as S * (phi(t) kron psi(x)) with a fixed linear
  // map S ("lift"). The structured assembly only ever touches phi, psi and S.
  int t_features() const { return t_basis_ ? t_basis_->num_basis() : 2; }
  int x_features() const {
    if (kind_ == MeanKind::BivariateSmooth) return x_basis_->num_basis();
    return kind_ == MeanKind::TimeSmooth ? 1 : 2;
  }

  void t_features(double t, double* out) const {
    if (t_basis_) {
      const int d = t_basis_->num_basis();
      const int p = t_basis_->degree();
      std::fill(out, out + d, 0.0);
      double local[16];
      const int s = t_basis_->eval_local(t, local);
      for (int j = 0; j <= p; ++j) out[s - p + j] = local[j];
    } else {
      out[0] = 1.0;
      out[1] = t;
    }
  }

  void x_features(double x, double* out) const {
    if (kind_ == MeanKind::BivariateSmooth) {
      const int d = x_basis_->num_basis();
      const int p = x_basis_->degree();
      std::fill(out, out + d, 0.0);
      double local[16];
      const int s = x_basis_->eval_local(x, local);
      for (int j = 0; j <= p; ++j) out[s - p + j] = local[j];
    } else if (kind_ == MeanKind::TimeSmooth) {
      out[0] = 1.0;
    } else {
      out[0] = 1.0;
      out[1] = x;
    }
  }

  const Eigen::MatrixXd& lift() const { return lift_; }
  bool lift_is_identity() const { return lift_identity_; }

 private:
  MeanStructure(MeanKind kind, std::optional<UnivariateBasis> tb, std::optional<UnivariateBasis> xb)
      : kind_(kind), t_basis_(std::move(tb)), x_basis_(std::move(xb)) {
    const bool needs_t = kind_ == MeanKind::PartialLinear || kind_ == MeanKind::BivariateSmooth ||
                         kind_ == MeanKind::TimeSmooth;
    const bool needs_x = kind_ == MeanKind::BivariateSmooth;
    if (needs_t != t_basis_.has_value() || needs_x != x_basis_.has_value()) {
      fail(ErrorKind::Config, "invalid-structure",
           std::string("mean structure '") + to_string(kind_) + "' given the wrong set of bases");
    }
    for (const auto* b : {&t_basis_, &x_basis_}) {
      if (*b && (*b)->num_basis() < 3) {
        fail(ErrorKind::Config, "invalid-dimension", "smooth terms need at least 3 basis functions");
      }
    }
    build_lift();
  }

  void build_lift() {
    const int dpsi = x_features();
    const int width = t_features() * dpsi;
    lift_ = Eigen::MatrixXd::Zero(dim(), width);
    lift_identity_ = false;
    switch (kind_) {
      case MeanKind::Linear:
      case MeanKind::LinearInteraction:
        // phi = (1, t), psi = (1, x); kron = (1, x, t, tx).
        lift_(0, 0) = 1.0;
        lift_(1, 2) = 1.0;
        lift_(2, 1) = 1.0;
        if (kind_ == MeanKind::LinearInteraction) lift_(3, 3) = 1.0;
        break;
      case MeanKind::PartialLinear: {
        // psi = (1, x); x = sum_l B_l(t) x by partition of unity.
        const int dt = t_basis_->num_basis();
        for (int l = 0; l < dt; ++l) {
          lift_(l, l * dpsi) = 1.0;
          lift_(dt, l * dpsi + 1) = 1.0;
        }
        break;
      }
      case MeanKind::BivariateSmooth:
      case MeanKind::TimeSmooth:
        lift_.setIdentity();
        lift_identity_ = true;
        break;
    }
  }

  MeanKind kind_;
  std::optional<UnivariateBasis> t_basis_;
  std::optional<UnivariateBasis> x_basis_;
  Eigen::MatrixXd lift_;
  bool lift_identity_ = false;
};

// B(t, x) written out directly from the definition of each structure.
inline Eigen::VectorXd design_row(const MeanStructure& ms, double t, double x) {
  Eigen::VectorXd row(ms.dim());
  switch (ms.kind()) {
    case MeanKind::Linear:
      row << 1.0, t, x;
      break;
    case MeanKind::LinearInteraction:
      row << 1.0, t, x, t * x;
      break;
    case MeanKind::PartialLinear: {
      const int dt = ms.t_basis()->num_basis();
      row.head(dt) = ms.t_basis()->eval(t);
      row[dt] = x;
      break;
    }
    case MeanKind::BivariateSmooth: {
      const Eigen::VectorXd bt = ms.t_basis()->eval(t);
      const Eigen::VectorXd bx = ms.x_basis()->eval(x);
      const int dx = static_cast<int>(bx.size());
      for (int l = 0; l < bt.size(); ++l) {
        for (int r = 0; r < dx; ++r) row[l * dx + r] = bt[l] * bx[r];
      }
      break;
    }
    case MeanKind::TimeSmooth:
      row = ms.t_basis()->eval(t);
      break;
  }
  return row;
}

inline PenaltyMatrix tensor_penalty(const MeanStructure& ms, double lambda_t, double lambda_x) {
  if (!(lambda_t >= 0.0) || !(lambda_x >= 0.0)) {
    fail(ErrorKind::Config, "invalid-parameter", "smoothing parameters must be non-negative");
  }
  const int dim = ms.dim();
  PenaltyMatrix pen = PenaltyMatrix::Zero(dim, dim);
  switch (ms.kind()) {
    case MeanKind::Linear:
    case MeanKind::LinearInteraction:
      break;
    case MeanKind::PartialLinear:
    case MeanKind::TimeSmooth: {
      const int dt = ms.t_basis()->num_basis();
      pen.topLeftCorner(dt, dt) = lambda_t * second_difference_penalty(dt);
      break;
    }
    case MeanKind::BivariateSmooth: {
      const int dt = ms.t_basis()->num_basis();
      const int dx = ms.x_basis()->num_basis();
      const PenaltyMatrix pt = second_difference_penalty(dt);
      const PenaltyMatrix px = second_difference_penalty(dx);
      for (int l = 0; l < dt; ++l) {
        for (int l2 = 0; l2 < dt; ++l2) {
          for (int r = 0; r < dx; ++r) pen(l * dx + r, l2 * dx + r) += lambda_t * pt(l, l2);
        }
        for (int r = 0; r < dx; ++r) {
          for (int r2 = 0; r2 < dx; ++r2) pen(l * dx + r, l * dx + r2) += lambda_x * px(r, r2);
        }
      }
      break;
    }
  }
  return pen;
}

struct Lambda {
  double t = 0.0;
  double x = 0.0;
  friend bool operator==(const Lambda&, const Lambda&) = default;
};

// Log-spaced candidates over [lo, hi], `points` per penalized axis. Structures
// without a penalty get the single point (0, 0); single-smooth structures
// vary lambda_t only.
inline std::vector<Lambda> default_lambda_grid(const MeanStructure& ms, int points = 7, double lo = 1e-4,
                                               double hi = 1e4) {
  if (!ms.penalized()) return {Lambda{0.0, 0.0}};
  if (points < 1 || !(lo > 0.0) || !(hi >= lo)) {
    fail(ErrorKind::Config, "invalid-parameter", "lambda grid needs points >= 1 and 0 < lo <= hi");
  }
  std::vector<double> axis;
  for (int k = 0; k < points; ++k) {
    const double f = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    axis.push_back(std::pow(10.0, std::log10(lo) + f * (std::log10(hi) - std::log10(lo))));
  }
  std::vector<Lambda> grid;
  if (ms.kind() == MeanKind::BivariateSmooth) {
    for (double lt : axis) {
      for (double lx : axis) grid.push_back({lt, lx});
    }
  } else {
    for (double lt : axis) grid.push_back({lt, 0.0});
  }
  return grid;
}

}  // namespace fdfx
