#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fdfx/error.hpp"

namespace fdfx {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Subjects x visits x grid observations on a common grid t_1 < ... < t_L.
// Visit rows are stored subject by subject; subject i owns rows
// [offsets[i], offsets[i+1]).
struct FunctionalDataset {
  std::vector<double> grid;               // t_1..t_L
  std::vector<std::string> subject_ids;   // n
  std::vector<std::size_t> offsets{0};    // n + 1
  std::vector<double> x;                  // per visit row
  RowMatrix z;                            // rows x p
  RowMatrix y;                            // rows x L

  std::size_t n() const { return subject_ids.size(); }
  std::size_t rows() const { return x.size(); }
  std::size_t L() const { return grid.size(); }
  std::size_t p() const { return static_cast<std::size_t>(z.cols()); }
  std::size_t visits(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::size_t total_observations() const { return rows() * L(); }

  double x_min() const { return *std::min_element(x.begin(), x.end()); }
  double x_max() const { return *std::max_element(x.begin(), x.end()); }

  // Appends one subject; y_block is visits x L, z_block visits x p.
  void add_subject(std::string id, std::span<const double> xs, const RowMatrix& z_block, const RowMatrix& y_block) {
    const auto m = static_cast<Eigen::Index>(xs.size());
    if (m == 0) fail(ErrorKind::Data, "structure", "subject '" + id + "' has no visits");
    if (y_block.rows() != m || y_block.cols() != static_cast<Eigen::Index>(L())) {
      fail(ErrorKind::Data, "structure", "response block of subject '" + id + "' has the wrong shape");
    }
    if (rows() == 0 && z.cols() != z_block.cols()) z.resize(0, z_block.cols());
    if (z_block.rows() != m || z_block.cols() != z.cols()) {
      fail(ErrorKind::Data, "structure", "nuisance covariates of subject '" + id + "' have the wrong shape");
    }
    const auto r0 = static_cast<Eigen::Index>(rows());
    x.insert(x.end(), xs.begin(), xs.end());
    y.conservativeResize(r0 + m, static_cast<Eigen::Index>(L()));
    y.bottomRows(m) = y_block;
    z.conservativeResize(r0 + m, z_block.cols());
    if (z_block.cols() > 0) z.bottomRows(m) = z_block;
    subject_ids.push_back(std::move(id));
    offsets.push_back(rows());
  }

  // New dataset made of the listed subjects in the listed order; repeated
  // indices become distinct subjects.
  FunctionalDataset resample(std::span<const std::size_t> idx) const {
    FunctionalDataset out;
    out.grid = grid;
    std::size_t total = 0;
    for (auto i : idx) total += visits(i);
    out.x.reserve(total);
    out.y.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(L()));
    out.z.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(p()));
    out.offsets.reserve(idx.size() + 1);
    Eigen::Index r = 0;
    for (auto i : idx) {
      const auto b = static_cast<Eigen::Index>(offsets[i]);
      const auto m = static_cast<Eigen::Index>(visits(i));
      out.y.middleRows(r, m) = y.middleRows(b, m);
      if (p() > 0) out.z.middleRows(r, m) = z.middleRows(b, m);
      out.x.insert(out.x.end(), x.begin() + b, x.begin() + b + m);
      out.subject_ids.push_back(subject_ids[i]);
      r += m;
      out.offsets.push_back(static_cast<std::size_t>(r));
    }
    return out;
  }

  // True when every subject's covariates are the same on all of its visits.
  bool covariates_visit_invariant() const {
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t r = offsets[i] + 1; r < offsets[i + 1]; ++r) {
        if (x[r] != x[offsets[i]]) return false;
        for (Eigen::Index k = 0; k < z.cols(); ++k) {
          if (z(static_cast<Eigen::Index>(r), k) != z(static_cast<Eigen::Index>(offsets[i]), k)) return false;
        }
      }
    }
    return true;
  }

  void validate() const {
    if (n() == 0) fail(ErrorKind::Data, "structure", "dataset has no subjects");
    if (grid.size() < 2) fail(ErrorKind::Data, "structure", "grid needs at least two points");
    for (std::size_t l = 0; l < grid.size(); ++l) {
      if (!(grid[l] >= 0.0 && grid[l] <= 1.0)) fail(ErrorKind::Data, "grid", "grid points must lie in [0, 1]");
      if (l > 0 && !(grid[l] > grid[l - 1])) fail(ErrorKind::Data, "grid", "grid must be strictly increasing");
    }
    if (offsets.size() != n() + 1 || offsets.front() != 0 || offsets.back() != rows()) {
      fail(ErrorKind::Data, "structure", "subject offsets inconsistent with visit rows");
    }
    for (std::size_t i = 0; i < n(); ++i) {
      if (offsets[i + 1] <= offsets[i]) {
        fail(ErrorKind::Data, "structure", "subject '" + subject_ids[i] + "' has no visits");
      }
    }
    if (static_cast<std::size_t>(y.rows()) != rows() || static_cast<std::size_t>(y.cols()) != L() ||
        static_cast<std::size_t>(z.rows()) != rows()) {
      fail(ErrorKind::Data, "structure", "response or covariate arrays do not match the visit rows");
    }
    if (!y.allFinite()) fail(ErrorKind::Data, "missing", "responses must be finite (no missing values)");
    if (!z.allFinite()) fail(ErrorKind::Data, "missing", "nuisance covariates must be finite");
    for (double v : x) {
      if (!std::isfinite(v)) fail(ErrorKind::Data, "missing", "covariate of interest must be finite");
    }
  }
};

}  // namespace fdfx
