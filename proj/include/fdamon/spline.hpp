#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fdamon {

/// Cubic B-spline basis on [lower, upper] with equally spaced knots.
///
/// Non-cyclic bases are clamped (boundary knots repeated four times) and have
/// `num_basis - 4` interior knots; with four functions the basis is the cubic
/// Bernstein basis. Cyclic bases are the `num_basis` translates of the uniform
/// cubic B-spline wrapped onto a period of length `upper - lower`; they are
/// C2-continuous across the period boundary.
class SplineBasis {
 public:
  static constexpr int kDegree = 3;

  SplineBasis() = default;
  /// Throws InvalidDimension for L < 4 (non-cyclic) or L < 3 (cyclic), or a
  /// degenerate domain.
  SplineBasis(double lower, double upper, int num_basis, bool cyclic);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int num_basis() const { return num_basis_; }
  bool cyclic() const { return cyclic_; }
  int degree() const { return kDegree; }
  int interior_knot_count() const;
  /// Full knot vector. For cyclic bases this is the L + 1 breakpoints of one period.
  const std::vector<double>& knots() const { return knots_; }

  /// Values (deriv = 0) or derivatives (1, 2) of all basis functions at x.
  /// Non-cyclic: x outside the domain is clamped and `clamped` set. Cyclic:
  /// x is wrapped into the period.
  Eigen::VectorXd evaluate(double x, int deriv = 0, bool* clamped = nullptr) const;

  /// Design matrix, one row per point. Emits a warning when any point had to be
  /// clamped; the number of clamped points is written to `clamped_count`.
  Eigen::MatrixXd design(std::span<const double> points, int deriv = 0, std::size_t* clamped_count = nullptr) const;

  /// Exact Gram matrix of second derivatives, S_ij = \int b_i''(x) b_j''(x) dx.
  Eigen::MatrixXd penalty() const;

  bool operator==(const SplineBasis&) const = default;

 private:
  Eigen::VectorXd evaluate_clamped(double x, int deriv) const;
  Eigen::VectorXd evaluate_cyclic(double x, int deriv) const;

  double lower_ = 0.0;
  double upper_ = 1.0;
  int num_basis_ = 0;
  bool cyclic_ = false;
  std::vector<double> knots_;
};

/// Free-function spellings of the basis operations.
SplineBasis build_basis(double lower, double upper, int num_basis, bool cyclic);
Eigen::MatrixXd evaluate_basis(const SplineBasis& basis, std::span<const double> points);
Eigen::MatrixXd penalty_matrix(const SplineBasis& basis);

}  // namespace fdamon
