#include "fdamon/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {
constexpr const char* kModule = "smooth";
}

SplineBasis::SplineBasis(double lower, double upper, int num_basis, bool cyclic)
    : lower_(lower), upper_(upper), num_basis_(num_basis), cyclic_(cyclic) {
  if (!(upper > lower) || !std::isfinite(lower) || !std::isfinite(upper))
    throw data_error(kModule, "InvalidDimension", "degenerate spline domain");
  if (num_basis < (cyclic ? 3 : 4))
    throw data_error(kModule, "InvalidDimension",
                     "need at least " + std::string(cyclic ? "3" : "4") + " basis functions, got " +
                         std::to_string(num_basis));

  if (cyclic) {
    knots_.resize(num_basis + 1);
    const double h = (upper - lower) / num_basis;
    for (int i = 0; i <= num_basis; ++i) knots_[i] = lower + i * h;
    knots_.back() = upper;
  } else {
    const int interior = num_basis - 4;
    const double h = (upper - lower) / (interior + 1);
    knots_.assign(kDegree + 1, lower);
    for (int i = 1; i <= interior; ++i) knots_.push_back(lower + i * h);
    knots_.insert(knots_.end(), kDegree + 1, upper);
  }
}

int SplineBasis::interior_knot_count() const { return cyclic_ ? num_basis_ : num_basis_ - 4; }

Eigen::VectorXd SplineBasis::evaluate(double x, int deriv, bool* clamped) const {
  if (deriv < 0 || deriv > 2) throw data_error(kModule, "InvalidArgument", "derivative order must be 0, 1 or 2");
  if (clamped) *clamped = false;
  if (cyclic_) return evaluate_cyclic(x, deriv);
  if (x < lower_ || x > upper_) {
    if (clamped) *clamped = true;
    x = std::clamp(x, lower_, upper_);
  }
  return evaluate_clamped(x, deriv);
}

// Cox-de Boor on the full index range; small L makes the dense form cheap.
Eigen::VectorXd SplineBasis::evaluate_clamped(double x, int deriv) const {
  const auto& t = knots_;
  const int nk = static_cast<int>(t.size());

  // span index with t[span] <= x < t[span+1], last non-empty span for x == upper
  int span = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
  span = std::clamp(span, kDegree, num_basis_ - 1);

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

  // levels[d] holds all degree-d basis values (size nk - d - 1)
  std::vector<Eigen::VectorXd> levels(kDegree + 1);
  levels[0] = Eigen::VectorXd::Zero(nk - 1);
  levels[0][span] = 1.0;
  for (int d = 1; d <= kDegree; ++d) {
    const Eigen::VectorXd& prev = levels[d - 1];
    Eigen::VectorXd cur = Eigen::VectorXd::Zero(nk - d - 1);
    for (int j = 0; j < cur.size(); ++j) {
      cur[j] = ratio(x - t[j], t[j + d] - t[j]) * prev[j] +
               ratio(t[j + d + 1] - x, t[j + d + 1] - t[j + 1]) * prev[j + 1];
    }
    levels[d] = std::move(cur);
  }
  if (deriv == 0) return levels[kDegree];

  // derivative of a degree-d spline family from degree-(d-1) values/derivatives
  auto differentiate = [&](const Eigen::VectorXd& lower_level, int d) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nk - d - 1);
    for (int j = 0; j < out.size(); ++j)
      out[j] = d * (ratio(lower_level[j], t[j + d] - t[j]) - ratio(lower_level[j + 1], t[j + d + 1] - t[j + 1]));
    return out;
  };
  if (deriv == 1) return differentiate(levels[kDegree - 1], kDegree);
  Eigen::VectorXd d1_of_quadratic = differentiate(levels[kDegree - 2], kDegree - 1);
  return differentiate(d1_of_quadratic, kDegree);
}

Eigen::VectorXd SplineBasis::evaluate_cyclic(double x, int deriv) const {
  const int L = num_basis_;
  const double period = upper_ - lower_;
  const double h = period / L;
  double u = std::fmod((x - lower_) * L / period, static_cast<double>(L));
  if (u < 0.0) u += L;
  int i = static_cast<int>(std::floor(u));
  if (i >= L) i = 0, u = 0.0;
  const double s = u - i;

  // pieces of the uniform cubic B-spline, indexed by (i - j) for basis j
  double w[4];
  double scale = 1.0;
  switch (deriv) {
    case 0:
      w[0] = s * s * s / 6.0;
      w[1] = (-3 * s * s * s + 3 * s * s + 3 * s + 1) / 6.0;
      w[2] = (3 * s * s * s - 6 * s * s + 4) / 6.0;
      w[3] = (1 - s) * (1 - s) * (1 - s) / 6.0;
      break;
    case 1:
      w[0] = s * s / 2.0;
      w[1] = (-3 * s * s + 2 * s + 1) / 2.0;
      w[2] = (3 * s * s - 4 * s) / 2.0;
      w[3] = -(1 - s) * (1 - s) / 2.0;
      scale = 1.0 / h;
      break;
    default:
      w[0] = s;
      w[1] = 1 - 3 * s;
      w[2] = 3 * s - 2;
      w[3] = 1 - s;
      scale = 1.0 / (h * h);
      break;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(L);
  for (int piece = 0; piece < 4; ++piece) {
    int j = ((i - piece) % L + L) % L;
    out[j] += w[piece] * scale;
  }
  return out;
}

Eigen::MatrixXd SplineBasis::design(std::span<const double> points, int deriv, std::size_t* clamped_count) const {
  Eigen::MatrixXd X(points.size(), num_basis_);
  std::size_t clamped = 0;
  for (std::size_t r = 0; r < points.size(); ++r) {
    bool c = false;
    X.row(r) = evaluate(points[r], deriv, &c).transpose();
    clamped += c ? 1 : 0;
  }
  if (clamped > 0)
    warn(kModule, std::to_string(clamped) + " point(s) outside [" + std::to_string(lower_) + ", " +
                      std::to_string(upper_) + "] clamped to the boundary");
  if (clamped_count) *clamped_count = clamped;
  return X;
}

Eigen::MatrixXd SplineBasis::penalty() const {
  // b'' is piecewise linear, so two-point Gauss-Legendre is exact per interval.
  const double g = 1.0 / std::sqrt(3.0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(num_basis_, num_basis_);
  std::vector<double> breaks;
  if (cyclic_) {
    breaks = knots_;
  } else {
    breaks.assign(knots_.begin() + kDegree, knots_.end() - kDegree);
  }
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (double node : {-g, g}) {
      Eigen::VectorXd d2 = cyclic_ ? evaluate_cyclic(mid + half * node, 2) : evaluate_clamped(mid + half * node, 2);
      S.noalias() += half * d2 * d2.transpose();
    }
  }
  return 0.5 * (S + S.transpose());
}

SplineBasis build_basis(double lower, double upper, int num_basis, bool cyclic) {
  return SplineBasis(lower, upper, num_basis, cyclic);
}

Eigen::MatrixXd evaluate_basis(const SplineBasis& basis, std::span<const double> points) {
  return basis.design(points);
}

Eigen::MatrixXd penalty_matrix(const SplineBasis& basis) { return basis.penalty(); }

}  // namespace fdamon
