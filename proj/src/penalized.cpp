#include "fdamon/penalized.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "smooth";

// Orthonormal basis of {g : c g = 0}.
Eigen::MatrixXd constraint_null_space(const Eigen::RowVectorXd& c) {
  const Eigen::Index L = c.size();
  if (c.norm() == 0.0) throw numerical_error(kModule, "SingularSystem", "zero constraint vector");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.transpose());
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(L, L);
  return Q.rightCols(L - 1);
}

// Symmetric square root factor E with E'E = S (rows for non-negligible eigenvalues).
Eigen::MatrixXd penalty_root(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  const Eigen::VectorXd& d = es.eigenvalues();
  const double tol = std::max(d.cwiseAbs().maxCoeff(), 1e-300) * 1e-13;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] > tol) keep.push_back(i);
  Eigen::MatrixXd E(keep.size(), S.rows());
  for (std::size_t r = 0; r < keep.size(); ++r)
    E.row(r) = std::sqrt(d[keep[r]]) * es.eigenvectors().col(keep[r]).transpose();
  return E;
}

struct Solution {
  Eigen::VectorXd theta;
  Eigen::MatrixXd a_inv;  // (R_X'R_X + S_lambda)^{-1}
  std::vector<double> edf_blocks;
  double edf = 0.0;
  double rss = 0.0;
  double gcv = 0.0;
};

// Problem in constraint-reduced coordinates, reduced to a k x k triangular
// least-squares core: |f - R_X theta|^2 + rss0.
class ReducedProblem {
 public:
  explicit ReducedProblem(std::vector<TermSpec> terms) : terms_(std::move(terms)) {
    Eigen::Index orig = 0, red = 0;
    for (const auto& t : terms_) {
      orig_offsets_.push_back(orig);
      red_offsets_.push_back(red);
      orig += t.size();
      red += t.size() - (t.constraint ? 1 : 0);
    }
    T_ = Eigen::MatrixXd::Zero(orig, red);
    for (std::size_t b = 0; b < terms_.size(); ++b) {
      const auto& t = terms_[b];
      const Eigen::Index rb = red_size(b);
      if (t.constraint)
        T_.block(orig_offsets_[b], red_offsets_[b], t.size(), rb) = constraint_null_space(*t.constraint);
      else
        T_.block(orig_offsets_[b], red_offsets_[b], t.size(), rb).setIdentity();
    }
    for (std::size_t b = 0; b < terms_.size(); ++b) {
      const Eigen::MatrixXd Tb = T_.block(orig_offsets_[b], red_offsets_[b], terms_[b].size(), red_size(b));
      Eigen::MatrixXd Sb = Eigen::MatrixXd::Zero(red, red);
      Sb.block(red_offsets_[b], red_offsets_[b], red_size(b), red_size(b)) = Tb.transpose() * terms_[b].penalty * Tb;
      penalty_roots_.push_back(penalty_root(Sb));
      reduced_penalties_.push_back(std::move(Sb));
    }
  }

  Eigen::Index original_size() const { return T_.rows(); }
  Eigen::Index reduced_size() const { return T_.cols(); }
  Eigen::Index red_size(std::size_t b) const {
    return terms_[b].size() - (terms_[b].constraint ? 1 : 0);
  }
  const Eigen::MatrixXd& transform() const { return T_; }
  const std::vector<TermSpec>& terms() const { return terms_; }

  void set_from_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
    n_ = static_cast<double>(X.rows());
    Eigen::VectorXd sw = w.size() ? Eigen::VectorXd(w.cwiseSqrt()) : Eigen::VectorXd::Ones(X.rows());
    Eigen::MatrixXd Xr = sw.asDiagonal() * (X * T_);
    Eigen::VectorXd yw = sw.cwiseProduct(y);
    const Eigen::Index k = Xr.cols();
    if (Xr.rows() < k) throw numerical_error(kModule, "SingularSystem", "fewer observations than coefficients");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_check(Xr);
    if (rank_check.rank() < k)
      throw numerical_error(kModule, "SingularSystem",
                            "constrained design has rank " + std::to_string(rank_check.rank()) + " < " +
                                std::to_string(k));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Xr);
    R_ = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    Eigen::VectorXd qty = qr.householderQ().adjoint() * yw;
    f_ = qty.head(k);
    rss0_ = qty.tail(qty.size() - k).squaredNorm();
  }

  void set_from_cross_products(const CrossProducts& cp) {
    n_ = cp.n;
    Eigen::MatrixXd A = T_.transpose() * cp.xtwx * T_;
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (A + A.transpose()));
    if (llt.info() != Eigen::Success)
      throw numerical_error(kModule, "SingularSystem", "cross-product matrix is not positive definite");
    R_ = llt.matrixU();
    f_ = R_.transpose().triangularView<Eigen::Lower>().solve(T_.transpose() * cp.xtwy);
    rss0_ = std::max(cp.ytwy - f_.squaredNorm(), 0.0);
  }

  /// Trace-balancing scale so that lambda = scale * 10^rho puts rho = 0 where
  /// data and penalty terms have comparable weight.
  double balance_scale(std::size_t b) const {
    const Eigen::Index o = red_offsets_[b], s = red_size(b);
    Eigen::MatrixXd xtx = R_.transpose() * R_;
    double num = xtx.block(o, o, s, s).trace();
    double den = reduced_penalties_[b].trace();
    return den > 0 ? num / den : 1.0;
  }

  Solution solve(const std::vector<double>& lambdas) const {
    const Eigen::Index k = reduced_size();
    Eigen::Index rows = k;
    for (std::size_t b = 0; b < terms_.size(); ++b)
      if (lambdas[b] > 0) rows += penalty_roots_[b].rows();
    Eigen::MatrixXd M(rows, k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
    M.topRows(k) = R_;
    rhs.head(k) = f_;
    Eigen::Index r = k;
    for (std::size_t b = 0; b < terms_.size(); ++b) {
      if (lambdas[b] < 0) throw data_error(kModule, "InvalidArgument", "negative smoothing parameter");
      if (lambdas[b] == 0) continue;
      const auto& E = penalty_roots_[b];
      M.middleRows(r, E.rows()) = std::sqrt(lambdas[b]) * E;
      r += E.rows();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd RA = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    if ((RA.diagonal().cwiseAbs().array() == 0.0).any())
      throw numerical_error(kModule, "SingularSystem", "penalized system is singular");
    Eigen::VectorXd qtr = qr.householderQ().adjoint() * rhs;

    Solution sol;
    sol.theta = RA.triangularView<Eigen::Upper>().solve(qtr.head(k));
    Eigen::MatrixXd RAinv = RA.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    sol.a_inv = RAinv * RAinv.transpose();
    Eigen::MatrixXd F = sol.a_inv * (R_.transpose() * R_);
    sol.edf = F.trace();
    for (std::size_t b = 0; b < terms_.size(); ++b)
      sol.edf_blocks.push_back(F.diagonal().segment(red_offsets_[b], red_size(b)).sum());
    sol.rss = rss0_ + (f_ - R_ * sol.theta).squaredNorm();
    const double dof = n_ - sol.edf;
    sol.gcv = dof > 0 ? n_ * sol.rss / (dof * dof) : std::numeric_limits<double>::infinity();
    return sol;
  }

  double n() const { return n_; }

 private:
  std::vector<TermSpec> terms_;
  std::vector<Eigen::Index> orig_offsets_, red_offsets_;
  Eigen::MatrixXd T_;
  std::vector<Eigen::MatrixXd> reduced_penalties_;
  std::vector<Eigen::MatrixXd> penalty_roots_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd f_;
  double rss0_ = 0.0;
  double n_ = 0.0;
};

PenalizedFit assemble(const ReducedProblem& problem, const Solution& sol, const std::vector<double>& lambdas,
                      std::optional<double> known_scale) {
  PenalizedFit fit;
  fit.terms = problem.terms();
  fit.coefficients_all = problem.transform() * sol.theta;
  for (std::size_t b = 0; b < fit.terms.size(); ++b) fit.coefficients.push_back(fit.block(fit.coefficients_all, b));
  fit.smoothing = lambdas;
  fit.edf = sol.edf;
  fit.edf_blocks = sol.edf_blocks;
  fit.rss = sol.rss;
  fit.gcv = sol.gcv;
  fit.n = problem.n();
  const double dof = fit.n - fit.edf;
  fit.scale = known_scale ? *known_scale : (dof > 0 ? fit.rss / dof : std::numeric_limits<double>::quiet_NaN());
  fit.covariance = fit.scale * problem.transform() * sol.a_inv * problem.transform().transpose();
  if (!fit.coefficients_all.allFinite())
    throw numerical_error(kModule, "SingularSystem", "non-finite coefficients");
  return fit;
}

std::vector<TermSpec> terms_from_blocks(const std::vector<SmoothBlock>& blocks) {
  std::vector<TermSpec> terms;
  for (const auto& b : blocks) {
    if (b.penalty.rows() != b.design.cols() || b.penalty.cols() != b.design.cols())
      throw data_error(kModule, "InvalidDimension", "penalty size does not match design block");
    TermSpec t{b.penalty, std::nullopt};
    if (b.sum_to_zero) t.constraint = b.design.colwise().sum();
    terms.push_back(std::move(t));
  }
  return terms;
}

Eigen::MatrixXd stack_design(const std::vector<SmoothBlock>& blocks, Eigen::Index n) {
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    if (b.design.rows() != n) throw data_error(kModule, "InvalidDimension", "design blocks differ in row count");
    cols += b.design.cols();
  }
  Eigen::MatrixXd X(n, cols);
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    X.middleCols(c, b.design.cols()) = b.design;
    c += b.design.cols();
  }
  return X;
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

Eigen::VectorXd PenalizedFit::block(const Eigen::VectorXd& stacked, std::size_t b) const {
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < b; ++i) offset += terms[i].size();
  return stacked.segment(offset, terms[b].size());
}

Eigen::MatrixXd PenalizedFit::block_covariance(std::size_t b) const {
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < b; ++i) offset += terms[i].size();
  return covariance.block(offset, offset, terms[b].size(), terms[b].size());
}

PenalizedFit fit_penalized(const std::vector<SmoothBlock>& blocks, const Eigen::VectorXd& response,
                           const Eigen::VectorXd& weights, const std::vector<Smoothing>& smoothing,
                           const GcvOptions& options) {
  if (blocks.empty()) throw data_error(kModule, "InvalidDimension", "no smooth blocks");
  if (smoothing.size() != blocks.size())
    throw data_error(kModule, "InvalidDimension", "one smoothing entry per block required");
  if (weights.size() && weights.size() != response.size())
    throw data_error(kModule, "InvalidDimension", "weights length mismatch");
  if (weights.size() && (weights.array() <= 0).any())
    throw data_error(kModule, "InvalidArgument", "weights must be positive");

  const Eigen::MatrixXd X = stack_design(blocks, response.size());
  ReducedProblem problem(terms_from_blocks(blocks));
  problem.set_from_design(X, response, weights);

  const std::size_t nb = blocks.size();
  std::vector<double> lambdas(nb, 0.0), scales(nb, 1.0), rho(nb, 0.0);
  std::vector<std::size_t> auto_blocks;
  for (std::size_t b = 0; b < nb; ++b) {
    if (smoothing[b]) {
      lambdas[b] = *smoothing[b];
    } else {
      auto_blocks.push_back(b);
      scales[b] = problem.balance_scale(b);
      lambdas[b] = scales[b];
    }
  }

  if (!auto_blocks.empty()) {
    const int steps = static_cast<int>(std::round((options.log10_max - options.log10_min) / options.log10_step));
    for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
      double max_change = 0.0;
      for (std::size_t b : auto_blocks) {
        auto score = [&](double r) {
          auto trial = lambdas;
          trial[b] = scales[b] * std::pow(10.0, r);
          return problem.solve(trial).gcv;
        };
        int best = 0;
        double best_score = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= steps; ++i) {
          double s = score(options.log10_min + i * options.log10_step);
          if (s < best_score) best_score = s, best = i;
        }
        double lo = options.log10_min + std::max(best - 1, 0) * options.log10_step;
        double hi = options.log10_min + std::min(best + 1, steps) * options.log10_step;
        double r = golden_section(score, lo, hi, 1e-4);
        if (score(r) > best_score) r = options.log10_min + best * options.log10_step;
        max_change = std::max(max_change, std::abs(r - rho[b]));
        rho[b] = r;
        lambdas[b] = scales[b] * std::pow(10.0, r);
      }
      if (auto_blocks.size() == 1 || max_change < 1e-3) break;
    }
  }

  Solution sol = problem.solve(lambdas);
  PenalizedFit fit = assemble(problem, sol, lambdas, std::nullopt);
  fit.fitted = X * fit.coefficients_all;
  fit.residuals = response - fit.fitted;
  return fit;
}

PenalizedFit solve_penalized(const std::vector<TermSpec>& terms, const CrossProducts& cp,
                             const std::vector<double>& smoothing, std::optional<double> known_scale) {
  if (smoothing.size() != terms.size())
    throw data_error(kModule, "InvalidDimension", "one smoothing entry per term required");
  ReducedProblem problem(terms);
  if (cp.xtwx.rows() != problem.original_size())
    throw data_error(kModule, "InvalidDimension", "cross products do not match terms");
  problem.set_from_cross_products(cp);
  Solution sol = problem.solve(smoothing);
  return assemble(problem, sol, smoothing, known_scale);
}

double gcv_score(const std::vector<SmoothBlock>& blocks, const Eigen::VectorXd& response,
                 const Eigen::VectorXd& weights, const std::vector<double>& smoothing) {
  const Eigen::MatrixXd X = stack_design(blocks, response.size());
  ReducedProblem problem(terms_from_blocks(blocks));
  problem.set_from_design(X, response, weights);
  return problem.solve(smoothing).gcv;
}

}  // namespace fdamon
