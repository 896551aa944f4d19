#include "fdamon/fpca.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "fpca";

// Day residuals snapped onto grid indices.
struct SnappedDay {
  std::vector<int> idx;
  std::vector<double> val;
};

std::vector<SnappedDay> snap(const std::vector<DailyProfile>& profiles, const Eigen::VectorXd& grid, double tol) {
  std::vector<SnappedDay> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) {
    SnappedDay d;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double t = p.times[i];
      auto it = std::lower_bound(grid.data(), grid.data() + grid.size(), t);
      int best = -1;
      double gap = std::numeric_limits<double>::infinity();
      for (auto cand : {it - 1, it}) {
        if (cand < grid.data() || cand >= grid.data() + grid.size()) continue;
        double g = std::abs(*cand - t);
        if (g < gap) gap = g, best = static_cast<int>(cand - grid.data());
      }
      if (best < 0 || gap > tol)
        throw data_error(kModule, "OffGrid",
                         "day " + std::to_string(p.day_index) + " time " + std::to_string(t) + " is not on the grid");
      if (!d.idx.empty() && d.idx.back() == best) {
        throw data_error(kModule, "OffGrid",
                         "day " + std::to_string(p.day_index) + " has two observations snapping to one grid point");
      }
      d.idx.push_back(best);
      d.val.push_back(p.values[i]);
    }
    if (!d.idx.empty()) out.push_back(std::move(d));
  }
  return out;
}

struct Moments {
  Eigen::MatrixXd sums;
  Eigen::MatrixXd counts;
};

Moments accumulate(const std::vector<SnappedDay>& days, Eigen::Index n) {
  Moments m{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (const auto& d : days)
    for (std::size_t a = 0; a < d.idx.size(); ++a)
      for (std::size_t b = 0; b < d.idx.size(); ++b) {
        m.sums(d.idx[a], d.idx[b]) += d.val[a] * d.val[b];
        m.counts(d.idx[a], d.idx[b]) += 1.0;
      }
  return m;
}

// Off-diagonal cell weights and means from moment sums.
void cell_inputs(const Moments& m, int min_pairs, Eigen::MatrixXd& values, Eigen::MatrixXd& weights) {
  const Eigen::Index n = m.sums.rows();
  values = Eigen::MatrixXd::Zero(n, n);
  weights = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b || m.counts(a, b) < min_pairs) continue;
      weights(a, b) = m.counts(a, b);
      values(a, b) = m.sums(a, b) / m.counts(a, b);
    }
}

}  // namespace

Eigen::VectorXd hourly_grid() { return Eigen::VectorXd::LinSpaced(24, 1.0, 24.0); }

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  const Eigen::Index n = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

Eigen::MatrixXd local_linear_surface(const Eigen::VectorXd& grid, const Eigen::MatrixXd& values,
                                     const Eigen::MatrixXd& weights, double bandwidth) {
  const Eigen::Index n = grid.size();
  // kernel rows times (a - s)^k for k = 0, 1, 2
  std::array<Eigen::MatrixXd, 3> KP{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index s = 0; s < n; ++s)
    for (Eigen::Index a = 0; a < n; ++a) {
      const double d = grid[a] - grid[s];
      const double k = std::exp(-0.5 * (d / bandwidth) * (d / bandwidth));
      KP[0](s, a) = k;
      KP[1](s, a) = k * d;
      KP[2](s, a) = k * d * d;
    }
  const Eigen::MatrixXd NY = weights.cwiseProduct(values);
  // separable kernel: every weighted moment is a product of three small matrices
  std::array<std::array<Eigen::MatrixXd, 3>, 3> S;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) S[i][j] = KP[i] * weights * KP[j].transpose();
  std::array<std::array<Eigen::MatrixXd, 2>, 2> R;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) R[i][j] = KP[i] * NY * KP[j].transpose();

  // tensor-product local linear: basis 1, ds, dt, ds*dt
  constexpr int pw[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index s = 0; s < n; ++s)
    for (Eigen::Index t = 0; t < n; ++t) {
      bool done = false;
      for (int q : {4, 3}) {  // drop the cross term if the local design cannot carry it
        Eigen::MatrixXd A(q, q);
        Eigen::VectorXd r(q);
        for (int i = 0; i < q; ++i) {
          r[i] = R[pw[i][0]][pw[i][1]](s, t);
          for (int j = 0; j < q; ++j) A(i, j) = S[pw[i][0] + pw[j][0]][pw[i][1] + pw[j][1]](s, t);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-12) {
          out(s, t) = ldlt.solve(r)[0];
          done = true;
          break;
        }
      }
      if (!done) out(s, t) = S[0][0](s, t) > 0 ? R[0][0](s, t) / S[0][0](s, t) : 0.0;
    }
  return 0.5 * (out + out.transpose());
}

CovarianceEstimate estimate_covariance(const std::vector<DailyProfile>& residuals, const Eigen::VectorXd& grid,
                                       const CovarianceOptions& options) {
  const Eigen::Index n = grid.size();
  if (n < 2) throw data_error(kModule, "InvalidGrid", "grid needs at least two points");
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    if (!(grid[i + 1] > grid[i])) throw data_error(kModule, "InvalidGrid", "grid must be strictly increasing");
  if (options.bandwidths.empty()) throw data_error(kModule, "InvalidArgument", "no candidate bandwidths");

  const auto days = snap(residuals, grid, options.snap_tolerance);
  const Moments total = accumulate(days, n);

  CovarianceEstimate est;
  est.grid = grid;
  est.counts = total.counts.cast<int>();
  est.raw = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (total.counts(a, b) > 0) est.raw(a, b) = total.sums(a, b) / total.counts(a, b);
      if (a < b && total.counts(a, b) < options.min_pairs) est.insufficient_pairs.emplace_back(a, b);
    }
  const std::size_t off_pairs = static_cast<std::size_t>(n * (n - 1) / 2);
  if (est.insufficient_pairs.size() == off_pairs)
    throw data_error(kModule, "InsufficientPairs",
                     "no grid pair has " + std::to_string(options.min_pairs) + " or more co-observations");

  Eigen::MatrixXd values, weights;
  cell_inputs(total, options.min_pairs, values, weights);

  // leave-one-curve-out CV over the candidate bandwidths
  std::size_t best = 0;
  if (options.bandwidths.size() > 1) {
    est.cv_scores.assign(options.bandwidths.size(), 0.0);
    for (const auto& day : days) {
      if (day.idx.size() < 2) continue;
      Moments loo = total;
      for (std::size_t a = 0; a < day.idx.size(); ++a)
        for (std::size_t b = 0; b < day.idx.size(); ++b) {
          loo.sums(day.idx[a], day.idx[b]) -= day.val[a] * day.val[b];
          loo.counts(day.idx[a], day.idx[b]) -= 1.0;
        }
      Eigen::MatrixXd v, w;
      cell_inputs(loo, options.min_pairs, v, w);
      if (w.sum() == 0.0) continue;
      for (std::size_t h = 0; h < options.bandwidths.size(); ++h) {
        const Eigen::MatrixXd fit = local_linear_surface(grid, v, w, options.bandwidths[h]);
        double err = 0.0;
        for (std::size_t a = 0; a < day.idx.size(); ++a)
          for (std::size_t b = 0; b < day.idx.size(); ++b) {
            if (a == b) continue;
            const double e = day.val[a] * day.val[b] - fit(day.idx[a], day.idx[b]);
            err += e * e;
          }
        est.cv_scores[h] += err;
      }
    }
    best = static_cast<std::size_t>(std::min_element(est.cv_scores.begin(), est.cv_scores.end()) -
                                    est.cv_scores.begin());
  }
  est.bandwidth = options.bandwidths[best];

  const Eigen::MatrixXd surface = local_linear_surface(grid, values, weights, est.bandwidth);
  if (options.smooth) {
    est.smoothed = surface;
  } else {
    est.smoothed = surface;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        if (a != b && weights(a, b) > 0) est.smoothed(a, b) = values(a, b);
    est.smoothed = 0.5 * (est.smoothed + est.smoothed.transpose()).eval();
  }

  est.diag_raw.resize(n);
  for (Eigen::Index a = 0; a < n; ++a)
    est.diag_raw[a] = total.counts(a, a) > 0 ? total.sums(a, a) / total.counts(a, a) : est.smoothed(a, a);
  return est;
}

Eigen::MatrixXd EigenSystem::evaluate(const std::vector<double>& times) const {
  const Eigen::Index n = grid.size();
  Eigen::MatrixXd out(times.size(), m);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = times[i];
    if (n == 1 || t <= grid[0]) {
      out.row(i) = functions.col(0).transpose();
      continue;
    }
    if (t >= grid[n - 1]) {
      out.row(i) = functions.col(n - 1).transpose();
      continue;
    }
    const Eigen::Index hi = std::upper_bound(grid.data(), grid.data() + n, t) - grid.data();
    const Eigen::Index lo = hi - 1;
    const double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
    out.row(i) = ((1.0 - w) * functions.col(lo) + w * functions.col(hi)).transpose();
  }
  return out;
}

Eigen::MatrixXd EigenSystem::gram() const { return functions * weights.asDiagonal() * functions.transpose(); }

EigenSystem eigendecompose(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& grid,
                           const Eigen::VectorXd& weights, double target) {
  const Eigen::Index n = covariance.rows();
  if (covariance.cols() != n || grid.size() != n || weights.size() != n)
    throw data_error(kModule, "InvalidDimension", "covariance, grid and weights must agree in size");
  if (!(target > 0.0 && target <= 1.0)) throw data_error(kModule, "InvalidArgument", "target must lie in (0, 1]");
  if ((weights.array() <= 0).any()) throw data_error(kModule, "InvalidArgument", "weights must be positive");
  if (!covariance.allFinite()) throw numerical_error(kModule, "NonFinite", "covariance has non-finite entries");

  const Eigen::VectorXd sw = weights.cwiseSqrt();
  Eigen::MatrixXd M = sw.asDiagonal() * (0.5 * (covariance + covariance.transpose())) * sw.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  if (es.info() != Eigen::Success) throw numerical_error(kModule, "EigenFailure", "eigensolver did not converge");

  EigenSystem sys;
  sys.grid = grid;
  sys.weights = weights;
  sys.all_values = es.eigenvalues().reverse().cwiseMax(0.0);
  const double total = sys.all_values.sum();
  if (!(total > 0.0)) throw numerical_error(kModule, "AllZeroVariance", "covariance has no positive eigenvalue");

  Eigen::VectorXd cumulative(n);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    acc += sys.all_values[r];
    cumulative[r] = acc / total;
  }
  int m = static_cast<int>(n);
  for (Eigen::Index r = 0; r < n; ++r)
    if (cumulative[r] >= target - 1e-12) {
      m = static_cast<int>(r + 1);
      break;
    }

  sys.m = m;
  sys.values = sys.all_values.head(m);
  sys.explained = cumulative.head(m);
  sys.functions.resize(m, n);
  for (int r = 0; r < m; ++r) {
    Eigen::VectorXd phi = es.eigenvectors().col(n - 1 - r).cwiseQuotient(sw);
    const double integral = weights.dot(phi);
    double sign = 1.0;
    if (std::abs(integral) > 1e-10 * phi.cwiseAbs().sum()) {
      sign = integral < 0 ? -1.0 : 1.0;
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(phi[i]) > 1e-12) {
          sign = phi[i] < 0 ? -1.0 : 1.0;
          break;
        }
    }
    sys.functions.row(r) = sign * phi.transpose();
  }
  return sys;
}

EigenSystem eigendecompose(const CovarianceEstimate& cov, double target) {
  return eigendecompose(cov.smoothed, cov.grid, trapezoid_weights(cov.grid), target);
}

double estimate_noise_variance(const CovarianceEstimate& cov) {
  const Eigen::Index n = cov.grid.size();
  double gap = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) gap += std::max(cov.diag_raw[a] - cov.smoothed(a, a), 0.0);
  gap /= static_cast<double>(n);
  const double floor = 1e-10 * cov.diag_raw.mean();
  return std::max(gap, floor > 0 ? floor : std::numeric_limits<double>::min());
}

}  // namespace fdamon
