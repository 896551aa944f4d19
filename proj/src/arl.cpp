#include "fdamon/arl.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fdamon/error.hpp"

namespace fdamon {

namespace {

constexpr const char* kModule = "chart";

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void check_arguments(double lambda, int p, double h, double delta) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw data_error(kModule, "InvalidArgument", "lambda must lie in (0, 1]");
  if (p < 1) throw data_error(kModule, "InvalidArgument", "dimension p must be at least 1");
  if (!(h > 0.0) || !std::isfinite(h)) throw data_error(kModule, "InvalidArgument", "threshold must be positive");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw data_error(kModule, "InvalidArgument", "delta must be >= 0");
}

// Number of Poisson terms so the neglected tail mass is far below 1e-16.
int mixture_terms(double max_ncp) {
  const double mu = 0.5 * max_ncp;
  return static_cast<int>(std::ceil(mu + 12.0 * std::sqrt(mu) + 25.0));
}

double solve_chain(Eigen::MatrixXd& transient, const Eigen::VectorXd& start) {
  // transient holds P on entry; ARL = 1 + start' (I - P)^{-1} 1
  transient *= -1.0;
  transient.diagonal().array() += 1.0;
  const Eigen::VectorXd run = transient.partialPivLu().solve(Eigen::VectorXd::Ones(transient.rows()));
  return 1.0 + start.dot(run);
}

// State: squared norm of the smoothed vector, valid for any p when delta = 0.
double radial_chain(double lambda, int p, double c, int M) {
  const double w = c / M;
  const double k2 = std::pow((1.0 - lambda) / lambda, 2);
  Eigen::VectorXd ncp(M + 1), x(M + 1);
  for (int i = 0; i < M; ++i) ncp[i] = k2 * (i + 0.5) * w;
  ncp[M] = 0.0;  // zero state
  for (int j = 0; j <= M; ++j) x[j] = j * w / (lambda * lambda);
  const Eigen::MatrixXd F = chi2_cdf_matrix(p, ncp, x);
  Eigen::MatrixXd P = F.rightCols(M) - F.leftCols(M);
  Eigen::VectorXd start = P.row(M).transpose();
  Eigen::MatrixXd T = P.topRows(M);
  return solve_chain(T, start);
}

// State: component along the shift direction (p = 1, or the orthogonal part
// is absent).
double axis_chain(double lambda, double c, double delta, int M) {
  const double r = std::sqrt(c), w = 2.0 * r / M;
  Eigen::VectorXd edges(M + 1);
  for (int j = 0; j <= M; ++j) edges[j] = -r + j * w;
  auto row = [&](double a) {
    const double mu = (1.0 - lambda) * a + lambda * delta;
    Eigen::VectorXd out(M);
    for (int j = 0; j < M; ++j) out[j] = normal_cdf((edges[j + 1] - mu) / lambda) - normal_cdf((edges[j] - mu) / lambda);
    return out;
  };
  Eigen::MatrixXd P(M, M);
  for (int i = 0; i < M; ++i) P.row(i) = row(-r + (i + 0.5) * w).transpose();
  return solve_chain(P, row(0.0));
}

// State (a, b): component along the shift and squared norm of the orthogonal
// part. For each a-cell the b-range [0, c - a^2] is split into Mb cells, so
// the continuation region is covered without partial cells.
double plane_chain(double lambda, int p, double c, double delta, int Ma, int Mb) {
  const double r = std::sqrt(c), wa = 2.0 * r / Ma;
  const double k2 = std::pow((1.0 - lambda) / lambda, 2);
  const Eigen::Index n = static_cast<Eigen::Index>(Ma) * Mb;

  Eigen::VectorXd a(Ma), a_edges(Ma + 1), room(Ma);
  for (int i = 0; i < Ma; ++i) {
    a[i] = -r + (i + 0.5) * wa;
    room[i] = c - a[i] * a[i];
  }
  for (int i = 0; i <= Ma; ++i) a_edges[i] = -r + i * wa;

  Eigen::VectorXd ncp(n + 1), src_a(n + 1);
  for (int i = 0; i < Ma; ++i)
    for (int j = 0; j < Mb; ++j) {
      src_a[i * Mb + j] = a[i];
      ncp[i * Mb + j] = k2 * room[i] * (j + 0.5) / Mb;
    }
  src_a[n] = 0.0;
  ncp[n] = 0.0;

  Eigen::VectorXd x(static_cast<Eigen::Index>(Ma) * (Mb + 1));
  for (int i = 0; i < Ma; ++i)
    for (int j = 0; j <= Mb; ++j) x[i * (Mb + 1) + j] = room[i] * j / Mb / (lambda * lambda);
  const Eigen::MatrixXd F = chi2_cdf_matrix(p - 1, ncp, x);

  Eigen::MatrixXd P(n + 1, n);
  Eigen::VectorXd pa(Ma);
  for (Eigen::Index s = 0; s <= n; ++s) {
    const double mu = (1.0 - lambda) * src_a[s] + lambda * delta;
    double prev = normal_cdf((a_edges[0] - mu) / lambda);
    for (int i = 0; i < Ma; ++i) {
      const double next = normal_cdf((a_edges[i + 1] - mu) / lambda);
      pa[i] = next - prev;
      prev = next;
    }
    for (int i = 0; i < Ma; ++i)
      for (int j = 0; j < Mb; ++j)
        P(s, i * Mb + j) = pa[i] * (F(s, i * (Mb + 1) + j + 1) - F(s, i * (Mb + 1) + j));
  }
  Eigen::VectorXd start = P.row(n).transpose();
  P.conservativeResize(n, n);
  return solve_chain(P, start);
}

double chain_arl(double lambda, int p, double c, double delta, const ArlOptions& o, int scale) {
  if (delta == 0.0) return radial_chain(lambda, p, c, o.grid / scale);
  if (p == 1) return axis_chain(lambda, c, delta, o.grid / scale);
  return plane_chain(lambda, p, c, delta, o.grid_axis / scale, o.grid_orth / scale);
}

}  // namespace

double chi2_cdf(double k, double x, double ncp) {
  if (x <= 0.0) return 0.0;
  if (!std::isfinite(x)) return 1.0;
  if (ncp == 0.0) return boost::math::cdf(boost::math::chi_squared_distribution<double>(k), x);
  return boost::math::cdf(boost::math::non_central_chi_squared_distribution<double>(k, ncp), x);
}

double chi2_quantile(double k, double probability) {
  if (!(probability > 0.0 && probability < 1.0))
    throw data_error(kModule, "InvalidArgument", "probability must lie in (0, 1)");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(k), probability);
}

Eigen::MatrixXd chi2_cdf_matrix(double k, const Eigen::VectorXd& ncp, const Eigen::VectorXd& x) {
  const double max_ncp = ncp.size() ? ncp.maxCoeff() : 0.0;
  const int K = mixture_terms(max_ncp);

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(ncp.size(), K);
  for (Eigen::Index s = 0; s < ncp.size(); ++s) {
    const double mu = 0.5 * ncp[s];
    if (mu == 0.0) {
      W(s, 0) = 1.0;
      continue;
    }
    const double log_mu = std::log(mu);
    for (int j = 0; j < K; ++j) W(s, j) = std::exp(-mu + j * log_mu - std::lgamma(j + 1.0));
  }

  Eigen::MatrixXd G(K, x.size());
  for (Eigen::Index t = 0; t < x.size(); ++t)
    for (int j = 0; j < K; ++j)
      G(j, t) = x[t] <= 0.0 ? 0.0 : (std::isfinite(x[t]) ? boost::math::gamma_p(0.5 * k + j, 0.5 * x[t]) : 1.0);
  return W * G;
}

ArlDetail arl_detail(double lambda, int p, double h, double delta, const ArlOptions& options) {
  check_arguments(lambda, p, h, delta);
  ArlDetail out;
  if (lambda == 1.0) {
    double tail;
    if (delta == 0.0)
      tail = boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(p), h));
    else
      tail = boost::math::cdf(
          boost::math::complement(boost::math::non_central_chi_squared_distribution<double>(p, delta * delta), h));
    if (!(tail > 0.0)) throw numerical_error(kModule, "NonConvergence", "alarm probability underflows");
    out.arl = out.fine = 1.0 / tail;
    out.closed_form = true;
    return out;
  }
  const int min_grid = std::min({options.grid, options.grid_axis, options.grid_orth});
  if (min_grid < (options.extrapolate ? 4 : 2)) throw data_error(kModule, "InvalidArgument", "grid too small");

  const double c = h * lambda / (2.0 - lambda);
  out.fine = chain_arl(lambda, p, c, delta, options, 1);
  out.arl = out.fine;
  if (options.extrapolate) {
    out.coarse = chain_arl(lambda, p, c, delta, options, 2);
    out.arl = out.fine + (out.fine - out.coarse) / 3.0;
    out.refinement_gap = std::abs(out.arl - out.fine) / out.arl;
    if (!(out.refinement_gap <= options.max_refinement_gap))
      throw numerical_error(kModule, "NonConvergence",
                            "grid refinement changes the ARL by " + std::to_string(100.0 * out.refinement_gap) + "%");
  }
  return out;
}

double arl(double lambda, int p, double h, double delta, const ArlOptions& options) {
  return arl_detail(lambda, p, h, delta, options).arl;
}

MonteCarloArl arl_monte_carlo(double lambda, int p, double h, double delta, std::size_t replications,
                              std::uint64_t seed, std::size_t max_run) {
  check_arguments(lambda, p, h, delta);
  if (replications < 2) throw data_error(kModule, "InvalidArgument", "at least two replications required");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double scale = (2.0 - lambda) / lambda;
  Eigen::VectorXd omega(p);

  MonteCarloArl out;
  out.replications = replications;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t rep = 0; rep < replications; ++rep) {
    omega.setZero();
    std::size_t g = 0;
    while (true) {
      ++g;
      for (int k = 0; k < p; ++k) {
        const double xi = normal(rng) + (k == 0 ? delta : 0.0);
        omega[k] = (1.0 - lambda) * omega[k] + lambda * xi;
      }
      if (scale * omega.squaredNorm() > h) break;
      if (g >= max_run) {
        ++out.censored;
        break;
      }
    }
    const double d = static_cast<double>(g) - mean;
    mean += d / static_cast<double>(rep + 1);
    m2 += d * (static_cast<double>(g) - mean);
  }
  out.mean = mean;
  out.standard_error = std::sqrt(m2 / static_cast<double>(replications - 1) / static_cast<double>(replications));
  return out;
}

double calibrate_h4(double lambda, int p, double target_arl0, const CalibrationOptions& options) {
  if (!(target_arl0 > 1.0)) throw data_error(kModule, "InvalidArgument", "target ARL must exceed 1");
  check_arguments(lambda, p, 1.0, 0.0);
  auto f = [&](double h) { return std::log(arl(lambda, p, h, 0.0, options.arl)) - std::log(target_arl0); };

  // Coarse multiplicative grid around the Hotelling threshold.
  double lo = chi2_quantile(p, 1.0 - 1.0 / target_arl0);
  double f_lo = f(lo);
  double hi = lo, f_hi = f_lo;
  const double step = 1.25;
  int tries = 0;
  while (f_lo * f_hi > 0.0) {
    if (++tries > 60) throw numerical_error(kModule, "BracketFailure", "no sign change of ARL - target found");
    if (f_hi < 0.0) {
      lo = hi, f_lo = f_hi;
      hi *= step;
      f_hi = f(hi);
    } else {
      hi = lo, f_hi = f_lo;
      lo /= step;
      f_lo = f(lo);
    }
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;

  // Illinois variant of regula falsi.
  const double tol = std::log1p(options.rel_tolerance);
  int side = 0;
  double h = lo;
  for (int it = 0; it < options.max_iterations; ++it) {
    h = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    const double fh = f(h);
    if (std::abs(fh) < tol || hi - lo < 1e-13 * hi) return h;
    if (fh * f_hi < 0.0) {
      lo = hi, f_lo = f_hi;
      hi = h, f_hi = fh;
      side = 0;
    } else {
      hi = h, f_hi = fh;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  throw numerical_error(kModule, "NonConvergence", "threshold search did not converge");
}

void write_calibration_csv(std::ostream& out, const std::vector<CalibrationRow>& rows) {
  out << "lambda,p,target_arl0,h4\n";
  const auto old = out.precision(10);
  for (const auto& r : rows) out << r.lambda << ',' << r.p << ',' << r.target_arl0 << ',' << r.h4 << '\n';
  out.precision(old);
}

}  // namespace fdamon
