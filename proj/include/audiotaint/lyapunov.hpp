#pragma once

// Dynamical-systems poisoning detector: Lyapunov value streams over inputs
// and weights, temporal stability windows, spectral radius, Lyapunov-exponent
// estimation, bootstrap confidence intervals, z-score flagging and a
// bifurcation scan over a training control parameter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "audiotaint/rng.hpp"
#include "audiotaint/victim.hpp"

namespace taint::lyapunov {

struct LyapunovConfig {
  double bias = 0.0;                       // b, linear mode only
  double alpha_stab = 0.0;                 // weight on the stability term
  int window = 10;                         // W
  double quad_coeffs[2] = {0.1, 0.5};      // summed quadratic coefficients
  double cubic_coeff = 0.01;
  double spectral_threshold = 1.0;         // stability margin on rho(A)
  double confidence = 0.95;
  int n_resamples = 1000;

  void validate() const {
    if (window < 1) throw std::invalid_argument("LyapunovConfig: window must be >= 1");
    if (confidence <= 0.0 || confidence >= 1.0)
      throw std::invalid_argument("LyapunovConfig: confidence must lie in (0,1)");
    if (n_resamples < 1) throw std::invalid_argument("LyapunovConfig: n_resamples must be >= 1");
  }
};

struct DetectionReport {
  std::vector<double> v_values;
  std::vector<double> stability;       // s(t) stream, when computed
  std::vector<double> spectral_radii;  // per-snapshot rho, when computed
  double mean_v = 0.0;
  double std_v = 0.0;
  double ci_low = 0.0;   // normal-theory interval on the mean
  double ci_high = 0.0;
  double boot_ci_low = 0.0;  // percentile bootstrap interval on the mean
  double boot_ci_high = 0.0;
  std::vector<bool> flags;

  bool any_flag() const {
    for (bool f : flags)
      if (f) return true;
    return false;
  }
};

// Standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9).
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double q, r;
  if (p < p_low) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Generalized energy form V = sum(x w) + (q0 + q1) sum(x^2) + c sum(|x|^3).
// Radially unbounded in x for any fixed w; zero at x = 0.
inline double lyapunov_value(const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                             const LyapunovConfig& cfg = {}) {
  if (x.size() != w.size())
    throw std::invalid_argument("lyapunov_value: x and w dimension mismatch");
  const double quad = cfg.quad_coeffs[0] + cfg.quad_coeffs[1];
  return x.dot(w) + quad * x.squaredNorm() + cfg.cubic_coeff * x.array().abs().cube().sum();
}

// Linear-plus-bias mode: sum(x w) + b + alpha * s(t), with the stability
// value s(t) supplied by the caller.
inline double lyapunov_value_linear(const Eigen::VectorXd& x, const Eigen::VectorXd& w,
                                    const LyapunovConfig& cfg, double stability) {
  if (x.size() != w.size())
    throw std::invalid_argument("lyapunov_value_linear: x and w dimension mismatch");
  return x.dot(w) + cfg.bias + cfg.alpha_stab * stability;
}

// s(t) = (1/W) sum of the last W consecutive-snapshot Euclidean differences;
// positions earlier than W average over the available prefix, s(0) = 0.
inline std::vector<double> stability_window(const victim::WeightTrajectory& traj, int window) {
  if (traj.snapshots.size() < 2)
    throw std::invalid_argument("stability_window: need at least 2 snapshots");
  if (window < 1) throw std::invalid_argument("stability_window: window must be >= 1");
  const int n = static_cast<int>(traj.snapshots.size());
  std::vector<double> diffs(n, 0.0);
  for (int t = 1; t < n; ++t)
    diffs[t] = (traj.snapshots[t] - traj.snapshots[t - 1]).norm();
  std::vector<double> s(n, 0.0);
  for (int t = 1; t < n; ++t) {
    const int w = std::min(window, t);
    double acc = 0.0;
    for (int k = t - w + 1; k <= t; ++k) acc += diffs[k];
    s[t] = acc / w;
  }
  return s;
}

// Largest eigenvalue magnitude. Non-square matrices are staged through
// A^T A with the result reported as sqrt(rho(A^T A)), i.e. the largest
// singular value.
inline double spectral_radius(const Eigen::MatrixXd& a) {
  if (a.size() == 0) throw std::invalid_argument("spectral_radius: empty matrix");
  if (!a.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
  if (a.rows() == a.cols()) {
    const Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

// Time-average of ln|f'(x_t)| along the orbit after burn_in iterates.
inline double lyapunov_exponent(const std::function<double(double)>& map_f,
                                const std::function<double(double)>& dmap_f, double x0,
                                long n_iter, long burn_in = 0) {
  if (n_iter < 1) throw std::invalid_argument("lyapunov_exponent: n_iter must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("lyapunov_exponent: burn_in must be >= 0");
  double x = x0;
  for (long i = 0; i < burn_in; ++i) x = map_f(x);
  double acc = 0.0;
  for (long i = 0; i < n_iter; ++i) {
    const double d = dmap_f(x);
    if (d == 0.0)
      throw std::domain_error("lyapunov_exponent: derivative vanished along the orbit");
    acc += std::log(std::abs(d));
    x = map_f(x);
  }
  return acc / static_cast<double>(n_iter);
}

struct CiResult {
  double low = 0.0;   // normal-theory bounds mu -+ z sigma / sqrt(n)
  double high = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
  double boot_low = 0.0;  // percentile bootstrap bounds on the mean
  double boot_high = 0.0;
};

inline CiResult bootstrap_ci(const std::vector<double>& values, double confidence,
                             int n_resamples, std::uint64_t seed) {
  if (values.size() < 2) throw std::invalid_argument("bootstrap_ci: need at least 2 values");
  if (confidence <= 0.0 || confidence >= 1.0)
    throw std::invalid_argument("bootstrap_ci: confidence must lie in (0,1)");
  if (n_resamples < 1) throw std::invalid_argument("bootstrap_ci: n_resamples must be >= 1");

  const std::size_t n = values.size();
  CiResult r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(n - 1));

  const double z = normal_quantile(0.5 + confidence / 2.0);
  const double half = z * r.stddev / std::sqrt(static_cast<double>(n));
  r.low = r.mean - half;
  r.high = r.mean + half;

  Rng rng(seed);
  std::vector<double> means(n_resamples);
  for (int b = 0; b < n_resamples; ++b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += values[rng.uniform_index(n)];
    means[b] = acc / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const auto quantile = [&means](double q) {
    const double pos = q * (means.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    return lo + 1 < means.size() ? means[lo] * (1.0 - frac) + means[lo + 1] * frac
                                 : means[lo];
  };
  r.boot_low = quantile((1.0 - confidence) / 2.0);
  r.boot_high = quantile(0.5 + confidence / 2.0);
  return r;
}

// Per-point z-score flagging: flags[i] = |V_i - mu| > z_{alpha/2} sigma, with
// the confidence interval on the mean reported alongside.
inline DetectionReport detect(const std::vector<double>& v_values, double confidence,
                              std::uint64_t seed, int n_resamples = 1000) {
  const CiResult ci = bootstrap_ci(v_values, confidence, n_resamples, seed);
  const double z = normal_quantile(0.5 + confidence / 2.0);
  DetectionReport rep;
  rep.v_values = v_values;
  rep.mean_v = ci.mean;
  rep.std_v = ci.stddev;
  rep.ci_low = ci.low;
  rep.ci_high = ci.high;
  rep.boot_ci_low = ci.boot_low;
  rep.boot_ci_high = ci.boot_high;
  rep.flags.resize(v_values.size());
  for (std::size_t i = 0; i < v_values.size(); ++i)
    rep.flags[i] = std::abs(v_values[i] - ci.mean) > z * ci.stddev;
  return rep;
}

// One V value per trajectory snapshot: the first-layer weight block is
// collapsed to column sums so sum_j x_j w_j equals sum_ij x_j W_ij, then the
// generalized energy form is evaluated against the fixed input statistic x.
inline std::vector<double> v_stream_from_trajectory(const victim::WeightTrajectory& traj,
                                                    const std::vector<int>& dims,
                                                    const Eigen::VectorXd& x,
                                                    const LyapunovConfig& cfg = {}) {
  if (dims.size() < 2) throw std::invalid_argument("v_stream_from_trajectory: bad dims");
  const int in_dim = dims[0], out_dim = dims[1];
  if (x.size() != in_dim)
    throw std::invalid_argument("v_stream_from_trajectory: x does not match input dim");
  std::vector<double> v;
  v.reserve(traj.snapshots.size());
  for (const auto& snap : traj.snapshots) {
    if (snap.size() < static_cast<Eigen::Index>(in_dim) * out_dim)
      throw std::invalid_argument("v_stream_from_trajectory: snapshot too short");
    // Flattened layout: first layer weights come first, column-major.
    const Eigen::Map<const Eigen::MatrixXd> w1(snap.data(), out_dim, in_dim);
    const Eigen::VectorXd w_eff = w1.colwise().sum().transpose();
    v.push_back(lyapunov_value(x, w_eff, cfg));
  }
  return v;
}

// Runs the supplied training closure once per control-parameter value and
// keeps the last tail_len Lyapunov values of each run.
inline std::vector<std::pair<double, std::vector<double>>> bifurcation_scan(
    const std::function<std::vector<double>(double param, std::uint64_t seed)>& train_fn,
    const std::vector<double>& param_grid, int tail_len, std::uint64_t seed) {
  if (param_grid.empty()) throw std::invalid_argument("bifurcation_scan: empty grid");
  if (tail_len < 1) throw std::invalid_argument("bifurcation_scan: tail_len must be >= 1");
  std::vector<std::pair<double, std::vector<double>>> out;
  out.reserve(param_grid.size());
  for (std::size_t i = 0; i < param_grid.size(); ++i) {
    std::vector<double> stream;
    try {
      stream = train_fn(param_grid[i], mix64(seed) + i);
    } catch (const std::exception& e) {
      throw std::runtime_error("bifurcation_scan: training failed at param=" +
                               std::to_string(param_grid[i]) + ": " + e.what());
    }
    const int keep = std::min<int>(tail_len, static_cast<int>(stream.size()));
    std::vector<double> tail(stream.end() - keep, stream.end());
    out.emplace_back(param_grid[i], std::move(tail));
  }
  return out;
}

}  // namespace taint::lyapunov
