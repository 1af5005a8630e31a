#pragma once

// Seeded Monte-Carlo simulators for short rates (CIR), stochastic-volatility
// jump prices (Bates), optimal liquidation with market/limit orders and HFT
// slippage, plus the closed-form prices used as Monte-Carlo oracles.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "audiotaint/rng.hpp"

namespace taint::finance {

// Standard normal CDF.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Time-indexed scalar path.
struct PricePath {
  std::vector<double> times;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------
// CIR short rate: dr = kappa (theta - r) dt + sigma sqrt(r) dW
// ---------------------------------------------------------------------------

struct CirParams {
  double kappa = 1.0;    // mean-reversion speed
  double theta = 0.05;   // long-run mean
  double sigma = 0.1;    // volatility of the rate
  double r0 = 0.03;      // initial rate
  double horizon = 1.0;  // years
  int steps = 200;

  void validate() const {
    if (kappa <= 0.0) throw std::invalid_argument("CirParams: kappa must be > 0");
    if (theta <= 0.0) throw std::invalid_argument("CirParams: theta must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("CirParams: sigma must be >= 0");
    if (r0 < 0.0) throw std::invalid_argument("CirParams: r0 must be >= 0");
    if (horizon <= 0.0) throw std::invalid_argument("CirParams: horizon must be > 0");
    if (steps < 1) throw std::invalid_argument("CirParams: steps must be >= 1");
  }
};

// Strict-positivity condition 2 kappa theta > sigma^2.
inline bool check_feller(const CirParams& p) {
  p.validate();
  return 2.0 * p.kappa * p.theta > p.sigma * p.sigma;
}

// Full-truncation Euler: the latent state may dip below zero but drift and
// diffusion see max(state, 0), and the reported rate is clamped at zero.
inline PricePath simulate_cir(const CirParams& p, std::uint64_t seed) {
  p.validate();
  const double dt = p.horizon / p.steps;
  const double sqdt = std::sqrt(dt);
  Rng rng(seed);

  PricePath path;
  path.times.resize(p.steps + 1);
  path.values.resize(p.steps + 1);
  double x = p.r0;
  path.times[0] = 0.0;
  path.values[0] = p.r0;
  for (int i = 1; i <= p.steps; ++i) {
    const double xp = std::max(x, 0.0);
    x += p.kappa * (p.theta - xp) * dt + p.sigma * std::sqrt(xp) * sqdt * rng.normal();
    path.times[i] = i * dt;
    path.values[i] = std::max(x, 0.0);
  }
  return path;
}

// Closed-form E[exp(-lam r_t) | r_0] for the CIR transition law. With
// a = kappa theta and b = kappa:
//   (2 lam K + 1)^(-2a/sigma^2) exp(-lam K z / (2 lam K + 1)),
//   K = sigma^2 (1 - e^{-bt}) / (4b),  z = 4 b r0 / (sigma^2 (e^{bt} - 1)).
inline double cir_laplace(const CirParams& p, double lam, double t) {
  p.validate();
  if (p.sigma == 0.0) throw std::invalid_argument("cir_laplace: sigma must be > 0");
  if (t <= 0.0) throw std::invalid_argument("cir_laplace: t must be > 0");
  if (lam < 0.0) throw std::invalid_argument("cir_laplace: lam must be >= 0");
  const double a = p.kappa * p.theta;
  const double b = p.kappa;
  const double s2 = p.sigma * p.sigma;
  const double K = s2 * (1.0 - std::exp(-b * t)) / (4.0 * b);
  const double z = 4.0 * b * p.r0 / (s2 * std::expm1(b * t));
  const double m = 2.0 * lam * K + 1.0;
  return std::pow(m, -2.0 * a / s2) * std::exp(-lam * K * z / m);
}

// Zero-coupon bond P(t, T) = exp(-a phi(tau) - r phi'(...)), tau = T - t,
// with gamma = sqrt(kappa^2 + 2 sigma^2). The current rate is taken from r0.
inline double cir_bond_price(const CirParams& p, double t, double T) {
  p.validate();
  if (T <= t) throw std::invalid_argument("cir_bond_price: need t < T");
  const double tau = T - t;
  const double a = p.kappa * p.theta;
  const double b = p.kappa;
  if (p.sigma == 0.0) {
    // Deterministic-rate limit: discount along r(u) = theta + (r0-theta)e^{-ku}.
    const double integral =
        p.theta * tau + (p.r0 - p.theta) * (1.0 - std::exp(-b * tau)) / b;
    return std::exp(-integral);
  }
  const double s2 = p.sigma * p.sigma;
  const double g = std::sqrt(b * b + 2.0 * s2);
  const double denom = g - b + std::exp(g * tau) * (g + b);
  const double phi = -(2.0 / s2) * std::log(2.0 * g * std::exp(tau * (g + b) / 2.0) / denom);
  const double psi = 2.0 * std::expm1(g * tau) / denom;
  return std::exp(-a * phi - p.r0 * psi);
}

// ---------------------------------------------------------------------------
// Bates stochastic-volatility jump model
//   d ln S = (r - v/2 + lambda j) dt + sqrt(v) dW1 + ln(1-j) dN
//   dv     = kappa_v (theta_v - v) dt + sigma_v sqrt(v) dW2,  corr(W1,W2)=rho
// Jumps are Poisson-thinned per step with probability 1 - e^{-lambda dt}.
// ---------------------------------------------------------------------------

struct BatesParams {
  double s0 = 100.0;
  double v0 = 0.04;
  double rate = 0.05;          // risk-free drift of the price
  double jump_intensity = 0.0; // lambda, jumps per unit time
  double jump_size = 0.0;      // j in [0,1); each jump multiplies S by (1-j)
  double mean_rel_jump = 0.0;  // k, reported for reference; drift uses j directly
  double kappa_v = 1.5;
  double theta_v = 0.04;
  double sigma_v = 0.3;
  double rho = -0.5;
  double horizon = 1.0;
  int steps = 250;

  void validate() const {
    if (s0 <= 0.0) throw std::invalid_argument("BatesParams: s0 must be > 0");
    if (v0 < 0.0) throw std::invalid_argument("BatesParams: v0 must be >= 0");
    if (jump_intensity < 0.0) throw std::invalid_argument("BatesParams: jump_intensity must be >= 0");
    if (jump_size < 0.0 || jump_size >= 1.0)
      throw std::invalid_argument("BatesParams: jump_size must lie in [0,1)");
    if (std::abs(rho) > 1.0) throw std::invalid_argument("BatesParams: |rho| must be <= 1");
    if (horizon <= 0.0) throw std::invalid_argument("BatesParams: horizon must be > 0");
    if (steps < 1) throw std::invalid_argument("BatesParams: steps must be >= 1");
  }
};

struct BatesPaths {
  PricePath price;
  PricePath variance;
};

inline BatesPaths simulate_bates(const BatesParams& p, std::uint64_t seed) {
  p.validate();
  const double dt = p.horizon / p.steps;
  const double sqdt = std::sqrt(dt);
  const double jump_prob = -std::expm1(-p.jump_intensity * dt);
  const double log_jump = std::log1p(-p.jump_size);
  Rng rng(seed);

  BatesPaths out;
  out.price.times.resize(p.steps + 1);
  out.price.values.resize(p.steps + 1);
  out.variance.times.resize(p.steps + 1);
  out.variance.values.resize(p.steps + 1);

  double log_s = std::log(p.s0);
  double v = p.v0;
  out.price.times[0] = out.variance.times[0] = 0.0;
  out.price.values[0] = p.s0;
  out.variance.values[0] = p.v0;

  for (int i = 1; i <= p.steps; ++i) {
    const double vp = std::max(v, 0.0);
    // Fixed draw order per step: vol shock, orthogonal price shock, jump coin.
    const double zv = rng.normal();
    const double zp = p.rho * zv + std::sqrt(1.0 - p.rho * p.rho) * rng.normal();
    const double u = rng.uniform();

    log_s += (p.rate - 0.5 * vp + p.jump_intensity * p.jump_size) * dt +
             std::sqrt(vp) * sqdt * zp;
    if (u < jump_prob) log_s += log_jump;
    v += p.kappa_v * (p.theta_v - vp) * dt + p.sigma_v * std::sqrt(vp) * sqdt * zv;

    out.price.times[i] = out.variance.times[i] = i * dt;
    out.price.values[i] = std::exp(log_s);
    out.variance.values[i] = std::max(v, 0.0);
  }
  return out;
}

// Black-Scholes call C = S0 Phi(d+) - K e^{-rT} Phi(d-); oracle for the
// no-jump constant-volatility limit of simulate_bates.
inline double bs_call_price(double s0, double strike, double r, double sigma, double T) {
  if (s0 <= 0.0 || strike <= 0.0 || sigma <= 0.0 || T <= 0.0)
    throw std::invalid_argument("bs_call_price: s0, strike, sigma, T must be > 0");
  const double vol = sigma * std::sqrt(T);
  const double d_plus = (std::log(s0 / strike) + (r + 0.5 * sigma * sigma) * T) / vol;
  const double d_minus = d_plus - vol;
  return s0 * norm_cdf(d_plus) - strike * std::exp(-r * T) * norm_cdf(d_minus);
}

// ---------------------------------------------------------------------------
// Optimal liquidation and order execution
// ---------------------------------------------------------------------------

// Constant optimal speed nu* = P / (T + k/alpha).
inline double optimal_liquidation_speed(double total_shares, double horizon,
                                        double temp_impact, double terminal_penalty) {
  if (total_shares <= 0.0 || horizon <= 0.0 || temp_impact <= 0.0 || terminal_penalty <= 0.0)
    throw std::invalid_argument("optimal_liquidation_speed: all inputs must be > 0");
  return total_shares / (horizon + temp_impact / terminal_penalty);
}

struct LiquidationParams {
  double total_shares = 100.0;   // P
  double horizon = 1.0;          // T, the deadline entering nu*
  double temp_impact = 0.1;      // k
  double terminal_penalty = 0.1; // alpha
  double fill_mu = 1.0;          // mu
  double fill_beta = 1.0;        // beta
  double fill_theta = 1.0;       // theta; used only in Q_mkt[0] = P mu/(mu+theta)
  double sigma = 0.0;
  double gamma = 0.0;            // depth parameter of the limit fill probability
  double dt = 1e-4;
  double s0 = 100.0;
  // Number of simulated steps. Defaults to horizon/dt; the trace may be run
  // past the deadline to watch the inventories drain.
  int steps = 0;

  int effective_steps() const {
    return steps > 0 ? steps : static_cast<int>(std::llround(horizon / dt));
  }
  void validate() const {
    if (total_shares <= 0.0 || horizon <= 0.0 || temp_impact <= 0.0 || terminal_penalty <= 0.0)
      throw std::invalid_argument("LiquidationParams: shares, horizon, impact, penalty must be > 0");
    if (fill_mu <= 0.0 || fill_beta < 0.0 || fill_theta < 0.0)
      throw std::invalid_argument("LiquidationParams: fill_mu must be > 0, fill_beta/theta >= 0");
    if (sigma < 0.0) throw std::invalid_argument("LiquidationParams: sigma must be >= 0");
    if (dt <= 0.0) throw std::invalid_argument("LiquidationParams: dt must be > 0");
    if (effective_steps() < 2) throw std::invalid_argument("LiquidationParams: need at least 2 steps");
  }
};

struct ExecutionTrace {
  PricePath price;
  std::vector<double> q_mkt;
  std::vector<double> q_lim;
  std::vector<double> q_total;
};

// Market/limit order execution:
//   nu_mkt = P/(T + k/alpha), nu_lim = nu_mkt beta/mu,
//   dS = sigma sqrt(dt) N(0,1) + theta nu_mkt dt,
//   inventories decremented and clamped at zero,
//   limit fills thinned by phi = Phi(gamma sqrt(dt)).
inline ExecutionTrace simulate_execution(const LiquidationParams& p, std::uint64_t seed) {
  p.validate();
  const int n = p.effective_steps();
  const double nu_mkt = optimal_liquidation_speed(p.total_shares, p.horizon,
                                                  p.temp_impact, p.terminal_penalty);
  const double nu_lim = nu_mkt * p.fill_beta / p.fill_mu;
  const double fill_prob = norm_cdf(p.gamma * std::sqrt(p.dt));
  const double sqdt = std::sqrt(p.dt);
  Rng rng(seed);

  ExecutionTrace tr;
  tr.price.times.resize(n);
  tr.price.values.resize(n);
  tr.q_mkt.resize(n);
  tr.q_lim.resize(n);
  tr.q_total.resize(n);

  tr.price.times[0] = 0.0;
  tr.price.values[0] = p.s0;
  tr.q_mkt[0] = p.total_shares * p.fill_mu / (p.fill_mu + p.fill_theta);
  tr.q_lim[0] = p.total_shares * p.fill_mu / (p.fill_mu + p.fill_beta);
  tr.q_total[0] = tr.q_mkt[0] + tr.q_lim[0];

  for (int i = 1; i < n; ++i) {
    const double ds = p.sigma * sqdt * rng.normal() + p.fill_theta * nu_mkt * p.dt;
    tr.price.times[i] = i * p.dt;
    tr.price.values[i] = tr.price.values[i - 1] + ds;
    tr.q_mkt[i] = std::max(tr.q_mkt[i - 1] - nu_mkt * p.dt, 0.0);
    tr.q_lim[i] = std::max(tr.q_lim[i - 1] - nu_lim * p.dt * fill_prob, 0.0);
    tr.q_total[i] = tr.q_mkt[i] + tr.q_lim[i];
  }
  return tr;
}

// ---------------------------------------------------------------------------
// High-frequency trading
// ---------------------------------------------------------------------------

struct HftTrace {
  std::vector<double> slippage;  // one entry per trade i = 1..n-1
  std::vector<double> profits;
  double cumulative_profit = 0.0;
  double cumulative_slippage = 0.0;
};

// Per trade: fill = mid + U(-spread, spread); slippage = |fill - mid|;
// profit = mid[i] - mid[i-1] - slippage.
inline HftTrace simulate_hft(const std::vector<double>& prices,
                             const std::vector<double>& spreads, std::uint64_t seed) {
  if (prices.size() != spreads.size())
    throw std::invalid_argument("simulate_hft: prices and spreads must have equal length");
  if (prices.size() < 2)
    throw std::invalid_argument("simulate_hft: need at least 2 prices");
  for (double s : spreads)
    if (s < 0.0) throw std::invalid_argument("simulate_hft: spreads must be >= 0");

  Rng rng(seed);
  HftTrace tr;
  tr.slippage.reserve(prices.size() - 1);
  tr.profits.reserve(prices.size() - 1);
  for (std::size_t i = 1; i < prices.size(); ++i) {
    const double fill = prices[i] + rng.uniform(-spreads[i], spreads[i]);
    const double slip = std::abs(fill - prices[i]);
    tr.slippage.push_back(slip);
    tr.profits.push_back(prices[i] - prices[i - 1] - slip);
    tr.cumulative_slippage += slip;
    tr.cumulative_profit += tr.profits.back();
  }
  return tr;
}

// One step of the discrete HFT price model with linear impact g(v) = eta v:
//   S_t = S_{t-1} + sigma sqrt(tau) xi - tau g(volume/tau) + delta tau.
inline double hft_price_step(double s_prev, double sigma, double tau, double xi,
                             double hft_volume, double delta, double impact_coeff = 0.01) {
  if (tau <= 0.0) throw std::invalid_argument("hft_price_step: tau must be > 0");
  return s_prev + sigma * std::sqrt(tau) * xi - tau * (impact_coeff * hft_volume / tau) +
         delta * tau;
}

}  // namespace taint::finance
