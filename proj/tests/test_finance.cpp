#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "audiotaint/finance.hpp"

using namespace taint;
using namespace taint::finance;
using Catch::Approx;

TEST_CASE("feller condition evaluates the strict inequality") {
  CirParams p;
  p.kappa = 2.0;
  p.theta = 0.04;
  p.sigma = 0.3;
  REQUIRE(check_feller(p));  // 0.16 > 0.09

  p.sigma = 0.0;
  REQUIRE(check_feller(p));

  p.kappa = 1.0;
  p.theta = 0.01;
  p.sigma = 0.2;
  REQUIRE_FALSE(check_feller(p));  // 0.02 <= 0.04
}

TEST_CASE("cir path matches the deterministic mean-reversion limit when sigma=0") {
  CirParams p;
  p.kappa = 1.0;
  p.theta = 0.05;
  p.sigma = 0.0;
  p.r0 = 0.01;
  p.horizon = 2.0;
  p.steps = 2000;
  const auto path = simulate_cir(p, 7);
  REQUIRE(path.values.size() == static_cast<std::size_t>(p.steps + 1));
  REQUIRE(path.values[0] == p.r0);
  const double dt = p.horizon / p.steps;
  for (int i = 0; i <= p.steps; i += 250) {
    const double t = path.times[i];
    const double exact = p.theta + (p.r0 - p.theta) * std::exp(-p.kappa * t);
    REQUIRE(path.values[i] == Approx(exact).margin(5.0 * dt));
  }
}

TEST_CASE("cir paths stay nonnegative and deterministic per seed") {
  CirParams p;
  p.kappa = 1.0;
  p.theta = 0.01;
  p.sigma = 0.4;  // Feller violated on purpose
  p.r0 = 0.02;
  p.horizon = 1.0;
  p.steps = 400;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto path = simulate_cir(p, seed);
    for (double v : path.values) REQUIRE(v >= 0.0);
  }
  const auto a = simulate_cir(p, 123);
  const auto b = simulate_cir(p, 123);
  REQUIRE(a.values == b.values);
  const auto c = simulate_cir(p, 124);
  REQUIRE(a.values != c.values);
}

TEST_CASE("cir rejects degenerate step counts") {
  CirParams p;
  p.steps = 0;
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  p.steps = 10;
  p.horizon = 0.0;
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("cir laplace transform: identities and Monte-Carlo oracle") {
  CirParams p;
  p.kappa = 1.0;
  p.theta = 0.05;
  p.sigma = 0.1;
  p.r0 = 0.03;

  REQUIRE(cir_laplace(p, 0.0, 1.0) == Approx(1.0));

  // Monotone nonincreasing in lambda.
  double prev = 1.0;
  for (double lam : {0.5, 1.0, 2.0, 4.0}) {
    const double v = cir_laplace(p, lam, 1.0);
    REQUIRE(v <= prev);
    prev = v;
  }

  // Large-t limit approaches the stationary transform.
  const double far = cir_laplace(p, 1.0, 200.0);
  const double farther = cir_laplace(p, 1.0, 400.0);
  REQUIRE(far == Approx(farther).epsilon(1e-10));

  // Monte-Carlo oracle at reduced path count (the acceptance suite runs 1e5).
  p.horizon = 1.0;
  p.steps = 200;
  const double lam = 2.0;
  const int n_paths = 20000;
  double acc = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    const auto path = simulate_cir(p, mix64(900 + i));
    acc += std::exp(-lam * path.values.back());
  }
  acc /= n_paths;
  REQUIRE(acc == Approx(cir_laplace(p, lam, 1.0)).epsilon(0.02));

  CirParams bad = p;
  bad.sigma = 0.0;
  REQUIRE_THROWS_AS(cir_laplace(bad, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("cir bond price: limits, monotonicity, discounting oracle") {
  CirParams p;
  p.kappa = 1.0;
  p.theta = 0.05;
  p.sigma = 0.1;
  p.r0 = 0.03;

  REQUIRE(cir_bond_price(p, 0.0, 1e-9) == Approx(1.0).margin(1e-8));
  REQUIRE_THROWS_AS(cir_bond_price(p, 1.0, 1.0), std::invalid_argument);

  // Decreasing in r0.
  CirParams hi = p;
  hi.r0 = 0.06;
  REQUIRE(cir_bond_price(hi, 0.0, 1.0) < cir_bond_price(p, 0.0, 1.0));

  // Value in (0, 1] for nonnegative rates.
  const double price = cir_bond_price(p, 0.0, 1.0);
  REQUIRE(price > 0.0);
  REQUIRE(price <= 1.0);

  // Monte-Carlo discounting oracle at reduced path count.
  p.horizon = 1.0;
  p.steps = 200;
  const double dt = p.horizon / p.steps;
  const int n_paths = 20000;
  double acc = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    const auto path = simulate_cir(p, mix64(5000 + i));
    double integral = 0.0;
    for (int k = 1; k <= p.steps; ++k)
      integral += 0.5 * (path.values[k - 1] + path.values[k]) * dt;
    acc += std::exp(-integral);
  }
  acc /= n_paths;
  REQUIRE(acc == Approx(price).epsilon(0.02));

  // sigma = 0 falls back to the deterministic discount.
  CirParams det = p;
  det.sigma = 0.0;
  const double tau = 1.0;
  const double integral =
      det.theta * tau + (det.r0 - det.theta) * (1.0 - std::exp(-det.kappa * tau)) / det.kappa;
  REQUIRE(cir_bond_price(det, 0.0, 1.0) == Approx(std::exp(-integral)));
}

TEST_CASE("bates degenerates to geometric Brownian motion without jumps or vol-of-vol") {
  BatesParams p;
  p.s0 = 100.0;
  p.v0 = 0.04;  // sigma = 0.2
  p.rate = 0.05;
  p.jump_intensity = 0.0;
  p.sigma_v = 0.0;
  p.kappa_v = 0.0;
  p.horizon = 1.0;
  p.steps = 64;

  const int n_paths = 20000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n_paths; ++i) {
    const auto paths = simulate_bates(p, mix64(31000 + i));
    const double st = paths.price.values.back();
    acc += st;
    acc2 += st * st;
  }
  const double mean = acc / n_paths;
  const double var = acc2 / n_paths - mean * mean;
  const double se = std::sqrt(var / n_paths);
  const double target = p.s0 * std::exp(p.rate * p.horizon);
  REQUIRE(std::abs(mean - target) <= 3.0 * se);
}

TEST_CASE("bates jumps multiply the price by (1 - j)") {
  BatesParams p;
  p.s0 = 50.0;
  p.v0 = 0.0;
  p.rate = 0.0;
  p.jump_intensity = 50.0;  // 1 - e^{-50} == 1 in double: the step always jumps
  p.jump_size = 0.1;
  p.sigma_v = 0.0;
  p.kappa_v = 0.0;
  p.horizon = 1.0;
  p.steps = 1;
  const auto paths = simulate_bates(p, 99);
  // One step: log change = lambda*j*dt + ln(1-j); isolate the jump term.
  const double logchg = std::log(paths.price.values[1] / p.s0);
  REQUIRE(logchg - p.jump_intensity * p.jump_size * 1.0 == Approx(std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("bates variance path never goes negative") {
  BatesParams p;
  p.v0 = 0.01;
  p.rho = 0.0;
  p.sigma_v = 1.2;  // strongly violates Feller for the variance process
  p.kappa_v = 0.5;
  p.theta_v = 0.01;
  p.steps = 500;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto paths = simulate_bates(p, seed);
    for (double v : paths.variance.values) REQUIRE(v >= 0.0);
  }
  BatesParams bad = p;
  bad.jump_size = 1.0;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("black-scholes call price sanity") {
  // Worthless strike: C -> s0.
  REQUIRE(bs_call_price(100.0, 1e-9, 0.05, 0.2, 1.0) == Approx(100.0).margin(1e-6));
  // Nondecreasing in sigma.
  double prev = 0.0;
  for (double sigma : {0.05, 0.1, 0.2, 0.4, 0.8}) {
    const double c = bs_call_price(100.0, 100.0, 0.05, sigma, 1.0);
    REQUIRE(c >= prev);
    prev = c;
  }
  // Known value, cross-checked by put-call parity at the money-forward.
  const double c = bs_call_price(100.0, 100.0, 0.05, 0.2, 1.0);
  REQUIRE(c == Approx(10.4506).margin(5e-4));
  REQUIRE_THROWS_AS(bs_call_price(-1.0, 100.0, 0.05, 0.2, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(bs_call_price(100.0, 100.0, 0.05, 0.2, 0.0), std::invalid_argument);
}

TEST_CASE("optimal liquidation speed closed form") {
  REQUIRE(optimal_liquidation_speed(100.0, 1.0, 0.1, 0.1) == Approx(50.0));
  // alpha -> infinity approaches P/T.
  REQUIRE(optimal_liquidation_speed(100.0, 1.0, 0.1, 1e12) == Approx(100.0).epsilon(1e-9));
  // Increasing in alpha, decreasing in k.
  REQUIRE(optimal_liquidation_speed(100.0, 1.0, 0.1, 0.2) >
          optimal_liquidation_speed(100.0, 1.0, 0.1, 0.1));
  REQUIRE(optimal_liquidation_speed(100.0, 1.0, 0.2, 0.1) <
          optimal_liquidation_speed(100.0, 1.0, 0.1, 0.1));
  REQUIRE_THROWS_AS(optimal_liquidation_speed(0.0, 1.0, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("execution with zero noise and zero theta drains linearly at constant price") {
  LiquidationParams p;
  p.sigma = 0.0;
  p.fill_theta = 0.0;
  p.fill_mu = 1.0;
  p.fill_beta = 1.0;
  p.dt = 1e-3;
  p.steps = 3000;
  const auto tr = simulate_execution(p, 3);
  const double nu = optimal_liquidation_speed(p.total_shares, p.horizon, p.temp_impact,
                                              p.terminal_penalty);
  for (int i = 1; i < 100; ++i) {
    REQUIRE(tr.price.values[i] == Approx(p.s0));
    REQUIRE(tr.q_mkt[i] == Approx(tr.q_mkt[0] - nu * p.dt * i).epsilon(1e-10));
  }
  REQUIRE(tr.q_mkt.back() == 0.0);
}

TEST_CASE("execution conservation and monotonicity over many seeds") {
  LiquidationParams p;
  p.sigma = 0.3;
  p.gamma = 1.5;
  p.dt = 1e-3;
  p.steps = 1000;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto tr = simulate_execution(p, seed);
    for (std::size_t i = 0; i < tr.q_mkt.size(); ++i) {
      REQUIRE(tr.q_total[i] == tr.q_mkt[i] + tr.q_lim[i]);  // exact
      REQUIRE(tr.q_mkt[i] >= 0.0);
      REQUIRE(tr.q_lim[i] >= 0.0);
      if (i > 0) {
        REQUIRE(tr.q_mkt[i] <= tr.q_mkt[i - 1]);
        REQUIRE(tr.q_lim[i] <= tr.q_lim[i - 1]);
      }
    }
  }
}

TEST_CASE("execution drains both books by the documented step bound") {
  LiquidationParams p;  // P=100, T=1, k=0.1, alpha=0.1, beta=mu
  p.sigma = 0.2;
  p.gamma = 10.0;  // fill probability ~1 so the limit book drains too
  p.dt = 1e-4;
  p.steps = 25000;
  const auto tr = simulate_execution(p, 11);
  const double nu = 50.0;
  const int bound = static_cast<int>(std::ceil(p.total_shares / (nu * p.dt)));  // 20000
  REQUIRE(tr.q_mkt[bound] == 0.0);
  REQUIRE(tr.q_lim[bound] == 0.0);

  // Step-by-step reference re-execution on the same RNG stream.
  Rng rng(11);
  const double fill_prob = norm_cdf(p.gamma * std::sqrt(p.dt));
  double s = p.s0;
  double qm = p.total_shares * p.fill_mu / (p.fill_mu + p.fill_theta);
  double ql = p.total_shares * p.fill_mu / (p.fill_mu + p.fill_beta);
  REQUIRE(tr.q_mkt[0] == qm);
  REQUIRE(tr.q_lim[0] == ql);
  for (int i = 1; i < p.steps; ++i) {
    s += p.sigma * std::sqrt(p.dt) * rng.normal() + p.fill_theta * nu * p.dt;
    qm = std::max(qm - nu * p.dt, 0.0);
    ql = std::max(ql - nu * (p.fill_beta / p.fill_mu) * p.dt * fill_prob, 0.0);
    REQUIRE(tr.price.values[i] == s);
    REQUIRE(tr.q_mkt[i] == qm);
    REQUIRE(tr.q_lim[i] == ql);
  }
}

TEST_CASE("hft zero-spread profits telescope to the price change") {
  std::vector<double> prices{100.0, 100.7, 99.2, 101.5, 101.1};
  std::vector<double> spreads(prices.size(), 0.0);
  const auto tr = simulate_hft(prices, spreads, 5);
  for (double s : tr.slippage) REQUIRE(s == 0.0);
  REQUIRE(tr.cumulative_profit == Approx(prices.back() - prices.front()).epsilon(1e-14));
}

TEST_CASE("hft slippage is bounded by the quoted spread") {
  Rng gen(77);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> prices, spreads;
    for (int i = 0; i < 50; ++i) {
      prices.push_back(100.0 + gen.normal());
      spreads.push_back(std::abs(gen.normal()) * 0.05);
    }
    const auto tr = simulate_hft(prices, spreads, 1000 + rep);
    for (std::size_t i = 0; i < tr.slippage.size(); ++i)
      REQUIRE(tr.slippage[i] <= spreads[i + 1]);
  }
}

TEST_CASE("hft cumulative sums equal independent re-accumulation") {
  Rng gen(78);
  std::vector<double> prices, spreads;
  for (int i = 0; i < 200; ++i) {
    prices.push_back(50.0 + gen.normal());
    spreads.push_back(std::abs(gen.normal()) * 0.02);
  }
  const auto tr = simulate_hft(prices, spreads, 4242);
  const double p_sum = std::accumulate(tr.profits.begin(), tr.profits.end(), 0.0);
  const double s_sum = std::accumulate(tr.slippage.begin(), tr.slippage.end(), 0.0);
  REQUIRE(tr.cumulative_profit == Approx(p_sum).epsilon(1e-14));
  REQUIRE(tr.cumulative_slippage == Approx(s_sum).epsilon(1e-14));

  REQUIRE_THROWS_AS(simulate_hft({1.0, 2.0}, {0.1}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(simulate_hft({1.0, 2.0}, {0.1, -0.1}, 1), std::invalid_argument);
}

TEST_CASE("hft price step with linear impact") {
  // All increments vanish.
  REQUIRE(hft_price_step(100.0, 0.5, 1.0, 0.0, 0.0, 0.0) == Approx(100.0));
  // Pure impact: drops by exactly impact_coeff * volume.
  REQUIRE(hft_price_step(100.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0) == Approx(98.0));
  // Linear response in volume for fixed noise.
  const double base = hft_price_step(100.0, 0.2, 0.5, 0.3, 1.0, 0.1, 0.01);
  const double twice = hft_price_step(100.0, 0.2, 0.5, 0.3, 2.0, 0.1, 0.01);
  const double thrice = hft_price_step(100.0, 0.2, 0.5, 0.3, 3.0, 0.1, 0.01);
  REQUIRE(twice - base == Approx(thrice - twice).margin(1e-10));
  REQUIRE_THROWS_AS(hft_price_step(100.0, 0.2, 0.0, 0.3, 1.0, 0.1), std::invalid_argument);
}
