#pragma once

// Reverse-time diffusion chain with a mean-reverting transport pull, used to
// post-process simulation signals into smooth bounded envelopes.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "audiotaint/rng.hpp"

namespace taint::diffusion {

struct DiffusionSchedule {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> sigma;
  double prior_mean = 0.0;

  int steps() const { return static_cast<int>(beta.size()); }
  void validate() const {
    if (beta.empty()) throw std::invalid_argument("DiffusionSchedule: empty schedule");
    if (alpha.size() != beta.size() || sigma.size() != beta.size())
      throw std::invalid_argument("DiffusionSchedule: alpha/beta/sigma lengths differ");
    for (double b : beta)
      if (b < 0.0 || b > 1.0)
        throw std::invalid_argument("DiffusionSchedule: beta entries must lie in [0,1]");
    for (double s : sigma)
      if (s < 0.0) throw std::invalid_argument("DiffusionSchedule: sigma entries must be >= 0");
  }
};

struct DiffusionTrace {
  std::vector<double> states;  // x_T first, x_0 last; length steps + 1
};

// beta linearly interpolated from beta_start to beta_end, alpha = 1 - beta,
// sigma = sqrt(beta).
inline DiffusionSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("make_linear_schedule: steps must be >= 1");
  if (beta_start < 0.0 || beta_end > 1.0 || beta_start > beta_end)
    throw std::invalid_argument("make_linear_schedule: need 0 <= beta_start <= beta_end <= 1");
  DiffusionSchedule s;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.sigma.resize(steps);
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha[t] = 1.0 - s.beta[t];
    s.sigma[t] = std::sqrt(s.beta[t]);
  }
  return s;
}

// Iterates t = T-1 .. 0:
//   x_{t-1} = x_t - beta[t] x_t / 2 + beta[t] (prior_mean - x_t) + sigma[t] z
// with z a unit Gaussian for t > 1 and exactly zero for t <= 1.
inline DiffusionTrace reverse_sample(const DiffusionSchedule& s, double x_init,
                                     std::uint64_t seed) {
  s.validate();
  const int T = s.steps();
  Rng rng(seed);
  DiffusionTrace tr;
  tr.states.reserve(T + 1);
  double x = x_init;
  tr.states.push_back(x);
  for (int t = T - 1; t >= 0; --t) {
    const double z = t > 1 ? rng.normal() : 0.0;
    x += -0.5 * s.beta[t] * x + s.beta[t] * (s.prior_mean - x) + s.sigma[t] * z;
    tr.states.push_back(x);
  }
  return tr;
}

// Same chain, but the transport pull tracks a reference signal instead of a
// constant prior: step t is pulled toward signal[T-1-t]. Used to turn rough
// simulation traces into smooth envelopes of the same length.
inline std::vector<double> smooth_signal(const std::vector<double>& signal, double beta,
                                         double noise_sigma, std::uint64_t seed) {
  if (signal.empty()) throw std::invalid_argument("smooth_signal: empty signal");
  if (beta < 0.0 || beta > 1.0) throw std::invalid_argument("smooth_signal: beta must lie in [0,1]");
  Rng rng(seed);
  std::vector<double> out(signal.size());
  double x = signal.front();
  for (std::size_t i = 0; i < signal.size(); ++i) {
    x += -0.5 * beta * x + beta * (signal[i] - x) + noise_sigma * rng.normal();
    out[i] = x;
  }
  return out;
}

}  // namespace taint::diffusion
