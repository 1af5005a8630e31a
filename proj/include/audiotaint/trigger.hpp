#pragma once

// Trigger synthesis: tabular Q-learning over insertion positions and
// bounded-amplitude waveform construction from simulation-derived signals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "audiotaint/rng.hpp"

namespace taint::trigger {

// Bounded-amplitude waveform plus insertion offsets.
struct Trigger {
  int sampling_rate = 16000;
  double imperceptibility = 0.008;  // peak-amplitude bound epsilon
  std::vector<double> waveform;     // entries in [-epsilon, epsilon]
  std::vector<int> positions;       // strictly increasing sample offsets
};

struct QTable {
  int states = 0;
  int actions = 0;
  std::vector<double> values;  // states x actions, row-major

  QTable() = default;
  QTable(int s, int a) : states(s), actions(a), values(static_cast<std::size_t>(s) * a, 0.0) {}
  double& at(int s, int a) { return values[static_cast<std::size_t>(s) * actions + a]; }
  double at(int s, int a) const { return values[static_cast<std::size_t>(s) * actions + a]; }
  double max_over_actions(int s) const {
    double m = at(s, 0);
    for (int a = 1; a < actions; ++a) m = std::max(m, at(s, a));
    return m;
  }
};

struct RlParams {
  double learning_rate = 0.1;
  double discount_factor = 0.9;
  int episodes = 50;
  double reward_scale = 1.0;

  void validate() const {
    if (learning_rate < 0.0 || learning_rate > 1.0)
      throw std::invalid_argument("RlParams: learning_rate must lie in [0,1]");
    if (discount_factor < 0.0 || discount_factor >= 1.0)
      throw std::invalid_argument("RlParams: discount_factor must lie in [0,1)");
    if (episodes < 1) throw std::invalid_argument("RlParams: episodes must be >= 1");
  }
};

using RewardFn = std::function<double(int state, int next_state)>;

// Sequential-traversal Q-learning. Each episode walks state 0..n_states-1 in
// order with a uniformly sampled action, applying the TD(0) update
//   Q[s,a] += lr (r + gamma max_a' Q[s',a'] - Q[s,a]),
// where s' = s+1 wraps at n_states.
inline QTable learn_insertion_policy(int n_states, int n_actions, const RlParams& p,
                                     const RewardFn& reward, std::uint64_t seed) {
  if (n_states < 1 || n_actions < 1)
    throw std::invalid_argument("learn_insertion_policy: need n_states, n_actions >= 1");
  p.validate();
  QTable q(n_states, n_actions);
  Rng rng(seed);
  for (int ep = 0; ep < p.episodes; ++ep) {
    for (int state = 0; state < n_states; ++state) {
      const int action = static_cast<int>(rng.uniform_index(n_actions));
      const int next_state = (state + 1) % n_states;
      const double r = p.reward_scale * reward(state, next_state);
      q.at(state, action) +=
          p.learning_rate *
          (r + p.discount_factor * q.max_over_actions(next_state) - q.at(state, action));
    }
  }
  return q;
}

// Reward favoring high-energy regions: RMS of the host signal in a short
// window centered on the state's mapped sample position, so inserted
// perturbations land where they are masked.
inline RewardFn envelope_reward(const std::vector<double>& host, int n_states,
                                int window = 512) {
  if (host.empty()) throw std::invalid_argument("envelope_reward: empty host signal");
  if (n_states < 1) throw std::invalid_argument("envelope_reward: n_states must be >= 1");
  const auto signal = host;  // captured by value: reward stays valid
  return [signal, n_states, window](int state, int) {
    const std::size_t n = signal.size();
    const std::size_t center =
        n_states == 1 ? n / 2
                      : static_cast<std::size_t>(
                            static_cast<double>(state) * (n - 1) / (n_states - 1));
    const std::size_t lo = center >= static_cast<std::size_t>(window / 2)
                               ? center - window / 2
                               : 0;
    const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(window));
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += signal[i] * signal[i];
    return std::sqrt(acc / std::max<std::size_t>(1, hi - lo));
  };
}

// The k states with the highest max-over-actions value, ties broken toward
// the lower state index; returned sorted ascending.
inline std::vector<int> extract_positions(const QTable& q, int k) {
  if (k < 1 || k > q.states)
    throw std::invalid_argument("extract_positions: k must lie in [1, states]");
  std::vector<int> order(q.states);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&q](int a, int b) {
    const double va = q.max_over_actions(a), vb = q.max_over_actions(b);
    if (va != vb) return va > vb;
    return a < b;
  });
  std::vector<int> top(order.begin(), order.begin() + k);
  std::sort(top.begin(), top.end());
  return top;
}

// Maps bucket states onto sample offsets such that state n_states-1 still
// leaves room for a full trigger of trigger_len samples.
inline std::vector<int> states_to_offsets(const std::vector<int>& states, int n_states,
                                          int host_len, int trigger_len) {
  if (host_len < trigger_len)
    throw std::invalid_argument("states_to_offsets: host shorter than the trigger");
  const int span = host_len - trigger_len;
  std::vector<int> out;
  out.reserve(states.size());
  for (int s : states) {
    const int pos = n_states == 1
                        ? span / 2
                        : static_cast<int>(static_cast<double>(s) * span / (n_states - 1));
    out.push_back(pos);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Mean-center, peak-normalize to [-1,1], linearly resample to
// length_samples, scale by eps. A constant signal yields a zero waveform.
inline Trigger synthesize_trigger(const std::vector<double>& signal, double eps,
                                  int sampling_rate, int length_samples) {
  if (signal.empty()) throw std::invalid_argument("synthesize_trigger: empty signal");
  if (eps <= 0.0 || eps > 1.0)
    throw std::invalid_argument("synthesize_trigger: eps must lie in (0,1]");
  if (length_samples < 1)
    throw std::invalid_argument("synthesize_trigger: length_samples must be >= 1");
  if (sampling_rate < 1)
    throw std::invalid_argument("synthesize_trigger: sampling_rate must be >= 1");

  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) /
                      static_cast<double>(signal.size());
  std::vector<double> centered(signal.size());
  double peak = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    centered[i] = signal[i] - mean;
    peak = std::max(peak, std::abs(centered[i]));
    scale = std::max(scale, std::abs(signal[i]));
  }
  // A peak at rounding-noise level means the signal was constant.
  if (peak <= 1e-12 * std::max(1.0, scale)) {
    std::fill(centered.begin(), centered.end(), 0.0);
  } else {
    for (double& v : centered) v /= peak;
  }

  Trigger t;
  t.sampling_rate = sampling_rate;
  t.imperceptibility = eps;
  t.waveform.resize(length_samples);
  const std::size_t n = centered.size();
  for (int i = 0; i < length_samples; ++i) {
    double v;
    if (n == 1 || length_samples == 1) {
      v = centered[0];
    } else {
      const double x = static_cast<double>(i) * (n - 1) / (length_samples - 1);
      const std::size_t lo = std::min(static_cast<std::size_t>(x), n - 2);
      const double frac = x - static_cast<double>(lo);
      v = centered[lo] * (1.0 - frac) + centered[lo + 1] * frac;
    }
    t.waveform[i] = eps * v;
  }
  return t;
}

// Additive overlay at each position, clipped to [-1, 1].
inline std::vector<double> apply_trigger(const std::vector<double>& audio, const Trigger& t) {
  for (int pos : t.positions) {
    if (pos < 0 || pos + t.waveform.size() > audio.size())
      throw std::out_of_range("apply_trigger: position out of host-audio bounds");
  }
  std::vector<double> out = audio;
  for (int pos : t.positions)
    for (std::size_t i = 0; i < t.waveform.size(); ++i) {
      double v = out[pos + i] + t.waveform[i];
      out[pos + i] = std::clamp(v, -1.0, 1.0);
    }
  return out;
}

}  // namespace taint::trigger
