#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "audiotaint/trigger.hpp"

using namespace taint::trigger;
using Catch::Approx;

namespace {
RewardFn constant_reward(double r) {
  return [r](int, int) { return r; };
}
}  // namespace

TEST_CASE("zero learning rate leaves the q-table untouched") {
  RlParams p;
  p.learning_rate = 0.0;
  p.episodes = 20;
  const auto q = learn_insertion_policy(16, 4, p, constant_reward(1.0), 3);
  for (double v : q.values) REQUIRE(v == 0.0);
}

TEST_CASE("myopic full-rate updates converge to the reward in one visit") {
  RlParams p;
  p.learning_rate = 1.0;
  p.discount_factor = 0.0;
  p.episodes = 30;  // enough episodes that every (s,a) pair is visited
  const auto q = learn_insertion_policy(8, 2, p, constant_reward(1.0), 5);
  for (int s = 0; s < q.states; ++s)
    for (int a = 0; a < q.actions; ++a) {
      const double v = q.at(s, a);
      REQUIRE((v == 0.0 || v == Approx(1.0)));  // visited -> 1, never-visited -> 0
    }
  // At least one action per state was visited over 30 episodes.
  for (int s = 0; s < q.states; ++s) REQUIRE(q.max_over_actions(s) == Approx(1.0));
}

TEST_CASE("q-values respect the discounted contraction bound") {
  RlParams p;
  p.learning_rate = 0.5;
  p.discount_factor = 0.9;
  p.episodes = 200;
  const double r_max = 1.0;
  const auto q = learn_insertion_policy(32, 3, p, constant_reward(r_max), 17);
  const double bound = r_max / (1.0 - p.discount_factor);
  for (double v : q.values) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= bound + 1e-12);
  }
  REQUIRE_THROWS_AS(learn_insertion_policy(0, 2, p, constant_reward(1.0), 1),
                    std::invalid_argument);
}

TEST_CASE("policy learning is deterministic per seed") {
  RlParams p;
  std::vector<double> host(4000);
  for (std::size_t i = 0; i < host.size(); ++i) host[i] = std::sin(i * 0.01) * 0.5;
  const auto reward = envelope_reward(host, 64);
  const auto a = learn_insertion_policy(64, 4, p, reward, 99);
  const auto b = learn_insertion_policy(64, 4, p, reward, 99);
  const auto c = learn_insertion_policy(64, 4, p, reward, 100);
  REQUIRE(a.values == b.values);
  REQUIRE(a.values != c.values);
}

TEST_CASE("extract_positions ranks by max-over-actions with index tie-break") {
  QTable zero(8, 3);
  REQUIRE(extract_positions(zero, 3) == std::vector<int>{0, 1, 2});

  QTable q(8, 3);
  q.at(5, 1) = 10.0;
  REQUIRE(extract_positions(q, 1) == std::vector<int>{5});

  q.at(2, 0) = 4.0;
  q.at(7, 2) = 6.0;
  const auto top = extract_positions(q, 3);
  REQUIRE(top == std::vector<int>{2, 5, 7});
  for (std::size_t i = 1; i < top.size(); ++i) REQUIRE(top[i] > top[i - 1]);

  REQUIRE_THROWS_AS(extract_positions(q, 9), std::invalid_argument);
}

TEST_CASE("state offsets stay within host bounds") {
  const auto offs = states_to_offsets({0, 127, 255}, 256, 16000, 2400);
  REQUIRE(offs.size() == 3);
  REQUIRE(offs.front() == 0);
  REQUIRE(offs.back() == 16000 - 2400);
  for (std::size_t i = 1; i < offs.size(); ++i) REQUIRE(offs[i] > offs[i - 1]);
  REQUIRE_THROWS_AS(states_to_offsets({0}, 4, 100, 200), std::invalid_argument);
}

TEST_CASE("synthesized waveforms respect the amplitude bound") {
  std::vector<double> signal;
  taint::Rng gen(12);
  for (int i = 0; i < 500; ++i) signal.push_back(gen.normal() * 3.0 + 1.0);
  const auto t = synthesize_trigger(signal, 0.01, 16000, 2400);
  REQUIRE(t.waveform.size() == 2400);
  double peak = 0.0;
  for (double v : t.waveform) peak = std::max(peak, std::abs(v));
  REQUIRE(peak <= 0.01 + 1e-15);
  REQUIRE(peak > 0.0);
}

TEST_CASE("constant signals synthesize to silence") {
  const auto t = synthesize_trigger(std::vector<double>(100, 0.37), 0.5, 16000, 64);
  for (double v : t.waveform) REQUIRE(v == 0.0);
}

TEST_CASE("resampling matches a hand-rolled interpolation oracle") {
  const auto t = synthesize_trigger({0.0, 1.0, 0.0}, 0.2, 16000, 5);
  // Centered: (-1/3, 2/3, -1/3); normalized by 2/3: (-0.5, 1, -0.5);
  // resampled at source positions 0, 0.5, 1, 1.5, 2; scaled by eps.
  const double expect[5] = {-0.5, 0.25, 1.0, 0.25, -0.5};
  for (int i = 0; i < 5; ++i) REQUIRE(t.waveform[i] == Approx(0.2 * expect[i]).margin(1e-15));

  REQUIRE_THROWS_AS(synthesize_trigger({}, 0.2, 16000, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(synthesize_trigger({1.0}, 0.0, 16000, 5), std::invalid_argument);
  REQUIRE_THROWS_AS(synthesize_trigger({1.0}, 1.5, 16000, 5), std::invalid_argument);
}

TEST_CASE("trigger application: identity, overlay and clipping") {
  Trigger t;
  t.waveform.assign(16, 0.0);
  t.positions = {4};
  std::vector<double> audio(64, 0.25);
  REQUIRE(apply_trigger(audio, t) == audio);

  Trigger tone;
  tone.waveform = {0.1, -0.1, 0.05};
  tone.positions = {0};
  std::vector<double> silence(10, 0.0);
  const auto out = apply_trigger(silence, tone);
  REQUIRE(out[0] == Approx(0.1));
  REQUIRE(out[1] == Approx(-0.1));
  REQUIRE(out[2] == Approx(0.05));
  for (std::size_t i = 3; i < out.size(); ++i) REQUIRE(out[i] == 0.0);

  std::vector<double> full(10, 1.0);
  Trigger up;
  up.waveform = {0.5, 0.5};
  up.positions = {1, 5};
  const auto clipped = apply_trigger(full, up);
  for (double v : clipped) REQUIRE(v <= 1.0);

  Trigger oob;
  oob.waveform.assign(8, 0.01);
  oob.positions = {5};
  REQUIRE_THROWS_AS(apply_trigger(silence, oob), std::out_of_range);
}

TEST_CASE("perturbation stays within eps before clipping") {
  taint::Rng gen(31);
  std::vector<double> audio(4000);
  for (double& v : audio) v = std::clamp(gen.normal() * 0.2, -1.0, 1.0);
  std::vector<double> signal(300);
  for (double& v : signal) v = gen.normal();
  auto t = synthesize_trigger(signal, 0.008, 16000, 512);
  t.positions = {100, 1000, 3000};
  const auto out = apply_trigger(audio, t);
  for (std::size_t i = 0; i < out.size(); ++i)
    REQUIRE(std::abs(out[i] - audio[i]) <= 0.008 + 1e-15);
}
