#pragma once

// Bundled synthetic speech-like corpus: each class is a two-tone chord in a
// distinct frequency slot above 1 kHz plus a low white-noise floor, so the
// band below ~800 Hz stays quiet. Ships so end-to-end runs need no external
// dataset.

#include <cmath>
#include <cstdint>
#include <vector>

#include "audiotaint/audio.hpp"
#include "audiotaint/dataset.hpp"
#include "audiotaint/rng.hpp"

namespace taint::synthetic {

struct SyntheticSpec {
  int n_classes = 10;
  int n_samples = 200;
  int sampling_rate = 16000;
  double duration = 1.0;       // seconds
  double tone_amplitude = 0.3;
  double noise_sigma = 0.005;
};

inline dataset::Dataset make_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  dataset::Dataset d;
  d.n_classes = spec.n_classes;
  d.samples.reserve(spec.n_samples);
  const int n = static_cast<int>(spec.duration * spec.sampling_rate);
  for (int i = 0; i < spec.n_samples; ++i) {
    const int label = i % spec.n_classes;
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    // Class-specific fundamental in [1000, 1000 + 400 * n_classes) Hz.
    const double f0 = 1000.0 + 400.0 * label + rng.uniform(-40.0, 40.0);
    const double f1 = 1.5 * f0;
    const double amp = spec.tone_amplitude * (0.8 + 0.4 * rng.uniform());
    const double phase0 = rng.uniform(0.0, 2.0 * kPi);
    const double phase1 = rng.uniform(0.0, 2.0 * kPi);

    audio::AudioSample s;
    s.sampling_rate = spec.sampling_rate;
    s.label = label;
    s.waveform.resize(n);
    for (int t = 0; t < n; ++t) {
      const double x = static_cast<double>(t) / spec.sampling_rate;
      double v = amp * std::sin(2.0 * kPi * f0 * x + phase0) +
                 0.5 * amp * std::sin(2.0 * kPi * f1 * x + phase1) +
                 spec.noise_sigma * rng.normal();
      s.waveform[t] = std::clamp(v, -1.0, 1.0);
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace taint::synthetic
