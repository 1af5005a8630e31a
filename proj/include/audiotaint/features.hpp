#pragma once

// Log-magnitude mel spectrogram front-end: Hann window, radix-2 FFT,
// triangular mel filterbank, log10 power with a fixed floor.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "audiotaint/audio.hpp"
#include "audiotaint/rng.hpp"

namespace taint::features {

inline constexpr double kLogFloor = 1e-10;  // silence maps to log10 = -10

namespace detail {

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of 2");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filterbank over [0, sr/2], n_mels filters on the mel scale,
// rows = filters, cols = nfft/2 + 1 power bins.
inline Eigen::MatrixXd mel_filterbank(int n_mels, std::size_t nfft, int sampling_rate) {
  const int n_bins = static_cast<int>(nfft / 2 + 1);
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sampling_rate / 2.0);
  std::vector<double> centers(n_mels + 2);
  for (int m = 0; m < n_mels + 2; ++m)
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sampling_rate / static_cast<double>(nfft);
      if (f > lo && f < mid)
        fb(m, b) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        fb(m, b) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace detail

// Frames x n_mels matrix of log10 mel power. Frame count follows
// 1 + floor((len - frame_len) / hop).
inline Eigen::MatrixXd extract_features(const audio::AudioSample& s, int n_mels = 40,
                                        int frame_len = 400, int hop = 160) {
  if (n_mels < 1 || frame_len < 2 || hop < 1)
    throw std::invalid_argument("extract_features: bad framing parameters");
  if (s.waveform.size() < static_cast<std::size_t>(frame_len))
    throw std::invalid_argument("extract_features: waveform shorter than one frame");

  const std::size_t nfft = detail::next_pow2(frame_len);
  const int n_bins = static_cast<int>(nfft / 2 + 1);
  const int n_frames =
      1 + static_cast<int>((s.waveform.size() - frame_len) / static_cast<std::size_t>(hop));

  std::vector<double> window(frame_len);
  for (int i = 0; i < frame_len; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (frame_len - 1));

  const Eigen::MatrixXd fb = detail::mel_filterbank(n_mels, nfft, s.sampling_rate);

  Eigen::MatrixXd out(n_frames, n_mels);
  std::vector<std::complex<double>> buf(nfft);
  Eigen::VectorXd power(n_bins);
  for (int fr = 0; fr < n_frames; ++fr) {
    const std::size_t off = static_cast<std::size_t>(fr) * hop;
    for (std::size_t i = 0; i < nfft; ++i)
      buf[i] = i < static_cast<std::size_t>(frame_len)
                   ? std::complex<double>(s.waveform[off + i] * window[i], 0.0)
                   : std::complex<double>(0.0, 0.0);
    detail::fft(buf);
    for (int b = 0; b < n_bins; ++b) power(b) = std::norm(buf[b]);
    const Eigen::VectorXd mel = fb * power;
    for (int m = 0; m < n_mels; ++m)
      out(fr, m) = std::log10(std::max(mel(m), kLogFloor));
  }
  return out;
}

// Mean over frames: one n_mels-dimensional vector per sample, the feature
// staging consumed by the victim classifier.
inline Eigen::VectorXd mean_pooled_features(const audio::AudioSample& s, int n_mels = 40,
                                            int frame_len = 400, int hop = 160) {
  const Eigen::MatrixXd m = extract_features(s, n_mels, frame_len, hop);
  return m.colwise().mean();
}

}  // namespace taint::features
