#pragma once

// 16-bit PCM mono WAV I/O. Samples are scaled to [-1, 1] by 1/32768 on load;
// writing rounds back to int16 with clamping, so a round trip reproduces
// samples within one quantization step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace taint::audio {

struct AudioSample {
  std::vector<double> waveform;  // in [-1, 1]
  int sampling_rate = 16000;
  int label = -1;
};

namespace detail {

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline void write_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace detail

inline AudioSample load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_wav: cannot open " + path);

  char tag[4];
  in.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("load_wav: not a RIFF file");
  detail::read_u32(in);  // chunk size
  in.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("load_wav: not a WAVE file");

  AudioSample s;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;

  while (in.read(tag, 4)) {
    const std::uint32_t size = detail::read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::read_u16(in);
      channels = detail::read_u16(in);
      s.sampling_rate = static_cast<int>(detail::read_u32(in));
      detail::read_u32(in);  // byte rate
      detail::read_u16(in);  // block align
      bits = detail::read_u16(in);
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("load_wav: data chunk before fmt chunk");
      if (format != 1) throw std::runtime_error("load_wav: only PCM (format 1) is supported");
      if (channels != 1) throw std::runtime_error("load_wav: only mono files are supported");
      if (bits != 16) throw std::runtime_error("load_wav: only 16-bit samples are supported");
      const std::size_t n = size / 2;
      s.waveform.resize(n);
      std::vector<unsigned char> raw(size);
      in.read(reinterpret_cast<char*>(raw.data()), size);
      if (!in) throw std::runtime_error("load_wav: truncated data chunk");
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t v =
            static_cast<std::int16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
        s.waveform[i] = static_cast<double>(v) / 32768.0;
      }
      return s;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // skip chunk (word-aligned)
    }
  }
  throw std::runtime_error("load_wav: no data chunk found");
}

inline void write_wav(const AudioSample& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_wav: cannot open " + path);

  const std::uint32_t data_size = static_cast<std::uint32_t>(s.waveform.size() * 2);
  out.write("RIFF", 4);
  detail::write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_u32(out, 16);
  detail::write_u16(out, 1);  // PCM
  detail::write_u16(out, 1);  // mono
  detail::write_u32(out, static_cast<std::uint32_t>(s.sampling_rate));
  detail::write_u32(out, static_cast<std::uint32_t>(s.sampling_rate * 2));
  detail::write_u16(out, 2);
  detail::write_u16(out, 16);
  out.write("data", 4);
  detail::write_u32(out, data_size);
  for (double v : s.waveform) {
    const long q = std::lround(v * 32768.0);
    const std::int16_t i16 =
        static_cast<std::int16_t>(std::clamp<long>(q, -32768, 32767));
    detail::write_u16(out, static_cast<std::uint16_t>(i16));
  }
  if (!out) throw std::runtime_error("write_wav: write failed for " + path);
}

inline double rms(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace taint::audio
