/*
 * Copyright (c) 2026, The FastAST Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Waveform -> log-mel spectrogram front end, plus the WAV and SPEC1 readers.
//
// Framing is centered with reflection padding: frame k is centered on sample
// k * hop, and a clip of n samples yields ceil(n / hop) frames, i.e. 100t
// frames for a t-second clip at the default 10 ms hop.

#pragma once

#include "fastast/binary_io.hpp"
#include "fastast/common.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

namespace fastast {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration_seconds() const { return double(samples.size()) / sample_rate; }
};

struct SpectrogramConfig {
  int n_mels = 128;
  int frames_per_second = 100;
  double window_length_ms = 25.0;
  double hop_length_ms = 10.0;
  int fft_size = 0;  // 0: next power of two >= window samples
  double mel_fmin = 0.0;
  double mel_fmax = 8000.0;
  double log_floor = 1e-10;
  // Input normalization applied before patchify; (0, 1) is the identity.
  double norm_mean = 0.0;
  double norm_std = 1.0;

  void validate() const {
    require(n_mels >= 1, ErrorCategory::kConfig, "n_mels must be positive");
    require(frames_per_second >= 1, ErrorCategory::kConfig, "frames_per_second must be positive");
    require(std::abs(hop_length_ms * frames_per_second - 1000.0) < 1e-9, ErrorCategory::kConfig,
            "hop_length_ms * frames_per_second must equal 1000");
    require(window_length_ms > 0.0, ErrorCategory::kConfig, "window_length_ms must be positive");
    require(fft_size >= 0, ErrorCategory::kConfig, "fft_size must be non-negative");
    require(mel_fmin >= 0.0 && mel_fmin < mel_fmax, ErrorCategory::kConfig,
            "mel_fmin must be in [0, mel_fmax)");
    require(log_floor > 0.0, ErrorCategory::kConfig, "log_floor must be positive");
    require(norm_std > 0.0, ErrorCategory::kConfig, "norm_std must be positive");
  }
};

struct Spectrogram {
  Matrix values;  // [n_mels x n_frames], mel-major

  int n_mels() const { return int(values.rows()); }
  int n_frames() const { return int(values.cols()); }
};

namespace mel {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// n_mels + 2 band edges equally spaced on the mel scale; filter i peaks at edge i + 1.
inline std::vector<double> band_edges_hz(int n_mels, double fmin, double fmax) {
  std::vector<double> edges(n_mels + 2);
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (n_mels + 1));
  return edges;
}

inline std::vector<double> center_frequencies(const SpectrogramConfig& cfg) {
  auto edges = band_edges_hz(cfg.n_mels, cfg.mel_fmin, cfg.mel_fmax);
  return {edges.begin() + 1, edges.end() - 1};
}

// Triangular HTK-style filters sampled on FFT bin frequencies: [n_mels x (fft/2 + 1)].
inline MatrixD filterbank(const SpectrogramConfig& cfg, int sample_rate, int fft_size) {
  const int n_bins = fft_size / 2 + 1;
  auto edges = band_edges_hz(cfg.n_mels, cfg.mel_fmin, cfg.mel_fmax);
  MatrixD fb = MatrixD::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = double(k) * sample_rate / fft_size;
      if (f > left && f < right)
        fb(m, k) = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
    }
  }
  return fb;
}

}  // namespace mel

inline int window_samples(const SpectrogramConfig& cfg, int sample_rate) {
  return int(std::lround(sample_rate * cfg.window_length_ms / 1000.0));
}

inline int hop_samples(const SpectrogramConfig& cfg, int sample_rate) {
  return int(std::lround(sample_rate * cfg.hop_length_ms / 1000.0));
}

inline int resolved_fft_size(const SpectrogramConfig& cfg, int sample_rate) {
  if (cfg.fft_size > 0) return cfg.fft_size;
  int n = 1;
  while (n < window_samples(cfg, sample_rate)) n <<= 1;
  return n;
}

inline Spectrogram compute_log_mel(const Waveform& w, const SpectrogramConfig& cfg) {
  cfg.validate();
  require(!w.samples.empty(), ErrorCategory::kConfig, "empty waveform");
  require(w.sample_rate > 0, ErrorCategory::kConfig, "sample_rate must be positive");
  require(cfg.mel_fmax <= w.sample_rate / 2.0, ErrorCategory::kConfig,
          "sample_rate " + std::to_string(w.sample_rate) + " too low for mel_fmax " +
              std::to_string(cfg.mel_fmax));
  for (float s : w.samples)
    require(std::isfinite(s), ErrorCategory::kConfig, "waveform contains non-finite samples");

  const int win = window_samples(cfg, w.sample_rate);
  const int hop = hop_samples(cfg, w.sample_rate);
  const int fft_size = resolved_fft_size(cfg, w.sample_rate);
  require(win >= 2 && hop >= 1 && fft_size >= win, ErrorCategory::kConfig,
          "window/hop/fft sizes inconsistent with sample rate");

  const auto n = static_cast<long>(w.samples.size());
  const long n_frames = (n + hop - 1) / hop;
  const int n_bins = fft_size / 2 + 1;
  const MatrixD fb = mel::filterbank(cfg, w.sample_rate, fft_size);

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win);

  // Mirror about the edge samples without repeating them, folding repeatedly for
  // clips shorter than half a window.
  auto reflect = [n](long i) {
    if (n == 1) return 0L;
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
  };

  Eigen::FFT<double> fft;
  std::vector<double> frame(fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd power(n_bins);

  Spectrogram out;
  out.values.resize(cfg.n_mels, n_frames);
  const long pad = win / 2;
  for (long t = 0; t < n_frames; ++t) {
    const long start = t * hop - pad;
    for (int i = 0; i < win; ++i) frame[i] = w.samples[reflect(start + i)] * window[i];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < n_bins; ++k) power[k] = std::norm(spectrum[k]);
    const Eigen::VectorXd energies = fb * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.values(m, t) = float(std::log(energies[m] + cfg.log_floor));
  }
  return out;
}

inline Spectrogram normalize(const Spectrogram& s, double mean, double std) {
  require(std > 0.0, ErrorCategory::kConfig, "normalize: std must be positive");
  Spectrogram out;
  out.values = ((s.values.array().cast<double>() - mean) / std).cast<float>().matrix();
  return out;
}

// 16-bit PCM mono WAV.
inline Waveform read_wav(const std::filesystem::path& path) {
  const std::string data = binary::read_file(path);
  binary::Reader in(data, "WAV '" + path.string() + "'");
  in.expect_magic("RIFF");
  in.u32();
  in.expect_magic("WAVE");
  Waveform w;
  bool have_fmt = false;
  while (in.remaining() >= 8) {
    const std::string id(in.bytes(4));
    const std::uint32_t size = in.u32();
    if (id == "fmt ") {
      binary::Reader fmt(in.bytes(size), "WAV fmt chunk");
      const auto format = fmt.u8() | (fmt.u8() << 8);
      const auto channels = fmt.u8() | (fmt.u8() << 8);
      w.sample_rate = int(fmt.u32());
      fmt.u32();
      fmt.u8(), fmt.u8();
      const auto bits = fmt.u8() | (fmt.u8() << 8);
      require(format == 1 && channels == 1 && bits == 16, ErrorCategory::kUnsupported,
              "WAV '" + path.string() + "': only 16-bit PCM mono is supported");
      have_fmt = true;
    } else if (id == "data") {
      require(have_fmt, ErrorCategory::kFormat, "WAV '" + path.string() + "': data before fmt");
      auto raw = in.bytes(size);
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto lo = static_cast<std::uint8_t>(raw[2 * i]);
        const auto hi = static_cast<std::uint8_t>(raw[2 * i + 1]);
        const auto v = static_cast<std::int16_t>(std::uint16_t(lo | (hi << 8)));
        w.samples[i] = float(v) / 32768.0f;
      }
      return w;
    } else {
      in.bytes(size + (size & 1));
    }
  }
  fail(ErrorCategory::kFormat, "WAV '" + path.string() + "': no data chunk");
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  binary::Writer out;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  out.bytes("RIFF");
  out.u32(36 + data_bytes);
  out.bytes("WAVEfmt ");
  out.u32(16);
  out.u8(1), out.u8(0);  // PCM
  out.u8(1), out.u8(0);  // mono
  out.u32(std::uint32_t(w.sample_rate));
  out.u32(std::uint32_t(w.sample_rate) * 2);
  out.u8(2), out.u8(0);
  out.u8(16), out.u8(0);
  out.bytes("data");
  out.u32(data_bytes);
  for (float s : w.samples) {
    const auto q = static_cast<std::int16_t>(std::clamp(std::lround(double(s) * 32768.0), -32768L, 32767L));
    const auto u = static_cast<std::uint16_t>(q);
    out.u8(std::uint8_t(u & 0xff)), out.u8(std::uint8_t(u >> 8));
  }
  binary::write_file(path, out.data());
}

inline std::string encode_spec1(const Spectrogram& s) {
  binary::Writer out;
  out.bytes("SPEC1");
  out.u32(std::uint32_t(s.n_mels()));
  out.u32(std::uint32_t(s.n_frames()));
  out.f32s({s.values.data(), std::size_t(s.values.size())});
  return out.data();
}

inline Spectrogram decode_spec1(std::string_view data, const std::string& what = "SPEC1") {
  binary::Reader in(data, what);
  in.expect_magic("SPEC1");
  const auto n_mels = in.u32(), n_frames = in.u32();
  require(std::uint64_t(n_mels) * n_frames * 4 == in.remaining(), ErrorCategory::kFormat,
          what + ": payload holds " + std::to_string(in.remaining()) + " bytes, header declares " +
              std::to_string(n_mels) + "x" + std::to_string(n_frames) + " float32");
  Spectrogram s;
  s.values.resize(n_mels, n_frames);
  in.f32s({s.values.data(), std::size_t(s.values.size())});
  return s;
}

inline void save_spec1(const std::filesystem::path& path, const Spectrogram& s) {
  binary::write_file(path, encode_spec1(s));
}

inline Spectrogram load_spec1(const std::filesystem::path& path) {
  return decode_spec1(binary::read_file(path), "SPEC1 '" + path.string() + "'");
}

}  // namespace fastast
