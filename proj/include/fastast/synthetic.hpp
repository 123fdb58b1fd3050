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

// Deterministic synthetic models and datasets for desk-scale runs.
//
// Every random value comes from a counter-based generator: the 64-bit
// SplitMix64 finalizer applied to
//   (seed * 0x9E3779B97F4A7C15) ^ (mix(stream) + (index + 1) * 0xD1B54A32D192ED03)
// where `stream` is the FNV-1a hash of a tensor name (or a sample tag) and
// `index` is the element position. Outputs depend only on (seed, stream,
// index), never on call order, clock or platform.

#pragma once

#include "fastast/common.hpp"
#include "fastast/features.hpp"
#include "fastast/model.hpp"
#include "fastast/model_io.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <string_view>
#include <vector>

namespace fastast {

namespace rng {

inline std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ull;
  return h;
}

inline std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix((seed * 0x9E3779B97F4A7C15ull) ^ (mix(stream) + (index + 1) * 0xD1B54A32D192ED03ull));
}

// [0, 1) with 53 bits.
inline double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return double(bits(seed, stream, index) >> 11) * 0x1.0p-53;
}

inline double symmetric(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return 2.0 * uniform(seed, stream, index) - 1.0;
}

// Box-Muller over two consecutive counters.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const double u1 = 1.0 - uniform(seed, stream, 2 * index);
  const double u2 = uniform(seed, stream, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

// Uniform(-1, 1) / sqrt(d) everywhere; LayerNorm gains are centered on 1.
inline ModelWeights generate_synthetic_model(std::uint64_t seed, const ModelConfig& config) {
  ModelWeights m = allocate_model(config);
  const float scale = float(1.0 / std::sqrt(double(config.embed_dim)));
  visit_tensors(m, [&](const std::string& name, auto& t, Eigen::Index, Eigen::Index) {
    const std::uint64_t stream = rng::fnv1a(name);
    const bool gain = name.ends_with(".gain");
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const float v = float(rng::symmetric(seed, stream, std::uint64_t(i))) * scale;
      t.data()[i] = gain ? 1.0f + v : v;
    }
  });
  return m;
}

// FNV-1a over every tensor's little-endian float bytes in serialization order.
inline std::uint64_t weights_checksum(const ModelWeights& m) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  visit_tensors(m, [&](const std::string&, const auto& t, Eigen::Index, Eigen::Index) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const auto word = std::bit_cast<std::uint32_t>(t.data()[i]);
      for (int b = 0; b < 4; ++b) h = (h ^ ((word >> (8 * b)) & 0xff)) * 0x100000001B3ull;
    }
  });
  return h;
}

struct SyntheticDataConfig {
  int n_classes = 4;
  TaskKind task_kind = TaskKind::kSingleLabel;
  int n_mels = 128;
  int n_frames = 500;
  double noise_std = 0.5;
  double band_amplitude = 2.0;
  int bands_per_class = 3;
  double active_fraction = 0.25;  // multi-label: per-class activation probability
};

// Class template: a few Gaussian mel bands whose energy is modulated slowly in
// time, on a zero background. Depends only on the class index and shape.
inline Spectrogram class_template(int cls, const SyntheticDataConfig& cfg) {
  const std::uint64_t stream = rng::fnv1a("template") + std::uint64_t(cls);
  Spectrogram s;
  s.values = Matrix::Zero(cfg.n_mels, cfg.n_frames);
  for (int k = 0; k < cfg.bands_per_class; ++k) {
    const std::uint64_t base = 8 * std::uint64_t(k);
    const double center = 4.0 + rng::uniform(0, stream, base) * (cfg.n_mels - 8.0);
    const double width = 2.0 + 6.0 * rng::uniform(0, stream, base + 1);
    const double cycles = 1.0 + 4.0 * rng::uniform(0, stream, base + 2);
    const double phase = 2.0 * std::numbers::pi * rng::uniform(0, stream, base + 3);
    for (int t = 0; t < cfg.n_frames; ++t) {
      const double envelope =
          0.6 + 0.4 * std::cos(2.0 * std::numbers::pi * cycles * t / cfg.n_frames + phase);
      for (int m = 0; m < cfg.n_mels; ++m) {
        const double z = (m - center) / width;
        s.values(m, t) += float(cfg.band_amplitude * std::exp(-0.5 * z * z) * envelope);
      }
    }
  }
  return s;
}

struct SyntheticDataset {
  std::vector<Spectrogram> spectrograms;
  std::vector<Label> labels;
};

inline Label synthetic_label(std::uint64_t seed, int sample, const SyntheticDataConfig& cfg) {
  const std::uint64_t stream = rng::fnv1a("label");
  Label label;
  if (cfg.task_kind == TaskKind::kSingleLabel) {
    label.index = int(rng::bits(seed, stream, std::uint64_t(sample)) % std::uint64_t(cfg.n_classes));
    return label;
  }
  label.targets.assign(cfg.n_classes, 0);
  bool any = false;
  for (int c = 0; c < cfg.n_classes; ++c) {
    const auto idx = std::uint64_t(sample) * std::uint64_t(cfg.n_classes) + std::uint64_t(c);
    label.targets[c] = rng::uniform(seed, stream, idx) < cfg.active_fraction;
    any |= label.targets[c] != 0;
  }
  if (!any) label.targets[rng::bits(seed, stream + 1, std::uint64_t(sample)) % std::uint64_t(cfg.n_classes)] = 1;
  return label;
}

// Noiseless signal of a sample: the sum of its active class templates.
inline Spectrogram synthetic_signal(const Label& label, const std::vector<Spectrogram>& templates) {
  Spectrogram s;
  s.values = Matrix::Zero(templates.front().n_mels(), templates.front().n_frames());
  if (label.index >= 0) s.values = templates[label.index].values;
  for (std::size_t c = 0; c < label.targets.size(); ++c)
    if (label.targets[c]) s.values += templates[c].values;
  return s;
}

inline SyntheticDataset generate_synthetic_dataset(std::uint64_t seed, int n_samples,
                                                   const SyntheticDataConfig& cfg) {
  require(n_samples >= 0 && cfg.n_classes >= 1 && cfg.n_mels >= 1 && cfg.n_frames >= 1, ErrorCategory::kConfig,
          "synthetic dataset: invalid sizes");
  std::vector<Spectrogram> templates;
  for (int c = 0; c < cfg.n_classes; ++c) templates.push_back(class_template(c, cfg));

  SyntheticDataset data;
  const std::uint64_t noise_stream = rng::fnv1a("noise");
  for (int i = 0; i < n_samples; ++i) {
    Label label = synthetic_label(seed, i, cfg);
    Spectrogram s = synthetic_signal(label, templates);
    const std::uint64_t stream = noise_stream + std::uint64_t(i);
    for (Eigen::Index k = 0; k < s.values.size(); ++k)
      s.values.data()[k] += float(cfg.noise_std * rng::normal(seed, stream, std::uint64_t(k)));
    data.spectrograms.push_back(std::move(s));
    data.labels.push_back(std::move(label));
  }
  return data;
}

// Template probe: the head becomes a nearest-class-mean classifier over [CLS]
// embeddings at r = 0, logit_c = <e_c, x> - |e_c|^2 / 2, where e_c averages
// the embeddings of `draws_per_class` noisy renderings of class c's template.
// The draws use their own noise stream, disjoint from generated datasets.
inline void fit_template_probe(ModelWeights& m, const SyntheticDataConfig& cfg, std::uint64_t seed,
                               int draws_per_class = 8) {
  require(cfg.n_classes == m.config.n_classes, ErrorCategory::kConfig,
          "template probe: dataset has " + std::to_string(cfg.n_classes) + " classes, model has " +
              std::to_string(m.config.n_classes));
  require(draws_per_class >= 1, ErrorCategory::kConfig, "template probe: draws_per_class must be >= 1");
  const std::uint64_t probe_stream = rng::fnv1a("probe");
  for (int c = 0; c < cfg.n_classes; ++c) {
    const Spectrogram clean = class_template(c, cfg);
    Vector centroid = Vector::Zero(m.config.embed_dim);
    for (int k = 0; k < draws_per_class; ++k) {
      Spectrogram s = clean;
      const std::uint64_t stream = probe_stream + std::uint64_t(c) * 1024 + std::uint64_t(k);
      for (Eigen::Index i = 0; i < s.values.size(); ++i)
        s.values.data()[i] += float(cfg.noise_std * rng::normal(seed, stream, std::uint64_t(i)));
      centroid += encoder_forward(tokenize(m, prepare_input(m, s)), m.encoder, ToMeConfig{0, true}).cls_embedding;
    }
    centroid /= float(draws_per_class);
    m.head.linear.col(c) = centroid.transpose();
    m.head.bias[c] = -0.5f * centroid.squaredNorm();
  }
}

}  // namespace fastast
