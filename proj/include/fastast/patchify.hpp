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

#pragma once

#include "fastast/common.hpp"
#include "fastast/features.hpp"

#include <cmath>
#include <vector>

namespace fastast {

struct PatchConfig {
  int patch_size = 16;
  int stride = 10;  // patch_size - overlap of 6
  int embed_dim = 768;

  int patch_elements() const { return patch_size * patch_size; }

  void validate() const {
    require(patch_size >= 1 && stride >= 1 && stride <= patch_size, ErrorCategory::kConfig,
            "patch stride must be in [1, patch_size]");
    require(embed_dim >= 1, ErrorCategory::kConfig, "embed_dim must be positive");
  }
};

struct PatchGrid {
  int n_freq_patches = 0;
  int n_time_patches = 0;

  int total() const { return n_freq_patches * n_time_patches; }
};

// Frames produced for a clip of the given length, tolerant of 100 * t landing a
// hair above an integer in floating point.
inline int frames_for_seconds(double seconds, int frames_per_second = 100) {
  return int(std::ceil(seconds * frames_per_second - 1e-9));
}

// N = 12 * ceil((100t - 16) / 10) for 128 mel bins. A clip of exactly one patch
// width has one extractable time position, so it reports 12 rather than 0.
inline int patch_count(double seconds) {
  const int frames = frames_for_seconds(seconds);
  require(frames >= 16, ErrorCategory::kConfig,
          "clip of " + std::to_string(seconds) + " s is shorter than one 16-frame patch");
  const int time_patches = frames == 16 ? 1 : (frames - 16 + 9) / 10;
  return 12 * time_patches;
}

// Valid-origin counting: stride steps from 0, no padding, last patch may stop short of the edge.
inline PatchGrid patch_grid(int n_mels, int n_frames, const PatchConfig& cfg) {
  cfg.validate();
  require(n_mels >= cfg.patch_size && n_frames >= cfg.patch_size, ErrorCategory::kShape,
          "spectrogram " + std::to_string(n_mels) + "x" + std::to_string(n_frames) +
              " is smaller than one " + std::to_string(cfg.patch_size) + "x" +
              std::to_string(cfg.patch_size) + " patch");
  return {(n_mels - cfg.patch_size) / cfg.stride + 1, (n_frames - cfg.patch_size) / cfg.stride + 1};
}

struct Patches {
  Matrix values;  // [N x patch_size^2]
  PatchGrid grid;
};

// Patch (f, t) lands at row t * n_freq_patches + f and is flattened frequency-row major.
inline Patches extract_patches(const Spectrogram& s, const PatchConfig& cfg) {
  Patches out;
  out.grid = patch_grid(s.n_mels(), s.n_frames(), cfg);
  const int p = cfg.patch_size;
  out.values.resize(out.grid.total(), cfg.patch_elements());
  for (int t = 0; t < out.grid.n_time_patches; ++t) {
    for (int f = 0; f < out.grid.n_freq_patches; ++f) {
      const int row = t * out.grid.n_freq_patches + f;
      for (int i = 0; i < p; ++i)
        out.values.row(row).segment(i * p, p) = s.values.row(f * cfg.stride + i).segment(t * cfg.stride, p);
    }
  }
  return out;
}

// Zero-pads short clips in time to the model's declared frame count; longer clips are rejected.
inline Spectrogram fit_to_frames(const Spectrogram& s, int n_frames) {
  require(s.n_frames() <= n_frames, ErrorCategory::kShape,
          "clip has " + std::to_string(s.n_frames()) + " frames, model accepts at most " +
              std::to_string(n_frames));
  if (s.n_frames() == n_frames) return s;
  Spectrogram out;
  out.values = Matrix::Zero(s.n_mels(), n_frames);
  out.values.leftCols(s.n_frames()) = s.values;
  return out;
}

struct EmbeddingWeights {
  Matrix projection;  // [patch_size^2 x d]
  Vector projection_bias;
  Matrix positional;  // [(N + 1) x d]
  Vector cls_token;
};

inline Matrix embed_patches(const Matrix& patches, const EmbeddingWeights& w) {
  require(patches.cols() == w.projection.rows() && w.projection.cols() == w.projection_bias.cols(),
          ErrorCategory::kShape,
          "embed_patches: patches have " + std::to_string(patches.cols()) +
              " columns, projection expects " + std::to_string(w.projection.rows()));
  Matrix out(patches.rows(), w.projection.cols());
  out.noalias() = patches * w.projection;
  out.rowwise() += w.projection_bias;
  return out;
}

// Token embeddings plus the number of original patches each token stands for.
struct TokenSequence {
  Matrix tokens;  // [n x d], row 0 is [CLS]
  std::vector<float> sizes;

  int size() const { return int(tokens.rows()); }
  int dim() const { return int(tokens.cols()); }
};

inline TokenSequence add_positional_and_cls(const Matrix& x, const EmbeddingWeights& w) {
  require(w.positional.rows() == x.rows() + 1, ErrorCategory::kConfig,
          "positional table has " + std::to_string(w.positional.rows()) + " rows, need " +
              std::to_string(x.rows() + 1) + " for " + std::to_string(x.rows()) + " patches");
  require(w.positional.cols() == x.cols() && w.cls_token.cols() == x.cols(), ErrorCategory::kShape,
          "add_positional_and_cls: embedding width mismatch");
  TokenSequence ts;
  ts.tokens.resize(x.rows() + 1, x.cols());
  ts.tokens.row(0) = w.cls_token + w.positional.row(0);
  ts.tokens.bottomRows(x.rows()) = x + w.positional.bottomRows(x.rows());
  ts.sizes.assign(std::size_t(x.rows() + 1), 1.0f);
  return ts;
}

}  // namespace fastast
