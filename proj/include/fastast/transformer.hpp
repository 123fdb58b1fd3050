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

// Pre-norm transformer encoder with token merging between the attention and MLP
// branches of every block.

#pragma once

#include "fastast/common.hpp"
#include "fastast/features.hpp"
#include "fastast/patchify.hpp"
#include "fastast/tome.hpp"

#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fastast {

struct ModelConfig {
  int depth = 12;
  int embed_dim = 192;
  int n_heads = 3;
  double mlp_ratio = 4.0;
  double clip_seconds = 5.0;
  int n_classes = 50;
  TaskKind task_kind = TaskKind::kSingleLabel;
  SpectrogramConfig spectrogram;
  PatchConfig patch{16, 10, 192};

  int head_dim() const { return embed_dim / n_heads; }
  int hidden_dim() const { return int(std::lround(mlp_ratio * embed_dim)); }
  int n_frames() const { return frames_for_seconds(clip_seconds, spectrogram.frames_per_second); }
  PatchGrid grid() const { return patch_grid(spectrogram.n_mels, n_frames(), patch); }
  int n_tokens() const { return grid().total() + 1; }

  void validate() const {
    require(depth >= 1, ErrorCategory::kConfig, "depth must be >= 1");
    require(embed_dim >= 1 && n_heads >= 1 && embed_dim % n_heads == 0, ErrorCategory::kConfig,
            "embed_dim " + std::to_string(embed_dim) + " not divisible by n_heads " +
                std::to_string(n_heads));
    require(mlp_ratio > 0.0 && hidden_dim() >= 1, ErrorCategory::kConfig, "mlp_ratio must be positive");
    require(clip_seconds > 0.0, ErrorCategory::kConfig, "clip_seconds must be positive");
    require(n_classes >= 1, ErrorCategory::kConfig, "n_classes must be >= 1");
    require(patch.embed_dim == embed_dim, ErrorCategory::kConfig, "patch.embed_dim must equal embed_dim");
    spectrogram.validate();
    patch.validate();
    grid();
  }
};

struct BlockWeights {
  Vector ln1_gain, ln1_bias;
  Matrix qkv;  // [d x 3d], columns: q heads | k heads | v heads
  Vector qkv_bias;
  Matrix proj;  // [d x d]
  Vector proj_bias;
  Vector ln2_gain, ln2_bias;
  Matrix mlp_in;  // [d x hidden]
  Vector mlp_in_bias;
  Matrix mlp_out;  // [hidden x d]
  Vector mlp_out_bias;
};

struct EncoderWeights {
  int n_heads = 1;
  std::vector<BlockWeights> blocks;
  Vector final_norm_gain, final_norm_bias;
};

inline Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias, float eps = 1e-6f) {
  require(gain.cols() == x.cols() && bias.cols() == x.cols(), ErrorCategory::kShape,
          "layer_norm: parameter width mismatch");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).cast<double>().mean();
    const double var = (x.row(i).cast<double>().array() - mean).square().mean();
    const float inv = float(1.0 / std::sqrt(var + eps));
    out.row(i) = ((x.row(i).array() - float(mean)) * inv * gain.array() + bias.array()).matrix();
  }
  return out;
}

inline void softmax_rows(Matrix& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

// Exact (erf) GELU, vectorized.
inline void gelu_inplace(Matrix& x) {
  x.array() = 0.5f * x.array() * (1.0f + (x.array() * float(M_SQRT1_2)).erf());
}

struct AttentionResult {
  Matrix tokens;  // residual-added
  Matrix keys;    // [n x head_dim], averaged over heads
};

namespace detail {

inline void check_block(const BlockWeights& w, int d) {
  require(w.qkv.rows() == d && w.qkv.cols() == 3 * d && w.proj.rows() == d && w.proj.cols() == d &&
              w.mlp_in.rows() == d && w.mlp_out.cols() == d && w.mlp_out.rows() == w.mlp_in.cols(),
          ErrorCategory::kShape, "block weights do not match token width " + std::to_string(d));
}

// log_sizes == nullptr gives plain softmax attention.
inline AttentionResult attention(const Matrix& x, const BlockWeights& w, int n_heads,
                                 const Vector* log_sizes) {
  const int n = int(x.rows()), d = int(x.cols());
  check_block(w, d);
  require(n_heads >= 1 && d % n_heads == 0, ErrorCategory::kShape, "attention: bad head count");
  const int dh = d / n_heads;
  const float scale = 1.0f / std::sqrt(float(dh));

  const Matrix normed = layer_norm(x, w.ln1_gain, w.ln1_bias);
  Matrix qkv(n, 3 * d);
  qkv.noalias() = normed * w.qkv;
  qkv.rowwise() += w.qkv_bias;
  qkv.leftCols(d) *= scale;

  Matrix context(n, d);
  Matrix logits(n, n);
  AttentionResult out;
  out.keys = Matrix::Zero(n, dh);
  for (int h = 0; h < n_heads; ++h) {
    const auto q = qkv.middleCols(h * dh, dh);
    const auto k = qkv.middleCols(d + h * dh, dh);
    const auto v = qkv.middleCols(2 * d + h * dh, dh);
    logits.noalias() = q * k.transpose();
    if (log_sizes) logits.rowwise() += *log_sizes;
    softmax_rows(logits);
    context.middleCols(h * dh, dh).noalias() = logits * v;
    out.keys += k;
  }
  out.keys /= float(n_heads);

  out.tokens = x;
  out.tokens.noalias() += context * w.proj;
  out.tokens.rowwise() += w.proj_bias;
  return out;
}

inline void mlp_residual(Matrix& x, const BlockWeights& w) {
  const Matrix normed = layer_norm(x, w.ln2_gain, w.ln2_bias);
  Matrix hidden(x.rows(), w.mlp_in.cols());
  hidden.noalias() = normed * w.mlp_in;
  hidden.rowwise() += w.mlp_in_bias;
  gelu_inplace(hidden);
  x.noalias() += hidden * w.mlp_out;
  x.rowwise() += w.mlp_out_bias;
}

}  // namespace detail

// Softmax attention whose logit for key j is offset by ln(size_j), so a merged
// token receives the attention mass its constituents would have.
inline AttentionResult attention_with_keys(const TokenSequence& ts, const BlockWeights& w, int n_heads) {
  require(int(ts.sizes.size()) == ts.size(), ErrorCategory::kShape, "token sizes length mismatch");
  // ln(1) = 0, so an unmerged sequence takes the plain path with identical results.
  if (std::all_of(ts.sizes.begin(), ts.sizes.end(), [](float s) { return s == 1.0f; }))
    return detail::attention(ts.tokens, w, n_heads, nullptr);
  Vector log_sizes(ts.size());
  for (int j = 0; j < ts.size(); ++j) log_sizes[j] = std::log(ts.sizes[j]);
  return detail::attention(ts.tokens, w, n_heads, &log_sizes);
}

inline TokenSequence encoder_block(const TokenSequence& ts, const BlockWeights& w, int n_heads,
                                   const ToMeConfig& cfg) {
  require(ts.size() >= 1, ErrorCategory::kShape, "encoder_block: empty token sequence");
  AttentionResult attn = attention_with_keys(ts, w, n_heads);
  TokenSequence mid{std::move(attn.tokens), ts.sizes};
  TokenSequence out = merge_step(mid, attn.keys, cfg);
  detail::mlp_residual(out.tokens, w);
  return out;
}

struct EncoderOutput {
  Vector cls_embedding;
  int final_token_count = 0;
  std::vector<int> per_block_counts;  // L + 1 entries, [0] is the input count
};

// Sees each block's sequence right before and right after its merge step.
using MergeObserver =
    std::function<void(int block, const TokenSequence& before, const TokenSequence& after)>;

inline EncoderOutput encoder_forward(const TokenSequence& input, const EncoderWeights& w,
                                     const ToMeConfig& cfg, const MergeObserver& observer = {}) {
  require(cfg.r >= 0, ErrorCategory::kConfig, "r must be non-negative");
  EncoderOutput out;
  out.per_block_counts.push_back(input.size());
  TokenSequence ts = input;
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    AttentionResult attn = attention_with_keys(ts, w.blocks[b], w.n_heads);
    TokenSequence mid{std::move(attn.tokens), std::move(ts.sizes)};
    ts = merge_step(mid, attn.keys, cfg);
    if (observer) observer(int(b), mid, ts);
    detail::mlp_residual(ts.tokens, w.blocks[b]);
    out.per_block_counts.push_back(ts.size());
  }
  out.final_token_count = ts.size();
  out.cls_embedding = layer_norm(ts.tokens.topRows(1), w.final_norm_gain, w.final_norm_bias);
  return out;
}

// Reference encoder with no merging and plain attention.
inline Matrix plain_block(const Matrix& x, const BlockWeights& w, int n_heads) {
  Matrix out = detail::attention(x, w, n_heads, nullptr).tokens;
  detail::mlp_residual(out, w);
  return out;
}

inline Vector plain_encoder_forward(const Matrix& tokens, const EncoderWeights& w) {
  Matrix x = tokens;
  for (const auto& block : w.blocks) x = plain_block(x, block, w.n_heads);
  return layer_norm(x.topRows(1), w.final_norm_gain, w.final_norm_bias);
}

// Token counts the encoder will report for an input of n tokens.
inline std::vector<int> count_trajectory(int n_tokens, int depth, int r, bool protect_cls = true) {
  std::vector<int> counts{n_tokens};
  for (int b = 0; b < depth; ++b) counts.push_back(merged_count(counts.back(), r, protect_cls));
  return counts;
}

}  // namespace fastast
