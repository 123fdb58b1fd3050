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

// Full model weights and the spectrogram -> prediction pipeline.

#pragma once

#include "fastast/common.hpp"
#include "fastast/features.hpp"
#include "fastast/head.hpp"
#include "fastast/patchify.hpp"
#include "fastast/tome.hpp"
#include "fastast/transformer.hpp"

#include <string>

namespace fastast {

struct ModelWeights {
  ModelConfig config;
  EmbeddingWeights embed;
  EncoderWeights encoder;
  HeadWeights head;
};

// Visits every tensor in serialization order with its declared shape:
// f(name, tensor, rows, cols). Vectors are 1 x n.
template <typename Model, typename F>
void visit_tensors(Model& m, F&& f) {
  const ModelConfig& c = m.config;
  const Eigen::Index d = c.embed_dim, hidden = c.hidden_dim();
  f("patch_embed.projection", m.embed.projection, c.patch.patch_elements(), d);
  f("patch_embed.bias", m.embed.projection_bias, 1, d);
  f("pos_embed", m.embed.positional, c.n_tokens(), d);
  f("cls_token", m.embed.cls_token, 1, d);
  for (int b = 0; b < c.depth; ++b) {
    auto& w = m.encoder.blocks[b];
    const std::string p = "blocks." + std::to_string(b) + ".";
    f(p + "ln1.gain", w.ln1_gain, 1, d);
    f(p + "ln1.bias", w.ln1_bias, 1, d);
    f(p + "attn.qkv.weight", w.qkv, d, 3 * d);
    f(p + "attn.qkv.bias", w.qkv_bias, 1, 3 * d);
    f(p + "attn.proj.weight", w.proj, d, d);
    f(p + "attn.proj.bias", w.proj_bias, 1, d);
    f(p + "ln2.gain", w.ln2_gain, 1, d);
    f(p + "ln2.bias", w.ln2_bias, 1, d);
    f(p + "mlp.fc1.weight", w.mlp_in, d, hidden);
    f(p + "mlp.fc1.bias", w.mlp_in_bias, 1, hidden);
    f(p + "mlp.fc2.weight", w.mlp_out, hidden, d);
    f(p + "mlp.fc2.bias", w.mlp_out_bias, 1, d);
  }
  f("norm.gain", m.encoder.final_norm_gain, 1, d);
  f("norm.bias", m.encoder.final_norm_bias, 1, d);
  f("head.weight", m.head.linear, d, c.n_classes);
  f("head.bias", m.head.bias, 1, c.n_classes);
}

// Zero-initialized weights with every tensor at its declared shape.
inline ModelWeights allocate_model(const ModelConfig& config) {
  config.validate();
  ModelWeights m;
  m.config = config;
  m.encoder.n_heads = config.n_heads;
  m.encoder.blocks.resize(config.depth);
  visit_tensors(m, [](const std::string&, auto& t, Eigen::Index rows, Eigen::Index cols) {
    t.setZero(rows, cols);
  });
  return m;
}

// Normalizes, pads to the model's clip length and checks the mel axis.
inline Spectrogram prepare_input(const ModelWeights& m, const Spectrogram& s) {
  const auto& sc = m.config.spectrogram;
  require(s.n_mels() == sc.n_mels, ErrorCategory::kShape,
          "input has " + std::to_string(s.n_mels()) + " mel bins, model expects " + std::to_string(sc.n_mels));
  if (sc.norm_mean == 0.0 && sc.norm_std == 1.0) return fit_to_frames(s, m.config.n_frames());
  return fit_to_frames(normalize(s, sc.norm_mean, sc.norm_std), m.config.n_frames());
}

// patchify -> embed -> positional + [CLS]; expects a prepared spectrogram.
inline TokenSequence tokenize(const ModelWeights& m, const Spectrogram& prepared) {
  const Patches patches = extract_patches(prepared, m.config.patch);
  return add_positional_and_cls(embed_patches(patches.values, m.embed), m.embed);
}

struct InferenceOutput {
  Prediction prediction;
  EncoderOutput encoder;
};

inline InferenceOutput infer(const ModelWeights& m, const Spectrogram& prepared, const ToMeConfig& tome,
                             const MergeObserver& observer = {}) {
  InferenceOutput out;
  out.encoder = encoder_forward(tokenize(m, prepared), m.encoder, tome, observer);
  out.prediction = classify(out.encoder.cls_embedding, m.head, m.config.task_kind);
  return out;
}

// Same pipeline through the merge-free reference encoder.
inline Prediction infer_baseline(const ModelWeights& m, const Spectrogram& prepared) {
  const TokenSequence ts = tokenize(m, prepared);
  return classify(plain_encoder_forward(ts.tokens, m.encoder), m.head, m.config.task_kind);
}

}  // namespace fastast
