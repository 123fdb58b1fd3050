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

// Bipartite soft matching token merging.
//
// Tokens are split into alternating sets A and B; every A token proposes an edge
// to its most similar B token (cosine over attention keys), the r strongest
// proposals are kept, and each kept A token is folded into its destination by a
// size-weighted mean. With [CLS] protection, A takes the odd indices so [CLS]
// (index 0) always sits in B, and its column is masked so it neither disappears
// nor absorbs patch tokens.

#pragma once

#include "fastast/common.hpp"
#include "fastast/patchify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace fastast {

struct ToMeConfig {
  int r = 0;
  bool protect_cls = true;
};

struct Partition {
  std::vector<int> set_a;
  std::vector<int> set_b;
};

struct MergeEdge {
  int src = 0;  // token index, member of A
  int dst = 0;  // token index, member of B
  double similarity = 0.0;

  friend bool operator==(const MergeEdge&, const MergeEdge&) = default;
};

struct MergePlan {
  Partition sets;
  std::vector<MergeEdge> edges;
  std::vector<int> unmerged_a;
};

inline Partition partition(int n_tokens, bool protect_cls) {
  require(n_tokens >= 2, ErrorCategory::kConfig,
          "partition needs at least 2 tokens, got " + std::to_string(n_tokens));
  Partition p;
  const int a_parity = protect_cls ? 1 : 0;
  for (int i = 0; i < n_tokens; ++i) (i % 2 == a_parity ? p.set_a : p.set_b).push_back(i);
  return p;
}

// Largest number of merges allowed: every A token, but with [CLS] protected the
// sequence never drops below [CLS] plus one other token.
inline int merge_capacity(int n_tokens, const Partition& p, bool protect_cls) {
  const int cap = int(p.set_a.size());
  return protect_cls ? std::max(0, std::min(cap, n_tokens - 2)) : cap;
}

// Cosine similarity [|A| x |B|]; a zero-norm key gets -1 across its row or column.
inline MatrixD score_edges(const Matrix& keys, const Partition& p) {
  const int n = int(keys.rows());
  for (int i : p.set_a) require(i >= 0 && i < n, ErrorCategory::kShape, "score_edges: A index out of range");
  for (int i : p.set_b) require(i >= 0 && i < n, ErrorCategory::kShape, "score_edges: B index out of range");

  auto unit_rows = [&](const std::vector<int>& idx, std::vector<bool>& zero) {
    MatrixD out(idx.size(), keys.cols());
    zero.assign(idx.size(), false);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.row(i) = keys.row(idx[i]).cast<double>();
      const double norm = out.row(i).norm();
      if (norm == 0.0) zero[i] = true;
      else out.row(i) /= norm;
    }
    return out;
  };
  std::vector<bool> zero_a, zero_b;
  const MatrixD a = unit_rows(p.set_a, zero_a);
  const MatrixD b = unit_rows(p.set_b, zero_b);
  MatrixD sim = a * b.transpose();
  for (std::size_t i = 0; i < zero_a.size(); ++i)
    if (zero_a[i]) sim.row(i).setConstant(-1.0);
  for (std::size_t j = 0; j < zero_b.size(); ++j)
    if (zero_b[j]) sim.col(j).setConstant(-1.0);
  return sim;
}

// [CLS] is never a destination: its similarity column becomes -inf.
inline void mask_cls_destination(MatrixD& sim, const Partition& p) {
  if (!p.set_b.empty() && p.set_b.front() == 0)
    sim.col(0).setConstant(-std::numeric_limits<double>::infinity());
}

// Keeps each A token's best edge (lowest B index on ties), then the `limit`
// strongest of those (lowest A index on ties).
inline MergePlan select_edges(const MatrixD& sim, const Partition& p, int r, int capacity) {
  require(sim.rows() == Eigen::Index(p.set_a.size()) && sim.cols() == Eigen::Index(p.set_b.size()),
          ErrorCategory::kShape, "select_edges: similarity matrix does not match partition");
  MergePlan plan;
  plan.sets = p;
  const int n_a = int(p.set_a.size());
  std::vector<MergeEdge> best(n_a);
  for (int i = 0; i < n_a; ++i) {
    Eigen::Index j = 0;
    sim.row(i).maxCoeff(&j);
    best[i] = {p.set_a[i], p.set_b[j], sim(i, j)};
  }
  std::vector<int> order(n_a);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return best[x].similarity > best[y].similarity; });

  const int limit = std::clamp(std::min(r, capacity), 0, n_a);
  std::vector<bool> merged(n_a, false);
  for (int k = 0; k < limit; ++k) {
    plan.edges.push_back(best[order[k]]);
    merged[order[k]] = true;
  }
  for (int i = 0; i < n_a; ++i)
    if (!merged[i]) plan.unmerged_a.push_back(p.set_a[i]);
  return plan;
}

// Each destination becomes (s_d x_d + sum s_a x_a) / (s_d + sum s_a); sources are
// dropped and survivors keep their original relative order.
inline TokenSequence apply_merge(const TokenSequence& ts, const MergePlan& plan) {
  if (plan.edges.empty()) return ts;
  const int n = ts.size();
  require(int(ts.sizes.size()) == n, ErrorCategory::kShape, "apply_merge: sizes/tokens length mismatch");

  std::vector<bool> removed(n, false);
  std::vector<double> mass(n, 0.0);
  MatrixD acc = MatrixD::Zero(n, ts.dim());
  std::vector<bool> touched(n, false);
  for (const auto& e : plan.edges) {
    require(e.src >= 0 && e.src < n && e.dst >= 0 && e.dst < n && e.src != e.dst,
            ErrorCategory::kShape, "apply_merge: edge index out of range for " + std::to_string(n) + " tokens");
    require(!removed[e.src], ErrorCategory::kShape, "apply_merge: source token merged twice");
    removed[e.src] = true;
    if (!touched[e.dst]) {
      touched[e.dst] = true;
      mass[e.dst] = ts.sizes[e.dst];
      acc.row(e.dst) = double(ts.sizes[e.dst]) * ts.tokens.row(e.dst).cast<double>();
    }
    mass[e.dst] += ts.sizes[e.src];
    acc.row(e.dst) += double(ts.sizes[e.src]) * ts.tokens.row(e.src).cast<double>();
  }
  for (const auto& e : plan.edges)
    require(!removed[e.dst], ErrorCategory::kShape, "apply_merge: destination token is also a source");

  TokenSequence out;
  out.tokens.resize(n - Eigen::Index(plan.edges.size()), ts.dim());
  out.sizes.reserve(out.tokens.rows());
  int row = 0;
  for (int i = 0; i < n; ++i) {
    if (removed[i]) continue;
    if (touched[i]) {
      out.tokens.row(row) = (acc.row(i) / mass[i]).cast<float>();
      out.sizes.push_back(float(mass[i]));
    } else {
      out.tokens.row(row) = ts.tokens.row(i);
      out.sizes.push_back(ts.sizes[i]);
    }
    ++row;
  }
  return out;
}

inline MergePlan plan_merge(const TokenSequence& ts, const Matrix& keys, const ToMeConfig& cfg) {
  require(keys.rows() == ts.size(), ErrorCategory::kShape,
          "merge: key rows " + std::to_string(keys.rows()) + " != token count " + std::to_string(ts.size()));
  const Partition p = partition(ts.size(), cfg.protect_cls);
  MatrixD sim = score_edges(keys, p);
  if (cfg.protect_cls) mask_cls_destination(sim, p);
  return select_edges(sim, p, cfg.r, merge_capacity(ts.size(), p, cfg.protect_cls));
}

inline TokenSequence merge_step(const TokenSequence& ts, const Matrix& keys, const ToMeConfig& cfg) {
  require(cfg.r >= 0, ErrorCategory::kConfig, "r must be non-negative");
  if (cfg.r == 0 || ts.size() < 2) return ts;
  return apply_merge(ts, plan_merge(ts, keys, cfg));
}

// Token count after one merge step at reduction r.
inline int merged_count(int n_tokens, int r, bool protect_cls = true) {
  if (r <= 0 || n_tokens < 2) return n_tokens;
  return n_tokens - std::min(r, merge_capacity(n_tokens, partition(n_tokens, protect_cls), protect_cls));
}

}  // namespace fastast
