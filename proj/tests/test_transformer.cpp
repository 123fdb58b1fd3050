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

#include "fastast/transformer.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

namespace fastast {
namespace {

using oracle::random_tokens;

BlockWeights zero_block(int d, int hidden) {
  BlockWeights w;
  w.ln1_gain = w.ln1_bias = w.ln2_gain = w.ln2_bias = w.proj_bias = w.mlp_out_bias = Vector::Zero(d);
  w.qkv = Matrix::Zero(d, 3 * d);
  w.qkv_bias = Vector::Zero(3 * d);
  w.proj = Matrix::Zero(d, d);
  w.mlp_in = Matrix::Zero(d, hidden);
  w.mlp_in_bias = Vector::Zero(hidden);
  w.mlp_out = Matrix::Zero(hidden, d);
  return w;
}

TEST(Attention, UnitSizesEqualPlainSoftmax) {
  std::mt19937 rng(1);
  const BlockWeights w = oracle::random_block(rng, 12, 48);
  const TokenSequence ts = random_tokens(rng, 11, 12);
  const Vector zero_offsets = Vector::Zero(11);
  const AttentionResult offset = detail::attention(ts.tokens, w, 3, &zero_offsets);
  const AttentionResult plain = detail::attention(ts.tokens, w, 3, nullptr);
  const AttentionResult api = attention_with_keys(ts, w, 3);
  EXPECT_EQ(offset.tokens, plain.tokens);
  EXPECT_EQ(offset.keys, plain.keys);
  EXPECT_EQ(api.tokens, plain.tokens);
}

TEST(Attention, SingleTokenIsValueProjection) {
  std::mt19937 rng(2);
  const int d = 12;
  const BlockWeights w = oracle::random_block(rng, d, 48);
  const TokenSequence ts = random_tokens(rng, 1, d);
  const AttentionResult out = attention_with_keys(ts, w, 3);

  Matrix qkv = layer_norm(ts.tokens, w.ln1_gain, w.ln1_bias) * w.qkv;
  qkv.rowwise() += w.qkv_bias;
  Matrix expected = ts.tokens;
  expected.noalias() += qkv.rightCols(d) * w.proj;
  expected.rowwise() += w.proj_bias;
  EXPECT_EQ(out.tokens, expected);
}

TEST(Attention, MatchesNaivePerHeadLoops) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockWeights w = oracle::random_block(rng, 12, 48);
    TokenSequence ts = random_tokens(rng, 6, 12);
    std::uniform_int_distribution<int> size_dist(1, 4);
    for (auto& s : ts.sizes) s = float(trial == 0 ? 1 : size_dist(rng));
    const AttentionResult out = attention_with_keys(ts, w, 3);
    const auto expected = oracle::naive_attention(ts.tokens, ts.sizes, w, 3);
    for (int i = 0; i < 6; ++i) {
      for (int c = 0; c < 12; ++c) ASSERT_NEAR(out.tokens(i, c), expected.tokens[i][c], 1e-5);
      for (int c = 0; c < 4; ++c) ASSERT_NEAR(out.keys(i, c), expected.keys[i][c], 1e-5);
    }
  }
}

TEST(Attention, RejectsMismatchedWeights) {
  std::mt19937 rng(4);
  const BlockWeights w = oracle::random_block(rng, 12, 48);
  EXPECT_THROW(attention_with_keys(random_tokens(rng, 4, 8), w, 2), Error);
}

TEST(EncoderBlock, ZeroReductionIsPlainBlock) {
  std::mt19937 rng(5);
  const BlockWeights w = oracle::random_block(rng, 12, 48);
  const TokenSequence ts = random_tokens(rng, 25, 12);
  const TokenSequence out = encoder_block(ts, w, 3, ToMeConfig{0, true});
  EXPECT_EQ(out.tokens, plain_block(ts.tokens, w, 3));
  EXPECT_EQ(out.sizes, ts.sizes);
}

TEST(EncoderBlock, ZeroWeightsOnlyMerge) {
  std::mt19937 rng(6);
  const BlockWeights w = zero_block(8, 32);
  const TokenSequence ts = random_tokens(rng, 13, 8);
  for (int r : {0, 2, 5}) {
    const TokenSequence out = encoder_block(ts, w, 2, ToMeConfig{r, true});
    const TokenSequence merged = merge_step(ts, Matrix::Zero(13, 4), ToMeConfig{r, true});
    EXPECT_EQ(out.tokens, merged.tokens);
    EXPECT_EQ(out.sizes, merged.sizes);
  }
}

TEST(EncoderBlock, TenTokensMinusThree) {
  std::mt19937 rng(7);
  const BlockWeights w = oracle::random_block(rng, 12, 48);
  EXPECT_EQ(encoder_block(random_tokens(rng, 10, 12), w, 3, ToMeConfig{3, true}).size(), 7);
}

TEST(EncoderBlock, WithinSetPermutationLeavesMergedSetUnchanged) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const BlockWeights w = oracle::random_block(rng, 12, 48);
    const int n = 21;
    const TokenSequence ts = random_tokens(rng, n, 12);
    // Shuffle odd positions among themselves and even non-[CLS] positions among themselves.
    std::vector<int> odd, even;
    for (int i = 1; i < n; ++i) (i % 2 ? odd : even).push_back(i);
    std::vector<int> odd_perm = odd, even_perm = even;
    std::shuffle(odd_perm.begin(), odd_perm.end(), rng);
    std::shuffle(even_perm.begin(), even_perm.end(), rng);
    TokenSequence shuffled = ts;
    for (std::size_t k = 0; k < odd.size(); ++k) shuffled.tokens.row(odd[k]) = ts.tokens.row(odd_perm[k]);
    for (std::size_t k = 0; k < even.size(); ++k) shuffled.tokens.row(even[k]) = ts.tokens.row(even_perm[k]);

    const ToMeConfig cfg{6, true};
    const TokenSequence a = encoder_block(ts, w, 3, cfg);
    const TokenSequence b = encoder_block(shuffled, w, 3, cfg);
    ASSERT_EQ(a.size(), b.size());
    auto rows = [](const TokenSequence& s) {
      std::vector<std::vector<float>> out;
      for (int i = 0; i < s.size(); ++i) {
        std::vector<float> row(s.tokens.row(i).data(), s.tokens.row(i).data() + s.dim());
        row.push_back(s.sizes[i]);
        out.push_back(row);
      }
      std::sort(out.begin() + 1, out.end(), [](const auto& x, const auto& y) { return x[0] < y[0]; });
      return out;
    };
    const auto ra = rows(a), rb = rows(b);
    for (std::size_t i = 0; i < ra.size(); ++i)
      for (std::size_t c = 0; c < ra[i].size(); ++c) ASSERT_NEAR(ra[i][c], rb[i][c], 1e-5);
  }
}

TEST(EncoderBlock, MergedDuplicateMatchesSizeTwoToken) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 20; ++trial) EXPECT_LT(scenario::duplicate_merge_gap(rng), 1e-5);
}

TEST(EncoderForward, ReferenceDepthEndsAt109) {
  std::mt19937 rng(10);
  const EncoderWeights w = oracle::random_encoder(rng, 12, 12, 3);
  const EncoderOutput out = encoder_forward(random_tokens(rng, 589, 12), w, ToMeConfig{40, true});
  EXPECT_EQ(out.final_token_count, 109);
  ASSERT_EQ(out.per_block_counts.size(), 13u);
  for (int b = 0; b < 12; ++b) EXPECT_EQ(out.per_block_counts[b] - out.per_block_counts[b + 1], 40);
}

TEST(EncoderForward, ShortClipTrajectoryFollowsCountLaw) {
  std::mt19937 rng(11);
  const EncoderWeights w = oracle::random_encoder(rng, 12, 12, 3);
  const EncoderOutput out = encoder_forward(random_tokens(rng, 109, 12), w, ToMeConfig{10, true});
  const std::vector<int> expected = oracle::simulate_counts(109, 12, 10);
  EXPECT_EQ(out.per_block_counts, expected);
  EXPECT_EQ(out.per_block_counts, count_trajectory(109, 12, 10));
  EXPECT_EQ(expected, std::vector<int>({109, 99, 89, 79, 69, 59, 49, 39, 29, 19, 10, 5, 3}));
}

TEST(EncoderForward, ZeroReductionKeepsCount) {
  std::mt19937 rng(12);
  const EncoderWeights w = oracle::random_encoder(rng, 4, 12, 3);
  const EncoderOutput out = encoder_forward(random_tokens(rng, 49, 12), w, ToMeConfig{0, true});
  EXPECT_EQ(out.per_block_counts, std::vector<int>(5, 49));
}

TEST(EncoderForward, ZeroReductionMatchesPlainEncoderBitwise) {
  std::mt19937 rng(13);
  const EncoderWeights w = oracle::random_encoder(rng, 6, 12, 3);
  for (int trial = 0; trial < 5; ++trial) {
    const TokenSequence ts = random_tokens(rng, 37, 12);
    EXPECT_EQ(encoder_forward(ts, w, ToMeConfig{0, true}).cls_embedding, plain_encoder_forward(ts.tokens, w));
  }
}

TEST(EncoderForward, ConservesAcrossEveryMerge) {
  std::mt19937 rng(14);
  const EncoderWeights w = oracle::random_encoder(rng, 12, 12, 3);
  const TokenSequence ts = random_tokens(rng, 589, 12);
  for (int r : {5, 20, 40}) {
    const auto report = scenario::check_conservation(ts, w, r);
    EXPECT_TRUE(report.mass_exact);
    EXPECT_LT(report.worst_centroid_error, 1e-5);
    EXPECT_EQ(report.merges_checked, 12);
  }
}

TEST(ModelConfig, ValidatesHeadDivisibility) {
  ModelConfig cfg;
  cfg.n_heads = 5;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_NO_THROW(ModelConfig{}.validate());
  EXPECT_EQ(ModelConfig{}.n_tokens(), 589);
}

}  // namespace
}  // namespace fastast
