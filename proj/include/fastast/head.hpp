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

// Linear classification readout and the evaluation metrics.

#pragma once

#include "fastast/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace fastast {

struct HeadWeights {
  Matrix linear;  // [d x n_classes]
  Vector bias;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;
  TaskKind task_kind = TaskKind::kSingleLabel;
};

inline std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - top);
  for (double& v : p) v /= sum;
  return p;
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline Prediction classify(const Vector& cls, const HeadWeights& w, TaskKind task) {
  require(cls.cols() == w.linear.rows() && w.bias.cols() == w.linear.cols(), ErrorCategory::kShape,
          "classify: [CLS] width " + std::to_string(cls.cols()) + " vs head input " +
              std::to_string(w.linear.rows()));
  Prediction p;
  p.task_kind = task;
  const Vector logits = cls * w.linear + w.bias;
  p.logits.assign(logits.data(), logits.data() + logits.size());
  if (task == TaskKind::kSingleLabel) {
    p.probabilities = softmax(p.logits);
  } else {
    p.probabilities.resize(p.logits.size());
    std::transform(p.logits.begin(), p.logits.end(), p.probabilities.begin(), sigmoid);
  }
  return p;
}

// Lowest index wins ties.
inline int argmax(const std::vector<double>& v) {
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

inline double accuracy(const std::vector<Prediction>& predictions, const std::vector<int>& labels) {
  require(!predictions.empty(), ErrorCategory::kConfig, "accuracy: empty input");
  require(predictions.size() == labels.size(), ErrorCategory::kAlignment,
          "accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
              std::to_string(labels.size()) + " labels");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    correct += argmax(predictions[i].probabilities) == labels[i];
  return double(correct) / double(predictions.size());
}

// Multi-label reading of "accuracy": the top-scoring class is one of the positives.
inline double top1_hit_rate(const std::vector<Prediction>& predictions,
                            const std::vector<std::vector<std::uint8_t>>& targets) {
  require(!predictions.empty(), ErrorCategory::kConfig, "top1_hit_rate: empty input");
  require(predictions.size() == targets.size(), ErrorCategory::kAlignment,
          "top1_hit_rate: prediction/target count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += targets[i].at(argmax(predictions[i].probabilities)) != 0;
  return double(hits) / double(predictions.size());
}

// Average precision of one ranked column: mean over positives of precision at that
// positive's rank. Scores sort descending, ties by lower sample index.
inline double average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Extended-precision accumulation keeps short hand cases correctly rounded.
  long double sum = 0.0L;
  std::size_t positives = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!labels[order[rank]]) continue;
    ++positives;
    sum += static_cast<long double>(positives) / static_cast<long double>(rank + 1);
  }
  return positives ? double(sum / static_cast<long double>(positives)) : 0.0;
}

// Classes without positives are left out of the mean.
inline double mean_average_precision(const std::vector<std::vector<double>>& scores,
                                     const std::vector<std::vector<std::uint8_t>>& labels) {
  require(!scores.empty() && scores.size() == labels.size(), ErrorCategory::kAlignment,
          "mean_average_precision: score/label sample count mismatch");
  const std::size_t n_classes = scores.front().size();
  for (std::size_t i = 0; i < scores.size(); ++i)
    require(scores[i].size() == n_classes && labels[i].size() == n_classes, ErrorCategory::kShape,
            "mean_average_precision: ragged score or label rows");
  double total = 0.0;
  int evaluated = 0;
  std::vector<double> column(scores.size());
  std::vector<std::uint8_t> truth(scores.size());
  for (std::size_t c = 0; c < n_classes; ++c) {
    bool any = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      column[i] = scores[i][c];
      truth[i] = labels[i][c] ? 1 : 0;
      any |= truth[i] != 0;
    }
    if (!any) continue;
    total += average_precision(column, truth);
    ++evaluated;
  }
  require(evaluated > 0, ErrorCategory::kConfig, "mean_average_precision: no class has positives");
  return total / evaluated;
}

}  // namespace fastast
