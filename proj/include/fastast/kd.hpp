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

// Cross-model distillation loss
//
//   Loss = lambda * Loss_g(psi(Z_s), y) + (1 - lambda) * Loss_d(psi(Z_s), psi(Z_t / tau))
//
// psi is softmax (single-label, cross-entropy terms) or sigmoid (multi-label, mean
// binary cross-entropy terms). Only the teacher logits are temperature-scaled and
// no tau^2 factor is applied. Teacher logits are read-only inputs.

#pragma once

#include "fastast/binary_io.hpp"
#include "fastast/common.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

namespace fastast {

struct KdConfig {
  double lambda = 0.1;
  double temperature = 1.0;
  TaskKind task_kind = TaskKind::kSingleLabel;

  void validate() const {
    require(lambda >= 0.0 && lambda <= 1.0, ErrorCategory::kConfig,
            "lambda must be in [0, 1], got " + std::to_string(lambda));
    require(temperature > 0.0, ErrorCategory::kConfig,
            "temperature must be positive, got " + std::to_string(temperature));
  }
};

struct KdBatch {
  MatrixD student_logits;  // [batch x classes]
  MatrixD teacher_logits;  // [batch x classes]
  std::vector<int> labels;  // single-label class indices
  MatrixD targets;          // multi-label {0, 1} matrix [batch x classes]
};

struct KdLoss {
  double total = 0.0;
  double ground_truth = 0.0;
  double distillation = 0.0;
};

namespace detail {

inline void check_batch(const KdBatch& b, const KdConfig& cfg) {
  cfg.validate();
  const auto rows = b.student_logits.rows(), cols = b.student_logits.cols();
  require(rows >= 1 && cols >= 1, ErrorCategory::kShape, "kd: empty batch");
  require(b.teacher_logits.rows() == rows && b.teacher_logits.cols() == cols, ErrorCategory::kShape,
          "kd: teacher logits " + std::to_string(b.teacher_logits.rows()) + "x" +
              std::to_string(b.teacher_logits.cols()) + " vs student " + std::to_string(rows) + "x" +
              std::to_string(cols));
  if (cfg.task_kind == TaskKind::kSingleLabel) {
    require(Eigen::Index(b.labels.size()) == rows, ErrorCategory::kShape, "kd: label count mismatch");
    for (int y : b.labels)
      require(y >= 0 && y < cols, ErrorCategory::kShape, "kd: label " + std::to_string(y) + " out of range");
  } else {
    require(b.targets.rows() == rows && b.targets.cols() == cols, ErrorCategory::kShape,
            "kd: multi-label target shape mismatch");
  }
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  const double top = z.maxCoeff();
  return top + std::log((z.array() - top).exp().sum());
}

inline Eigen::RowVectorXd softmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  Eigen::RowVectorXd e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// -(q log sigmoid(z) + (1 - q) log(1 - sigmoid(z)))
inline double bce_with_logit(double z, double q) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - q * z;
}

}  // namespace detail

inline KdLoss kd_loss_terms(const KdBatch& b, const KdConfig& cfg) {
  detail::check_batch(b, cfg);
  const auto rows = b.student_logits.rows(), cols = b.student_logits.cols();
  KdLoss loss;
  if (cfg.task_kind == TaskKind::kSingleLabel) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto z = b.student_logits.row(i);
      const double lse = detail::log_sum_exp(z);
      const Eigen::RowVectorXd target = detail::softmax_row(b.teacher_logits.row(i) / cfg.temperature);
      loss.ground_truth += lse - z[b.labels[i]];
      loss.distillation += (target.array() * (lse - z.array())).sum();
    }
    loss.ground_truth /= double(rows);
    loss.distillation /= double(rows);
  } else {
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double z = b.student_logits(i, c);
        loss.ground_truth += detail::bce_with_logit(z, b.targets(i, c));
        loss.distillation += detail::bce_with_logit(z, detail::sigmoid(b.teacher_logits(i, c) / cfg.temperature));
      }
    }
    const double count = double(rows) * double(cols);
    loss.ground_truth /= count;
    loss.distillation /= count;
  }
  loss.total = cfg.lambda * loss.ground_truth + (1.0 - cfg.lambda) * loss.distillation;
  return loss;
}

inline double kd_loss(const KdBatch& b, const KdConfig& cfg) { return kd_loss_terms(b, cfg).total; }

// Analytic dLoss/dZ_s.
inline MatrixD kd_loss_grad(const KdBatch& b, const KdConfig& cfg) {
  detail::check_batch(b, cfg);
  const auto rows = b.student_logits.rows(), cols = b.student_logits.cols();
  MatrixD grad(rows, cols);
  if (cfg.task_kind == TaskKind::kSingleLabel) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::RowVectorXd p = detail::softmax_row(b.student_logits.row(i));
      const Eigen::RowVectorXd target = detail::softmax_row(b.teacher_logits.row(i) / cfg.temperature);
      Eigen::RowVectorXd truth = Eigen::RowVectorXd::Zero(cols);
      truth[b.labels[i]] = 1.0;
      grad.row(i) = (cfg.lambda * (p - truth) + (1.0 - cfg.lambda) * (p - target)) / double(rows);
    }
  } else {
    const double count = double(rows) * double(cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double p = detail::sigmoid(b.student_logits(i, c));
        const double q = detail::sigmoid(b.teacher_logits(i, c) / cfg.temperature);
        grad(i, c) = (cfg.lambda * (p - b.targets(i, c)) + (1.0 - cfg.lambda) * (p - q)) / count;
      }
    }
  }
  return grad;
}

// TLOG1: "TLOG1", u32 n_samples, u32 n_classes, row-major float32 logits.
inline std::string encode_tlog1(const Matrix& logits) {
  binary::Writer out;
  out.bytes("TLOG1");
  out.u32(std::uint32_t(logits.rows()));
  out.u32(std::uint32_t(logits.cols()));
  out.f32s({logits.data(), std::size_t(logits.size())});
  return out.data();
}

inline Matrix decode_tlog1(std::string_view data, const std::string& what = "TLOG1") {
  binary::Reader in(data, what);
  in.expect_magic("TLOG1");
  const auto n_samples = in.u32(), n_classes = in.u32();
  require(std::uint64_t(n_samples) * n_classes * 4 == in.remaining(), ErrorCategory::kFormat,
          what + ": payload holds " + std::to_string(in.remaining()) + " bytes, header declares " +
              std::to_string(n_samples) + "x" + std::to_string(n_classes) + " float32");
  Matrix logits(n_samples, n_classes);
  in.f32s({logits.data(), std::size_t(logits.size())});
  return logits;
}

inline void save_tlog1(const std::filesystem::path& path, const Matrix& logits) {
  binary::write_file(path, encode_tlog1(logits));
}

inline Matrix load_tlog1(const std::filesystem::path& path) {
  return decode_tlog1(binary::read_file(path), "TLOG1 '" + path.string() + "'");
}

}  // namespace fastast
