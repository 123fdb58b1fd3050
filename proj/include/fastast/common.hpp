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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fastast {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::RowVectorXf;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Categories double as the machine-parsable prefix of CLI error lines.
enum class ErrorCategory {
  kConfig,
  kShape,
  kIo,
  kFormat,
  kAlignment,
  kUnsupported,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kAlignment: return "alignment";
    case ErrorCategory::kUnsupported: return "unsupported";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

inline void require(bool condition, ErrorCategory category, const std::string& message) {
  if (!condition) fail(category, message);
}

enum class TaskKind { kSingleLabel, kMultiLabel };

inline std::string_view task_kind_name(TaskKind kind) {
  return kind == TaskKind::kSingleLabel ? "single-label" : "multi-label";
}

inline TaskKind parse_task_kind(std::string_view name) {
  if (name == "single-label") return TaskKind::kSingleLabel;
  if (name == "multi-label") return TaskKind::kMultiLabel;
  fail(ErrorCategory::kConfig, "unknown task kind '" + std::string(name) + "'");
}

}  // namespace fastast
