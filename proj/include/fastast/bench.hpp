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

// Inference runs, r sweeps with throughput timing, report emission and
// distillation-loss evaluation over a dataset.
//
// Timing protocol: each r gets `warmup_runs` passes over one batch, then
// `measured_runs` passes over the whole dataset. A pass times tokenization,
// the encoder and the head; inputs are loaded and prepared beforehand. The
// reported samples/second is the median across measured passes.

#pragma once

#include "fastast/common.hpp"
#include "fastast/head.hpp"
#include "fastast/kd.hpp"
#include "fastast/model.hpp"
#include "fastast/model_io.hpp"
#include "fastast/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

namespace fastast {

struct LoadedDataset {
  std::vector<Spectrogram> inputs;  // prepared for the model
  std::vector<Label> labels;
  TaskKind task_kind = TaskKind::kSingleLabel;
  int n_classes = 0;

  int size() const { return int(inputs.size()); }
};

inline void check_compatible(const ModelWeights& m, TaskKind task, int n_classes, double clip_seconds) {
  require(task == m.config.task_kind, ErrorCategory::kConfig,
          "dataset task kind " + std::string(task_kind_name(task)) + " != model task kind " +
              std::string(task_kind_name(m.config.task_kind)));
  require(n_classes == m.config.n_classes, ErrorCategory::kConfig,
          "dataset has " + std::to_string(n_classes) + " classes, model has " + std::to_string(m.config.n_classes));
  require(std::abs(clip_seconds - m.config.clip_seconds) < 1e-9, ErrorCategory::kConfig,
          "clip length mismatch: dataset " + std::to_string(clip_seconds) + " s, model " +
              std::to_string(m.config.clip_seconds) + " s");
}

inline LoadedDataset load_dataset(const ModelWeights& m, const DatasetManifest& manifest,
                                  const std::filesystem::path& manifest_path) {
  check_compatible(m, manifest.task_kind, manifest.n_classes, manifest.clip_seconds);
  LoadedDataset data;
  data.task_kind = manifest.task_kind;
  data.n_classes = manifest.n_classes;
  for (const auto& e : manifest.entries) {
    data.inputs.push_back(prepare_input(m, load_input(resolve_entry(manifest_path, e), m.config.spectrogram)));
    data.labels.push_back(e.label);
  }
  return data;
}

inline LoadedDataset prepare_dataset(const ModelWeights& m, const SyntheticDataset& synthetic,
                                     TaskKind task, int n_classes) {
  check_compatible(m, task, n_classes, m.config.clip_seconds);
  LoadedDataset data;
  data.task_kind = task;
  data.n_classes = n_classes;
  for (const auto& s : synthetic.spectrograms) data.inputs.push_back(prepare_input(m, s));
  data.labels = synthetic.labels;
  return data;
}

// Runs fn(i) for i in [begin, end) on `threads` workers taking `batch`-sized
// chunks round-robin. Callers write results by index, so aggregation order
// never depends on scheduling.
template <typename F>
void parallel_for(int begin, int end, int threads, int batch, F&& fn) {
  batch = std::max(1, batch);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  for (int w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (int start = begin + w * batch; start < end; start += threads * batch)
        for (int i = start; i < std::min(end, start + batch); ++i) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

inline std::string metric_name(TaskKind task) { return task == TaskKind::kSingleLabel ? "accuracy" : "mAP"; }

inline double evaluate(const std::vector<Prediction>& predictions, const std::vector<Label>& labels, TaskKind task) {
  require(predictions.size() == labels.size(), ErrorCategory::kAlignment, "evaluate: prediction/label count mismatch");
  if (task == TaskKind::kSingleLabel) {
    std::vector<int> idx;
    for (const auto& l : labels) idx.push_back(l.index);
    return accuracy(predictions, idx);
  }
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<std::uint8_t>> targets;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    scores.push_back(predictions[i].probabilities);
    targets.push_back(labels[i].targets);
  }
  return mean_average_precision(scores, targets);
}

struct InferenceReport {
  std::vector<Prediction> predictions;
  std::vector<int> final_token_counts;
  std::vector<int> per_block_counts;  // of the first sample
  std::string metric_name;
  double metric = 0.0;
  double top1_hit_rate = 0.0;  // multi-label only
};

// baseline = true routes through the merge-free reference encoder.
inline InferenceReport run_inference(const ModelWeights& m, const LoadedDataset& data, int r, int threads = 1,
                                     bool baseline = false, int batch = 1) {
  require(data.size() >= 1, ErrorCategory::kConfig, "run_inference: empty dataset");
  require(r >= 0, ErrorCategory::kConfig, "r must be non-negative");
  InferenceReport report;
  report.predictions.resize(data.size());
  report.final_token_counts.resize(data.size());
  std::vector<std::vector<int>> counts(data.size());
  parallel_for(0, data.size(), threads, batch, [&](int i) {
    if (baseline) {
      report.predictions[i] = infer_baseline(m, data.inputs[i]);
      report.final_token_counts[i] = m.config.n_tokens();
      counts[i].assign(m.config.depth + 1, m.config.n_tokens());
    } else {
      auto out = infer(m, data.inputs[i], ToMeConfig{r, true});
      report.predictions[i] = std::move(out.prediction);
      report.final_token_counts[i] = out.encoder.final_token_count;
      counts[i] = std::move(out.encoder.per_block_counts);
    }
  });
  report.per_block_counts = counts.front();
  report.metric_name = metric_name(data.task_kind);
  report.metric = evaluate(report.predictions, data.labels, data.task_kind);
  if (data.task_kind == TaskKind::kMultiLabel) {
    std::vector<std::vector<std::uint8_t>> targets;
    for (const auto& l : data.labels) targets.push_back(l.targets);
    report.top1_hit_rate = fastast::top1_hit_rate(report.predictions, targets);
  }
  return report;
}

struct BenchConfig {
  std::vector<int> r_values{0, 5, 10, 15, 20, 25, 30, 35, 40};
  int batch = 1;
  int warmup_runs = 2;
  int measured_runs = 3;
  int threads = 1;
  std::uint64_t seed = 0;

  void validate() const {
    require(!r_values.empty(), ErrorCategory::kConfig, "r sweep is empty");
    for (int r : r_values) require(r >= 0, ErrorCategory::kConfig, "r values must be non-negative");
    require(measured_runs >= 3, ErrorCategory::kConfig, "measured runs must be >= 3");
    require(warmup_runs >= 0, ErrorCategory::kConfig, "warmup runs must be >= 0");
    require(batch >= 1, ErrorCategory::kConfig, "batch must be >= 1");
    require(threads >= 1, ErrorCategory::kConfig, "threads must be >= 1");
  }
};

struct SweepRow {
  int r = 0;
  double metric = 0.0;
  double drop = 0.0;  // metric - metric at r = 0
  double samples_per_second = 0.0;
  int tokens_final = 0;
  int thread_count = 1;
  int warmup_runs = 0;
  int measured_runs = 0;
  std::vector<double> run_seconds;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::string metric_name;
  int n_samples = 0;
  std::vector<SweepRow> rows;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// r = 0 is always measured so every drop has a reference.
inline SweepResult benchmark_throughput(const ModelWeights& m, const LoadedDataset& data, const BenchConfig& cfg) {
  cfg.validate();
  require(data.size() >= 1, ErrorCategory::kConfig, "benchmark: empty dataset");
  std::vector<int> rs = cfg.r_values;
  rs.push_back(0);
  std::sort(rs.begin(), rs.end());
  rs.erase(std::unique(rs.begin(), rs.end()), rs.end());

  using Clock = std::chrono::steady_clock;
  const int warm_count = std::min(data.size(), std::max(cfg.batch, cfg.threads));
  SweepResult result;
  result.metric_name = metric_name(data.task_kind);
  result.n_samples = data.size();
  for (int r : rs) {
    const ToMeConfig tome{r, true};
    for (int w = 0; w < cfg.warmup_runs; ++w)
      parallel_for(0, warm_count, cfg.threads, cfg.batch, [&](int i) { (void)infer(m, data.inputs[i], tome); });

    SweepRow row;
    row.r = r;
    row.thread_count = cfg.threads;
    row.warmup_runs = cfg.warmup_runs;
    row.measured_runs = cfg.measured_runs;
    std::vector<Prediction> predictions(data.size());
    std::vector<int> final_counts(data.size());
    std::vector<double> rates;
    for (int run = 0; run < cfg.measured_runs; ++run) {
      const auto start = Clock::now();
      parallel_for(0, data.size(), cfg.threads, cfg.batch, [&](int i) {
        auto out = infer(m, data.inputs[i], tome);
        predictions[i] = std::move(out.prediction);
        final_counts[i] = out.encoder.final_token_count;
      });
      const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
      row.run_seconds.push_back(seconds);
      rates.push_back(double(data.size()) / std::max(seconds, 1e-12));
    }
    row.samples_per_second = median(rates);
    row.metric = evaluate(predictions, data.labels, data.task_kind);
    row.tokens_final = final_counts.front();
    result.rows.push_back(std::move(row));
  }
  const double reference = result.rows.front().metric;
  for (auto& row : result.rows) row.drop = row.r == 0 ? 0.0 : row.metric - reference;
  return result;
}

inline nlohmann::json sweep_to_json(const SweepResult& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"r", r.r},
                    {"metric", r.metric},
                    {"drop", r.drop},
                    {"samples_per_second", r.samples_per_second},
                    {"tokens_final", r.tokens_final},
                    {"thread_count", r.thread_count},
                    {"warmup_runs", r.warmup_runs},
                    {"measured_runs", r.measured_runs},
                    {"run_seconds", r.run_seconds}});
  }
  return {{"format", "fastast-sweep/1"}, {"metric_name", s.metric_name}, {"n_samples", s.n_samples}, {"rows", rows}};
}

inline SweepResult sweep_from_json(const nlohmann::json& j) {
  try {
    SweepResult s;
    s.metric_name = j.at("metric_name").get<std::string>();
    s.n_samples = j.at("n_samples").get<int>();
    for (const auto& r : j.at("rows")) {
      SweepRow row;
      row.r = r.at("r").get<int>();
      row.metric = r.at("metric").get<double>();
      row.drop = r.at("drop").get<double>();
      row.samples_per_second = r.at("samples_per_second").get<double>();
      row.tokens_final = r.at("tokens_final").get<int>();
      row.thread_count = r.at("thread_count").get<int>();
      row.warmup_runs = r.at("warmup_runs").get<int>();
      row.measured_runs = r.at("measured_runs").get<int>();
      row.run_seconds = r.at("run_seconds").get<std::vector<double>>();
      s.rows.push_back(std::move(row));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("sweep report: ") + e.what());
  }
}

// Shortest round-trip decimal, '.' separator regardless of locale.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string sweep_to_csv(const SweepResult& s) {
  std::string out = "r,metric,drop,s_per_s,tokens_final\n";
  for (const auto& r : s.rows) {
    out += std::to_string(r.r) + ',' + format_number(r.metric) + ',' + format_number(r.drop) + ',' +
           format_number(r.samples_per_second) + ',' + std::to_string(r.tokens_final) + '\n';
  }
  return out;
}

struct KdEvalReport {
  KdConfig config;
  int n_samples = 0;
  std::vector<KdLoss> per_batch;
  KdLoss mean;  // over all samples as one batch
};

inline KdBatch make_kd_batch(const std::vector<Prediction>& student, const Matrix& teacher,
                             const std::vector<Label>& labels, TaskKind task, int begin, int end) {
  const int classes = int(teacher.cols());
  KdBatch b;
  b.student_logits.resize(end - begin, classes);
  b.teacher_logits = teacher.middleRows(begin, end - begin).cast<double>();
  if (task == TaskKind::kMultiLabel) b.targets.resize(end - begin, classes);
  for (int i = begin; i < end; ++i) {
    for (int c = 0; c < classes; ++c) b.student_logits(i - begin, c) = student[i].logits[c];
    if (task == TaskKind::kSingleLabel) b.labels.push_back(labels[i].index);
    else
      for (int c = 0; c < classes; ++c) b.targets(i - begin, c) = labels[i].targets[c];
  }
  return b;
}

inline KdEvalReport kd_eval(const std::vector<Prediction>& student, const Matrix& teacher,
                            const std::vector<Label>& labels, const KdConfig& cfg, int batch) {
  cfg.validate();
  require(batch >= 1, ErrorCategory::kConfig, "batch must be >= 1");
  const int n = int(student.size());
  require(teacher.rows() == n, ErrorCategory::kAlignment,
          "teacher logits: expected " + std::to_string(n) + " samples, found " + std::to_string(teacher.rows()));
  const int classes = n > 0 ? int(student.front().logits.size()) : 0;
  require(teacher.cols() == classes, ErrorCategory::kAlignment,
          "teacher logits: expected " + std::to_string(classes) + " classes, found " + std::to_string(teacher.cols()));
  require(int(labels.size()) == n, ErrorCategory::kAlignment,
          "labels: expected " + std::to_string(n) + " samples, found " + std::to_string(labels.size()));
  KdEvalReport report;
  report.config = cfg;
  report.n_samples = n;
  for (int start = 0; start < n; start += batch)
    report.per_batch.push_back(
        kd_loss_terms(make_kd_batch(student, teacher, labels, cfg.task_kind, start, std::min(n, start + batch)), cfg));
  report.mean = kd_loss_terms(make_kd_batch(student, teacher, labels, cfg.task_kind, 0, n), cfg);
  return report;
}

inline nlohmann::json kd_report_to_json(const KdEvalReport& r) {
  auto terms = [](const KdLoss& l) {
    return nlohmann::json{{"loss", l.total}, {"loss_g", l.ground_truth}, {"loss_d", l.distillation}};
  };
  nlohmann::json batches = nlohmann::json::array();
  for (const auto& b : r.per_batch) batches.push_back(terms(b));
  return {{"format", "fastast-kd/1"},
          {"lambda", r.config.lambda},
          {"tau", r.config.temperature},
          {"task_kind", std::string(task_kind_name(r.config.task_kind))},
          {"n_samples", r.n_samples},
          {"mean", terms(r.mean)},
          {"per_batch", batches}};
}

}  // namespace fastast
