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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include "fastast/fastast.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace fastast;

constexpr double kMergeValueTol = 1e-6;
constexpr double kDuplicateTol = 1e-5;
constexpr double kCentroidTol = 1e-5;
constexpr double kConvexTol = 1e-12;
constexpr double kGradTol = 1e-5;
constexpr double kMapTol = 1e-9;
constexpr double kThroughputNoise = 0.05;
constexpr double kMinSpeedup = 1.3;
constexpr double kChanceMultiple = 3.0;
constexpr double kAccuracyRelDrop = 0.20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

ModelConfig reference_config(int n_classes = 50) {
  ModelConfig c;  // L = 12, d = 192, 3 heads, mlp_ratio 4, t = 5 s
  c.n_classes = n_classes;
  return c;
}

const ModelWeights& reference_model() {
  static const ModelWeights m = generate_synthetic_model(0, reference_config());
  return m;
}

Spectrogram synthetic_input(std::uint64_t seed) {
  return generate_synthetic_dataset(seed, 1, SyntheticDataConfig{}).spectrograms.front();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

Outcome patch_count_law() {
  const int five = patch_count(5.0), one = patch_count(1.0);
  return {five == 588 && one == 108, fmt("patch_count(5) = %d, patch_count(1) = %d", five, one)};
}

Outcome token_reduction_law() {
  const ModelWeights& m = reference_model();
  const auto out = infer(m, prepare_input(m, synthetic_input(1)), ToMeConfig{40, true}).encoder;
  bool steps = out.per_block_counts.size() == 13;
  for (std::size_t b = 0; steps && b + 1 < out.per_block_counts.size(); ++b)
    steps = out.per_block_counts[b] - out.per_block_counts[b + 1] == 40;
  return {out.final_token_count == 109 && out.per_block_counts.front() == 589 && steps,
          fmt("589 -> %d tokens, every block removes 40: %s", out.final_token_count, steps ? "yes" : "no")};
}

Outcome zero_reduction_noop() {
  const ModelWeights& m = reference_model();
  std::mt19937 rng(3);
  int identical = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Spectrogram s;
    s.values = oracle::random_matrix(rng, 128, 500, -3.0f, 3.0f);
    const TokenSequence ts = tokenize(m, prepare_input(m, s));
    const Vector merged = encoder_forward(ts, m.encoder, ToMeConfig{0, true}).cls_embedding;
    const Vector plain = plain_encoder_forward(ts.tokens, m.encoder);
    identical += merged == plain ? 1 : 0;
  }
  return {identical == 20, fmt("%d of 20 inputs bitwise identical", identical)};
}

Outcome merge_oracle() {
  std::mt19937 rng(4);
  int cases = 0, edge_mismatch = 0;
  double worst = 0.0;
  for (bool protect : {true, false})
    for (int n = 2; n <= 8; ++n)
      for (int r = 0; r <= n / 2; ++r)
        for (int trial = 0; trial < 50; ++trial) {
          ++cases;
          const TokenSequence ts = oracle::random_tokens(rng, n, 4);
          const Matrix keys = oracle::random_matrix(rng, n, 4);
          const auto expected = oracle::brute_force_merge(oracle::to_rows(ts.tokens),
                                                          std::vector<double>(n, 1.0), oracle::to_rows(keys), r, protect);
          const ToMeConfig cfg{r, protect};
          std::vector<std::pair<int, int>> edges;
          if (r > 0)
            for (const auto& e : plan_merge(ts, keys, cfg).edges) edges.emplace_back(e.src, e.dst);
          const TokenSequence out = merge_step(ts, keys, cfg);
          if (edges != expected.edges || std::size_t(out.size()) != expected.tokens.size()) {
            ++edge_mismatch;
            continue;
          }
          for (int i = 0; i < out.size(); ++i) {
            if (out.sizes[i] != expected.sizes[i]) ++edge_mismatch;
            for (int c = 0; c < 4; ++c) worst = std::max(worst, std::abs(double(out.tokens(i, c)) - expected.tokens[i][c]));
          }
        }
  return {edge_mismatch == 0 && worst < kMergeValueTol,
          fmt("%d cases, %d edge-set mismatches, max value diff %.2e", cases, edge_mismatch, worst)};
}

Outcome merged_duplicate() {
  std::mt19937 rng(5);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) worst = std::max(worst, scenario::duplicate_merge_gap(rng, 17, 24, 3, 3));
  return {worst < kDuplicateTol, fmt("20 trials, max [CLS] diff %.2e", worst)};
}

Outcome conservation() {
  const ModelWeights& m = reference_model();
  const TokenSequence ts = tokenize(m, prepare_input(m, synthetic_input(6)));
  bool mass = true;
  double worst = 0.0;
  int merges = 0;
  for (int r : {5, 20, 40}) {
    const auto rep = scenario::check_conservation(ts, m.encoder, r);
    mass = mass && rep.mass_exact;
    worst = std::max(worst, rep.worst_centroid_error);
    merges += rep.merges_checked;
  }
  return {mass && worst < kCentroidTol && merges == 36,
          fmt("%d merges, sizes exact: %s, max centroid rel err %.2e", merges, mass ? "yes" : "no", worst)};
}

KdBatch random_kd_batch(std::mt19937& rng, int rows, int cols, TaskKind task) {
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  KdBatch b;
  b.student_logits.resize(rows, cols);
  b.teacher_logits.resize(rows, cols);
  for (Eigen::Index i = 0; i < b.student_logits.size(); ++i) {
    b.student_logits.data()[i] = dist(rng);
    b.teacher_logits.data()[i] = dist(rng);
  }
  if (task == TaskKind::kSingleLabel) {
    for (int i = 0; i < rows; ++i) b.labels.push_back(int(rng() % unsigned(cols)));
  } else {
    b.targets.resize(rows, cols);
    for (Eigen::Index i = 0; i < b.targets.size(); ++i) b.targets.data()[i] = double(rng() % 2);
  }
  return b;
}

Outcome kd_correctness() {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_convex = 0.0, worst_grad = 0.0, worst_oracle = 0.0;
  int batches = 0;
  for (TaskKind task : {TaskKind::kSingleLabel, TaskKind::kMultiLabel}) {
    for (int trial = 0; trial < 100; ++trial) {
      const KdBatch b = random_kd_batch(rng, 1 + trial % 8, 2 + trial % 9, task);
      const bool defaults = trial % 2 == 0;
      const KdConfig cfg{defaults ? 0.1 : unit(rng), defaults ? 1.0 : 0.5 + 2.0 * unit(rng), task};
      const double mix = cfg.lambda * kd_loss(b, {1.0, cfg.temperature, task}) +
                         (1.0 - cfg.lambda) * kd_loss(b, {0.0, cfg.temperature, task});
      worst_convex = std::max(worst_convex, std::abs(kd_loss(b, cfg) - mix));
      worst_oracle = std::max(worst_oracle,
                              std::abs(kd_loss(b, cfg) - oracle::naive_kd_loss(b, cfg.lambda, cfg.temperature, task)));
      worst_grad = std::max(worst_grad, oracle::normwise_relative_error(kd_loss_grad(b, cfg),
                                                                        oracle::finite_difference_grad(b, cfg)));
      ++batches;
    }
  }
  return {worst_convex < kConvexTol && worst_grad < kGradTol && worst_oracle < 1e-10,
          fmt("%d batches, convex law %.1e, grad rel err %.2e, scalar oracle %.1e", batches, worst_convex, worst_grad,
              worst_oracle)};
}

Outcome metric_oracles() {
  const double hand = average_precision({0.9, 0.8, 0.7}, {1, 0, 1});
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 50, classes = 1 + trial % 6;
    std::vector<std::vector<double>> scores(n, std::vector<double>(classes));
    std::vector<std::vector<std::uint8_t>> labels(n, std::vector<std::uint8_t>(classes));
    for (auto& row : scores)
      for (double& v : row) v = trial % 4 == 0 ? std::floor(unit(rng) * 5) : unit(rng);
    for (auto& row : labels)
      for (auto& v : row) v = unit(rng) < 0.35;
    labels[n - 1][0] = 1;
    double expected = 0.0;
    int evaluated = 0;
    for (int c = 0; c < classes; ++c) {
      std::vector<double> col(n);
      std::vector<std::uint8_t> truth(n);
      bool any = false;
      for (int i = 0; i < n; ++i) col[i] = scores[i][c], truth[i] = labels[i][c], any |= truth[i] != 0;
      if (any) expected += oracle::quadratic_average_precision(col, truth), ++evaluated;
    }
    worst = std::max(worst, std::abs(mean_average_precision(scores, labels) - expected / evaluated));
  }
  return {hand == 5.0 / 6.0 && worst < kMapTol, fmt("AP hand case %.17g, 200 instances max diff %.1e", hand, worst)};
}

Outcome throughput_trend() {
  const ModelWeights& m = reference_model();
  SyntheticDataConfig dcfg;
  dcfg.n_classes = m.config.n_classes;
  const LoadedDataset data = prepare_dataset(m, generate_synthetic_dataset(9, 200, dcfg), TaskKind::kSingleLabel,
                                             m.config.n_classes);
  BenchConfig cfg;
  cfg.r_values = {0, 10, 20, 30, 40};
  cfg.threads = 1;
  const SweepResult s = benchmark_throughput(m, data, cfg);
  bool monotone = true;
  std::ostringstream rates;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    rates << (i ? ", " : "") << "r=" << s.rows[i].r << ":" << fmt("%.2f", s.rows[i].samples_per_second);
    if (i > 0) monotone = monotone && s.rows[i].samples_per_second >= (1.0 - kThroughputNoise) * s.rows[i - 1].samples_per_second;
  }
  const double speedup = s.rows.back().samples_per_second / s.rows.front().samples_per_second;
  return {monotone && speedup >= kMinSpeedup,
          fmt("S/s %s; speedup %.2fx, monotone within 5%%: %s", rates.str().c_str(), speedup, monotone ? "yes" : "no")};
}

Outcome accuracy_trend() {
  SyntheticDataConfig dcfg;  // 4 classes, noise 0.5
  ModelWeights m = generate_synthetic_model(0, reference_config(dcfg.n_classes));
  fit_template_probe(m, dcfg, 0);
  const LoadedDataset data = prepare_dataset(m, generate_synthetic_dataset(10, 200, dcfg), TaskKind::kSingleLabel,
                                             dcfg.n_classes);
  const double acc0 = run_inference(m, data, 0).metric;
  const double acc40 = run_inference(m, data, 40).metric;
  const double chance = 1.0 / dcfg.n_classes;
  return {acc0 >= kChanceMultiple * chance && acc40 >= (1.0 - kAccuracyRelDrop) * acc0,
          fmt("accuracy r=0 %.3f (chance %.2f), r=40 %.3f", acc0, chance, acc40)};
}

template <typename F>
bool rejects_with_format_error(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category() == ErrorCategory::kFormat;
  }
  return false;
}

Outcome io_round_trips() {
  const auto dir = std::filesystem::temp_directory_path() / "fastast_acceptance_io";
  std::filesystem::create_directories(dir);
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  ModelConfig small = reference_config(4);
  small.depth = 2;
  const ModelWeights m = generate_synthetic_model(11, small);
  save_model(dir / "a.modl", m);
  save_model(dir / "b.modl", load_model(dir / "a.modl"));
  check(binary::read_file(dir / "a.modl") == binary::read_file(dir / "b.modl"), "MODL1 round trip");

  const Spectrogram spec = synthetic_input(12);
  save_spec1(dir / "a.spec", spec);
  save_spec1(dir / "b.spec", load_spec1(dir / "a.spec"));
  check(binary::read_file(dir / "a.spec") == binary::read_file(dir / "b.spec") &&
            load_spec1(dir / "b.spec").values == spec.values,
        "SPEC1 round trip");

  std::mt19937 rng(13);
  const Matrix logits = oracle::random_matrix(rng, 9, 4, -6.0f, 6.0f);
  save_tlog1(dir / "a.tlog", logits);
  save_tlog1(dir / "b.tlog", load_tlog1(dir / "a.tlog"));
  check(binary::read_file(dir / "a.tlog") == binary::read_file(dir / "b.tlog") && load_tlog1(dir / "b.tlog") == logits,
        "TLOG1 round trip");

  DatasetManifest manifest;
  manifest.n_classes = 4;
  for (int i = 0; i < 5; ++i) manifest.entries.push_back({"clip" + std::to_string(i) + ".spec", Label{i % 4, {}}});
  save_manifest(dir / "a.jsonl", manifest);
  save_manifest(dir / "b.jsonl", load_manifest(dir / "a.jsonl"));
  check(binary::read_file(dir / "a.jsonl") == binary::read_file(dir / "b.jsonl") &&
            load_manifest(dir / "b.jsonl") == manifest,
        "MANI1 round trip");

  auto corrupt = [](std::string bytes) {
    bytes[0] = bytes[0] == 'X' ? 'Y' : 'X';
    return bytes;
  };
  check(rejects_with_format_error([&] { decode_model(corrupt(encode_model(m))); }), "MODL1 magic");
  check(rejects_with_format_error([&] { decode_spec1(corrupt(encode_spec1(spec))); }), "SPEC1 magic");
  check(rejects_with_format_error([&] { decode_tlog1(corrupt(encode_tlog1(logits))); }), "TLOG1 magic");
  std::string mani = encode_manifest(manifest);
  mani.replace(mani.find("MANI1"), 5, "MANI9");
  check(rejects_with_format_error([&] { decode_manifest(mani); }), "MANI1 magic");
  std::filesystem::remove_all(dir);

  std::string detail = "4 formats round-trip bit-identically, corrupted magic rejected";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "patch-count law", patch_count_law},
      {2, "token-reduction law", token_reduction_law},
      {3, "r = 0 no-op", zero_reduction_noop},
      {4, "merge oracle", merge_oracle},
      {5, "merged-duplicate equivalence", merged_duplicate},
      {6, "conservation", conservation},
      {7, "KD correctness", kd_correctness},
      {8, "metric oracles", metric_oracles},
      {9, "throughput trend", throughput_trend},
      {10, "accuracy-trend smoke", accuracy_trend},
      {11, "I/O round-trips", io_round_trips},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += out.pass ? 0 : 1;
    std::printf("AC%-2d %s  %-30s %s (%.1f s)\n", c.id, out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%s: %d criteria failed\n", failed ? "FAILED" : "OK", failed);
  return failed ? 1 : 0;
}
