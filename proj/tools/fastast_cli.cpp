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

// fastast command-line tool: synthetic model/data generation, feature
// extraction, inference, r sweeps and distillation-loss evaluation.

#include "fastast/fastast.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace fastast;
using nlohmann::json;
namespace fs = std::filesystem;

// Inference inputs: a manifest on disk, or synthetic samples generated to fit the model.
struct DataOptions {
  std::string manifest;
  int synthetic = 0;
  std::uint64_t seed = 0;
  double noise = 0.5;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--manifest", manifest, "MANI1 dataset manifest");
    cmd->add_option("--synthetic", synthetic, "Generate this many synthetic samples instead of reading a manifest")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Seed for synthetic samples");
    cmd->add_option("--noise", noise, "Noise std of synthetic samples")->check(CLI::NonNegativeNumber);
  }

  LoadedDataset load(const ModelWeights& m) const {
    require(manifest.empty() != (synthetic == 0), ErrorCategory::kConfig,
            "give exactly one of --manifest or --synthetic");
    if (!manifest.empty()) return load_dataset(m, load_manifest(manifest), manifest);
    SyntheticDataConfig cfg;
    cfg.n_classes = m.config.n_classes;
    cfg.task_kind = m.config.task_kind;
    cfg.n_mels = m.config.spectrogram.n_mels;
    cfg.n_frames = m.config.n_frames();
    cfg.noise_std = noise;
    return prepare_dataset(m, generate_synthetic_dataset(seed, synthetic, cfg), cfg.task_kind, cfg.n_classes);
  }
};

void check_mode(const std::string& mode) {
  require(mode != "train-inf", ErrorCategory::kUnsupported,
          "--mode train-inf needs a model trained with merging; training is out of scope, use --mode inf");
  require(mode == "inf", ErrorCategory::kConfig, "unknown --mode '" + mode + "', expected inf or train-inf");
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  binary::write_file(path, text);
}

std::vector<int> parse_r_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    if (!item.empty()) {
      try {
        std::size_t used = 0;
        out.push_back(std::stoi(item, &used));
        require(used == item.size(), ErrorCategory::kConfig, "bad r value '" + item + "'");
      } catch (const std::logic_error&) {
        fail(ErrorCategory::kConfig, "bad r value '" + item + "'");
      }
    }
    pos = comma + 1;
  }
  return out;
}

json inference_to_json(const InferenceReport& rep, const LoadedDataset& data, int r, int threads) {
  json samples = json::array();
  for (std::size_t i = 0; i < rep.predictions.size(); ++i) {
    const auto& p = rep.predictions[i];
    samples.push_back({{"index", i},
                       {"predicted", argmax(p.probabilities)},
                       {"final_tokens", rep.final_token_counts[i]},
                       {"logits", p.logits},
                       {"probabilities", p.probabilities}});
  }
  json out = {{"format", "fastast-infer/1"},
              {"mode", "inf"},
              {"r", r},
              {"thread_count", threads},
              {"n_samples", data.size()},
              {"metric_name", rep.metric_name},
              {"metric", rep.metric},
              {"per_block_counts", rep.per_block_counts},
              {"samples", samples}};
  if (data.task_kind == TaskKind::kMultiLabel) out["top1_hit_rate"] = rep.top1_hit_rate;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FastAST: audio spectrogram transformer inference with token merging"};
  app.require_subcommand(1);

  // gen-model
  std::string model_out;
  std::uint64_t model_seed = 0;
  ModelConfig mcfg;
  std::string task_name = "single-label";
  bool probe = false;
  double probe_noise = 0.5;
  auto* gen_model = app.add_subcommand("gen-model", "Write a seeded synthetic MODL1 model");
  gen_model->add_option("--out", model_out, "Output model file")->required();
  gen_model->add_option("--seed", model_seed, "Weight seed");
  gen_model->add_option("--depth", mcfg.depth, "Blocks L");
  gen_model->add_option("--dim", mcfg.embed_dim, "Embedding width d");
  gen_model->add_option("--heads", mcfg.n_heads, "Attention heads");
  gen_model->add_option("--mlp-ratio", mcfg.mlp_ratio, "MLP hidden width over d");
  gen_model->add_option("--clip-seconds", mcfg.clip_seconds, "Clip length t in seconds");
  gen_model->add_option("--classes", mcfg.n_classes, "Number of classes");
  gen_model->add_option("--task", task_name, "single-label or multi-label");
  gen_model->add_flag("--probe", probe, "Fit the head as a template probe for the synthetic data");
  gen_model->add_option("--probe-noise", probe_noise, "Noise std used by the probe's class draws");

  // gen-data
  std::string data_dir;
  int data_n = 0;
  std::uint64_t data_seed = 0;
  SyntheticDataConfig dcfg;
  std::string data_task = "single-label";
  double data_seconds = 5.0;
  auto* gen_data = app.add_subcommand("gen-data", "Write synthetic SPEC1 clips and a MANI1 manifest");
  gen_data->add_option("--out-dir", data_dir, "Output directory")->required();
  gen_data->add_option("--n", data_n, "Number of samples")->required()->check(CLI::NonNegativeNumber);
  gen_data->add_option("--seed", data_seed, "Data seed");
  gen_data->add_option("--classes", dcfg.n_classes, "Number of classes");
  gen_data->add_option("--task", data_task, "single-label or multi-label");
  gen_data->add_option("--clip-seconds", data_seconds, "Clip length in seconds");
  gen_data->add_option("--noise", dcfg.noise_std, "Noise std");

  // features
  std::string wav_in, spec_out;
  auto* features = app.add_subcommand("features", "Convert a 16-bit PCM mono WAV to a SPEC1 log-mel file");
  features->add_option("--wav", wav_in, "Input WAV")->required();
  features->add_option("--out", spec_out, "Output SPEC1 file")->required();

  // Shared inference options.
  std::string model_path, mode = "inf", out_json, out_csv;
  int r = 0, threads = 1, batch = 1;
  DataOptions data_opts;
  auto add_inference_options = [&](CLI::App* cmd) {
    cmd->add_option("--model", model_path, "MODL1 model file")->required();
    cmd->add_option("--mode", mode, "inf (ToMe at inference) or train-inf (rejected)");
    cmd->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "Samples per work item")->check(CLI::PositiveNumber);
    data_opts.add_to(cmd);
  };

  auto* infer_cmd = app.add_subcommand("infer", "Classify a dataset at one reduction factor");
  add_inference_options(infer_cmd);
  infer_cmd->add_option("--r", r, "Tokens merged per block")->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--out-json", out_json, "Write the report here ('-' for stdout)");

  std::string r_sweep = "0,5,10,15,20,25,30,35,40";
  BenchConfig bcfg;
  auto* sweep = app.add_subcommand("sweep", "Measure metric and samples/second over r values");
  add_inference_options(sweep);
  sweep->add_option("--r-sweep", r_sweep, "Comma-separated r values");
  sweep->add_option("--warmup", bcfg.warmup_runs, "Warmup passes per r");
  sweep->add_option("--runs", bcfg.measured_runs, "Measured passes per r (>= 3)");
  sweep->add_option("--out-json", out_json, "JSON report path ('-' for stdout)");
  sweep->add_option("--out-csv", out_csv, "CSV table path ('-' for stdout)");

  std::string teacher_path;
  KdConfig kcfg;
  auto* kd = app.add_subcommand("kd-eval", "Evaluate the distillation loss against teacher logits");
  add_inference_options(kd);
  kd->add_option("--r", r, "Tokens merged per block for the student")->check(CLI::NonNegativeNumber);
  kd->add_option("--teacher-logits", teacher_path, "TLOG1 teacher logits in manifest order")->required();
  kd->add_option("--lambda", kcfg.lambda, "Ground-truth weight");
  kd->add_option("--tau", kcfg.temperature, "Teacher temperature");
  kd->add_option("--out-json", out_json, "JSON report path ('-' for stdout)");

  std::string logits_out;
  auto* export_logits = app.add_subcommand("export-logits", "Write a model's logits as a TLOG1 file");
  add_inference_options(export_logits);
  export_logits->add_option("--r", r, "Tokens merged per block")->check(CLI::NonNegativeNumber);
  export_logits->add_option("--out", logits_out, "Output TLOG1 file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return 2;
  }

  try {
    if (*gen_model) {
      mcfg.task_kind = parse_task_kind(task_name);
      mcfg.patch.embed_dim = mcfg.embed_dim;
      ModelWeights m = generate_synthetic_model(model_seed, mcfg);
      if (probe) {
        SyntheticDataConfig pcfg;
        pcfg.n_classes = mcfg.n_classes;
        pcfg.task_kind = mcfg.task_kind;
        pcfg.n_mels = mcfg.spectrogram.n_mels;
        pcfg.n_frames = mcfg.n_frames();
        pcfg.noise_std = probe_noise;
        fit_template_probe(m, pcfg, model_seed);
      }
      save_model(model_out, m);
      std::printf("wrote %s: %d tokens, checksum %016llx\n", model_out.c_str(), mcfg.n_tokens(),
                  static_cast<unsigned long long>(weights_checksum(m)));
    } else if (*gen_data) {
      dcfg.task_kind = parse_task_kind(data_task);
      dcfg.n_frames = frames_for_seconds(data_seconds);
      const SyntheticDataset d = generate_synthetic_dataset(data_seed, data_n, dcfg);
      fs::create_directories(data_dir);
      DatasetManifest manifest;
      manifest.task_kind = dcfg.task_kind;
      manifest.clip_seconds = data_seconds;
      manifest.n_classes = dcfg.n_classes;
      for (int i = 0; i < data_n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%05d.spec", i);
        save_spec1(fs::path(data_dir) / name, d.spectrograms[i]);
        manifest.entries.push_back({name, d.labels[i]});
      }
      save_manifest(fs::path(data_dir) / "manifest.jsonl", manifest);
      std::printf("wrote %d samples to %s\n", data_n, data_dir.c_str());
    } else if (*features) {
      const Waveform w = read_wav(wav_in);
      const Spectrogram s = compute_log_mel(w, SpectrogramConfig{});
      save_spec1(spec_out, s);
      std::printf("wrote %s: %d x %d\n", spec_out.c_str(), s.n_mels(), s.n_frames());
    } else {
      check_mode(mode);
      const ModelWeights m = load_model(model_path);
      const LoadedDataset data = data_opts.load(m);
      if (*infer_cmd) {
        const InferenceReport rep = run_inference(m, data, r, threads, false, batch);
        const json report = inference_to_json(rep, data, r, threads);
        if (!out_json.empty()) write_text(out_json, report.dump(2) + "\n");
        std::printf("%s = %.6f over %d samples at r = %d, final tokens %d\n", rep.metric_name.c_str(), rep.metric,
                    data.size(), r, rep.final_token_counts.front());
      } else if (*sweep) {
        bcfg.r_values = parse_r_list(r_sweep);
        bcfg.threads = threads;
        bcfg.batch = batch;
        bcfg.seed = data_opts.seed;
        bcfg.validate();
        const SweepResult s = benchmark_throughput(m, data, bcfg);
        if (!out_json.empty()) write_text(out_json, sweep_to_json(s).dump(2) + "\n");
        if (!out_csv.empty()) write_text(out_csv, sweep_to_csv(s));
        if (out_json != "-" && out_csv != "-") std::cout << sweep_to_csv(s);
      } else if (*kd) {
        kcfg.task_kind = m.config.task_kind;
        const Matrix teacher = load_tlog1(teacher_path);
        const InferenceReport rep = run_inference(m, data, r, threads, false, batch);
        const KdEvalReport k = kd_eval(rep.predictions, teacher, data.labels, kcfg, batch);
        const json report = kd_report_to_json(k);
        if (!out_json.empty()) write_text(out_json, report.dump(2) + "\n");
        std::printf("loss %.9g  loss_g %.9g  loss_d %.9g  (lambda %g, tau %g, %d samples)\n", k.mean.total,
                    k.mean.ground_truth, k.mean.distillation, kcfg.lambda, kcfg.temperature, k.n_samples);
      } else if (*export_logits) {
        const InferenceReport rep = run_inference(m, data, r, threads, false, batch);
        Matrix logits(data.size(), m.config.n_classes);
        for (int i = 0; i < data.size(); ++i)
          for (int c = 0; c < m.config.n_classes; ++c) logits(i, c) = float(rep.predictions[i].logits[c]);
        save_tlog1(logits_out, logits);
        std::printf("wrote %s: %d x %d\n", logits_out.c_str(), data.size(), m.config.n_classes);
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 1;
  }
  return 0;
}
