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

// MODL1 model files and MANI1 dataset manifests.
//
// MODL1 layout (little-endian):
//   "MODL1" | u8 version (1) | u32 header_bytes | JSON header | float32 tensors
// The header carries the model config and the ordered tensor list
// [{"name", "shape": [rows, cols]}]; payload tensors follow in that order.
//
// MANI1 is JSON lines: a header object {"format": "MANI1", "task_kind",
// "clip_seconds", "n_classes"} followed by one {"path", "label"} object per
// sample. "label" is a class index (single-label) or a 0/1 array (multi-label).

#pragma once

#include "fastast/binary_io.hpp"
#include "fastast/common.hpp"
#include "fastast/features.hpp"
#include "fastast/model.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace fastast {

inline constexpr std::uint8_t kModelFormatVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
  const auto& s = c.spectrogram;
  return {
      {"depth", c.depth},
      {"embed_dim", c.embed_dim},
      {"n_heads", c.n_heads},
      {"mlp_ratio", c.mlp_ratio},
      {"clip_seconds", c.clip_seconds},
      {"n_classes", c.n_classes},
      {"task_kind", std::string(task_kind_name(c.task_kind))},
      {"spectrogram",
       {{"n_mels", s.n_mels},
        {"frames_per_second", s.frames_per_second},
        {"window_length_ms", s.window_length_ms},
        {"hop_length_ms", s.hop_length_ms},
        {"fft_size", s.fft_size},
        {"mel_fmin", s.mel_fmin},
        {"mel_fmax", s.mel_fmax},
        {"log_floor", s.log_floor},
        {"norm_mean", s.norm_mean},
        {"norm_std", s.norm_std}}},
      {"patch", {{"patch_size", c.patch.patch_size}, {"stride", c.patch.stride}, {"embed_dim", c.patch.embed_dim}}},
  };
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.depth = j.at("depth").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<double>();
    c.clip_seconds = j.at("clip_seconds").get<double>();
    c.n_classes = j.at("n_classes").get<int>();
    c.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
    const auto& s = j.at("spectrogram");
    c.spectrogram.n_mels = s.at("n_mels").get<int>();
    c.spectrogram.frames_per_second = s.at("frames_per_second").get<int>();
    c.spectrogram.window_length_ms = s.at("window_length_ms").get<double>();
    c.spectrogram.hop_length_ms = s.at("hop_length_ms").get<double>();
    c.spectrogram.fft_size = s.at("fft_size").get<int>();
    c.spectrogram.mel_fmin = s.at("mel_fmin").get<double>();
    c.spectrogram.mel_fmax = s.at("mel_fmax").get<double>();
    c.spectrogram.log_floor = s.at("log_floor").get<double>();
    c.spectrogram.norm_mean = s.at("norm_mean").get<double>();
    c.spectrogram.norm_std = s.at("norm_std").get<double>();
    const auto& p = j.at("patch");
    c.patch.patch_size = p.at("patch_size").get<int>();
    c.patch.stride = p.at("stride").get<int>();
    c.patch.embed_dim = p.at("embed_dim").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("model config: ") + e.what());
  }
}

inline std::string encode_model(const ModelWeights& m) {
  m.config.validate();
  nlohmann::json tensors = nlohmann::json::array();
  visit_tensors(m, [&](const std::string& name, const auto& t, Eigen::Index rows, Eigen::Index cols) {
    require(t.rows() == rows && t.cols() == cols, ErrorCategory::kShape,
            "tensor '" + name + "' is " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                ", config declares " + std::to_string(rows) + "x" + std::to_string(cols));
    tensors.push_back({{"name", name}, {"shape", {rows, cols}}});
  });
  const std::string header = nlohmann::json{{"config", config_to_json(m.config)}, {"tensors", tensors}}.dump();

  binary::Writer out;
  out.bytes("MODL1");
  out.u8(kModelFormatVersion);
  out.u32(std::uint32_t(header.size()));
  out.bytes(header);
  visit_tensors(m, [&](const std::string&, const auto& t, Eigen::Index, Eigen::Index) {
    out.f32s({t.data(), std::size_t(t.size())});
  });
  return out.data();
}

inline ModelWeights decode_model(std::string_view data, const std::string& what = "MODL1") {
  binary::Reader in(data, what);
  in.expect_magic("MODL1");
  const auto version = in.u8();
  require(version == kModelFormatVersion, ErrorCategory::kFormat,
          what + ": unknown format version " + std::to_string(version));
  const auto header_bytes = in.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(in.bytes(header_bytes));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, what + ": header is not valid JSON: " + e.what());
  }
  require(header.contains("config") && header.contains("tensors") && header["tensors"].is_array(),
          ErrorCategory::kFormat, what + ": header needs 'config' and 'tensors'");

  ModelWeights m = allocate_model(config_from_json(header["config"]));
  const auto& listed = header["tensors"];
  std::size_t index = 0;
  std::size_t expected = 0;
  visit_tensors(m, [&](const std::string&, const auto&, Eigen::Index, Eigen::Index) { ++expected; });
  require(listed.size() == expected, ErrorCategory::kFormat,
          what + ": header lists " + std::to_string(listed.size()) + " tensors, config requires " +
              std::to_string(expected));
  visit_tensors(m, [&](const std::string& name, auto& t, Eigen::Index rows, Eigen::Index cols) {
    const auto& entry = listed[index++];
    const bool match = entry.value("name", std::string()) == name && entry.contains("shape") &&
                       entry["shape"] == nlohmann::json{rows, cols};
    require(match, ErrorCategory::kFormat,
            what + ": tensor " + std::to_string(index - 1) + " is '" + entry.dump() + "', expected '" + name +
                "' of shape [" + std::to_string(rows) + ", " + std::to_string(cols) + "]");
    in.f32s({t.data(), std::size_t(t.size())});
  });
  in.expect_end();
  return m;
}

inline void save_model(const std::filesystem::path& path, const ModelWeights& m) {
  binary::write_file(path, encode_model(m));
}

inline ModelWeights load_model(const std::filesystem::path& path) {
  return decode_model(binary::read_file(path), "MODL1 '" + path.string() + "'");
}

// Single-label samples use `index`; multi-label samples use `targets`.
struct Label {
  int index = -1;
  std::vector<std::uint8_t> targets;

  friend bool operator==(const Label&, const Label&) = default;
};

struct ManifestEntry {
  std::string path;
  Label label;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  TaskKind task_kind = TaskKind::kSingleLabel;
  double clip_seconds = 5.0;
  int n_classes = 1;
  std::vector<ManifestEntry> entries;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline std::string encode_manifest(const DatasetManifest& m) {
  std::string out = nlohmann::json{{"format", "MANI1"},
                                    {"task_kind", std::string(task_kind_name(m.task_kind))},
                                    {"clip_seconds", m.clip_seconds},
                                    {"n_classes", m.n_classes}}
                        .dump();
  out += '\n';
  for (const auto& e : m.entries) {
    nlohmann::json line{{"path", e.path}};
    if (m.task_kind == TaskKind::kSingleLabel) line["label"] = e.label.index;
    else line["label"] = e.label.targets;
    out += line.dump();
    out += '\n';
  }
  return out;
}

inline DatasetManifest decode_manifest(std::string_view text, const std::string& what = "MANI1") {
  std::istringstream lines{std::string(text)};
  std::string line;
  DatasetManifest m;
  int line_no = 0;
  try {
    require(static_cast<bool>(std::getline(lines, line)), ErrorCategory::kFormat, what + ": empty manifest");
    ++line_no;
    const auto header = nlohmann::json::parse(line);
    require(header.is_object() && header.value("format", std::string()) == "MANI1", ErrorCategory::kFormat,
            what + ": bad magic, expected format 'MANI1' on line 1");
    m.task_kind = parse_task_kind(header.at("task_kind").get<std::string>());
    m.clip_seconds = header.at("clip_seconds").get<double>();
    m.n_classes = header.at("n_classes").get<int>();
    require(m.n_classes >= 1, ErrorCategory::kFormat, what + ": n_classes must be positive");
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      const auto& label = j.at("label");
      if (m.task_kind == TaskKind::kSingleLabel) {
        e.label.index = label.get<int>();
        require(e.label.index >= 0 && e.label.index < m.n_classes, ErrorCategory::kFormat,
                what + ": line " + std::to_string(line_no) + ": label out of range");
      } else {
        e.label.targets = label.get<std::vector<std::uint8_t>>();
        require(int(e.label.targets.size()) == m.n_classes, ErrorCategory::kFormat,
                what + ": line " + std::to_string(line_no) + ": label vector length != n_classes");
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, what + ": line " + std::to_string(line_no) + ": " + e.what());
  }
  return m;
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  binary::write_file(path, encode_manifest(m));
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  return decode_manifest(binary::read_file(path), "MANI1 '" + path.string() + "'");
}

// WAV or SPEC1, chosen by the file's magic bytes.
inline Spectrogram load_input(const std::filesystem::path& path, const SpectrogramConfig& cfg) {
  const std::string data = binary::read_file(path);
  if (data.rfind("RIFF", 0) == 0) return compute_log_mel(read_wav(path), cfg);
  return decode_spec1(data, "SPEC1 '" + path.string() + "'");
}

// Relative manifest paths resolve against the manifest's directory.
inline std::filesystem::path resolve_entry(const std::filesystem::path& manifest_path, const ManifestEntry& e) {
  const std::filesystem::path p(e.path);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

}  // namespace fastast
