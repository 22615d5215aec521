/*
 * Copyright 2026 The DMMTL Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// CSV + manifest ingestion and export, plus the generator truth sidecar.
//
// Manifest: header `name,stage,role`, one record per data column; stage is
// 1-based and role is `input` or `output`. Data: header of column names, one
// sample per row, strict decimal cells.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dmmtl/data.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/json_util.hpp"

namespace dmmtl {

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Strict decimal parse of the whole string; nan and inf are rejected.
inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

struct ManifestEntry {
  std::size_t stage = 0;  // zero-based
  bool input = true;
};

}  // namespace detail

inline Dataset load_csv(const std::filesystem::path& manifest_path, const std::filesystem::path& data_path) {
  const auto mrows = detail::read_csv_rows(manifest_path);
  const std::string mname = manifest_path.string();
  if (mrows.empty()) throw ParseError(mname + ": empty manifest");
  const auto& mh = mrows.front();
  if (mh.size() != 3 || detail::trim(mh[0]) != "name" || detail::trim(mh[1]) != "stage" || detail::trim(mh[2]) != "role")
    throw ParseError(mname + ": header must be name,stage,role");

  std::map<std::string, detail::ManifestEntry> manifest;
  std::vector<std::string> manifest_order;
  std::size_t stages = 0;
  for (std::size_t r = 1; r < mrows.size(); ++r) {
    const auto& row = mrows[r];
    const std::string where = mname + ": row " + std::to_string(r + 1);
    if (row.size() != 3) throw ParseError(where + ": expected 3 cells, found " + std::to_string(row.size()));
    const std::string name = detail::trim(row[0]);
    const std::string stage_text = detail::trim(row[1]);
    const std::string role = detail::trim(row[2]);
    std::size_t stage = 0;
    const auto res = std::from_chars(stage_text.data(), stage_text.data() + stage_text.size(), stage);
    if (res.ec != std::errc{} || res.ptr != stage_text.data() + stage_text.size() || stage == 0)
      throw ParseError(where + ", column 'stage': invalid stage '" + stage_text + "'");
    if (role != "input" && role != "output") throw ParseError(where + ", column 'role': invalid role '" + role + "'");
    if (name.empty()) throw ParseError(where + ", column 'name': empty name");
    if (!manifest.emplace(name, detail::ManifestEntry{stage - 1, role == "input"}).second)
      throw ParseError(where + ": duplicate column '" + name + "'");
    manifest_order.push_back(name);
    stages = std::max(stages, stage);
  }

  const auto drows = detail::read_csv_rows(data_path);
  const std::string dname = data_path.string();
  if (drows.empty()) throw ParseError(dname + ": missing header row");
  const auto header = drows.front();

  Dataset ds;
  ds.input_names.assign(stages, {});
  ds.output_names.assign(stages, {});
  struct Slot {
    std::size_t stage;
    bool input;
    std::size_t index;
  };
  std::vector<Slot> slots;
  std::map<std::string, bool> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::trim(header[c]);
    const auto it = manifest.find(name);
    if (it == manifest.end())
      throw ParseError(dname + ": row 1, column " + std::to_string(c + 1) + ": column '" + name +
                       "' is not in the manifest");
    if (!seen.emplace(name, true).second) throw ParseError(dname + ": duplicate column '" + name + "'");
    auto& names = it->second.input ? ds.input_names[it->second.stage] : ds.output_names[it->second.stage];
    slots.push_back({it->second.stage, it->second.input, names.size()});
    names.push_back(name);
  }
  for (const auto& name : manifest_order)
    if (!seen.count(name)) throw ParseError(dname + ": manifest column '" + name + "' missing from data");

  for (std::size_t k = 0; k < stages; ++k) {
    ds.input_widths.push_back(ds.input_names[k].size());
    ds.output_widths.push_back(ds.output_names[k].size());
  }

  for (std::size_t r = 1; r < drows.size(); ++r) {
    const auto& row = drows[r];
    if (row.size() != header.size())
      throw ParseError(dname + ": row " + std::to_string(r + 1) + ": ragged row with " + std::to_string(row.size()) +
                       " cells, expected " + std::to_string(header.size()));
    Sample s;
    s.inputs.resize(stages);
    s.outputs.resize(stages);
    for (std::size_t k = 0; k < stages; ++k) {
      s.inputs[k].assign(ds.input_widths[k], 0.0);
      s.outputs[k].assign(ds.output_widths[k], 0.0);
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      const auto v = parse_double(detail::trim(row[c]));
      if (!v)
        throw ParseError(dname + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) + " ('" +
                         detail::trim(header[c]) + "'): non-numeric cell '" + row[c] + "'");
      const Slot& sl = slots[c];
      (sl.input ? s.inputs : s.outputs)[sl.stage][sl.index] = *v;
    }
    ds.ids.push_back(ds.samples.size());
    ds.samples.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

/// Writes raw values; column order is stage by stage, inputs then outputs.
inline void save_csv(const Dataset& ds, const std::filesystem::path& manifest_path,
                     const std::filesystem::path& data_path) {
  if (ds.normalization) throw ArgumentError("save_csv: denormalize before export");
  ds.validate();
  std::ofstream m(manifest_path, std::ios::binary);
  if (!m) throw ParseError(manifest_path.string() + ": cannot write");
  m << "name,stage,role\n";
  std::vector<std::string> header;
  for (std::size_t k = 0; k < ds.stages(); ++k) {
    for (const auto& n : ds.input_names[k]) {
      m << n << ',' << k + 1 << ",input\n";
      header.push_back(n);
    }
    for (const auto& n : ds.output_names[k]) {
      m << n << ',' << k + 1 << ",output\n";
      header.push_back(n);
    }
  }
  if (!m) throw ParseError(manifest_path.string() + ": write failed");

  std::ofstream d(data_path, std::ios::binary);
  if (!d) throw ParseError(data_path.string() + ": cannot write");
  for (std::size_t c = 0; c < header.size(); ++c) d << (c ? "," : "") << header[c];
  d << '\n';
  std::string line;
  for (const auto& s : ds.samples) {
    line.clear();
    bool first = true;
    for (std::size_t k = 0; k < ds.stages(); ++k) {
      for (double v : s.inputs[k]) {
        if (!first) line += ',';
        line += format_double(v);
        first = false;
      }
      for (double v : s.outputs[k]) {
        if (!first) line += ',';
        line += format_double(v);
        first = false;
      }
    }
    d << line << '\n';
  }
  if (!d) throw ParseError(data_path.string() + ": write failed");
}

inline Json truth_to_json(const GeneratorTruth& truth) {
  Json j;
  j["format"] = "dmmtl-truth";
  j["version"] = 1;
  Json masked = Json::array();
  for (std::size_t k = 0; k < truth.important.size(); ++k)
    for (std::size_t i = 0; i < truth.important[k].size(); ++i)
      if (!truth.important[k][i]) masked.push_back({{"stage", k + 1}, {"input", i + 1}});
  j["masked"] = masked;
  j["inputs_per_stage"] = truth.important.empty() ? 0 : truth.important.front().size();
  Json chains = Json::array();
  for (const auto& c : truth.chains) {
    Json jc{{"lag", c.lag},
            {"input_begin", c.input_begin},
            {"input_count", c.input_count},
            {"output_begin", c.output_begin},
            {"output_count", c.output_count}};
    Json stages = Json::array();
    for (const auto& st : c.stages)
      stages.push_back({{"input_weights", mat_to_json(st.input_weights)},
                        {"transition_weights", mat_to_json(st.transition_weights)},
                        {"bias", st.bias},
                        {"output_weights", mat_to_json(st.output_weights)}});
    jc["stages"] = stages;
    chains.push_back(jc);
  }
  j["chains"] = chains;
  return j;
}

inline GeneratorTruth truth_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "dmmtl-truth" || j.at("version").get<int>() != 1)
      throw ParseError("truth: unsupported format");
    GeneratorTruth t;
    for (const auto& jc : j.at("chains")) {
      LatentChain c;
      c.lag = jc.at("lag").get<std::size_t>();
      c.input_begin = jc.at("input_begin").get<std::size_t>();
      c.input_count = jc.at("input_count").get<std::size_t>();
      c.output_begin = jc.at("output_begin").get<std::size_t>();
      c.output_count = jc.at("output_count").get<std::size_t>();
      for (const auto& js : jc.at("stages"))
        c.stages.push_back(ChainStage{mat_from_json(js.at("input_weights")),
                                      mat_from_json(js.at("transition_weights")),
                                      js.at("bias").get<Vec>(), mat_from_json(js.at("output_weights"))});
      t.chains.push_back(std::move(c));
    }
    if (t.chains.empty()) throw ParseError("truth: no chains");
    const std::size_t K = t.chains.front().stages.size();
    const auto nx = j.at("inputs_per_stage").get<std::size_t>();
    t.important.assign(K, std::vector<bool>(nx, true));
    for (const auto& m : j.at("masked")) {
      const auto k = m.at("stage").get<std::size_t>();
      const auto i = m.at("input").get<std::size_t>();
      if (k == 0 || k > K || i == 0 || i > nx) throw ParseError("truth: masked entry out of range");
      t.important[k - 1][i - 1] = false;
    }
    return t;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("truth: ") + e.what());
  }
}

inline void save_truth(const GeneratorTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << truth_to_json(truth).dump(1) << '\n';
}

inline GeneratorTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return truth_from_json(j);
}

}  // namespace dmmtl
