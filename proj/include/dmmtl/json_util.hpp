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

// JSON helpers shared by the truth sidecar, checkpoints and configs.

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmmtl/errors.hpp"
#include "dmmtl/tensor.hpp"

namespace dmmtl {

using Json = nlohmann::json;

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Mat mat_from_json(const Json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  Mat m(rows, cols);
  const auto& data = j.at("data");
  if (data.size() != rows) throw ParseError("matrix: row count mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = data[r].get<std::vector<double>>();
    if (v.size() != cols) throw ParseError("matrix: column count mismatch");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = v[c];
  }
  return m;
}

}  // namespace dmmtl
