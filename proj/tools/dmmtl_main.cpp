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
// dmmtl: simulate, train, evaluate, tune and explain multistage models.

#include <charconv>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmmtl/commands.hpp"

namespace {

std::optional<std::size_t> parse_index(const std::string& s) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// "k:j", both 1-based.
std::optional<std::pair<std::size_t, std::size_t>> parse_target(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) return std::nullopt;
  const auto k = parse_index(s.substr(0, colon));
  const auto j = parse_index(s.substr(colon + 1));
  if (!k || !j || *k == 0 || *j == 0) return std::nullopt;
  return std::make_pair(*k - 1, *j - 1);
}

std::optional<std::vector<std::size_t>> parse_ids(const std::string& s) {
  std::vector<std::size_t> ids;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto id = parse_index(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!id) return std::nullopt;
    ids.push_back(*id);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep multistage multi-task learning for multistage manufacturing data"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, target, samples;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "Generate a synthetic benchmark dataset (CSV, manifest, truth sidecar)"},
      {"train", "Train a model and write a checkpoint and training log"},
      {"evaluate", "Write relative RMSE tables, quantiles and threshold counts"},
      {"tune", "Random search over hyperparameters on the validation split"},
      {"explain", "Write global and local input importance reports"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Run configuration (JSON)");
    sub->add_option("--seed", seed, "Top-level seed");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--checkpoint", checkpoint, "Checkpoint to read (train: resume from)");
    sub->add_option("--target", target, "Target output k:j (1-based)");
    sub->add_option("--samples", samples, "Comma-separated sample ids for local importance");
    sub->add_option("--jobs", jobs, "Concurrent tuning trials")->check(CLI::PositiveNumber);
    sub->add_option("--set", overrides, "Config override key.path=value")->take_all();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? dmmtl::kExitOk : dmmtl::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  dmmtl::CommandOptions options;
  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    const std::optional<std::filesystem::path> path =
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path);
    options.config = dmmtl::load_run_config(path, overrides);
  } catch (const dmmtl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return dmmtl::kExitConfig;
  }
  options.out_dir = out_dir.empty() ? options.config.output_dir : std::filesystem::path(out_dir);
  if (!checkpoint.empty()) options.checkpoint = checkpoint;
  if (!target.empty()) {
    options.target = parse_target(target);
    if (!options.target) {
      std::cerr << "argument error: --target expects k:j with 1-based indices\n";
      return dmmtl::kExitConfig;
    }
  }
  if (!samples.empty()) {
    options.samples = parse_ids(samples);
    if (!options.samples) {
      std::cerr << "argument error: --samples expects comma-separated ids\n";
      return dmmtl::kExitConfig;
    }
  }
  options.jobs = jobs;
  return dmmtl::run_command(command, options, std::cout, std::cerr);
}
