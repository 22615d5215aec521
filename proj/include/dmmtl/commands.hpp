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

// Subcommands of the dmmtl tool. Each command is a function of the run
// configuration, its input files and the seed; tables are CSV and the training
// log is line-delimited JSON.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dmmtl/baselines.hpp"
#include "dmmtl/checkpoint.hpp"
#include "dmmtl/config.hpp"
#include "dmmtl/csv_io.hpp"
#include "dmmtl/data.hpp"
#include "dmmtl/diagnostics.hpp"
#include "dmmtl/errors.hpp"
#include "dmmtl/optimizer.hpp"
#include "dmmtl/rng.hpp"

namespace dmmtl {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitDivergence = 4 };

struct CommandOptions {
  RunConfig config;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::pair<std::size_t, std::size_t>> target;  // zero-based (stage, output)
  std::optional<std::vector<std::size_t>> samples;             // dataset row ids
  std::size_t jobs = 1;
};

namespace cli {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ParseError(dir.string() + ": cannot create output directory");
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path.string() + ": cannot write");
  out << text;
  if (!out) throw ParseError(path.string() + ": write failed");
}

inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

inline Dataset resolve_dataset(const RunConfig& c) {
  if (c.generator) return generate_dataset(*c.generator);
  Dataset ds = load_csv(c.data->manifest, c.data->data);
  if (c.data->truth) {
    GeneratorTruth truth = load_truth(*c.data->truth);
    if (truth.important.size() != ds.stages()) throw ShapeError("truth sidecar does not match the dataset");
    ds.truth = std::move(truth);
  }
  return ds;
}

inline DataSplits resolve_splits(const RunConfig& c) { return prepare_splits(resolve_dataset(c), c.split, c.seed); }

inline StageTopology topology_for(const RunConfig& c, const Dataset& ds, std::size_t hidden_width) {
  return ds.topology(hidden_width, c.model.transition_depth, c.model.emission_depth, c.model.feed_prev_outputs);
}

inline Checkpoint read_checkpoint(const CommandOptions& o) {
  return load_checkpoint(o.checkpoint ? *o.checkpoint : o.out_dir / "checkpoint.json");
}

inline void check_topology(const StageTopology& t, const Dataset& ds) {
  if (t.input_widths != ds.input_widths || t.output_widths != ds.output_widths)
    throw ShapeError("checkpoint topology does not match the dataset layout");
}

inline std::vector<StageVectors> predict_checkpoint(const Checkpoint& ck, const Dataset& ds) {
  if (ck.model) {
    check_topology(ck.model->topology, ds);
    return predict_batch(*ck.model, ds.inputs());
  }
  const auto& lin = *ck.linear;
  if (lin.stages.size() != ds.stages()) throw ShapeError("linear checkpoint stage count does not match the dataset");
  std::size_t p = 0;
  for (std::size_t k = 0; k < ds.stages(); ++k) {
    p += ds.input_widths[k];
    if (lin.stages[k].weights.rows() != p || lin.stages[k].weights.cols() != ds.output_widths[k])
      throw ShapeError("linear checkpoint widths do not match the dataset");
  }
  return lin.predict_all(ds);
}

inline double val_sse(const ParameterSet& params, const Dataset& val) {
  double sse = 0.0;
  for (const auto& s : val.samples) {
    const StageVectors pred = predict(params, s.inputs);
    for (std::size_t k = 0; k < pred.size(); ++k)
      for (std::size_t j = 0; j < pred[k].size(); ++j) {
        const double e = s.outputs[k][j] - pred[k][j];
        sse += e * e;
      }
  }
  return sse;
}

inline std::string input_name(const Dataset& ds, std::size_t k, std::size_t i) {
  if (i < ds.input_widths[k]) return ds.input_names[k][i];
  // fed-forward previous outputs follow the raw inputs
  return "prev:" + ds.output_names.at(k - 1).at(i - ds.input_widths[k]);
}

inline std::string importance_csv(const ImportanceReport& r, const Dataset& ds) {
  std::ostringstream out;
  out << "stage,input,name,score\n";
  for (std::size_t k = 0; k < r.scores.size(); ++k)
    for (std::size_t i = 0; i < r.scores[k].size(); ++i)
      out << k + 1 << ',' << i + 1 << ',' << input_name(ds, k, i) << ',' << format_double(r.scores[k][i]) << '\n';
  return out.str();
}

inline std::string top_csv(const ImportanceReport& r, const Dataset& ds, std::size_t m) {
  std::ostringstream out;
  out << "rank,stage,input,name,score\n";
  std::size_t rank = 1;
  for (const auto& e : r.top(m))
    out << rank++ << ',' << e.stage + 1 << ',' << e.input + 1 << ',' << input_name(ds, e.stage, e.input) << ','
        << format_double(e.score) << '\n';
  return out.str();
}

}  // namespace cli

inline int cmd_simulate(const CommandOptions& o, std::ostream& out) {
  if (!o.config.generator) throw ConfigError("simulate: config has no generator block");
  const Dataset ds = generate_dataset(*o.config.generator);
  cli::ensure_dir(o.out_dir);
  save_csv(ds, o.out_dir / "manifest.csv", o.out_dir / "data.csv");
  save_truth(*ds.truth, o.out_dir / "truth.json");
  std::size_t masked = 0;
  for (const auto& row : ds.truth->important) masked += static_cast<std::size_t>(std::count(row.begin(), row.end(), false));
  out << "simulated case " << o.config.generator->case_id << ": " << ds.size() << " samples, " << ds.stages()
      << " stages, " << ds.input_widths.front() << " inputs and " << ds.output_widths.front()
      << " outputs per stage, " << masked << " masked inputs\n";
  out << "wrote " << (o.out_dir / "data.csv").string() << '\n';
  return kExitOk;
}

inline int cmd_train(const CommandOptions& o, std::ostream& out) {
  const RunConfig& c = o.config;
  const DataSplits sp = cli::resolve_splits(c);
  const StageTopology topo = cli::topology_for(c, sp.train, c.model.hidden_width);
  TrainOptions opts;
  if (o.checkpoint) {
    Checkpoint ck = load_checkpoint(*o.checkpoint);
    if (!ck.model) throw ShapeError("train: resume checkpoint is not a dmmtl model");
    if (!(ck.model->topology == topo)) throw ShapeError("train: resume checkpoint topology differs from config");
    opts.initial = std::move(ck.model);
    opts.first_epoch = ck.epochs_completed;
  }
  cli::ensure_dir(o.out_dir);
  std::ofstream log(o.out_dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw ParseError((o.out_dir / "train_log.jsonl").string() + ": cannot write");
  opts.on_epoch = [&](const EpochRecord& r) {
    Json line{{"epoch", r.epoch},       {"restart", r.restart},     {"objective", r.objective},
              {"val_rmse", nullptr},    {"sgd_step", r.sgd_step},   {"prox_step", r.prox_step}};
    if (r.val_rmse) line["val_rmse"] = *r.val_rmse;
    log << line.dump() << '\n';
    log.flush();
  };
  const TrainResult res = train(sp.train.samples, sp.val.samples, topo, c.train, opts);
  save_checkpoint(Checkpoint{"dmmtl", res.params, std::nullopt, res.report.epochs_completed},
                  o.out_dir / "checkpoint.json");

  const StageVectors mean = output_means(sp.train.samples);
  const auto val_rmse = table_mean(relative_rmse(sp.val.outputs(), predict_batch(res.params, sp.val.inputs()), mean));
  const auto test_rmse =
      table_mean(relative_rmse(sp.test.outputs(), predict_batch(res.params, sp.test.inputs()), mean));
  Json summary{{"epochs_completed", res.report.epochs_completed},
               {"restarts", res.report.restarts},
               {"final_objective", res.report.history.empty() ? 0.0 : res.report.history.back().objective},
               {"val_mean_rmse", nullptr},
               {"test_mean_rmse", nullptr}};
  if (val_rmse) summary["val_mean_rmse"] = *val_rmse;
  if (test_rmse) summary["test_mean_rmse"] = *test_rmse;
  cli::write_file(o.out_dir / "train_summary.json", summary.dump(1) + "\n");
  out << "trained " << res.report.history.size() << " epochs (through epoch " << res.report.epochs_completed
      << "), restarts " << res.report.restarts << ", val mean RMSE " << cli::cell(val_rmse) << ", test mean RMSE "
      << cli::cell(test_rmse) << '\n';
  return kExitOk;
}

inline int cmd_evaluate(const CommandOptions& o, std::ostream& out) {
  const RunConfig& c = o.config;
  const DataSplits sp = cli::resolve_splits(c);
  const Checkpoint ck = cli::read_checkpoint(o);
  const StageVectors mean = output_means(sp.train.samples);

  std::vector<std::pair<std::string, OutputTable>> tables;
  const std::string primary = ck.model ? std::string("dmmtl") : ck.linear->method;
  tables.emplace_back(primary, relative_rmse(sp.test.outputs(), cli::predict_checkpoint(ck, sp.test), mean));
  tables.emplace_back("naive", relative_rmse(sp.test.outputs(), std::vector<StageVectors>(sp.test.size(), mean), mean));

  cli::ensure_dir(o.out_dir);
  for (const auto& name : c.evaluate.baselines) {
    std::optional<StagewiseLinear> lin;
    if (name == "ridge") lin = fit_ridge_selected(sp.train, sp.val);
    else if (name == "lr") lin = fit_least_squares(sp.train);
    else if (name == "en") lin = fit_elastic_net_selected(sp.train, sp.val);
    else if (name == "men") lin = fit_men_selected(sp.train, sp.val);
    if (lin) {
      save_checkpoint(Checkpoint{"linear", std::nullopt, lin, 0}, o.out_dir / ("baseline_" + name + ".json"));
      tables.emplace_back(name, relative_rmse(sp.test.outputs(), lin->predict_all(sp.test), mean));
    } else {
      tables.emplace_back(name, relative_rmse(sp.test.outputs(), sov_oracle_predict(sp.test), mean));
    }
  }

  std::ostringstream metrics, summary, quantiles, stages, sweep;
  metrics << "model,stage,output,name,relative_rmse\n";
  summary << "model,mean_rmse,sd_rmse,defined_outputs\n";
  quantiles << "model,level,value\n";
  stages << "model,stage,mean_rmse\n";
  for (const auto& [name, table] : tables) {
    for (std::size_t k = 0; k < table.size(); ++k)
      for (std::size_t j = 0; j < table[k].size(); ++j)
        metrics << name << ',' << k + 1 << ',' << j + 1 << ',' << sp.test.output_names[k][j] << ','
                << cli::cell(table[k][j]) << '\n';
    const std::vector<double> values = defined_values(table);
    const auto m = mean_of(values);
    std::optional<double> sd;
    if (m && values.size() > 1) {
      double ss = 0.0;
      for (double v : values) ss += (v - *m) * (v - *m);
      sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    summary << name << ',' << cli::cell(m) << ',' << cli::cell(sd) << ',' << values.size() << '\n';
    if (!values.empty()) {
      const auto q = rmse_quantiles(values, c.evaluate.quantile_levels);
      for (std::size_t i = 0; i < q.size(); ++i)
        quantiles << name << ',' << format_double(c.evaluate.quantile_levels[i]) << ',' << format_double(q[i]) << '\n';
    }
    for (std::size_t k = 0; k < table.size(); ++k) stages << name << ',' << k + 1 << ',' << cli::cell(stage_mean(table, k)) << '\n';
  }
  const MetricsReport report = make_metrics_report(tables.front().second, c.evaluate.quantile_levels);
  sweep << "threshold,count\n";
  for (int i = 1; i <= 19; ++i) {
    const double t = 0.05 * i;
    char label[16];
    std::snprintf(label, sizeof label, "%.2f", t);
    sweep << label << ',' << report.count_below(t) << '\n';
  }
  cli::write_file(o.out_dir / "metrics.csv", metrics.str());
  cli::write_file(o.out_dir / "summary.csv", summary.str());
  cli::write_file(o.out_dir / "quantiles.csv", quantiles.str());
  cli::write_file(o.out_dir / "stage_rmse.csv", stages.str());
  cli::write_file(o.out_dir / "threshold_sweep.csv", sweep.str());
  out << summary.str();
  return kExitOk;
}

struct TrialParams {
  double lambda_x = 0.0;
  double lambda = 0.0;
  double gamma = 1.0;
  std::size_t hidden_width = 1;
  double prox_step = 0.0;
};

/// Hyperparameters of every trial, drawn in trial order from the tuner stream.
inline std::vector<TrialParams> sample_trials(const TuneBlock& t, std::uint64_t seed) {
  Rng rng = make_rng(seed, "tuner");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto log_uniform = [&](const Range& r) {
    const double u = unit(rng);
    return r.lo == r.hi ? r.lo : std::exp(std::log(r.lo) + u * (std::log(r.hi) - std::log(r.lo)));
  };
  std::vector<TrialParams> out;
  for (std::size_t i = 0; i < t.trials; ++i) {
    TrialParams p;
    p.lambda_x = log_uniform(t.lambda_x);
    p.lambda = log_uniform(t.lambda);
    p.gamma = log_uniform(t.gamma);
    const auto lo = static_cast<std::size_t>(std::llround(t.hidden_width.lo));
    const auto hi = static_cast<std::size_t>(std::llround(t.hidden_width.hi));
    p.hidden_width = std::uniform_int_distribution<std::size_t>(lo, std::max(lo, hi))(rng);
    p.prox_step = log_uniform(t.prox_step);
    out.push_back(p);
  }
  return out;
}

struct TrialResult {
  TrialParams params;
  std::optional<double> val_sse;  // nullopt when the trial diverged
  std::string status = "ok";
};

inline int cmd_tune(const CommandOptions& o, std::ostream& out) {
  const RunConfig& c = o.config;
  const DataSplits sp = cli::resolve_splits(c);
  const std::vector<TrialParams> trials = sample_trials(c.tune, c.seed);
  std::vector<TrialResult> results(trials.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      TrialResult r{trials[i], std::nullopt, "ok"};
      TrainConfig tc = c.train;
      tc.lambda_x = r.params.lambda_x;
      tc.lambda = r.params.lambda;
      tc.gamma = r.params.gamma;
      tc.prox_step = r.params.prox_step;
      try {
        const StageTopology topo = cli::topology_for(c, sp.train, r.params.hidden_width);
        const TrainResult tr = train(sp.train.samples, sp.val.samples, topo, tc);
        const double sse = cli::val_sse(tr.params, sp.val);
        if (std::isfinite(sse)) r.val_sse = sse;
        else r.status = "diverged";
      } catch (const DivergenceError&) {
        r.status = "diverged";
      }
      results[i] = r;
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(o.jobs, trials.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream table;
  table << "trial,lambda_x,lambda,gamma,hidden_width,prox_step,val_sse,status\n";
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    table << i + 1 << ',' << format_double(r.params.lambda_x) << ',' << format_double(r.params.lambda) << ','
          << format_double(r.params.gamma) << ',' << r.params.hidden_width << ',' << format_double(r.params.prox_step)
          << ',' << cli::cell(r.val_sse) << ',' << r.status << '\n';
    if (r.val_sse && (!best || *r.val_sse < *results[*best].val_sse)) best = i;
  }
  cli::ensure_dir(o.out_dir);
  cli::write_file(o.out_dir / "trials.csv", table.str());
  if (!best) throw DivergenceError("tune: every trial diverged", 0);
  const TrialResult& b = results[*best];
  const Json best_json{{"trial", *best + 1},
                       {"val_sse", *b.val_sse},
                       {"train", {{"lambda_x", b.params.lambda_x},
                                  {"lambda", b.params.lambda},
                                  {"gamma", b.params.gamma},
                                  {"prox_step", b.params.prox_step}}},
                       {"model", {{"hidden_width", b.params.hidden_width}}}};
  cli::write_file(o.out_dir / "best.json", best_json.dump(1) + "\n");
  out << "best trial " << *best + 1 << " of " << results.size() << ": val SSE " << format_double(*b.val_sse) << '\n';
  return kExitOk;
}

inline int cmd_explain(const CommandOptions& o, std::ostream& out) {
  const RunConfig& c = o.config;
  const Dataset raw = cli::resolve_dataset(c);
  const DataSplits sp = split(raw, c.split, c.seed);
  const Dataset ds = apply_normalization(raw, fit_normalization(sp.train));
  const Checkpoint ck = cli::read_checkpoint(o);
  if (!ck.model) throw ShapeError("explain: checkpoint is not a dmmtl model");
  cli::check_topology(ck.model->topology, ds);

  cli::ensure_dir(o.out_dir);
  const ImportanceReport global = global_importance(*ck.model);
  cli::write_file(o.out_dir / "importance_global.csv", cli::importance_csv(global, ds));
  cli::write_file(o.out_dir / "top_global.csv", cli::top_csv(global, ds, c.top));
  out << "global top " << c.top << ":";
  for (const auto& e : global.top(c.top)) out << ' ' << cli::input_name(ds, e.stage, e.input);
  out << '\n';

  if (!o.target) {
    if (o.samples) throw ArgumentError("explain: --samples requires --target");
    return kExitOk;
  }
  const auto [stage, output] = *o.target;
  if (stage >= ds.stages() || output >= ds.output_widths[stage])
    throw ArgumentError("explain: unknown target " + std::to_string(stage + 1) + ":" + std::to_string(output + 1));
  std::vector<StageVectors> inputs;
  if (o.samples) {
    for (std::size_t id : *o.samples) {
      const auto it = std::find(ds.ids.begin(), ds.ids.end(), id);
      if (it == ds.ids.end()) throw ArgumentError("explain: unknown sample id " + std::to_string(id));
      inputs.push_back(ds.samples[static_cast<std::size_t>(it - ds.ids.begin())].inputs);
    }
  } else {
    inputs = ds.inputs();
  }
  const ImportanceReport local = local_importance(*ck.model, inputs, stage, output);
  cli::write_file(o.out_dir / "importance_local.csv", cli::importance_csv(local, ds));
  cli::write_file(o.out_dir / "top_local.csv", cli::top_csv(local, ds, c.top));
  out << "local top " << c.top << " for " << ds.output_names[stage][output] << " over " << local.sample_count
      << " samples:";
  for (const auto& e : local.top(c.top)) out << ' ' << cli::input_name(ds, e.stage, e.input);
  out << '\n';
  return kExitOk;
}

/// Runs a subcommand and maps failures to exit codes.
inline int run_command(const std::string& name, const CommandOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (name == "simulate") return cmd_simulate(o, out);
    if (name == "train") return cmd_train(o, out);
    if (name == "evaluate") return cmd_evaluate(o, out);
    if (name == "tune") return cmd_tune(o, out);
    if (name == "explain") return cmd_explain(o, out);
    err << "unknown command '" << name << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    err << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConvergenceError& e) {
    err << "non-convergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace dmmtl
