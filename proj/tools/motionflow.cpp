/*
 * Copyright 2026 The MotionFlow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end: simulate, train, eval, predict, plot, ablate and
// verify. Exit codes: 0 success, 1 usage or configuration error, 2 runtime
// or numeric failure.

#include "motionflow/pipeline.hpp"
#include "motionflow/plot.hpp"
#include "motionflow/verification.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace motionflow;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string precision;
};

struct ModelSource {
  std::string checkpoint;  // empty: <out>/checkpoint.mfck
  std::string data;        // empty: data.dir resolved against <out>
  std::string split = "test";
};

struct PredictFlags {
  std::string mode;
  std::optional<double> temperature;
  std::optional<Index> samples;
};

std::string resolve(const std::string& base, const std::string& path) {
  return fs::path(path).is_absolute() ? path : (fs::path(base) / path).string();
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig c = g.config_path.empty() ? RunConfig{} : load_run_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.precision.empty()) c.precision = g.precision;
  c.finalize();
  return c;
}

std::string data_dir(const GlobalOptions& g, const RunConfig& c, const ModelSource& s) {
  return s.data.empty() ? resolve(g.out, c.data.dir) : s.data;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw ConfigError("split must be train, val or test, got '" + name + "'");
}

PredictOptions predict_options(const RunConfig& c, const PredictFlags& f) {
  PredictOptions o = c.predict;
  if (!f.mode.empty()) o.mode = parse_predict_mode(f.mode);
  if (f.temperature) o.temperature = *f.temperature;
  if (f.samples) o.samples = *f.samples;
  if (!(o.temperature >= 0) || o.samples < 1) throw ConfigError("temperature must be >= 0 and samples >= 1");
  return o;
}

// Reads the stored dataset, or builds and stores it when absent.
TrajectoryDataset obtain_dataset(const RunConfig& c, const std::string& dir) {
  if (fs::exists(fs::path(dir) / "manifest.json")) return load_dataset(dir, c);
  TrajectoryDataset data = build_dataset(c);
  write_dataset(data, dir);
  return data;
}

template <typename Fn>
int dispatch(const RunConfig& c, Fn&& fn) {
  if (c.precision == "f64") return fn(double{});
  return fn(float{});
}

int cmd_simulate(const GlobalOptions& g, const ModelSource& s) {
  const RunConfig c = resolve_config(g);
  const std::string dir = data_dir(g, c, s);
  const TrajectoryDataset data = build_dataset(c);
  write_dataset(data, dir);
  const auto& m = data.manifest;
  std::printf("wrote %lld samples (%lld/%lld/%lld) of %lld steps x %lld entities x %lld features to %s\n",
              static_cast<long long>(m.counts.total()), static_cast<long long>(m.counts.train),
              static_cast<long long>(m.counts.val), static_cast<long long>(m.counts.test),
              static_cast<long long>(m.steps()), static_cast<long long>(m.entities),
              static_cast<long long>(m.features()), dir.c_str());
  return 0;
}

int cmd_train(const GlobalOptions& g, const ModelSource& s, std::optional<Index> epochs) {
  RunConfig c = resolve_config(g);
  if (epochs) {
    c.train.max_epochs = *epochs;
    c.finalize();
  }
  const TrajectoryDataset data = obtain_dataset(c, data_dir(g, c, s));
  fs::create_directories(g.out);
  Json resolved;
  to_json(resolved, c);
  write_json_file(resolved, resolve(g.out, "config.json"));
  return dispatch(c, [&](auto tag) {
    using S = decltype(tag);
    const TrainResult r = train_run<S>(c, data, g.out, &std::cout);
    const Json summary{{"initial_val_nll", r.initial_val_nll}, {"best_val_nll", r.best_val_nll},
                       {"best_epoch", r.best_epoch},           {"epochs_run", r.epochs_run},
                       {"stopped_early", r.stopped_early},     {"precision", c.precision}};
    write_json_file(summary, resolve(g.out, "train_summary.json"));
    std::printf("best val NLL %.5f at epoch %lld (initial %.5f)\n", r.best_val_nll,
                static_cast<long long>(r.best_epoch), r.initial_val_nll);
    return 0;
  });
}

template <typename S>
std::unique_ptr<MotionFlowModel<S>> load_model(const GlobalOptions& g, const ModelSource& s,
                                               const TrajectoryDataset& data) {
  const Checkpoint ckpt = load_checkpoint(s.checkpoint.empty() ? resolve(g.out, kCheckpointFile) : s.checkpoint);
  const ModelConfig& m = ckpt.model;
  if (m.entities != data.manifest.entities || m.features != data.manifest.features() ||
      m.input_steps != data.manifest.input_steps || m.output_steps != data.manifest.output_steps) {
    throw ConfigError("checkpoint geometry does not match the dataset");
  }
  return model_from_checkpoint<S>(ckpt);
}

int cmd_eval(const GlobalOptions& g, const ModelSource& s, const PredictFlags& f, std::vector<Index> horizons) {
  const RunConfig c = resolve_config(g);
  const TrajectoryDataset data = load_dataset(data_dir(g, c, s), c);
  if (horizons.empty()) horizons = c.eval.horizons;
  const PredictOptions options = predict_options(c, f);
  return dispatch(c, [&](auto tag) {
    using S = decltype(tag);
    auto model = load_model<S>(g, s, data);
    const EvalReport report = evaluate_run(*model, data, parse_split(s.split), horizons, options);
    fs::create_directories(g.out);
    write_json_file(to_json(report), resolve(g.out, "eval.json"));
    std::printf("%s split, %s prediction\n%s", report.split.c_str(), to_string(options.mode).c_str(),
                format_eval_table(report).c_str());
    return 0;
  });
}

int cmd_predict(const GlobalOptions& g, const ModelSource& s, const PredictFlags& f, Index first, Index count,
                const std::string& file) {
  const RunConfig c = resolve_config(g);
  const TrajectoryDataset data = load_dataset(data_dir(g, c, s), c);
  const Tensor<double> frames = data.split(parse_split(s.split));
  if (first < 0 || count < 1 || first + count > frames.dim(0)) throw ConfigError("sample range out of bounds");
  const PredictOptions options = predict_options(c, f);
  return dispatch(c, [&](auto tag) {
    using S = decltype(tag);
    auto model = load_model<S>(g, s, data);
    const Tensor<double> pred =
        predict_frames(*model, narrow_tensor(frames, 0, first, count), data.manifest.scale, options, 100);
    const std::string path = file.empty() ? resolve(g.out, "predictions.csv") : file;
    fs::create_directories(fs::path(path).parent_path().empty() ? fs::path(".") : fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sample,step,entity";
    for (const auto& name : data.manifest.feature_names) out << ',' << name;
    out << '\n';
    const Index v = pred.dim(1), n = pred.dim(2), d = pred.dim(3);
    char buf[32];
    for (Index i = 0; i < count; ++i)
      for (Index t = 0; t < v; ++t)
        for (Index e = 0; e < n; ++e) {
          out << first + i << ',' << data.manifest.input_steps + t << ',' << e;
          for (Index k = 0; k < d; ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", pred[((i * v + t) * n + e) * d + k]);
            out << ',' << buf;
          }
          out << '\n';
        }
    if (!out) throw std::runtime_error("failed writing " + path);
    std::printf("wrote %lld predicted trajectories to %s\n", static_cast<long long>(count), path.c_str());
    return 0;
  });
}

int cmd_plot(const GlobalOptions& g, const ModelSource& s, const PredictFlags& f, Index index,
             const std::string& file) {
  const RunConfig c = resolve_config(g);
  const TrajectoryDataset data = load_dataset(data_dir(g, c, s), c);
  const Tensor<double> frames = data.split(parse_split(s.split));
  if (index < 0 || index >= frames.dim(0)) throw ConfigError("sample index out of bounds");
  const PredictOptions options = predict_options(c, f);
  return dispatch(c, [&](auto tag) {
    using S = decltype(tag);
    auto model = load_model<S>(g, s, data);
    const Tensor<double> sample = narrow_tensor(frames, 0, index, 1);
    const Tensor<double> pred = predict_frames(*model, sample, data.manifest.scale, options, 1);
    const auto& m = data.manifest;
    PlotOptions plot;
    plot.title = s.split + " sample " + std::to_string(index) + ", " + to_string(options.mode) + " prediction";
    const std::string path =
        file.empty() ? resolve(g.out, "plot_" + s.split + "_" + std::to_string(index) + ".svg") : file;
    plot_svg(sample.reshaped({m.steps(), m.entities, m.features()}),
             pred.reshaped({m.output_steps, m.entities, m.features()}), path, plot);
    std::printf("wrote %s\n", path.c_str());
    return 0;
  });
}

int cmd_ablate(const GlobalOptions& g, std::optional<Index> epochs) {
  RunConfig c = g.config_path.empty() ? ablation_config(g.seed.value_or(0)) : resolve_config(g);
  if (g.seed) c.seed = *g.seed;
  if (!g.precision.empty()) c.precision = g.precision;
  if (epochs) c.train.max_epochs = *epochs;
  c.finalize();
  const TrajectoryDataset data = build_dataset(c);
  const std::string dir = resolve(g.out, "ablation");
  return dispatch(c, [&](auto tag) {
    using S = decltype(tag);
    const std::vector<AblationRow> rows = run_ablation<S>(c, data, dir, &std::cout);
    Json table = Json::array();
    std::printf("%-6s %10s %14s %14s %14s\n", "model", "params", "initial_nll", "final_nll", "best_nll");
    for (const AblationRow& r : rows) {
      table.push_back(to_json(r));
      std::printf("%-6s %10lld %14.5f %14.5f %14.5f\n", r.variant.name.c_str(),
                  static_cast<long long>(r.parameters), r.initial_val_nll, r.final_val_nll, r.best_val_nll);
    }
    write_json_file(table, resolve(g.out, "ablation.json"));
    return 0;
  });
}

int cmd_verify(const GlobalOptions& g) {
  const std::uint64_t seed = g.seed.value_or(0);
  std::vector<SuiteResult> results = run_oracle_suites(seed);
  {
    const ModelConfig c = tiny_model_config();
    Rng rng = Rng::derive(seed, 17);
    const Tensor<double> x = random_rows<double>(4, c.input_steps, c.frame_width(), rng);
    const Tensor<double> y = random_rows<double>(4, c.output_steps, c.frame_width(), rng);
    results.push_back(initialization_suite<float>(c, x, y));
  }
  bool ok = true;
  Json report = Json::array();
  for (const SuiteResult& r : results) {
    ok = ok && r.passed;
    std::printf("%s  %-48s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    report.push_back(
        {{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"threshold", r.threshold}, {"detail", r.detail}});
  }
  fs::create_directories(g.out);
  write_json_file(report, resolve(g.out, "verify.json"));
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional normalizing flow for multi-entity trajectory forecasting"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Run configuration JSON (unknown keys are rejected)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Run seed; overrides the config file");
  app.add_option("--out", g.out, "Run directory for artifacts")->capture_default_str();
  app.add_option("--precision", g.precision, "Arithmetic precision; overrides the config file")
      ->check(CLI::IsMember({"f32", "f64"}));

  ModelSource source;
  PredictFlags predict;
  auto add_source = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", source.checkpoint, "Checkpoint file (default <out>/checkpoint.mfck)");
    cmd->add_option("--data", source.data, "Dataset directory (default data.dir under <out>)");
    cmd->add_option("--split", source.split, "Dataset split")
        ->check(CLI::IsMember({"train", "val", "test"}))
        ->capture_default_str();
  };
  auto add_predict = [&](CLI::App* cmd) {
    cmd->add_option("--mode", predict.mode, "Prediction mode")->check(CLI::IsMember({"mean", "sample", "average"}));
    cmd->add_option("--temperature", predict.temperature, "Sampling temperature")->check(CLI::NonNegativeNumber);
    cmd->add_option("--samples", predict.samples, "Samples averaged in average mode")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "Generate the particle dataset (or window a csv series)");
  simulate->add_option("--data", source.data, "Output dataset directory (default data.dir under <out>)");

  std::optional<Index> epochs;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint, metrics log and summary");
  train_cmd->add_option("--data", source.data, "Dataset directory (built when missing)");
  train_cmd->add_option("--epochs", epochs, "Maximum epochs; overrides the config file")->check(CLI::PositiveNumber);

  std::vector<Index> horizons;
  auto* eval = app.add_subcommand("eval", "MSE table at the configured horizons with the constant-velocity baseline");
  add_source(eval);
  add_predict(eval);
  eval->add_option("--horizons", horizons, "Prediction steps to score (1-based)")->delimiter(',');

  Index first = 0, count = 1, index = 0;
  std::string file;
  auto* predict_cmd = app.add_subcommand("predict", "Write predicted trajectories as csv");
  add_source(predict_cmd);
  add_predict(predict_cmd);
  predict_cmd->add_option("--first", first, "First sample of the split")->capture_default_str();
  predict_cmd->add_option("--count", count, "Number of samples")->capture_default_str();
  predict_cmd->add_option("--file", file, "Output csv (default <out>/predictions.csv)");

  auto* plot = app.add_subcommand("plot", "Render ground truth and prediction of one sample as SVG");
  add_source(plot);
  add_predict(plot);
  plot->add_option("--index", index, "Sample of the split")->capture_default_str();
  plot->add_option("--file", file, "Output SVG (default <out>/plot_<split>_<index>.svg)");

  auto* ablate = app.add_subcommand("ablate", "Train the -A, A, AB and ABC variants on the tiny configuration");
  ablate->add_option("--epochs", epochs, "Epochs per variant (default 5)")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "Run the oracle suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*simulate) return cmd_simulate(g, source);
    if (*train_cmd) return cmd_train(g, source, epochs);
    if (*eval) return cmd_eval(g, source, predict, horizons);
    if (*predict_cmd) return cmd_predict(g, source, predict, first, count, file);
    if (*plot) return cmd_plot(g, source, predict, index, file);
    if (*ablate) return cmd_ablate(g, epochs);
    if (*verify) return cmd_verify(g);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
