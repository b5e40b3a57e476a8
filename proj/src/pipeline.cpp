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

#include "motionflow/pipeline.hpp"

#include "motionflow/series.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace motionflow {

namespace {

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

SampleSet samples_of(const TrajectoryDataset& data, Split split) {
  return make_samples(normalize(data.split(split), data.manifest.scale), data.manifest.input_steps);
}

Json mse_json(const MseReport& r) {
  return Json{{"horizons", r.horizons}, {"mse", r.mse}, {"mse_normalized", r.mse_normalized}};
}

}  // namespace

TrajectoryDataset build_dataset(const RunConfig& config) {
  if (config.data.source == "csv") {
    if (config.data.csv_path.empty()) throw ConfigError("data.csv_path is required when data.source is csv");
    return series_to_dataset(load_csv_series(config.data.csv_path), config.data.input_steps,
                             config.data.output_steps, config.data.stride, config.data.val_fraction,
                             config.data.test_fraction);
  }
  return generate_dataset(config.simulator, config.data.counts, config.data.input_steps, config.data.output_steps);
}

TrajectoryDataset load_dataset(const std::string& dir, const RunConfig& config) {
  TrajectoryDataset data = read_dataset(dir);
  const DatasetManifest& m = data.manifest;
  if (m.input_steps != config.data.input_steps || m.output_steps != config.data.output_steps) {
    throw ConfigError("dataset in " + dir + " has U=" + std::to_string(m.input_steps) + ", V=" +
                      std::to_string(m.output_steps) + " but the config asks for U=" +
                      std::to_string(config.data.input_steps) + ", V=" + std::to_string(config.data.output_steps));
  }
  return data;
}

ModelConfig model_config_for(const RunConfig& config, const TrajectoryDataset& data) {
  ModelConfig m = config.model_for(data.manifest.entities, data.manifest.features());
  m.validate();
  return m;
}

template <typename Scalar>
TrainResult train_run(const RunConfig& config, const TrajectoryDataset& data, const std::string& out_dir,
                      std::ostream* progress) {
  std::filesystem::create_directories(out_dir);
  MotionFlowModel<Scalar> model(model_config_for(config, data));
  std::ofstream metrics(join(out_dir, kMetricsFile));
  if (!metrics) throw std::runtime_error("cannot write " + join(out_dir, kMetricsFile));
  TrainOutputs outputs;
  outputs.checkpoint_path = join(out_dir, kCheckpointFile);
  outputs.metrics_log = &metrics;
  if (progress != nullptr) {
    outputs.on_epoch = [progress](const EpochMetrics& m) {
      char line[160];
      if (m.epoch == 0) {
        std::snprintf(line, sizeof(line), "epoch %3lld  val %.5f", static_cast<long long>(m.epoch), m.val_nll);
      } else {
        std::snprintf(line, sizeof(line), "epoch %3lld  train %.5f  val %.5f  |g| %.3g  lr %.2g%s",
                      static_cast<long long>(m.epoch), m.train_nll, m.val_nll, m.grad_norm, m.learning_rate,
                      m.improved ? "  *" : "");
      }
      *progress << line << '\n' << std::flush;
    };
  }
  return train(model, samples_of(data, Split::kTrain), samples_of(data, Split::kVal), config.train,
               data.manifest.scale, outputs);
}

template <typename Scalar>
std::unique_ptr<MotionFlowModel<Scalar>> model_from_checkpoint(const Checkpoint& checkpoint) {
  auto model = std::make_unique<MotionFlowModel<Scalar>>(checkpoint.model);
  restore_state(checkpoint, *model, static_cast<Adam<Scalar>*>(nullptr));
  return model;
}

template <typename Scalar>
EvalReport evaluate_run(MotionFlowModel<Scalar>& model, const TrajectoryDataset& data, Split split,
                        const std::vector<Index>& horizons, const PredictOptions& options) {
  EvalReport report;
  report.split = split_name(split);
  report.options = options;
  report.model = evaluate_mse(model, data, split, horizons, options);
  report.baseline = evaluate_baseline(data, split, horizons);
  return report;
}

Json to_json(const EvalReport& report) {
  Json reference = Json::object();
  for (std::size_t i = 0; i < kReferenceHorizons.size(); ++i) {
    reference[std::to_string(kReferenceHorizons[i])] = kReferenceMse[i];
  }
  return Json{{"split", report.split},
              {"predict",
               {{"mode", to_string(report.options.mode)},
                {"temperature", report.options.temperature},
                {"samples", report.options.samples},
                {"seed", report.options.seed}}},
              {"model", mse_json(report.model)},
              {"constant_velocity", mse_json(report.baseline)},
              {"reference_mse", reference}};
}

std::string format_eval_table(const EvalReport& report) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof(line), "%-8s %14s %14s %14s %14s\n", "horizon", "mse", "mse_norm", "baseline_norm",
                "reference");
  out << line;
  for (std::size_t i = 0; i < report.model.horizons.size(); ++i) {
    const Index h = report.model.horizons[i];
    std::string ref = "-";
    for (std::size_t k = 0; k < kReferenceHorizons.size(); ++k) {
      if (kReferenceHorizons[k] == h) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", kReferenceMse[k]);
        ref = buf;
      }
    }
    std::snprintf(line, sizeof(line), "%-8lld %14.4e %14.4e %14.4e %14s\n", static_cast<long long>(h),
                  report.model.mse[i], report.model.mse_normalized[i], report.baseline.mse_normalized[i], ref.c_str());
    out << line;
  }
  return out.str();
}

std::vector<AblationVariant> ablation_variants() {
  return {{"-A", false, false, false}, {"A", true, false, false}, {"AB", true, true, false}, {"ABC", true, true, true}};
}

RunConfig ablation_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.data.input_steps = 3;
  c.data.output_steps = 3;
  c.simulator.particles = 4;
  c.model.flow_steps = 2;
  c.train.max_epochs = 5;
  c.train.patience = 5;
  c.eval.horizons = {1, 2, 3};
  c.finalize();
  return c;
}

template <typename Scalar>
std::vector<AblationRow> run_ablation(const RunConfig& config, const TrajectoryDataset& data,
                                      const std::string& out_dir, std::ostream* progress) {
  std::vector<AblationRow> rows;
  for (const AblationVariant& v : ablation_variants()) {
    RunConfig c = config;
    c.model.use_masked_conditioner = v.masked_conditioner;
    c.model.use_dynamic_prior = v.dynamic_prior;
    c.model.use_residual_net = v.residual_net;
    if (progress != nullptr) *progress << "== " << v.name << '\n';
    TrainResult result;
    AblationRow row;
    row.variant = v;
    if (!out_dir.empty()) {
      result = train_run<Scalar>(c, data, join(out_dir, v.name), progress);
      row.parameters = MotionFlowModel<Scalar>(model_config_for(c, data)).parameter_count();
    } else {
      MotionFlowModel<Scalar> model(model_config_for(c, data));
      row.parameters = model.parameter_count();
      TrainOutputs outputs;
      if (progress != nullptr) {
        outputs.on_epoch = [progress](const EpochMetrics& m) {
          *progress << metrics_line(m) << '\n' << std::flush;
        };
      }
      result = train(model, samples_of(data, Split::kTrain), samples_of(data, Split::kVal), c.train,
                     data.manifest.scale, outputs);
    }
    row.initial_val_nll = result.initial_val_nll;
    row.final_val_nll = result.history.back().val_nll;
    row.best_val_nll = result.best_val_nll;
    rows.push_back(row);
  }
  return rows;
}

Json to_json(const AblationRow& row) {
  return Json{{"variant", row.variant.name},
              {"use_masked_conditioner", row.variant.masked_conditioner},
              {"use_dynamic_prior", row.variant.dynamic_prior},
              {"use_residual_net", row.variant.residual_net},
              {"parameters", row.parameters},
              {"initial_val_nll", row.initial_val_nll},
              {"final_val_nll", row.final_val_nll},
              {"best_val_nll", row.best_val_nll}};
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                                \
  template TrainResult train_run<S>(const RunConfig&, const TrajectoryDataset&, const std::string&,              \
                                    std::ostream*);                                                              \
  template std::unique_ptr<MotionFlowModel<S>> model_from_checkpoint<S>(const Checkpoint&);                     \
  template EvalReport evaluate_run(MotionFlowModel<S>&, const TrajectoryDataset&, Split, const std::vector<Index>&, \
                                   const PredictOptions&);                                                       \
  template std::vector<AblationRow> run_ablation<S>(const RunConfig&, const TrajectoryDataset&, const std::string&, \
                                                    std::ostream*);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
