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

#include "motionflow/config.hpp"

#include <fstream>
#include <set>

namespace motionflow {

namespace {

// Reads keys out of one JSON object and rejects whatever is left over.
class StrictReader {
 public:
  StrictReader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j.is_object()) throw ConfigError(section_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    const Json& v = *it;
    const std::string where = section_.empty() ? key : section_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw ConfigError(where + ": expected a non-negative integer");
      }
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
      out = v.get<std::string>();
    } else {
      try {
        out = v.get<T>();
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }

  template <typename T>
  void section(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    from_json(*it, out);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown configuration key '" + (section_.empty() ? "" : section_ + ".") + item.key() + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

void read_model_fields(StrictReader& r, ModelConfig& c) {
  r.get("flow_steps", c.flow_steps);
  r.get("arn_hidden1", c.arn_hidden1);
  r.get("arn_hidden2", c.arn_hidden2);
  r.get("arn_dilation", c.arn_dilation);
  r.get("fc_hidden", c.fc_hidden);
  r.get("cnn1_hidden", c.cnn1_hidden);
  r.get("cnn2_hidden", c.cnn2_hidden);
  r.get("prior_hidden", c.prior_hidden);
  r.get("plain_conditioner_channels", c.plain_conditioner_channels);
  r.get("pono_epsilon", c.pono_epsilon);
  r.get("scale_bound", c.scale_bound);
  r.get("log_sigma_bound", c.log_sigma_bound);
  r.get("use_masked_conditioner", c.use_masked_conditioner);
  r.get("use_dynamic_prior", c.use_dynamic_prior);
  r.get("use_residual_net", c.use_residual_net);
}

Json model_fields(const ModelConfig& c) {
  return Json{{"flow_steps", c.flow_steps},
              {"arn_hidden1", c.arn_hidden1},
              {"arn_hidden2", c.arn_hidden2},
              {"arn_dilation", c.arn_dilation},
              {"fc_hidden", c.fc_hidden},
              {"cnn1_hidden", c.cnn1_hidden},
              {"cnn2_hidden", c.cnn2_hidden},
              {"prior_hidden", c.prior_hidden},
              {"plain_conditioner_channels", c.plain_conditioner_channels},
              {"pono_epsilon", c.pono_epsilon},
              {"scale_bound", c.scale_bound},
              {"log_sigma_bound", c.log_sigma_bound},
              {"use_masked_conditioner", c.use_masked_conditioner},
              {"use_dynamic_prior", c.use_dynamic_prior},
              {"use_residual_net", c.use_residual_net}};
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be positive");
  if (patience < 0) throw ConfigError("train.patience must be non-negative");
  if (!(adam.learning_rate > 0) || !(adam.weight_decay >= 0) || !(adam.epsilon > 0) ||
      !(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("train: invalid optimizer settings");
  }
}

void to_json(Json& j, const ModelConfig& c) {
  j = model_fields(c);
  j["input_steps"] = c.input_steps;
  j["output_steps"] = c.output_steps;
  j["entities"] = c.entities;
  j["features"] = c.features;
  j["seed"] = c.seed;
}

void from_json(const Json& j, ModelConfig& c) {
  StrictReader r(j, "model");
  read_model_fields(r, c);
  r.get("input_steps", c.input_steps);
  r.get("output_steps", c.output_steps);
  r.get("entities", c.entities);
  r.get("features", c.features);
  r.get("seed", c.seed);
  r.finish();
}

void to_json(Json& j, const SimConfig& c) {
  j = Json{{"particles", c.particles}, {"half_width", c.half_width}, {"dt", c.dt},
           {"repulsion", c.repulsion}, {"radius", c.radius},         {"min_speed", c.min_speed},
           {"max_speed", c.max_speed}, {"spawn_half_width", c.spawn_half_width}};
  j["steps"] = c.steps;
  j["seed"] = c.seed;
}

void from_json(const Json& j, SimConfig& c) {
  StrictReader r(j, "simulator");
  r.get("particles", c.particles);
  r.get("half_width", c.half_width);
  r.get("dt", c.dt);
  r.get("repulsion", c.repulsion);
  r.get("radius", c.radius);
  r.get("min_speed", c.min_speed);
  r.get("max_speed", c.max_speed);
  r.get("spawn_half_width", c.spawn_half_width);
  r.get("steps", c.steps);
  r.get("seed", c.seed);
  r.finish();
}

void to_json(Json& j, const AdamConfig& c) {
  j = Json{{"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"epsilon", c.epsilon}};
}

void to_json(Json& j, const TrainConfig& c) {
  to_json(j, c.adam);
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["clip_norm"] = c.clip_norm;
}

void from_json(const Json& j, TrainConfig& c) {
  StrictReader r(j, "train");
  r.get("learning_rate", c.adam.learning_rate);
  r.get("weight_decay", c.adam.weight_decay);
  r.get("beta1", c.adam.beta1);
  r.get("beta2", c.adam.beta2);
  r.get("epsilon", c.adam.epsilon);
  r.get("batch_size", c.batch_size);
  r.get("max_epochs", c.max_epochs);
  r.get("patience", c.patience);
  r.get("clip_norm", c.clip_norm);
  r.finish();
}

void to_json(Json& j, const SplitCounts& c) { j = Json{{"train", c.train}, {"val", c.val}, {"test", c.test}}; }

void from_json(const Json& j, SplitCounts& c) {
  StrictReader r(j, "counts");
  r.get("train", c.train);
  r.get("val", c.val);
  r.get("test", c.test);
  r.finish();
}

void to_json(Json& j, const DatasetManifest& m) {
  j = Json{{"format", "motionflow-trajectories"},
           {"version", 1},
           {"counts", m.counts},
           {"split_order", {"train", "val", "test"}},
           {"input_steps", m.input_steps},
           {"output_steps", m.output_steps},
           {"entities", m.entities},
           {"feature_names", m.feature_names},
           {"scale", m.scale},
           {"simulator", m.simulator}};
}

void from_json(const Json& j, DatasetManifest& m) {
  StrictReader r(j, "manifest");
  std::string format;
  int version = 0;
  std::vector<std::string> order;
  r.get("format", format);
  r.get("version", version);
  if (format != "motionflow-trajectories" || version != 1) throw ConfigError("manifest: unsupported dataset format");
  r.section("counts", m.counts);
  r.get("split_order", order);
  r.get("input_steps", m.input_steps);
  r.get("output_steps", m.output_steps);
  r.get("entities", m.entities);
  r.get("feature_names", m.feature_names);
  r.get("scale", m.scale);
  r.section("simulator", m.simulator);
  r.finish();
  if (order != std::vector<std::string>{"train", "val", "test"}) throw ConfigError("manifest: unexpected split order");
  if (m.scale.size() != m.feature_names.size()) throw ConfigError("manifest: one scale per feature is required");
}

std::string to_string(PredictMode mode) {
  switch (mode) {
    case PredictMode::kMean: return "mean";
    case PredictMode::kSample: return "sample";
    case PredictMode::kAverage: return "average";
  }
  return "mean";
}

PredictMode parse_predict_mode(const std::string& text) {
  if (text == "mean") return PredictMode::kMean;
  if (text == "sample") return PredictMode::kSample;
  if (text == "average") return PredictMode::kAverage;
  throw ConfigError("predict.mode must be mean, sample or average, got '" + text + "'");
}

void to_json(Json& j, const RunConfig& c) {
  j = Json::object();
  j["seed"] = c.seed;
  j["precision"] = c.precision;
  j["data"] = Json{{"source", c.data.source},
                   {"dir", c.data.dir},
                   {"csv_path", c.data.csv_path},
                   {"stride", c.data.stride},
                   {"input_steps", c.data.input_steps},
                   {"output_steps", c.data.output_steps},
                   {"counts", c.data.counts},
                   {"val_fraction", c.data.val_fraction},
                   {"test_fraction", c.data.test_fraction}};
  Json sim = c.simulator;
  sim.erase("steps");
  sim.erase("seed");
  j["simulator"] = sim;
  j["model"] = model_fields(c.model);
  Json train = c.train;
  j["train"] = train;
  j["predict"] = Json{{"mode", to_string(c.predict.mode)},
                      {"temperature", c.predict.temperature},
                      {"samples", c.predict.samples}};
  j["eval"] = Json{{"horizons", c.eval.horizons}};
}

void from_json(const Json& j, RunConfig& c) {
  StrictReader r(j, "");
  r.get("seed", c.seed);
  r.get("precision", c.precision);
  if (auto it = j.find("data"); it != j.end()) {
    StrictReader d(*it, "data");
    d.get("source", c.data.source);
    d.get("dir", c.data.dir);
    d.get("csv_path", c.data.csv_path);
    d.get("stride", c.data.stride);
    d.get("input_steps", c.data.input_steps);
    d.get("output_steps", c.data.output_steps);
    d.section("counts", c.data.counts);
    d.get("val_fraction", c.data.val_fraction);
    d.get("test_fraction", c.data.test_fraction);
    d.finish();
  }
  Json ignored;
  r.get("data", ignored);
  if (auto it = j.find("simulator"); it != j.end()) {
    if (it->is_object() && (it->contains("steps") || it->contains("seed"))) {
      throw ConfigError("simulator.steps and simulator.seed are derived from data geometry and the run seed");
    }
  }
  r.section("simulator", c.simulator);
  if (auto it = j.find("model"); it != j.end()) {
    StrictReader m(*it, "model");
    read_model_fields(m, c.model);
    m.finish();
  }
  r.get("model", ignored);
  if (auto it = j.find("train"); it != j.end()) from_json(*it, c.train);
  r.get("train", ignored);
  if (auto it = j.find("predict"); it != j.end()) {
    StrictReader p(*it, "predict");
    std::string mode = to_string(c.predict.mode);
    p.get("mode", mode);
    c.predict.mode = parse_predict_mode(mode);
    p.get("temperature", c.predict.temperature);
    p.get("samples", c.predict.samples);
    p.finish();
  }
  r.get("predict", ignored);
  if (auto it = j.find("eval"); it != j.end()) {
    StrictReader e(*it, "eval");
    e.get("horizons", c.eval.horizons);
    e.finish();
  }
  r.get("eval", ignored);
  r.finish();
}

void RunConfig::finalize() {
  if (precision != "f32" && precision != "f64") throw ConfigError("precision must be f32 or f64");
  if (data.source != "simulator" && data.source != "csv") throw ConfigError("data.source must be simulator or csv");
  if (data.input_steps < 1 || data.output_steps < 1) throw ConfigError("data steps must be positive");
  if (data.stride < 1) throw ConfigError("data.stride must be positive");
  if (data.counts.train < 1 || data.counts.val < 1 || data.counts.test < 1) {
    throw ConfigError("data.counts entries must be at least 1");
  }
  if (!(data.val_fraction > 0) || !(data.test_fraction > 0) || data.val_fraction + data.test_fraction >= 1) {
    throw ConfigError("data.val_fraction and data.test_fraction must be positive and sum below 1");
  }
  simulator.steps = data.input_steps + data.output_steps;
  simulator.seed = seed;
  train.seed = seed;
  model.seed = seed;
  model.input_steps = data.input_steps;
  model.output_steps = data.output_steps;
  simulator.validate();
  train.validate();
  model_for(simulator.particles, kParticleFeatures).validate();
  if (eval.horizons.empty()) throw ConfigError("eval.horizons must not be empty");
  for (Index h : eval.horizons) {
    if (h < 1 || h > data.output_steps) throw ConfigError("eval.horizons must lie in [1, output_steps]");
  }
  if (!(predict.temperature >= 0)) throw ConfigError("predict.temperature must be non-negative");
  if (predict.samples < 1) throw ConfigError("predict.samples must be positive");
  predict.seed = seed;
}

ModelConfig RunConfig::model_for(Index entities, Index features) const {
  ModelConfig m = model;
  m.input_steps = data.input_steps;
  m.output_steps = data.output_steps;
  m.entities = entities;
  m.features = features;
  m.seed = seed;
  return m;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

RunConfig load_run_config(const std::string& path) {
  RunConfig c;
  from_json(read_json_file(path), c);
  return c;
}

}  // namespace motionflow
