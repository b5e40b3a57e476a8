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

#ifndef MOTIONFLOW_CONFIG_HPP
#define MOTIONFLOW_CONFIG_HPP

#include "motionflow/dataset.hpp"
#include "motionflow/model.hpp"
#include "motionflow/optimizer.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace motionflow {

using Json = nlohmann::json;

struct TrainConfig {
  AdamConfig adam;
  Index batch_size = 32;
  Index max_epochs = 100;
  Index patience = 20;      // stop once this many epochs pass without a new best
  double clip_norm = 10.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;   // batch shuffling

  void validate() const;
};

struct DataConfig {
  std::string source = "simulator";  // "simulator" or "csv"
  std::string dir = "data";          // dataset directory (manifest.json + trajectories.csv)
  std::string csv_path;              // series file when source == "csv"
  Index stride = 10;                 // sliding-window stride for csv series
  Index input_steps = 10;
  Index output_steps = 25;
  SplitCounts counts;                // simulator sample counts
  double val_fraction = 0.1;         // csv windows: trailing fractions
  double test_fraction = 0.1;
};

struct EvalConfig {
  std::vector<Index> horizons{1, 15, 25};
};

// Everything a CLI run needs. Geometry is owned by the data section; the
// run seed drives simulation, initialization and shuffling.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string precision = "f32";
  DataConfig data;
  SimConfig simulator;
  ModelConfig model;
  TrainConfig train;
  PredictOptions predict;
  EvalConfig eval;

  // Propagates seed and geometry into the sections, then validates.
  void finalize();
  ModelConfig model_for(Index entities, Index features) const;
};

// Strict readers: unknown keys and wrong types throw ConfigError.
void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);
void to_json(Json& j, const SimConfig& c);
void from_json(const Json& j, SimConfig& c);
void to_json(Json& j, const AdamConfig& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const SplitCounts& c);
void from_json(const Json& j, SplitCounts& c);
void to_json(Json& j, const DatasetManifest& m);
void from_json(const Json& j, DatasetManifest& m);
void to_json(Json& j, const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

std::string to_string(PredictMode mode);
PredictMode parse_predict_mode(const std::string& text);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);
RunConfig load_run_config(const std::string& path);

}  // namespace motionflow

#endif  // MOTIONFLOW_CONFIG_HPP
