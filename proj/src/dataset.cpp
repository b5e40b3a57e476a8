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

#include "motionflow/dataset.hpp"

#include "motionflow/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace motionflow {

Index TrajectoryDataset::offset(Split split) const {
  const SplitCounts& c = manifest.counts;
  switch (split) {
    case Split::kTrain: return 0;
    case Split::kVal: return c.train;
    case Split::kTest: return c.train + c.val;
  }
  return 0;
}

Index TrajectoryDataset::count(Split split) const {
  const SplitCounts& c = manifest.counts;
  switch (split) {
    case Split::kTrain: return c.train;
    case Split::kVal: return c.val;
    case Split::kTest: return c.test;
  }
  return 0;
}

Tensor<double> TrajectoryDataset::split(Split which) const {
  if (count(which) < 1) throw std::invalid_argument("dataset split is empty");
  return narrow_tensor(frames, 0, offset(which), count(which));
}

TrajectoryDataset generate_dataset(const SimConfig& sim, SplitCounts counts, Index input_steps, Index output_steps) {
  if (counts.train < 1 || counts.val < 1 || counts.test < 1) throw ConfigError("every split needs at least one sample");
  if (input_steps < 1 || output_steps < 1) throw ConfigError("input and output steps must be positive");
  SimConfig config = sim;
  config.steps = input_steps + output_steps;
  config.validate();

  TrajectoryDataset data;
  data.manifest.counts = counts;
  data.manifest.input_steps = input_steps;
  data.manifest.output_steps = output_steps;
  data.manifest.entities = config.particles;
  data.manifest.simulator = config;
  const Index per_sample = config.steps * config.particles * kParticleFeatures;
  data.frames = Tensor<double>({counts.total(), config.steps, config.particles, kParticleFeatures});
  for (Index i = 0; i < counts.total(); ++i) {
    Rng rng = Rng::derive(config.seed, std::uint64_t(i));
    const Tensor<double> t = simulate_trajectory(config, rng);
    data.frames.array().segment(i * per_sample, per_sample) = t.array();
  }
  data.manifest.scale = normalize_stats(data.split(Split::kTrain));
  return data;
}

std::vector<double> normalize_stats(const Tensor<double>& frames) {
  if (frames.empty() || frames.rank() < 1) throw std::invalid_argument("normalize_stats: empty data");
  const Index d = frames.dim(frames.rank() - 1);
  std::vector<double> scale(std::size_t(d), 0.0);
  for (Index i = 0; i < frames.size(); ++i) {
    double& s = scale[std::size_t(i % d)];
    s = std::max(s, std::abs(frames[i]));
  }
  for (double& s : scale) s = std::max(s, kScaleFloor);
  return scale;
}

namespace {

Tensor<double> apply_scale(const Tensor<double>& frames, const std::vector<double>& scale, bool divide) {
  const Index d = frames.dim(frames.rank() - 1);
  if (Index(scale.size()) != d) throw ShapeError("normalization: scale length does not match feature count");
  Tensor<double> out = frames;
  for (Index i = 0; i < out.size(); ++i) {
    const double s = scale[std::size_t(i % d)];
    out[i] = divide ? out[i] / s : out[i] * s;
  }
  return out;
}

std::string format_double(double v) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v, std::chars_format::general, 17);
  return std::string(buffer, result.ptr);
}

double parse_double(const std::string& cell, Index row, Index col) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto result = std::from_chars(begin, end, v);
  if (result.ec != std::errc() || result.ptr != end) {
    throw std::runtime_error("trajectories.csv row " + std::to_string(row) + " column " + std::to_string(col) +
                             ": not a number '" + cell + "'");
  }
  return v;
}

}  // namespace

Tensor<double> normalize(const Tensor<double>& frames, const std::vector<double>& scale) {
  return apply_scale(frames, scale, true);
}

Tensor<double> denormalize(const Tensor<double>& frames, const std::vector<double>& scale) {
  return apply_scale(frames, scale, false);
}

void write_dataset(const TrajectoryDataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_json_file(Json(dataset.manifest), (std::filesystem::path(dir) / "manifest.json").string());
  std::ofstream out(std::filesystem::path(dir) / "trajectories.csv");
  if (!out) throw std::runtime_error("cannot write trajectories.csv in " + dir);
  out << "sample,frame,particle";
  for (const auto& name : dataset.manifest.feature_names) out << ',' << name;
  out << '\n';
  const Index samples = dataset.frames.dim(0), steps = dataset.frames.dim(1), entities = dataset.frames.dim(2),
              features = dataset.frames.dim(3);
  Index i = 0;
  for (Index s = 0; s < samples; ++s)
    for (Index t = 0; t < steps; ++t)
      for (Index n = 0; n < entities; ++n) {
        out << s << ',' << t << ',' << n;
        for (Index f = 0; f < features; ++f) out << ',' << format_double(dataset.frames[i++]);
        out << '\n';
      }
  if (!out) throw std::runtime_error("failed writing trajectories.csv in " + dir);
}

TrajectoryDataset read_dataset(const std::string& dir) {
  TrajectoryDataset data;
  from_json(read_json_file((std::filesystem::path(dir) / "manifest.json").string()), data.manifest);
  const DatasetManifest& m = data.manifest;
  const Index samples = m.counts.total(), steps = m.steps(), entities = m.entities, features = m.features();
  std::ifstream in(std::filesystem::path(dir) / "trajectories.csv");
  if (!in) throw std::runtime_error("cannot open trajectories.csv in " + dir);
  std::string line;
  std::string expected = "sample,frame,particle";
  for (const auto& name : m.feature_names) expected += "," + name;
  if (!std::getline(in, line) || line != expected) {
    throw std::runtime_error("trajectories.csv: header must be '" + expected + "'");
  }
  data.frames = Tensor<double>({samples, steps, entities, features});
  Index row = 0;
  const Index rows = samples * steps * entities;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= rows) throw std::runtime_error("trajectories.csv: more rows than the manifest declares");
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    Index col = 0;
    while (std::getline(ss, cell, ',')) values.push_back(parse_double(cell, row + 2, ++col));
    if (Index(values.size()) != 3 + features) {
      throw std::runtime_error("trajectories.csv row " + std::to_string(row + 2) + ": expected " +
                               std::to_string(3 + features) + " columns");
    }
    const Index s = row / (steps * entities), t = (row / entities) % steps, n = row % entities;
    if (values[0] != double(s) || values[1] != double(t) || values[2] != double(n)) {
      throw std::runtime_error("trajectories.csv row " + std::to_string(row + 2) + ": rows out of order");
    }
    for (Index f = 0; f < features; ++f) data.frames[row * features + f] = values[std::size_t(3 + f)];
    ++row;
  }
  if (row != rows) throw std::runtime_error("trajectories.csv: fewer rows than the manifest declares");
  return data;
}

Index padded_width(Index entities, Index features) {
  const Index raw = entities * features;
  return (raw + kSqueezeFactor - 1) / kSqueezeFactor * kSqueezeFactor;
}

SampleSet make_samples(const Tensor<double>& normalized_frames, Index input_steps) {
  require_rank(normalized_frames, 4, "make_samples frames");
  const Index n = normalized_frames.dim(0), steps = normalized_frames.dim(1);
  const Index raw = normalized_frames.dim(2) * normalized_frames.dim(3);
  const Index width = padded_width(normalized_frames.dim(2), normalized_frames.dim(3));
  if (input_steps < 1 || input_steps >= steps) throw ShapeError("make_samples: input_steps must split the sequence");
  const Index out_steps = steps - input_steps;
  SampleSet set{Tensor<double>({n, input_steps, width}), Tensor<double>({n, out_steps, width})};
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < steps; ++t) {
      const double* src = normalized_frames.data() + (i * steps + t) * raw;
      double* dst = t < input_steps ? set.x.data() + (i * input_steps + t) * width
                                    : set.y.data() + (i * out_steps + (t - input_steps)) * width;
      std::copy(src, src + raw, dst);
    }
  return set;
}

Tensor<double> rows_to_frames(const Tensor<double>& rows, Index entities, Index features) {
  require_rank(rows, 3, "rows_to_frames rows");
  const Index n = rows.dim(0), steps = rows.dim(1), width = rows.dim(2), raw = entities * features;
  if (width < raw) throw ShapeError("rows_to_frames: rows narrower than entities * features");
  Tensor<double> frames({n, steps, entities, features});
  for (Index r = 0; r < n * steps; ++r) std::copy(rows.data() + r * width, rows.data() + r * width + raw,
                                                  frames.data() + r * raw);
  return frames;
}

template <typename Scalar>
Tensor<Scalar> gather_rows(const Tensor<double>& rows, const std::vector<Index>& idx, Index begin, Index end) {
  require_rank(rows, 3, "gather_rows rows");
  if (begin < 0 || end > Index(idx.size()) || begin >= end) throw std::out_of_range("gather_rows: bad range");
  const Index per = rows.dim(1) * rows.dim(2);
  Tensor<Scalar> out({end - begin, rows.dim(1), rows.dim(2)});
  for (Index i = begin; i < end; ++i) {
    out.array().segment((i - begin) * per, per) = rows.array().segment(idx[std::size_t(i)] * per, per).template cast<Scalar>();
  }
  return out;
}

template Tensor<float> gather_rows(const Tensor<double>&, const std::vector<Index>&, Index, Index);
template Tensor<double> gather_rows(const Tensor<double>&, const std::vector<Index>&, Index, Index);

}  // namespace motionflow
