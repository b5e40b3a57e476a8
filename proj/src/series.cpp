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

#include "motionflow/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace motionflow {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

SeriesDataset load_csv_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  SeriesDataset series;
  for (const auto& h : split_line(line)) series.headers.push_back(trim(h));
  const Index cols = Index(series.headers.size());
  std::vector<double> values;
  Index row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (Index(cells.size()) != cols) {
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " columns, expected " + std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c) {
      const std::string cell = trim(cells[std::size_t(c)]);
      double v = 0.0;
      const auto result = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || result.ec != std::errc() || result.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw std::runtime_error(path + ": row " + std::to_string(row) + " column " + std::to_string(c + 1) +
                                 " is not a number: '" + cell + "'");
      }
      values.push_back(v);
    }
  }
  if (values.empty()) throw std::runtime_error(path + ": no data rows");
  const Index rows = Index(values.size()) / cols;
  series.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, cols);
  return series;
}

void write_csv_series(const SeriesDataset& series, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t c = 0; c < series.headers.size(); ++c) out << (c ? "," : "") << series.headers[c];
  out << '\n';
  char buffer[64];
  for (Index r = 0; r < series.steps(); ++r) {
    for (Index c = 0; c < series.dims(); ++c) {
      const auto res = std::to_chars(buffer, buffer + sizeof(buffer), series.values(r, c),
                                     std::chars_format::general, 17);
      out << (c ? "," : "") << std::string(buffer, res.ptr);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<Window> window_sequences(const SeriesDataset& series, Index input_steps, Index output_steps,
                                     Index stride) {
  if (input_steps < 1 || output_steps < 1 || stride < 1) {
    throw std::invalid_argument("window_sequences: steps and stride must be positive");
  }
  const Index length = input_steps + output_steps;
  if (series.steps() < length) {
    throw std::invalid_argument("window_sequences: series of " + std::to_string(series.steps()) +
                                " steps is shorter than one window of " + std::to_string(length));
  }
  std::vector<Window> windows;
  for (Index start = 0; start + length <= series.steps(); start += stride) {
    windows.push_back({start, series.values.middleRows(start, input_steps),
                       series.values.middleRows(start + input_steps, output_steps)});
  }
  return windows;
}

TrajectoryDataset series_to_dataset(const SeriesDataset& series, Index input_steps, Index output_steps, Index stride,
                                    double val_fraction, double test_fraction) {
  const std::vector<Window> windows = window_sequences(series, input_steps, output_steps, stride);
  const Index total = Index(windows.size());
  const Index val = std::max<Index>(1, Index(std::floor(double(total) * val_fraction)));
  const Index test = std::max<Index>(1, Index(std::floor(double(total) * test_fraction)));
  if (total - val - test < 1) {
    throw std::invalid_argument("series yields " + std::to_string(total) + " windows, too few for three splits");
  }
  TrajectoryDataset data;
  DatasetManifest& m = data.manifest;
  m.counts = {total - val - test, val, test};
  m.input_steps = input_steps;
  m.output_steps = output_steps;
  m.entities = 1;
  m.feature_names = series.headers;
  const Index steps = input_steps + output_steps, dims = series.dims();
  data.frames = Tensor<double>({total, steps, 1, dims});
  for (Index w = 0; w < total; ++w)
    for (Index t = 0; t < steps; ++t)
      for (Index d = 0; d < dims; ++d) data.frames[(w * steps + t) * dims + d] = series.values(windows[std::size_t(w)].start + t, d);
  m.scale = normalize_stats(data.split(Split::kTrain));
  return data;
}

}  // namespace motionflow
