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

#ifndef MOTIONFLOW_SERIES_HPP
#define MOTIONFLOW_SERIES_HPP

#include "motionflow/dataset.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace motionflow {

// A multivariate series: rows are time steps, columns are dimensions.
struct SeriesDataset {
  std::vector<std::string> headers;
  Eigen::MatrixXd values;
  Index steps() const { return Index(values.rows()); }
  Index dims() const { return Index(values.cols()); }
};

// Numeric CSV with a header row. Ragged rows, empty cells and non-numeric
// cells are rejected with their 1-based row/column coordinates.
SeriesDataset load_csv_series(const std::string& path);
void write_csv_series(const SeriesDataset& series, const std::string& path);

struct Window {
  Index start = 0;
  Eigen::MatrixXd x;  // [U, M]
  Eigen::MatrixXd y;  // [V, M]
};

// Windows of length U + V every `stride` rows, split at U.
std::vector<Window> window_sequences(const SeriesDataset& series, Index input_steps, Index output_steps, Index stride);

// Windows as a trajectory dataset with a single entity whose features are
// the series columns; windows are split in time order into train/val/test.
TrajectoryDataset series_to_dataset(const SeriesDataset& series, Index input_steps, Index output_steps, Index stride,
                                    double val_fraction, double test_fraction);

}  // namespace motionflow

#endif  // MOTIONFLOW_SERIES_HPP
