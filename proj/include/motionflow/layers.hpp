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

#ifndef MOTIONFLOW_LAYERS_HPP
#define MOTIONFLOW_LAYERS_HPP

#include "motionflow/masking.hpp"
#include "motionflow/ops.hpp"
#include "motionflow/random.hpp"

#include <string>
#include <vector>

namespace motionflow {

template <typename Scalar>
using ParameterList = std::vector<Parameter<Scalar>*>;

enum class Init {
  kLecunNormal,  // N(0, 1 / fan_in)
  kZero,
};

template <typename Scalar>
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, Index in_channels, Index out_channels, Index kernel, int dilation, Init init,
              Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x);
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x, const LocalMaskSet& masks);

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }
  Index out_channels() const { return weight_.value().dim(0); }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
  int dilation_ = 1;
};

template <typename Scalar>
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(const std::string& name, Index in_features, Index out_features, Init init, Rng& rng);

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x);

  void collect(ParameterList<Scalar>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  Parameter<Scalar> weight_;
  Parameter<Scalar> bias_;
};

template <typename Scalar>
Tensor<Scalar> init_tensor(const Shape& shape, Index fan_in, Init init, Rng& rng);

}  // namespace motionflow

#endif  // MOTIONFLOW_LAYERS_HPP
