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

#include "motionflow/layers.hpp"

#include <cmath>

namespace motionflow {

template <typename Scalar>
Tensor<Scalar> init_tensor(const Shape& shape, Index fan_in, Init init, Rng& rng) {
  Tensor<Scalar> t(shape);
  if (init == Init::kLecunNormal) {
    const double std_dev = 1.0 / std::sqrt(double(fan_in));
    for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(std_dev * rng.normal());
  }
  return t;
}

template <typename Scalar>
Conv2dLayer<Scalar>::Conv2dLayer(const std::string& name, Index in_channels, Index out_channels, Index kernel,
                                 int dilation, Init init, Rng& rng)
    : weight_(name + ".weight",
              init_tensor<Scalar>({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel, init, rng)),
      bias_(name + ".bias", Tensor<Scalar>({out_channels})),
      dilation_(dilation) {}

template <typename Scalar>
Var<Scalar> Conv2dLayer<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) {
  return conv2d(x, tape.parameter(weight_), tape.parameter(bias_), dilation_);
}

template <typename Scalar>
Var<Scalar> Conv2dLayer<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x, const LocalMaskSet& masks) {
  return lmconv(x, tape.parameter(weight_), tape.parameter(bias_), masks);
}

template <typename Scalar>
LinearLayer<Scalar>::LinearLayer(const std::string& name, Index in_features, Index out_features, Init init, Rng& rng)
    : weight_(name + ".weight", init_tensor<Scalar>({out_features, in_features}, in_features, init, rng)),
      bias_(name + ".bias", Tensor<Scalar>({out_features})) {}

template <typename Scalar>
Var<Scalar> LinearLayer<Scalar>::operator()(Tape<Scalar>& tape, const Var<Scalar>& x) {
  return linear(x, tape.parameter(weight_), tape.parameter(bias_));
}

template class Conv2dLayer<float>;
template class Conv2dLayer<double>;
template class LinearLayer<float>;
template class LinearLayer<double>;
template Tensor<float> init_tensor(const Shape&, Index, Init, Rng&);
template Tensor<double> init_tensor(const Shape&, Index, Init, Rng&);

}  // namespace motionflow
