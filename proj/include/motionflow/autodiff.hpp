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

#ifndef MOTIONFLOW_AUTODIFF_HPP
#define MOTIONFLOW_AUTODIFF_HPP

#include "motionflow/tensor.hpp"

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace motionflow {

// A trainable tensor together with its accumulated gradient.
template <typename Scalar>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor<Scalar> value, bool trainable = true)
      : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()), trainable_(trainable) {}

  const std::string& name() const { return name_; }
  Tensor<Scalar>& value() { return value_; }
  const Tensor<Scalar>& value() const { return value_; }
  Tensor<Scalar>& grad() { return grad_; }
  const Tensor<Scalar>& grad() const { return grad_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool trainable) { trainable_ = trainable; }
  void zero_grad() { grad_.array().setZero(); }

 private:
  std::string name_;
  Tensor<Scalar> value_;
  Tensor<Scalar> grad_;
  bool trainable_ = true;
};

template <typename Scalar>
class Tape;

// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<Scalar>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  Index dim(Index axis) const { return value().dim(axis); }
  Index rank() const { return value().rank(); }
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Dynamic computation record. Every differentiable operation appends a node
// holding its value and a closure that pushes the node's gradient onto its
// inputs; backward() replays the closures in reverse order.
template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor<Scalar>;
  using Backward = std::function<void(Tape&, const TensorT&)>;

  Tape() = default;
  // With gradients disabled, parameters enter as constants and no backward
  // closures are kept; used for inference.
  explicit Tape(bool track_gradients) : track_(track_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(TensorT value);
  Var<Scalar> parameter(Parameter<Scalar>& param);
  Var<Scalar> record(TensorT value, std::initializer_list<Var<Scalar>> inputs, Backward backward);
  Var<Scalar> record(TensorT value, const std::vector<Var<Scalar>>& inputs, Backward backward);

  const TensorT& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of node `id`, allocated on first use; nullptr when the
  // node does not lead to any parameter.
  TensorT* grad_target(std::size_t id);
  const TensorT* grad(std::size_t id) const;

  // Reverse pass from a single-element root. Parameter gradients are added
  // to Parameter::grad().
  void backward(const Var<Scalar>& root);

  std::size_t size() const { return nodes_.size(); }
  bool tracks_gradients() const { return track_; }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    Backward backward;
    Parameter<Scalar>* param = nullptr;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> param_nodes_;
  bool track_ = true;
};

// Elementwise arithmetic. Operands must share a shape.
template <typename Scalar> Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b);
template <typename Scalar> Var<Scalar> operator-(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> operator*(Scalar s, const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> operator+(const Var<Scalar>& a, Scalar s);

template <typename Scalar> Var<Scalar> exp(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> tanh(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> sigmoid(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> elu(const Var<Scalar>& a);
template <typename Scalar> Var<Scalar> square(const Var<Scalar>& a);

// bound * tanh(a / bound): smooth, odd, identity slope at zero.
template <typename Scalar> Var<Scalar> soft_clamp(const Var<Scalar>& a, Scalar bound);
// Hard clamp; the gradient is zero outside [lo, hi].
template <typename Scalar> Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi);

// Sum of all elements as a [1] tensor.
template <typename Scalar> Var<Scalar> sum(const Var<Scalar>& a);

}  // namespace motionflow

#endif  // MOTIONFLOW_AUTODIFF_HPP
