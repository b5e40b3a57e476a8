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

#include "motionflow/autodiff.hpp"

namespace motionflow {

template <typename Scalar>
Var<Scalar> Tape<Scalar>::constant(TensorT value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr});
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::parameter(Parameter<Scalar>& param) {
  if (auto it = param_nodes_.find(&param); it != param_nodes_.end()) {
    return Var<Scalar>(this, it->second);
  }
  nodes_.push_back(Node{param.value(), {}, track_ && param.trainable(), {}, &param});
  param_nodes_.emplace(&param, nodes_.size() - 1);
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::record(TensorT value, std::initializer_list<Var<Scalar>> inputs,
                                 Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || requires_grad(in.id());
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}, nullptr});
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Var<Scalar> Tape<Scalar>::record(TensorT value, const std::vector<Var<Scalar>>& inputs,
                                 Backward backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || requires_grad(in.id());
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}, nullptr});
  return Var<Scalar>(this, nodes_.size() - 1);
}

template <typename Scalar>
Tensor<Scalar>* Tape<Scalar>::grad_target(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = TensorT(node.value.shape());
  return &node.grad;
}

template <typename Scalar>
const Tensor<Scalar>* Tape<Scalar>::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  return node.grad.empty() ? nullptr : &node.grad;
}

template <typename Scalar>
void Tape<Scalar>::backward(const Var<Scalar>& root) {
  if (root.value().size() != 1) {
    throw ShapeError("backward requires a single-element root, got " + to_string(root.shape()));
  }
  TensorT* seed = grad_target(root.id());
  if (seed == nullptr) return;
  seed->array().setOnes();
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param != nullptr) node.param->grad().array() += node.grad.array();
  }
}

namespace {

template <typename Scalar>
void require_same(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": operand shapes differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

// Unary op whose derivative is a function of input and output values.
template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& a, Fwd fwd, Deriv deriv) {
  Tape<Scalar>& tape = a.tape();
  Tensor<Scalar> out(a.shape(), fwd(a.value().array()));
  const std::size_t ia = a.id();
  const std::size_t io = tape.size();
  return tape.record(std::move(out), {a}, [ia, io, deriv](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) {
      ga->array() += g.array() * deriv(t.value(ia).array(), t.value(io).array());
    }
  });
}

}  // namespace

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> out(a.shape(), a.value().array() + b.value().array());
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += g.array();
    if (auto* gb = t.grad_target(ib)) gb->array() += g.array();
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> out(a.shape(), a.value().array() - b.value().array());
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += g.array();
    if (auto* gb = t.grad_target(ib)) gb->array() -= g.array();
  });
}

template <typename Scalar>
Var<Scalar> operator*(const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  Tensor<Scalar> out(a.shape(), a.value().array() * b.value().array());
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += g.array() * t.value(ib).array();
    if (auto* gb = t.grad_target(ib)) gb->array() += g.array() * t.value(ia).array();
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a) {
  return Scalar(-1) * a;
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Tensor<Scalar> out(a.shape(), s * a.value().array());
  return a.tape().record(std::move(out), {a}, [ia, s](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += s * g.array();
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, Scalar s) {
  const std::size_t ia = a.id();
  Tensor<Scalar> out(a.shape(), a.value().array() + s);
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += g.array();
  });
}

template <typename Scalar>
Var<Scalar> exp(const Var<Scalar>& a) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [](const A& x) -> A { return x.exp(); }, [](const A&, const A& y) -> A { return y; });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [](const A& x) -> A { return x.tanh(); },
      [](const A&, const A& y) -> A { return Scalar(1) - y.square(); });
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& a) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [](const A& x) -> A { return (Scalar(1) + (-x).exp()).inverse(); },
      [](const A&, const A& y) -> A { return y * (Scalar(1) - y); });
}

template <typename Scalar>
Var<Scalar> elu(const Var<Scalar>& a) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [](const A& x) -> A { return (x > Scalar(0)).select(x, x.exp() - Scalar(1)); },
      [](const A& x, const A& y) -> A { return (x > Scalar(0)).select(A::Ones(x.size()), y + Scalar(1)); });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& a) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [](const A& x) -> A { return x.square(); }, [](const A& x, const A&) -> A { return Scalar(2) * x; });
}

template <typename Scalar>
Var<Scalar> soft_clamp(const Var<Scalar>& a, Scalar bound) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [bound](const A& x) -> A { return bound * (x / bound).tanh(); },
      [bound](const A&, const A& y) -> A { return Scalar(1) - (y / bound).square(); });
}

template <typename Scalar>
Var<Scalar> clamp(const Var<Scalar>& a, Scalar lo, Scalar hi) {
  using A = typename Tensor<Scalar>::Array;
  return unary(
      a, [lo, hi](const A& x) -> A { return x.max(lo).min(hi); },
      [lo, hi](const A& x, const A&) -> A {
        return ((x >= lo) && (x <= hi)).template cast<Scalar>();
      });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const std::size_t ia = a.id();
  Tensor<Scalar> out({1});
  out[0] = a.value().array().sum();
  return a.tape().record(std::move(out), {a}, [ia](Tape<Scalar>& t, const Tensor<Scalar>& g) {
    if (auto* ga = t.grad_target(ia)) ga->array() += g[0];
  });
}

#define MOTIONFLOW_INSTANTIATE(S)                                            \
  template class Tape<S>;                                                    \
  template Var<S> operator+(const Var<S>&, const Var<S>&);                   \
  template Var<S> operator-(const Var<S>&, const Var<S>&);                   \
  template Var<S> operator*(const Var<S>&, const Var<S>&);                   \
  template Var<S> operator-(const Var<S>&);                                  \
  template Var<S> operator*(S, const Var<S>&);                               \
  template Var<S> operator+(const Var<S>&, S);                               \
  template Var<S> exp(const Var<S>&);                                        \
  template Var<S> tanh(const Var<S>&);                                       \
  template Var<S> sigmoid(const Var<S>&);                                    \
  template Var<S> elu(const Var<S>&);                                        \
  template Var<S> square(const Var<S>&);                                     \
  template Var<S> soft_clamp(const Var<S>&, S);                              \
  template Var<S> clamp(const Var<S>&, S, S);                                \
  template Var<S> sum(const Var<S>&);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)

#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
