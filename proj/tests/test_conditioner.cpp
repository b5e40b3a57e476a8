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

#include "doctest.h"

#include "motionflow/conditioner.hpp"
#include "motionflow/ops.hpp"
#include "motionflow/verification.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace motionflow;
using motionflow::testing::max_diff;
using motionflow::testing::random_tensor;

namespace {

struct Fixture {
  ModelConfig config = tiny_model_config();
  Rng rng{11};
  Conditioner<double> conditioner{config, rng};
  TensorD x = random_tensor({2, 4, 3, 4}, rng);

  void randomize(double scale = 0.5) {
    ParameterList<double> params;
    conditioner.collect(params);
    Rng r(12);
    randomize_parameters(params, r, scale);
  }
};

// Determinant by Gaussian elimination with partial pivoting.
double elimination_det(std::vector<double> a, Index n) {
  double det = 1.0;
  for (Index c = 0; c < n; ++c) {
    Index pivot = c;
    for (Index r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[pivot * n + c])) pivot = r;
    if (pivot != c) {
      for (Index k = 0; k < n; ++k) std::swap(a[c * n + k], a[pivot * n + k]);
      det = -det;
    }
    det *= a[c * n + c];
    for (Index r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (Index k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
    }
  }
  return det;
}

}  // namespace

TEST_CASE("ARN output shape and zero final layer") {
  Fixture f;
  Tape<double> tape;
  for (int which : {1, 2}) {
    const auto y = f.conditioner.arn_forward(tape, tape.constant(f.x), which);
    CHECK(y.shape() == Shape{2, 8, 3, 4});
    f.conditioner.arn_layer(which, 2).weight().value().array().setZero();
    f.conditioner.arn_layer(which, 2).bias().value().array().setZero();
    // A tape snapshots each parameter once, so read the zeroed layer on a fresh tape.
    Tape<double> fresh;
    CHECK(f.conditioner.arn_forward(fresh, fresh.constant(f.x), which).value().array().isZero());
  }
  CHECK_THROWS_AS(f.conditioner.arn_forward(tape, tape.constant(TensorD({1, 4, 2, 4})), 1), ShapeError);
}

TEST_CASE("perturbing the last cell of an ordering changes no other output") {
  Fixture f;
  f.randomize(1.0);
  const OrderingKind kinds[2] = {OrderingKind::kTimeMajorSCurve, OrderingKind::kEntityMajorSCurve};
  for (int which : {1, 2}) {
    const Ordering o = generate_ordering(kinds[which - 1], 3, 4);
    Index lt = 0, ln = 0;
    for (Index t = 0; t < 3; ++t)
      for (Index n = 0; n < 4; ++n)
        if (o.rank(t, n) == 11) lt = t, ln = n;
    Tape<double> tape(false);
    const TensorD base = f.conditioner.arn_forward(tape, tape.constant(f.x), which).value();
    TensorD xp = f.x;
    for (Index c = 0; c < 4; ++c) xp.at(0, c, lt, ln) += 2.0;
    const TensorD y = f.conditioner.arn_forward(tape, tape.constant(xp), which).value();
    CHECK(max_diff(y, base) == 0.0);
  }
}

TEST_CASE("fuse_context: zero context is the identity") {
  Fixture f;
  Tape<double> tape;
  const auto zero = tape.constant(TensorD({2, 8, 3, 4}));
  const auto u = f.conditioner.fuse_context(tape.constant(f.x), zero, zero);
  CHECK(u.shape() == f.x.shape());
  CHECK(max_diff(u.value(), f.x) == 0.0);
}

TEST_CASE("fuse_context matches a step-by-step recomputation") {
  Fixture f;
  Rng rng(13);
  const TensorD a1 = random_tensor({2, 8, 3, 4}, rng), a2 = random_tensor({2, 8, 3, 4}, rng);
  Tape<double> tape;
  const TensorD u =
      f.conditioner.fuse_context(tape.constant(f.x), tape.constant(a1), tape.constant(a2)).value();
  const double eps = f.config.pono_epsilon;
  for (Index b = 0; b < 2; ++b)
    for (Index t = 0; t < 3; ++t)
      for (Index n = 0; n < 4; ++n) {
        double c1[4], c2[4], mean = 0.0, var = 0.0;
        for (Index c = 0; c < 4; ++c) {
          c1[c] = a1.at(b, c, t, n) * a2.at(b, c, t, n);
          c2[c] = a1.at(b, c + 4, t, n) * a2.at(b, c + 4, t, n);
          mean += c1[c] / 4;
        }
        for (Index c = 0; c < 4; ++c) var += (c1[c] - mean) * (c1[c] - mean) / 4;
        for (Index c = 0; c < 4; ++c) {
          const double expected =
              f.x.at(b, c, t, n) + (c1[c] - mean) / (std::sqrt(var) + eps) / (1.0 + std::exp(-c2[c]));
          CHECK(u.at(b, c, t, n) == doctest::Approx(expected).epsilon(1e-12));
        }
      }
  CHECK_THROWS_AS(f.conditioner.fuse_context(tape.constant(f.x), tape.constant(a1), tape.constant(f.x)), ShapeError);
}

TEST_CASE("zero-initialized heads give identity flow parameters") {
  Fixture f;
  Tape<double> tape;
  const auto bundle = f.conditioner(tape, tape.constant(f.x));
  REQUIRE(bundle.steps.size() == 2);
  for (const auto& s : bundle.steps) {
    CHECK((s.actnorm.scale.value().array() == 1.0).all());
    CHECK(s.actnorm.shift.value().array().isZero());
    CHECK(s.mixing.log_diag.value().array().isZero());
    for (Index b = 0; b < 2; ++b)
      for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) CHECK(s.mixing.weight.value()[(b * 4 + i) * 4 + j] == (i == j ? 1.0 : 0.0));
    CHECK(s.context.shape() == Shape{2, 1, 1, 4});
    CHECK(s.context.value().array().isZero());
  }
}

TEST_CASE("actnorm scales stay inside the clamp range") {
  Fixture f;
  f.randomize(50.0);
  Tape<double> tape;
  const auto bundle = f.conditioner(tape, tape.constant(f.x));
  for (const auto& s : bundle.steps) {
    CHECK(s.actnorm.scale.value().array().minCoeff() >= std::exp(-1.9));
    CHECK(s.actnorm.scale.value().array().maxCoeff() <= std::exp(1.9));
    CHECK(s.mixing.log_diag.value().array().abs().maxCoeff() <= 1.9);
  }
}

TEST_CASE("actnorm scale gradient passes gradient_check") {
  Fixture f;
  f.randomize(0.5);
  Rng rng(14);
  const TensorD r = random_tensor({2, 4}, rng);
  auto& h = f.conditioner.heads(1);
  const auto report = gradient_check(
      [&](Tape<double>& t) {
        const auto u = f.conditioner.fuse_context(t.constant(f.x), f.conditioner.arn_forward(t, t.constant(f.x), 1),
                                                  f.conditioner.arn_forward(t, t.constant(f.x), 2));
        return sum(f.conditioner.actnorm_params(t, u, 1).scale * t.constant(r));
      },
      {&h.fc1_a.weight(), &h.fc1_b.weight(), &h.fc1_out.weight(), &h.fc1_out.bias()});
  INFO(report.summary());
  CHECK(report.passed);
}

TEST_CASE("mixing determinant equals exp of the log diagonal") {
  Fixture f;
  f.randomize(1.0);
  Tape<double> tape;
  const auto bundle = f.conditioner(tape, tape.constant(f.x));
  for (const auto& s : bundle.steps)
    for (Index b = 0; b < 2; ++b) {
      std::vector<double> w(s.mixing.weight.value().data() + b * 16, s.mixing.weight.value().data() + b * 16 + 16);
      double log_d = 0.0;
      for (Index i = 0; i < 4; ++i) log_d += s.mixing.log_diag.value()[b * 4 + i];
      CHECK(elimination_det(w, 4) == doctest::Approx(std::exp(log_d)).epsilon(1e-6));
    }
}

TEST_CASE("coupling context is the time mean of the conv stack") {
  Fixture f;
  f.randomize(0.7);
  Tape<double> tape;
  const auto u = tape.constant(f.x);
  auto& h = f.conditioner.heads(0);
  const TensorD stack = h.cnn1_out(tape, elu(h.cnn1_b(tape, elu(h.cnn1_a(tape, u))))).value();
  const TensorD ctx = f.conditioner.coupling_context(tape, u, 0).value();
  CHECK(ctx.shape() == Shape{2, 1, 1, 4});
  for (Index b = 0; b < 2; ++b)
    for (Index n = 0; n < 4; ++n) {
      const double mean = (stack.at(b, 0, 0, n) + stack.at(b, 0, 1, n) + stack.at(b, 0, 2, n)) / 3.0;
      CHECK(ctx.at(b, 0, 0, n) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("bundle recomputation is bit-identical") {
  Fixture f;
  f.randomize(0.5);
  Tape<double> t1, t2;
  const auto b1 = f.conditioner(t1, t1.constant(f.x)), b2 = f.conditioner(t2, t2.constant(f.x));
  CHECK(max_diff(b1.u.value(), b2.u.value()) == 0.0);
  for (std::size_t k = 0; k < b1.steps.size(); ++k) {
    CHECK(max_diff(b1.steps[k].mixing.weight.value(), b2.steps[k].mixing.weight.value()) == 0.0);
    CHECK(max_diff(b1.steps[k].context.value(), b2.steps[k].context.value()) == 0.0);
  }
}

TEST_CASE("plain conditioner replaces the masked trunk") {
  ModelConfig c = tiny_model_config();
  c.use_masked_conditioner = false;
  Rng rng(15);
  Conditioner<double> plain(c, rng);
  ParameterList<double> params;
  plain.collect(params);
  bool has_plain = false;
  for (auto* p : params) has_plain = has_plain || p->name() == "arn1.plain0.weight";
  CHECK(has_plain);
  Tape<double> tape;
  CHECK(plain.arn_forward(tape, tape.constant(TensorD({1, 4, 3, 4})), 2).shape() == Shape{1, 8, 3, 4});
}
