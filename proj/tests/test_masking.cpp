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

#include "motionflow/masking.hpp"
#include "motionflow/ops.hpp"
#include "test_support.hpp"

using namespace motionflow;
using motionflow::testing::max_diff;
using motionflow::testing::random_tensor;

namespace {

const OrderingKind kKinds[] = {OrderingKind::kTimeMajorSCurve, OrderingKind::kEntityMajorSCurve};

Var<double> masked(Tape<double>& tape, const TensorD& x, const TensorD& w, const TensorD& b, const LocalMaskSet& m) {
  return lmconv(tape.constant(x), tape.constant(w), tape.constant(b), m);
}

}  // namespace

TEST_CASE("time-major S-curve on a 2x2 grid") {
  const Ordering o = generate_ordering(OrderingKind::kTimeMajorSCurve, 2, 2);
  CHECK(o.rank(0, 0) == 0);
  CHECK(o.rank(0, 1) == 1);
  CHECK(o.rank(1, 1) == 2);
  CHECK(o.rank(1, 0) == 3);
}

TEST_CASE("entity-major S-curve on a 2x2 grid") {
  const Ordering o = generate_ordering(OrderingKind::kEntityMajorSCurve, 2, 2);
  CHECK(o.rank(0, 0) == 0);
  CHECK(o.rank(1, 0) == 1);
  CHECK(o.rank(1, 1) == 2);
  CHECK(o.rank(0, 1) == 3);
}

TEST_CASE("a single frame is scanned left to right") {
  for (Index n = 1; n <= 6; ++n) {
    const Ordering o = generate_ordering(OrderingKind::kTimeMajorSCurve, 1, n);
    for (Index e = 0; e < n; ++e) CHECK(o.rank(0, e) == e);
  }
}

TEST_CASE("orderings are bijections") {
  for (OrderingKind kind : kKinds)
    for (Index u = 1; u <= 6; ++u)
      for (Index n = 1; n <= 6; ++n) {
        std::vector<Index> ranks = generate_ordering(kind, u, n).ranks();
        std::sort(ranks.begin(), ranks.end());
        for (Index i = 0; i < u * n; ++i) CHECK(ranks[std::size_t(i)] == i);
      }
}

TEST_CASE("mask sets match exhaustive rank comparisons") {
  for (OrderingKind kind : kKinds)
    for (Index dilation : {1, 2})
      for (bool inclusive : {false, true}) {
        const Ordering o = generate_ordering(kind, 3, 4);
        const LocalMaskSet m = build_mask_set(o, 3, dilation, inclusive);
        for (Index t = 0; t < 3; ++t)
          for (Index n = 0; n < 4; ++n)
            for (Index ky = 0; ky < 3; ++ky)
              for (Index kx = 0; kx < 3; ++kx) {
                const Index jt = t + (ky - 1) * dilation, jn = n + (kx - 1) * dilation;
                bool expected = false;
                if (jt >= 0 && jt < 3 && jn >= 0 && jn < 4) {
                  expected = inclusive ? o.rank(jt, jn) <= o.rank(t, n) : o.rank(jt, jn) < o.rank(t, n);
                }
                CHECK(m.at(t, n, ky, kx) == expected);
              }
      }
}

TEST_CASE("2x2 time-major exclusive masks by enumeration") {
  const LocalMaskSet m = build_mask_set(generate_ordering(OrderingKind::kTimeMajorSCurve, 2, 2), 3, 1, false);
  // Cell (1,0) has rank 3 and sees all three other cells.
  CHECK(m.at(1, 0, 0, 1));  // (0,0)
  CHECK(m.at(1, 0, 0, 2));  // (0,1)
  CHECK(m.at(1, 0, 1, 2));  // (1,1)
  CHECK_FALSE(m.at(1, 0, 1, 1));
  // Cell (0,1) has rank 1 and sees only (0,0).
  for (Index ky = 0; ky < 3; ++ky)
    for (Index kx = 0; kx < 3; ++kx) CHECK(m.at(0, 1, ky, kx) == (ky == 1 && kx == 0));
}

TEST_CASE("rank-0 cell is fully masked and inclusive centres are set") {
  for (OrderingKind kind : kKinds) {
    const Ordering o = generate_ordering(kind, 4, 3);
    const LocalMaskSet ex = build_mask_set(o, 3, 1, false), in = build_mask_set(o, 3, 2, true);
    for (Index ky = 0; ky < 3; ++ky)
      for (Index kx = 0; kx < 3; ++kx) CHECK_FALSE(ex.at(0, 0, ky, kx));
    for (Index t = 0; t < 4; ++t)
      for (Index n = 0; n < 3; ++n) CHECK(in.at(t, n, 1, 1));
  }
}

TEST_CASE("mask compilation is deterministic") {
  const Ordering o = generate_ordering(OrderingKind::kEntityMajorSCurve, 5, 4);
  CHECK(build_mask_set(o, 3, 2, true) == build_mask_set(o, 3, 2, true));
}

TEST_CASE("lmconv: rank-0 output is the bias; all-ones masks equal conv2d") {
  Rng rng(1);
  const TensorD x = random_tensor({1, 2, 3, 3}, rng), w = random_tensor({4, 2, 3, 3}, rng),
                b = random_tensor({4}, rng);
  Tape<double> tape;
  const LocalMaskSet ex = build_mask_set(generate_ordering(OrderingKind::kTimeMajorSCurve, 3, 3), 3, 1, false);
  const TensorD y = masked(tape, x, w, b, ex).value();
  for (Index c = 0; c < 4; ++c) CHECK(y.at(0, c, 0, 0) == b[c]);

  const LocalMaskSet ones(3, 3, 3, 1, true, std::vector<std::uint8_t>(3 * 3 * 9, 1));
  const TensorD plain = conv2d(tape.constant(x), tape.constant(w), tape.constant(b)).value();
  CHECK(max_diff(masked(tape, x, w, b, ones).value(), plain) < 1e-12);
}

TEST_CASE("lmconv rejects a grid mismatch") {
  Tape<double> tape;
  const LocalMaskSet m = build_mask_set(generate_ordering(OrderingKind::kTimeMajorSCurve, 3, 3), 3, 1, false);
  CHECK_THROWS_AS(masked(tape, TensorD({1, 1, 3, 4}), TensorD({1, 1, 3, 3}), TensorD({1}), m), ShapeError);
}

TEST_CASE("exclusive lmconv Jacobian vanishes where rank(j) >= rank(i)") {
  Rng rng(2);
  for (OrderingKind kind : kKinds) {
    const Ordering o = generate_ordering(kind, 3, 4);
    const LocalMaskSet m = build_mask_set(o, 3, 1, false);
    const TensorD x = random_tensor({1, 2, 3, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng),
                  b = random_tensor({3}, rng);
    Tape<double> tape(false);
    const TensorD base = masked(tape, x, w, b, m).value();
    for (Index jt = 0; jt < 3; ++jt)
      for (Index jn = 0; jn < 4; ++jn) {
        TensorD xp = x;
        xp.at(0, 0, jt, jn) += 1.0;
        xp.at(0, 1, jt, jn) -= 1.0;
        const TensorD y = masked(tape, xp, w, b, m).value();
        for (Index it = 0; it < 3; ++it)
          for (Index in = 0; in < 4; ++in) {
            if (o.rank(jt, jn) < o.rank(it, in)) continue;
            for (Index c = 0; c < 3; ++c) CHECK(y.at(0, c, it, in) == base.at(0, c, it, in));
          }
      }
  }
}

TEST_CASE("stacked exclusive then inclusive layers stay autoregressive") {
  Rng rng(3);
  for (OrderingKind kind : kKinds) {
    const Ordering o = generate_ordering(kind, 4, 4);
    const LocalMaskSet first = build_mask_set(o, 3, 1, false), second = build_mask_set(o, 3, 1, true),
                       third = build_mask_set(o, 3, 2, true);
    const TensorD w1 = random_tensor({5, 2, 3, 3}, rng), w2 = random_tensor({5, 5, 3, 3}, rng),
                  w3 = random_tensor({2, 5, 3, 3}, rng), b5 = random_tensor({5}, rng), b2 = random_tensor({2}, rng);
    auto net = [&](const TensorD& x) {
      Tape<double> tape(false);
      Var<double> h = elu(masked(tape, x, w1, b5, first));
      h = elu(lmconv(h, tape.constant(w2), tape.constant(b5), second));
      return lmconv(h, tape.constant(w3), tape.constant(b2), third).value();
    };
    const TensorD x = random_tensor({1, 2, 4, 4}, rng);
    const TensorD base = net(x);
    Index influences = 0;
    for (Index jt = 0; jt < 4; ++jt)
      for (Index jn = 0; jn < 4; ++jn) {
        TensorD xp = x;
        xp.at(0, 0, jt, jn) += 0.7;
        const TensorD y = net(xp);
        for (Index it = 0; it < 4; ++it)
          for (Index in = 0; in < 4; ++in) {
            double diff = 0.0;
            for (Index c = 0; c < 2; ++c) diff = std::max(diff, std::abs(y.at(0, c, it, in) - base.at(0, c, it, in)));
            if (o.rank(jt, jn) >= o.rank(it, in)) {
              CHECK(diff == 0.0);
            } else if (diff > 0.0) {
              ++influences;
            }
          }
      }
    CHECK(influences > 0);
  }
}

TEST_CASE("lmconv passes gradient_check") {
  Rng rng(4);
  const LocalMaskSet m = build_mask_set(generate_ordering(OrderingKind::kEntityMajorSCurve, 3, 3), 3, 2, true);
  Parameter<double> x("x", random_tensor({2, 2, 3, 3}, rng)), w("w", random_tensor({3, 2, 3, 3}, rng)),
      b("b", random_tensor({3}, rng));
  const TensorD r = random_tensor({2, 3, 3, 3}, rng);
  const auto report = gradient_check(
      [&](Tape<double>& t) { return sum(lmconv(t.parameter(x), t.parameter(w), t.parameter(b), m) * t.constant(r)); },
      {&x, &w, &b});
  INFO(report.summary());
  CHECK(report.passed);
}
