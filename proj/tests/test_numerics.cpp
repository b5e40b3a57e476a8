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

#include "motionflow/ops.hpp"
#include "test_support.hpp"

#include <functional>

using namespace motionflow;
using motionflow::testing::max_diff;
using motionflow::testing::random_tensor;

namespace {

// Reference dilated same-padded cross-correlation, one batch item.
TensorD conv_reference(const TensorD& x, const TensorD& w, const TensorD& b, Index dilation) {
  const Index cin = x.dim(0), h = x.dim(1), wd = x.dim(2), cout = w.dim(0), k = w.dim(2), r = k / 2;
  TensorD out({cout, h, wd});
  for (Index o = 0; o < cout; ++o)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < wd; ++j) {
        double acc = b[o];
        for (Index c = 0; c < cin; ++c)
          for (Index ky = 0; ky < k; ++ky)
            for (Index kx = 0; kx < k; ++kx) {
              const Index y = i + (ky - r) * dilation, xx = j + (kx - r) * dilation;
              if (y < 0 || y >= h || xx < 0 || xx >= wd) continue;
              acc += w[((o * cin + c) * k + ky) * k + kx] * x.at(c, y, xx);
            }
        out.at(o, i, j) = acc;
      }
  return out;
}

// Gradient check of sum(R * f(params)) for a fixed random R.
GradientCheckReport check_op(const std::function<Var<double>(Tape<double>&)>& f,
                             const std::vector<Parameter<double>*>& params, std::uint64_t seed) {
  Tape<double> probe(false);
  Rng rng(seed);
  const TensorD weights = random_tensor(f(probe).shape(), rng);
  return gradient_check([&](Tape<double>& t) { return sum(f(t) * t.constant(weights)); }, params);
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  TensorD t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.array().isZero());
  CHECK_THROWS_AS(TensorD({2, 0}), ShapeError);
  CHECK_THROWS_AS(TensorD({2, 2}, TensorD::Array::Zero(3)), ShapeError);
  CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
  CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
}

TEST_CASE("parameter gradient starts at zero and resets") {
  Rng rng(1);
  Parameter<double> p("p", random_tensor({3, 2}, rng));
  CHECK(p.grad().shape() == p.value().shape());
  CHECK(p.grad().array().isZero());
  Tape<double> tape;
  tape.backward(sum(square(tape.parameter(p))));
  CHECK_FALSE(p.grad().array().isZero());
  p.zero_grad();
  CHECK(p.grad().array().isZero());
}

TEST_CASE("gradient-free tape treats parameters as constants") {
  Parameter<double> p("p", TensorD({1}, {2.0}));
  Tape<double> tape(false);
  const Var<double> v = tape.parameter(p);
  CHECK_FALSE(tape.requires_grad(v.id()));
  CHECK(tape.tracks_gradients() == false);
}

TEST_CASE("conv2d identity and overlap examples") {
  TensorD w({1, 1, 3, 3});
  w[4] = 1.0;
  Rng rng(2);
  const TensorD x = random_tensor({1, 4, 5}, rng);
  Tape<double> tape;
  const auto y = conv2d(tape.constant(x), tape.constant(w), tape.constant(TensorD({1})));
  CHECK(max_diff(y.value(), x) == 0.0);

  const auto ones = conv2d(tape.constant(TensorD::constant({1, 3, 3}, 1.0)),
                           tape.constant(TensorD::constant({1, 1, 3, 3}, 1.0)), tape.constant(TensorD({1})));
  CHECK(ones.value().at(0, 1, 1) == 9.0);
  CHECK(ones.value().at(0, 0, 0) == 4.0);
}

TEST_CASE("conv2d matches a nested-loop reference") {
  Rng rng(3);
  for (Index dilation : {1, 2}) {
    const TensorD x = random_tensor({2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng), b = random_tensor({3}, rng);
    Tape<double> tape;
    const auto y = conv2d(tape.constant(x), tape.constant(w), tape.constant(b), int(dilation));
    CHECK(max_diff(y.value(), conv_reference(x, w, b, dilation)) < 1e-12);
  }
}

TEST_CASE("conv2d rejects bad shapes") {
  Tape<double> tape;
  const auto x = tape.constant(TensorD({1, 2, 4, 4}));
  CHECK_THROWS_AS(conv2d(x, tape.constant(TensorD({1, 2, 2, 2})), tape.constant(TensorD({1}))), ShapeError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(TensorD({1, 3, 3, 3})), tape.constant(TensorD({1}))), ShapeError);
}

TEST_CASE("conv2d and linear are linear in their input") {
  Rng rng(4);
  const TensorD x1 = random_tensor({1, 2, 4, 4}, rng), x2 = random_tensor({1, 2, 4, 4}, rng);
  const TensorD w = random_tensor({3, 2, 3, 3}, rng);
  Tape<double> tape;
  const auto zero = tape.constant(TensorD({3}));
  auto conv = [&](const TensorD& x) { return conv2d(tape.constant(x), tape.constant(w), zero).value(); };
  TensorD mixed(x1.shape(), 2.0 * x1.array() - 0.5 * x2.array());
  TensorD expected(conv(x1).shape(), 2.0 * conv(x1).array() - 0.5 * conv(x2).array());
  CHECK(max_diff(conv(mixed), expected) < 1e-12);

  const TensorD lw = random_tensor({3, 4}, rng), v1 = random_tensor({4}, rng), v2 = random_tensor({4}, rng);
  auto lin = [&](const TensorD& v) { return linear(tape.constant(v), tape.constant(lw), zero).value(); };
  TensorD lmixed(v1.shape(), 3.0 * v1.array() + v2.array());
  TensorD lexpected({3}, 3.0 * lin(v1).array() + lin(v2).array());
  CHECK(max_diff(lin(lmixed), lexpected) < 1e-12);
}

TEST_CASE("linear examples and dot-product oracle") {
  Rng rng(5);
  Tape<double> tape;
  const TensorD x = random_tensor({4}, rng);
  TensorD eye({4, 4});
  for (Index i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  CHECK(max_diff(linear(tape.constant(x), tape.constant(eye), tape.constant(TensorD({4}))).value(), x) == 0.0);
  const TensorD b = random_tensor({3}, rng);
  CHECK(max_diff(linear(tape.constant(x), tape.constant(TensorD({3, 4})), tape.constant(b)).value(), b) == 0.0);

  const TensorD w = random_tensor({3, 4}, rng);
  const TensorD y = linear(tape.constant(x), tape.constant(w), tape.constant(b)).value();
  for (Index i = 0; i < 3; ++i) {
    double dot = b[i];
    for (Index j = 0; j < 4; ++j) dot += w[i * 4 + j] * x[j];
    CHECK(y[i] == doctest::Approx(dot).epsilon(1e-12));
  }
  CHECK_THROWS_AS(linear(tape.constant(TensorD({5})), tape.constant(w), tape.constant(b)), ShapeError);
}

TEST_CASE("pono examples") {
  Tape<double> tape;
  const TensorD x({2, 1, 2}, {1.0, 5.0, 3.0, 5.0});
  const TensorD y = pono(tape.constant(x), 1e-5).value();
  CHECK(y.at(0, 0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y.at(1, 0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  // Equal channels: zero spread, the epsilon keeps the output at zero.
  CHECK(y.at(0, 0, 1) == 0.0);
  CHECK(y.at(1, 0, 1) == 0.0);
  const TensorD exact = pono(tape.constant(TensorD({2, 1, 1}, {1.0, 3.0})), 0.0).value();
  CHECK(exact[0] == -1.0);
  CHECK(exact[1] == 1.0);
  CHECK(std::isfinite(pono(tape.constant(TensorD::constant({3, 2, 2}, 4.0)), 1e-5).value()[0]));
}

TEST_CASE("pono output statistics") {
  Rng rng(6);
  Tape<double> tape;
  const TensorD y = pono(tape.constant(random_tensor({1, 6, 3, 4}, rng, 3.0)), 1e-5).value();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 4; ++j) {
      double mean = 0.0, sq = 0.0;
      for (Index c = 0; c < 6; ++c) mean += y.at(0, c, i, j) / 6.0;
      for (Index c = 0; c < 6; ++c) sq += (y.at(0, c, i, j) - mean) * (y.at(0, c, i, j) - mean) / 6.0;
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-3);
    }
}

TEST_CASE("gradient_check on w^2") {
  Parameter<double> w("w", TensorD({1}, {3.0}));
  Tape<double> tape;
  tape.backward(sum(square(tape.parameter(w))));
  CHECK(w.grad()[0] == doctest::Approx(6.0));
  w.zero_grad();
  const auto report = gradient_check([&](Tape<double>& t) { return sum(square(t.parameter(w))); }, {&w});
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("linear layer squared loss matches the hand-derived gradient") {
  Rng rng(7);
  Parameter<double> w("w", random_tensor({3, 4}, rng));
  Parameter<double> b("b", random_tensor({3}, rng));
  const TensorD x = random_tensor({4}, rng), target = random_tensor({3}, rng);
  auto loss = [&](Tape<double>& t) {
    return sum(square(linear(t.constant(x), t.parameter(w), t.parameter(b)) - t.constant(target)));
  };
  Tape<double> tape;
  tape.backward(loss(tape));
  for (Index i = 0; i < 3; ++i) {
    double r = b.value()[i] - target[i];
    for (Index j = 0; j < 4; ++j) r += w.value()[i * 4 + j] * x[j];
    for (Index j = 0; j < 4; ++j) CHECK(w.grad()[i * 4 + j] == doctest::Approx(2.0 * r * x[j]).epsilon(1e-10));
    CHECK(b.grad()[i] == doctest::Approx(2.0 * r).epsilon(1e-10));
  }
  w.zero_grad();
  b.zero_grad();
  const auto report = gradient_check(loss, {&w, &b});
  CHECK(report.passed);
  CHECK(report.max_relative_error < 1e-6);
}

TEST_CASE("gradient_check reports the failing parameter") {
  Parameter<double> w("broken", TensorD({2}, {1.0, 2.0}));
  // clamp has a zero gradient outside its range but the loss still moves
  // through the kink at the boundary, so a point on the boundary fails.
  w.value()[0] = 0.5;
  auto loss = [&](Tape<double>& t) { return sum(clamp(t.parameter(w), 0.5, 1.5)); };
  GradientCheckOptions options;
  options.step = 1e-3;
  const auto report = gradient_check(loss, {&w}, options);
  CHECK_FALSE(report.passed);
  CHECK(report.worst_parameter == "broken");
}

TEST_CASE("every differentiable operation passes gradient_check") {
  Rng rng(8);
  auto param = [&](const char* name, const Shape& shape, double scale = 1.0) {
    return Parameter<double>(name, random_tensor(shape, rng, scale));
  };
  auto expect_pass = [](const GradientCheckReport& r, const char* what) {
    INFO(what << ": " << r.summary());
    CHECK(r.passed);
  };

  auto x = param("x", {2, 3, 4, 4}), w = param("w", {2, 3, 3, 3}), b = param("b", {2});
  expect_pass(check_op([&](Tape<double>& t) { return conv2d(t.parameter(x), t.parameter(w), t.parameter(b), 2); },
                       {&x, &w, &b}, 1),
              "conv2d");
  auto v = param("v", {2, 5}), lw = param("lw", {3, 5}), lb = param("lb", {3});
  expect_pass(
      check_op([&](Tape<double>& t) { return linear(t.parameter(v), t.parameter(lw), t.parameter(lb)); },
               {&v, &lw, &lb}, 2),
      "linear");
  auto p = param("p", {2, 4, 2, 3});
  expect_pass(check_op([&](Tape<double>& t) { return pono(t.parameter(p), 1e-5); }, {&p}, 3), "pono");
  expect_pass(check_op([&](Tape<double>& t) { return elu(t.parameter(p)); }, {&p}, 4), "elu");
  expect_pass(check_op([&](Tape<double>& t) { return tanh(t.parameter(p)) * sigmoid(t.parameter(p)); }, {&p}, 5),
              "gate");
  expect_pass(check_op([&](Tape<double>& t) { return soft_clamp(exp(t.parameter(p)), 1.9); }, {&p}, 6),
              "soft_clamp/exp");
  expect_pass(check_op([&](Tape<double>& t) { return mean_over_height(t.parameter(p)); }, {&p}, 7), "mean");
  expect_pass(check_op([&](Tape<double>& t) { return repeat_items(t.parameter(p), 3); }, {&p}, 8), "repeat");
  expect_pass(check_op(
                  [&](Tape<double>& t) {
                    auto [a, c] = cross(t.parameter(p));
                    auto [s1, s2] = split(t.parameter(p));
                    return concat(interleave(c, a), s2 - s1 + s1, 1);
                  },
                  {&p}, 9),
              "channel partitions");
  auto sc = param("sc", {1, 4}), sh = param("sh", {1, 4});
  expect_pass(check_op([&](Tape<double>& t) { return channel_affine(t.parameter(p), t.parameter(sc), t.parameter(sh), 2); },
                       {&p, &sc, &sh}, 10),
              "channel_affine");
  auto raw = param("raw", {1, 16}, 0.5);
  expect_pass(check_op(
                  [&](Tape<double>& t) {
                    return channel_mix(t.parameter(p), lu_compose(t.parameter(raw), 4, 1.9), 2);
                  },
                  {&p, &raw}, 11),
              "channel_mix/lu_compose");
  expect_pass(check_op([&](Tape<double>& t) { return lu_log_diagonal(t.parameter(raw), 4, 1.9); }, {&raw}, 12),
              "lu_log_diagonal");
  auto z = param("z", {2, 4, 1, 3}), mu = param("mu", {2, 4, 1, 3}), ls = param("ls", {2, 4, 1, 3}, 0.3);
  expect_pass(check_op(
                  [&](Tape<double>& t) {
                    return gaussian_log_prob(t.parameter(z), t.parameter(mu), t.parameter(ls)) +
                           standard_normal_log_prob(t.parameter(z));
                  },
                  {&z, &mu, &ls}, 13),
              "log densities");
  auto frames = param("frames", {6, 4, 1, 3}), h0 = param("h0", {4, 1, 3}), hm1 = param("hm1", {4, 1, 3});
  expect_pass(check_op(
                  [&](Tape<double>& t) {
                    return lag_frames(t.parameter(frames), {t.parameter(h0), t.parameter(hm1)}, 3, 2);
                  },
                  {&frames, &h0, &hm1}, 14),
              "lag_frames");
  auto row = param("row", {3, 1, 1, 8});
  expect_pass(check_op([&](Tape<double>& t) { return squeeze_frames(t.parameter(row), 4); }, {&row}, 15), "squeeze");
  expect_pass(check_op(
                  [&](Tape<double>& t) {
                    return reshape(narrow(t.parameter(row), 3, 2, 4), {3, 4});
                  },
                  {&row}, 16),
              "narrow/reshape");
}

TEST_CASE("split and cross partitions invert exactly") {
  Rng rng(9);
  const TensorD x = random_tensor({2, 6, 1, 3}, rng);
  CHECK(max_diff(concat_tensors(split_tensor_first(x), split_tensor_second(x), 1), x) == 0.0);
  CHECK(max_diff(interleave_tensors(cross_even(x), cross_odd(x)), x) == 0.0);
  CHECK(cross_even(x)[0] == x[0]);
  CHECK(cross_odd(x)[0] == x.at(0, 1, 0, 0));
}

TEST_CASE("squeeze layout and inverse") {
  TensorD row({1, 1, 1, 8});
  for (Index i = 0; i < 8; ++i) row[i] = double(i);
  const TensorD sq = squeeze_tensor(row, 4);
  CHECK(sq.shape() == Shape{1, 4, 1, 2});
  for (Index j = 0; j < 4; ++j)
    for (Index m = 0; m < 2; ++m) CHECK(sq.at(0, j, 0, m) == row[m * 4 + j]);
  CHECK(max_diff(unsqueeze_tensor(sq, 4), row) == 0.0);
}

TEST_CASE("log densities match closed forms") {
  Tape<double> tape;
  const TensorD z({1, 1, 1, 2}, {0.5, -1.0});
  const double ln2pi = std::log(2.0 * 3.14159265358979323846);
  const double std_expected = -0.5 * (0.25 + 1.0) - ln2pi;
  CHECK(standard_normal_log_prob(tape.constant(z)).value()[0] == doctest::Approx(std_expected).epsilon(1e-14));
  const TensorD mu({1, 1, 1, 2}, {1.0, 0.0}), ls({1, 1, 1, 2}, {std::log(2.0), 0.0});
  const double g_expected = (-0.5 * 0.0625 - std::log(2.0) - 0.5 * ln2pi) + (-0.5 - 0.5 * ln2pi);
  CHECK(gaussian_log_prob(tape.constant(z), tape.constant(mu), tape.constant(ls)).value()[0] ==
        doctest::Approx(g_expected).epsilon(1e-14));
}
