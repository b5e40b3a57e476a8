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

#include "motionflow/prior.hpp"
#include "motionflow/verification.hpp"
#include "test_support.hpp"

#include <cmath>
#include <numbers>

using namespace motionflow;
using motionflow::testing::max_diff;
using motionflow::testing::random_tensor;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Elementwise reference loop.
double reference_log_prob(const TensorD& z, const TensorD& mu, const TensorD& log_sigma) {
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double s = std::exp(log_sigma[i]), d = (z[i] - mu[i]) / s;
    total += -0.5 * d * d - log_sigma[i] - kHalfLog2Pi;
  }
  return total;
}

struct PriorFixture {
  explicit PriorFixture(ModelConfig c = tiny_model_config(), double scale = 0.5) : config(c), prior(c, rng) {
    prior.collect(params);
    Rng r(21);
    if (scale > 0) randomize_parameters(params, r, scale);
  }
  ModelConfig config;
  Rng rng{20};
  Prior<double> prior;
  ParameterList<double> params;
};

// Item (b, t) of [B * steps, ...] tensors.
TensorD item(const TensorD& t, Index i) {
  TensorD out({1, t.dim(1), t.dim(2), t.dim(3)});
  const Index n = out.size();
  out.array() = t.array().segment(i * n, n);
  return out;
}

}  // namespace

TEST_CASE("fresh prior is standard normal at every step") {
  PriorFixture f(tiny_model_config(), 0.0);
  Rng rng(1);
  Tape<double> tape;
  const auto h2 = tape.constant(random_tensor({2, 4, 1, 4}, rng)), h1 = tape.constant(random_tensor({2, 4, 1, 4}, rng));
  const auto p = f.prior.step_params(tape, h2, h1);
  CHECK(p.mu.shape() == Shape{2, 4, 1, 4});
  CHECK(p.mu.value().array().isZero());
  CHECK(p.log_sigma.value().array().isZero());

  const auto first = f.prior.step_params(tape, f.prior.initial_context(tape, 1, 2), f.prior.initial_context(tape, 0, 2));
  CHECK(first.mu.value().array().isZero());
  CHECK(first.log_sigma.value().array().isZero());
}

TEST_CASE("with the skip convolution at identity the mean is the previous latent") {
  PriorFixture f(tiny_model_config(), 0.0);
  ParameterList<double> params;
  f.prior.collect(params);
  for (auto* p : params)
    if (p->name() == "prior.conv1.weight")
      for (Index c = 0; c < 4; ++c) p->value()[c * 4 + c] = 1.0;
  Rng rng(2);
  Tape<double> tape;
  const TensorD prev = random_tensor({3, 4, 1, 4}, rng);
  const auto p = f.prior.step_params(tape, tape.constant(random_tensor({3, 4, 1, 4}, rng)), tape.constant(prev));
  CHECK(max_diff(p.mu.value(), prev) == 0.0);
  CHECK(p.log_sigma.value().array().isZero());
}

TEST_CASE("random prior outputs have latent shapes and bounded log sigma") {
  PriorFixture f(tiny_model_config(), 5.0);
  Rng rng(3);
  Tape<double> tape;
  const auto p = f.prior.step_params(tape, tape.constant(random_tensor({2, 4, 1, 4}, rng, 5.0)),
                                     tape.constant(random_tensor({2, 4, 1, 4}, rng, 5.0)));
  CHECK(p.mu.shape() == Shape{2, 4, 1, 4});
  CHECK(p.log_sigma.shape() == Shape{2, 4, 1, 4});
  CHECK(p.log_sigma.value().array().abs().maxCoeff() <= 7.0);
  CHECK_THROWS_AS(f.prior.step_params(tape, tape.constant(TensorD({2, 4, 1, 3})), tape.constant(TensorD({2, 4, 1, 4}))),
                  ShapeError);
}

TEST_CASE("gaussian_log_prob closed forms and loop oracle") {
  const TensorD mu({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6});
  const TensorD one = TensorD::constant({2, 3}, 1.0);
  CHECK(gaussian_log_prob(mu, mu, one) == doctest::Approx(-3.0 * std::log(2.0 * std::numbers::pi)));
  CHECK(gaussian_log_prob(TensorD({1}, {1.0}), TensorD({1}), TensorD({1}, {1.0})) ==
        doctest::Approx(-1.41894).epsilon(1e-5));

  Rng rng(4);
  const TensorD z = random_tensor({3, 4, 1, 2}, rng), m = random_tensor({3, 4, 1, 2}, rng),
                ls = random_tensor({3, 4, 1, 2}, rng, 0.5);
  TensorD sigma(ls.shape(), ls.array().exp());
  CHECK(gaussian_log_prob(z, m, sigma) == doctest::Approx(reference_log_prob(z, m, ls)).epsilon(1e-10));
  Tape<double> tape;
  CHECK(gaussian_log_prob(tape.constant(z), tape.constant(m), tape.constant(ls)).value()[0] ==
        doctest::Approx(reference_log_prob(z, m, ls)).epsilon(1e-10));

  sigma[3] = 0.0;
  CHECK_THROWS_AS(gaussian_log_prob(z, m, sigma), NumericError);
}

TEST_CASE("sample_latent determinism and statistics") {
  Rng rng(5);
  const TensorD mu = random_tensor({1, 4, 1, 2}, rng);
  TensorD sigma({1, 4, 1, 2});
  for (Index i = 0; i < sigma.size(); ++i) sigma[i] = 0.5 + 0.25 * double(i);
  CHECK(max_diff(sample_latent(mu, sigma, 0.0, std::uint64_t(9)), mu) == 0.0);
  CHECK(max_diff(sample_latent(mu, sigma, 0.7, std::uint64_t(9)), sample_latent(mu, sigma, 0.7, std::uint64_t(9))) ==
        0.0);
  CHECK(max_diff(sample_latent(mu, sigma, 0.7, std::uint64_t(9)), sample_latent(mu, sigma, 0.7, std::uint64_t(10))) >
        0.0);
  CHECK_THROWS(sample_latent(mu, sigma, -0.1, std::uint64_t(1)));

  const double tau = 0.7;
  Rng draws(6);
  TensorD mean(mu.shape());
  const int n = 10000;
  for (int i = 0; i < n; ++i) mean.array() += sample_latent(mu, sigma, tau, draws).array() / double(n);
  for (Index i = 0; i < mu.size(); ++i) CHECK(std::abs(mean[i] - mu[i]) <= 3.0 * sigma[i] * tau / 100.0);
}

TEST_CASE("teacher-forced parameters match step-by-step evaluation") {
  for (bool residual : {true, false}) {
    ModelConfig c = tiny_model_config();
    c.use_residual_net = residual;
    PriorFixture f(c, 0.5);
    Rng rng(7);
    const Index steps = 3, batch = 2;
    const TensorD latents = random_tensor({batch * steps, 4, 1, 4}, rng);
    Tape<double> tape;
    const auto seq = f.prior.sequence_params(tape, tape.constant(latents), steps);
    for (Index b = 0; b < batch; ++b) {
      Var<double> h2 = f.prior.initial_context(tape, 1, 1), h1 = f.prior.initial_context(tape, 0, 1);
      for (Index t = 0; t < steps; ++t) {
        const auto p = f.prior.step_params(tape, h2, h1);
        CHECK(max_diff(p.mu.value(), item(seq.mu.value(), b * steps + t)) < 1e-12);
        CHECK(max_diff(p.log_sigma.value(), item(seq.log_sigma.value(), b * steps + t)) < 1e-12);
        h2 = h1;
        h1 = tape.constant(item(latents, b * steps + t));
      }
    }
    const double lp = f.prior.log_prob(tape, tape.constant(latents), steps).value()[0];
    CHECK(lp == doctest::Approx(reference_log_prob(latents, seq.mu.value(), seq.log_sigma.value())).epsilon(1e-10));
  }
}

TEST_CASE("step t parameters ignore latents at t and later") {
  PriorFixture f(tiny_model_config(), 1.0);
  Rng rng(8);
  const Index steps = 4;
  const TensorD latents = random_tensor({steps, 4, 1, 4}, rng);
  Tape<double> tape(false);
  const auto base = f.prior.sequence_params(tape, tape.constant(latents), steps);
  for (Index s = 0; s < steps; ++s) {
    TensorD changed = latents;
    for (Index i = 0; i < 16; ++i) changed[s * 16 + i] += 0.5;
    const auto p = f.prior.sequence_params(tape, tape.constant(changed), steps);
    for (Index t = 0; t < steps; ++t) {
      const double d = std::max(max_diff(item(p.mu.value(), t), item(base.mu.value(), t)),
                                max_diff(item(p.log_sigma.value(), t), item(base.log_sigma.value(), t)));
      if (t <= s) {
        CHECK(d == 0.0);
      } else if (t == s + 1) {
        CHECK(d > 0.0);
      }
    }
  }
}

TEST_CASE("static prior is standard normal") {
  ModelConfig c = tiny_model_config();
  c.use_dynamic_prior = false;
  c.use_residual_net = false;
  PriorFixture f(c, 0.0);
  CHECK(f.params.empty());
  Rng rng(9);
  const TensorD latents = random_tensor({6, 4, 1, 4}, rng);
  Tape<double> tape;
  CHECK(f.prior.log_prob(tape, tape.constant(latents), 3).value()[0] ==
        doctest::Approx(reference_log_prob(latents, TensorD(latents.shape()), TensorD(latents.shape()))));
  CHECK_THROWS_AS(f.prior.log_prob(tape, tape.constant(latents), 4), ShapeError);
}

TEST_CASE("prior log_prob passes gradient_check") {
  PriorFixture f(tiny_model_config(), 0.5);
  Rng rng(10);
  const TensorD latents = random_tensor({6, 4, 1, 4}, rng);
  GradientCheckOptions options;
  options.max_coordinates = 300;
  const auto report =
      gradient_check([&](Tape<double>& t) { return f.prior.log_prob(t, t.constant(latents), 3); }, f.params, options);
  INFO(report.summary());
  CHECK(report.passed);
}

TEST_CASE("observed latents shift the initial contexts per sequence") {
  PriorFixture f(tiny_model_config(), 0.5);
  Rng rng(11);
  const Index steps = 3, batch = 2;
  const TensorD latents = random_tensor({batch * steps, 4, 1, 4}, rng);
  Parameter<double> last("observed.last", random_tensor({batch, 4, 1, 4}, rng));
  Parameter<double> before("observed.before", random_tensor({batch, 4, 1, 4}, rng));
  Tape<double> tape;
  const std::vector<Var<double>> observed{tape.parameter(last), tape.parameter(before)};
  const auto seq = f.prior.sequence_params(tape, tape.constant(latents), steps, observed);
  for (Index b = 0; b < batch; ++b) {
    Var<double> h2 = f.prior.initial_context(tape, 1, 1) + tape.constant(item(before.value(), b));
    Var<double> h1 = f.prior.initial_context(tape, 0, 1) + tape.constant(item(last.value(), b));
    for (Index t = 0; t < steps; ++t) {
      const auto p = f.prior.step_params(tape, h2, h1);
      CHECK(max_diff(p.mu.value(), item(seq.mu.value(), b * steps + t)) < 1e-12);
      CHECK(max_diff(p.log_sigma.value(), item(seq.log_sigma.value(), b * steps + t)) < 1e-12);
      h2 = h1;
      h1 = tape.constant(item(latents, b * steps + t));
    }
  }
  CHECK(max_diff(seq.mu.value(), f.prior.sequence_params(tape, tape.constant(latents), steps).mu.value()) > 0.0);
  CHECK_THROWS_AS(f.prior.log_prob(tape, tape.constant(latents), steps, {observed[0]}), ShapeError);

  std::vector<Parameter<double>*> params(f.params.begin(), f.params.end());
  params.push_back(&last);
  params.push_back(&before);
  GradientCheckOptions options;
  options.max_coordinates = 300;
  const auto report = gradient_check(
      [&](Tape<double>& t) {
        return f.prior.log_prob(t, t.constant(latents), steps, {t.parameter(last), t.parameter(before)});
      },
      params, options);
  INFO(report.summary());
  CHECK(report.passed);
}
