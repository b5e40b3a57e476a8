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

#include "motionflow/verification.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <sstream>

namespace motionflow {

namespace {

std::string format(const char* fmt, double a, double b = 0.0) {
  char buffer[160];
  std::snprintf(buffer, sizeof(buffer), fmt, a, b);
  return buffer;
}

ModelConfig oracle_config(Index width, Index flow_steps, std::uint64_t seed) {
  ModelConfig c = tiny_model_config();
  c.entities = width;  // four features per entity, so N_f == entities
  c.flow_steps = flow_steps;
  c.seed = seed;
  return c;
}

template <typename Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shapes differ");
  return double((a.array() - b.array()).abs().maxCoeff());
}

}  // namespace

ModelConfig tiny_model_config() {
  ModelConfig c;
  c.input_steps = 3;
  c.output_steps = 3;
  c.entities = 4;
  c.features = 4;
  c.flow_steps = 2;
  return c;
}

template <typename Scalar>
void randomize_parameters(const ParameterList<Scalar>& params, Rng& rng, double scale) {
  for (auto* p : params) {
    Tensor<Scalar>& v = p->value();
    const Index fan = v.rank() >= 2 ? std::max<Index>(1, v.size() / v.dim(0)) : 1;
    const double std_dev = scale / std::sqrt(double(fan));
    for (Index i = 0; i < v.size(); ++i) v[i] = Scalar(std_dev * rng.normal());
  }
}

template <typename Scalar>
Tensor<Scalar> random_rows(Index batch, Index steps, Index width, Rng& rng, double scale) {
  Tensor<Scalar> t({batch, steps, width});
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(scale * (2.0 * rng.uniform() - 1.0));
  return t;
}

namespace {

// Random flows amplify rounding roughly by their condition number, so the
// round-trip draws use a moderate parameter scale (|z| stays within a few
// units for K = 8).
constexpr double kRoundTripScale = 0.05;

template <typename Scalar>
double roundtrip_error(Index trials, std::uint64_t seed, double* latent_max) {
  const Index widths[2] = {2, 4};
  const Index steps[3] = {1, 2, 8};
  double worst = 0.0;
  for (Index i = 0; i < trials; ++i) {
    const ModelConfig c = oracle_config(widths[i % 2], steps[(i / 2) % 3], seed + std::uint64_t(i));
    MotionFlowModel<Scalar> model(c);
    Rng rng = Rng::derive(seed, std::uint64_t(i));
    randomize_parameters(model.parameters(), rng, kRoundTripScale);
    const Tensor<Scalar> x = random_rows<Scalar>(1, c.input_steps, c.frame_width(), rng);
    const Tensor<Scalar> y = random_rows<Scalar>(1, c.output_steps, c.frame_width(), rng);
    const Tensor<Scalar> z = model.encode(x, y);
    const Tensor<Scalar> back = model.decode(x, z);
    *latent_max = std::max(*latent_max, double(z.array().abs().maxCoeff()));
    worst = std::max(worst, max_abs_diff(back, y));
  }
  return worst;
}

}  // namespace

SuiteResult bijectivity_suite(bool single_precision, Index trials, std::uint64_t seed) {
  SuiteResult r;
  r.name = single_precision ? "bijectivity (32-bit)" : "bijectivity (64-bit)";
  r.threshold = single_precision ? 1e-6 : 1e-10;
  double latent_max = 0.0;
  r.value = single_precision ? roundtrip_error<float>(trials, seed, &latent_max)
                             : roundtrip_error<double>(trials, seed, &latent_max);
  r.passed = r.value < r.threshold;
  r.detail = std::to_string(trials) + " inputs, N_f in {2,4}, K in {1,2,8}, parameter scale " +
             format("%.2f", kRoundTripScale) + "; max abs error " + format("%.3e", r.value) + ", max |z| " +
             format("%.2f", latent_max);
  return r;
}

SuiteResult logdet_suite(Index draws, std::uint64_t seed) {
  SuiteResult r;
  r.name = "log-determinant vs finite-difference Jacobian";
  r.threshold = 1e-3;
  const double h = 1e-5;
  for (Index i = 0; i < draws; ++i) {
    const ModelConfig c = oracle_config(i % 2 == 0 ? 2 : 4, 1 + (i / 2) % 2, seed + std::uint64_t(i));
    MotionFlowModel<double> model(c);
    Rng rng = Rng::derive(seed, 1000 + std::uint64_t(i));
    randomize_parameters(model.parameters(), rng, 0.5);
    const Tensor<double> x = random_rows<double>(1, c.input_steps, c.frame_width(), rng);
    const Index f = c.frame_width();
    Tensor<double> frame = random_rows<double>(1, 1, f, rng).reshaped({1, 1, 1, f});

    Tape<double> tape(false);
    const ConditioningBundle<double> bundle = model.condition(tape, x);
    auto run = [&](const Tensor<double>& in) { return model.flow().forward(tape, tape.constant(in), bundle, 1); };
    const double logdet = run(frame).logdet.value()[0];
    Eigen::MatrixXd jacobian(f, f);
    for (Index j = 0; j < f; ++j) {
      Tensor<double> plus = frame, minus = frame;
      plus[j] += h;
      minus[j] -= h;
      const Tensor<double> zp = run(plus).value.value(), zm = run(minus).value.value();
      for (Index k = 0; k < f; ++k) jacobian(k, j) = (zp[k] - zm[k]) / (2 * h);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(jacobian);
    const double reference = lu.matrixLU().diagonal().array().abs().log().sum();
    const double rel = std::abs(logdet - reference) / std::max(std::abs(reference), 1e-6);
    if (!(rel <= r.value)) r.value = std::isfinite(rel) ? std::max(r.value, rel) : INFINITY;
  }
  r.passed = r.value < r.threshold;
  r.detail = std::to_string(draws) + " parameter draws, frame dims 8 and 16, K in {1,2}; worst relative error " +
             format("%.3e", r.value);
  return r;
}

SuiteResult autoregressivity_suite(Index max_grid, std::uint64_t seed) {
  SuiteResult r;
  r.name = "autoregressive masking";
  r.threshold = 0.0;
  Index allowed_hits = 0, grids_without_influence = 0;
  for (Index steps = 1; steps <= max_grid; ++steps)
    for (Index width = 1; width <= max_grid; ++width) {
      ModelConfig c = oracle_config(width, 1, seed);
      c.input_steps = steps;
      Rng rng = Rng::derive(seed, std::uint64_t(steps * 100 + width));
      Conditioner<double> conditioner(c, rng);
      ParameterList<double> params;
      conditioner.collect(params);
      randomize_parameters(params, rng, 1.0);
      Tensor<double> x({1, c.input_channels(), steps, width});
      for (Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
      const Index channels = 2 * c.input_channels();
      for (int which = 1; which <= 2; ++which) {
        const Ordering ordering = generate_ordering(
            which == 1 ? OrderingKind::kTimeMajorSCurve : OrderingKind::kEntityMajorSCurve, steps, width);
        auto evaluate = [&](const Tensor<double>& in) {
          Tape<double> tape(false);
          return conditioner.arn_forward(tape, tape.constant(in), which).value();
        };
        const Tensor<double> base = evaluate(x);
        Index hits = 0;
        for (Index jt = 0; jt < steps; ++jt)
          for (Index jn = 0; jn < width; ++jn) {
            Tensor<double> perturbed = x;
            for (Index ch = 0; ch < c.input_channels(); ++ch) perturbed.at(0, ch, jt, jn) += 1.0;
            const Tensor<double> out = evaluate(perturbed);
            for (Index it = 0; it < steps; ++it)
              for (Index in = 0; in < width; ++in) {
                double diff = 0.0;
                for (Index ch = 0; ch < channels; ++ch) {
                  diff = std::max(diff, std::abs(out.at(0, ch, it, in) - base.at(0, ch, it, in)));
                }
                if (ordering.rank(jt, jn) >= ordering.rank(it, in)) {
                  r.value = std::max(r.value, diff);
                } else if (diff > 0) {
                  ++hits;
                }
              }
          }
        allowed_hits += hits;
        if (steps * width > 1 && hits == 0) ++grids_without_influence;
      }
    }
  r.passed = r.value == 0.0 && grids_without_influence == 0;
  r.detail = "grids up to " + std::to_string(max_grid) + "x" + std::to_string(max_grid) +
             ", both orderings; max forbidden influence " + format("%.3e", r.value) + ", allowed influences seen " +
             std::to_string(allowed_hits) + ", grids lacking any influence " +
             std::to_string(grids_without_influence);
  return r;
}

SuiteResult gradient_suite(std::size_t coordinates, std::uint64_t seed) {
  SuiteResult r;
  r.name = "NLL gradient vs central differences";
  r.threshold = 1e-3;
  ModelConfig c = tiny_model_config();
  c.seed = seed;
  MotionFlowModel<double> model(c);
  Rng rng = Rng::derive(seed, 7);
  randomize_parameters(model.parameters(), rng, 0.5);
  const Tensor<double> x = random_rows<double>(2, c.input_steps, c.frame_width(), rng);
  const Tensor<double> y = random_rows<double>(2, c.output_steps, c.frame_width(), rng);
  GradientCheckOptions options;
  options.max_coordinates = coordinates;
  options.seed = seed;
  options.tolerance = r.threshold;
  const GradientCheckReport report =
      gradient_check([&](Tape<double>& tape) { return model.nll(tape, x, y); }, model.parameters(), options);
  r.value = report.max_relative_error;
  r.passed = report.passed && report.coordinates_checked >= coordinates;
  r.detail = report.summary();
  return r;
}

template <typename Scalar>
SuiteResult initialization_suite(const ModelConfig& config, const Tensor<double>& x, const Tensor<double>& y) {
  SuiteResult r;
  r.name = std::is_same_v<Scalar, float> ? "initialization identity (32-bit)" : "initialization identity (64-bit)";
  r.threshold = 1e-6;
  MotionFlowModel<Scalar> model(config);
  const double nll = double(model.nll_value(x.template cast<Scalar>(), y.template cast<Scalar>()));
  const double closed = 0.5 * y.array().square().mean() + 0.5 * std::log(2.0 * std::numbers::pi);
  r.value = std::abs(nll - closed);
  r.passed = r.value < r.threshold;
  r.detail = format("model NLL %.10f, closed form %.10f", nll, closed);
  return r;
}

SuiteResult component_roundtrip_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "component round trips";
  r.threshold = 1e-10;
  const ModelConfig c = tiny_model_config();
  MotionFlowModel<double> model(c);
  Rng rng = Rng::derive(seed, 11);
  randomize_parameters(model.parameters(), rng, 0.5);
  const Tensor<double> x = random_rows<double>(2, c.input_steps, c.frame_width(), rng);
  const Index group = c.output_steps;
  Tape<double> tape(false);
  const ConditioningBundle<double> bundle = model.condition(tape, x);
  Tensor<double> latent({2 * group, c.latent_channels(), 1, c.latent_width()});
  for (Index i = 0; i < latent.size(); ++i) latent[i] = rng.normal();
  const Var<double> v = tape.constant(latent);

  const Tensor<double> frames = random_rows<double>(2 * group, 1, c.frame_width(), rng).reshaped(
      {2 * group, 1, 1, c.frame_width()});
  const double squeeze_err =
      max_abs_diff(unsqueeze_tensor(squeeze_tensor(frames, kSqueezeFactor), kSqueezeFactor), frames);
  double worst = squeeze_err;
  std::ostringstream detail;
  detail << "squeeze " << squeeze_err;
  for (Index k = 0; k < c.flow_steps; ++k) {
    const StepConditioning<double>& p = bundle.steps[std::size_t(k)];
    const auto a = actnorm(actnorm(v, p.actnorm, group, Direction::kForward).value, p.actnorm, group,
                           Direction::kInverse);
    const auto m = inv_mixing(inv_mixing(v, p.mixing, group, Direction::kForward).value, p.mixing, group,
                              Direction::kInverse);
    const auto cf = model.flow().coupling(tape, v, p.context, k, group, Direction::kForward);
    const auto cb = model.flow().coupling(tape, cf.value, p.context, k, group, Direction::kInverse);
    const double ea = max_abs_diff(a.value.value(), latent), em = max_abs_diff(m.value.value(), latent),
                 ec = max_abs_diff(cb.value.value(), latent);
    const double ld = std::abs(cf.logdet.value()[0] + cb.logdet.value()[0]);
    worst = std::max({worst, ea, em, ec, ld});
    detail << "; step " << k << " actnorm " << ea << " mixing " << em << " coupling " << ec;
  }
  r.value = worst;
  r.passed = worst < r.threshold;
  r.detail = detail.str();
  return r;
}

std::vector<SuiteResult> run_oracle_suites(std::uint64_t seed) {
  std::vector<SuiteResult> results;
  results.push_back(component_roundtrip_suite(seed));
  results.push_back(bijectivity_suite(true, 100, seed));
  results.push_back(bijectivity_suite(false, 100, seed));
  results.push_back(logdet_suite(20, seed));
  results.push_back(autoregressivity_suite(5, seed));
  results.push_back(gradient_suite(200, seed));
  const ModelConfig c = tiny_model_config();
  Rng rng = Rng::derive(seed, 13);
  const Tensor<double> x = random_rows<double>(4, c.input_steps, c.frame_width(), rng);
  const Tensor<double> y = random_rows<double>(4, c.output_steps, c.frame_width(), rng);
  results.push_back(initialization_suite<double>(c, x, y));
  return results;
}

#define MOTIONFLOW_INSTANTIATE(S)                                                                       \
  template void randomize_parameters(const ParameterList<S>&, Rng&, double);                           \
  template Tensor<S> random_rows(Index, Index, Index, Rng&, double);                                   \
  template SuiteResult initialization_suite<S>(const ModelConfig&, const Tensor<double>&, const Tensor<double>&);

MOTIONFLOW_INSTANTIATE(float)
MOTIONFLOW_INSTANTIATE(double)
#undef MOTIONFLOW_INSTANTIATE

}  // namespace motionflow
