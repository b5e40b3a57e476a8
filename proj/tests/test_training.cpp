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

#include "motionflow/checkpoint.hpp"
#include "motionflow/config.hpp"
#include "motionflow/dataset.hpp"
#include "motionflow/optimizer.hpp"
#include "motionflow/training.hpp"
#include "motionflow/verification.hpp"
#include "test_support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace motionflow;
using motionflow::testing::max_diff;
using motionflow::testing::random_tensor;
using motionflow::testing::scratch_dir;

namespace {

struct TinyData {
  TinyData() {
    SimConfig sim;
    sim.particles = 4;
    sim.seed = 3;
    const TrajectoryDataset ds = generate_dataset(sim, SplitCounts{12, 4, 4}, 3, 3);
    scale = ds.manifest.scale;
    train = make_samples(normalize(ds.split(Split::kTrain), scale), 3);
    val = make_samples(normalize(ds.split(Split::kVal), scale), 3);
  }
  SampleSet train, val;
  std::vector<double> scale;
};

TrainConfig tiny_train(Index epochs) {
  TrainConfig t;
  t.batch_size = 4;
  t.max_epochs = epochs;
  t.patience = epochs;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("first Adam step with unit gradients moves by the learning rate") {
  Parameter<double> p("p", TensorD({3}, {1.0, -2.0, 0.5}));
  p.grad().array() = 1.0;
  AdamConfig c;
  c.weight_decay = 0.0;
  Adam<double> adam({&p}, c);
  adam.step();
  const double expected = -c.learning_rate / (1.0 + c.epsilon);
  CHECK(p.value()[0] - 1.0 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(p.value()[1] + 2.0 == doctest::Approx(expected).epsilon(1e-9));
  CHECK(adam.step_count() == 1);
}

TEST_CASE("zero gradient without decay leaves parameters unchanged") {
  Rng rng(1);
  Parameter<double> p("p", random_tensor({4, 2}, rng));
  const TensorD before = p.value();
  AdamConfig c;
  c.weight_decay = 0.0;
  Adam<double> adam({&p}, c);
  for (int i = 0; i < 5; ++i) adam.step();
  CHECK(max_diff(p.value(), before) == 0.0);
}

TEST_CASE("Adam matches a hand-rolled update with decoupled decay") {
  Rng rng(2);
  Parameter<double> p("p", random_tensor({5}, rng));
  AdamConfig c{1e-2, 0.1, 0.8, 0.95, 1e-8};
  Adam<double> adam({&p}, c);
  std::vector<double> w(5), m(5, 0.0), v(5, 0.0);
  for (Index i = 0; i < 5; ++i) w[i] = p.value()[i];
  for (int t = 1; t <= 4; ++t) {
    const TensorD g = random_tensor({5}, rng);
    p.grad() = g;
    adam.step();
    for (Index i = 0; i < 5; ++i) {
      m[i] = c.beta1 * m[i] + (1 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1 - c.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(c.beta1, t)), vh = v[i] / (1 - std::pow(c.beta2, t));
      w[i] = w[i] * (1 - c.learning_rate * c.weight_decay) - c.learning_rate * mh / (std::sqrt(vh) + c.epsilon);
    }
  }
  for (Index i = 0; i < 5; ++i) CHECK(p.value()[i] == doctest::Approx(w[i]).epsilon(1e-12));
}

TEST_CASE("Adam minimizes a quadratic") {
  Parameter<double> w("w", TensorD({1}));
  Adam<double> adam({&w}, AdamConfig{1e-2, 0.0, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 5000; ++i) {
    w.grad()[0] = 2.0 * (w.value()[0] - 5.0);
    adam.step();
  }
  CHECK(std::abs(w.value()[0] - 5.0) < 1e-2);
}

TEST_CASE("frozen parameters are skipped") {
  Parameter<double> p("p", TensorD({2}, {1.0, 2.0}), false);
  p.grad().array() = 3.0;
  Adam<double> adam({&p}, AdamConfig{});
  adam.step();
  CHECK(p.value()[0] == 1.0);
  CHECK(p.value()[1] == 2.0);
}

TEST_CASE("gradient clipping rescales to the global norm") {
  Parameter<double> a("a", TensorD({2})), b("b", TensorD({1}));
  a.grad() = TensorD({2}, {3.0, 0.0});
  b.grad() = TensorD({1}, {4.0});
  ParameterList<double> params{&a, &b};
  CHECK(gradient_norm(params) == doctest::Approx(5.0));
  CHECK(clip_gradient_norm(params, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == 3.0);
  CHECK(clip_gradient_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(gradient_norm(params) == doctest::Approx(1.0));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
  CHECK(clip_gradient_norm(params, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("patience zero stops one epoch after the best") {
  TinyData data;
  {
    MotionFlowModel<double> model(tiny_model_config());
    TrainConfig t = tiny_train(10);
    t.patience = 0;
    // Updates far below rounding leave the validation NLL bit-identical.
    t.adam.learning_rate = 1e-300;
    t.adam.weight_decay = 0.0;
    const TrainResult r = train(model, data.train, data.val, t, data.scale, {});
    CHECK(r.best_epoch == 0);
    CHECK(r.epochs_run == 1);
    CHECK(r.stopped_early);
    CHECK(r.history.size() == 2);
  }
  {
    MotionFlowModel<double> model(tiny_model_config());
    TrainConfig t = tiny_train(40);
    t.patience = 0;
    t.adam.learning_rate = 0.05;
    const TrainResult r = train(model, data.train, data.val, t, data.scale, {});
    if (r.stopped_early) CHECK(r.epochs_run == r.best_epoch + 1);
  }
}

TEST_CASE("metrics record the learning rate of each epoch") {
  TinyData data;
  MotionFlowModel<double> model(tiny_model_config());
  TrainConfig t = tiny_train(2);
  t.adam.learning_rate = 2e-3;
  const TrainResult r = train(model, data.train, data.val, t, data.scale, {});
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[1].learning_rate == 2e-3);
  CHECK(r.history[2].learning_rate == 2e-3);
}

TEST_CASE("training improves validation NLL and keeps the best parameters") {
  TinyData data;
  MotionFlowModel<double> model(tiny_model_config());
  TrainConfig t = tiny_train(6);
  t.adam.learning_rate = 1e-3;
  const TrainResult r = train(model, data.train, data.val, t, data.scale, {});
  REQUIRE(r.history.size() == 7);
  CHECK(r.history[0].epoch == 0);
  CHECK(r.best_val_nll < r.initial_val_nll);
  CHECK(evaluate_nll(model, data.val, 4) == doctest::Approx(r.best_val_nll).epsilon(1e-12));
}

TEST_CASE("64-bit training is deterministic") {
  TinyData data;
  std::string logs[2];
  const std::string dir = scratch_dir("determinism");
  for (int run = 0; run < 2; ++run) {
    MotionFlowModel<double> model(tiny_model_config());
    std::ostringstream log;
    TrainOutputs out;
    out.metrics_log = &log;
    out.checkpoint_path = dir + "/run" + std::to_string(run) + ".mfck";
    train(model, data.train, data.val, tiny_train(3), data.scale, out);
    logs[run] = log.str();
  }
  CHECK(logs[0] == logs[1]);
  CHECK(std::count(logs[0].begin(), logs[0].end(), '\n') == 4);
  std::ifstream a(dir + "/run0.mfck", std::ios::binary), b(dir + "/run1.mfck", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  CHECK(ba == bb);
}

TEST_CASE("metrics lines are JSON objects") {
  EpochMetrics m;
  m.epoch = 3;
  m.train_nll = -0.5;
  m.val_nll = -0.25;
  m.improved = true;
  const Json j = Json::parse(metrics_line(m));
  CHECK(j.at("epoch") == 3);
  CHECK(j.at("val_nll").get<double>() == -0.25);
  CHECK(j.contains("lr"));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  MotionFlowModel<double> model(tiny_model_config());
  Rng rng(7);
  randomize_parameters(model.parameters(), rng, 0.5);
  for (auto* p : model.parameters()) p->grad().array() = 0.1;
  Adam<double> adam(model.parameters(), AdamConfig{});
  adam.step();

  Checkpoint ck;
  ck.model = tiny_model_config();
  ck.epoch = 4;
  ck.best_epoch = 3;
  ck.val_history = {1.0, 0.5, -0.25};
  ck.feature_scale = {1.5, 2.0, 0.1, 1e-8};
  capture_state(model, &adam, ck);
  const std::string path = scratch_dir("checkpoint") + "/a.mfck";
  save_checkpoint(ck, path);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "MFCKPT01");

  const Checkpoint back = load_checkpoint(path);
  CHECK(back.epoch == 4);
  CHECK(back.best_epoch == 3);
  CHECK(back.optimizer_steps == 1);
  CHECK(back.val_history == ck.val_history);
  CHECK(back.feature_scale == ck.feature_scale);
  CHECK(back.model.flow_steps == ck.model.flow_steps);

  MotionFlowModel<double> restored(tiny_model_config());
  Adam<double> adam2(restored.parameters(), AdamConfig{});
  restore_state(back, restored, &adam2);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    CHECK(max_diff(model.parameters()[i]->value(), restored.parameters()[i]->value()) == 0.0);
    CHECK(max_diff(adam.first_moments()[i], adam2.first_moments()[i]) == 0.0);
    CHECK(max_diff(adam.second_moments()[i], adam2.second_moments()[i]) == 0.0);
  }
  CHECK(adam2.step_count() == 1);
}

TEST_CASE("checkpoint loading rejects corrupt files and mismatched models") {
  const std::string dir = scratch_dir("checkpoint_bad");
  {
    std::ofstream out(dir + "/bad.mfck", std::ios::binary);
    out << "NOTACKPT";
  }
  CHECK_THROWS(load_checkpoint(dir + "/bad.mfck"));
  CHECK_THROWS(load_checkpoint(dir + "/missing.mfck"));

  MotionFlowModel<double> model(tiny_model_config());
  Checkpoint ck;
  ck.model = tiny_model_config();
  capture_state(model, static_cast<Adam<double>*>(nullptr), ck);
  ModelConfig other = tiny_model_config();
  other.use_residual_net = false;
  MotionFlowModel<double> different(other);
  CHECK_THROWS(restore_state(ck, different, static_cast<Adam<double>*>(nullptr)));
}
