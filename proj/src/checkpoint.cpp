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

#include "motionflow/checkpoint.hpp"

#include "motionflow/config.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace motionflow {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

Json describe(const std::vector<TensorRecord>& records) {
  Json list = Json::array();
  for (const auto& r : records) list.push_back(Json{{"name", r.name}, {"shape", r.shape}});
  return list;
}

std::vector<TensorRecord> parse_records(const Json& list, const char* what) {
  if (!list.is_array()) throw std::runtime_error(std::string("checkpoint: ") + what + " must be a list");
  std::vector<TensorRecord> out;
  for (const auto& item : list) {
    TensorRecord r{item.at("name").get<std::string>(), item.at("shape").get<Shape>(), {}};
    r.values.resize(std::size_t(shape_size(r.shape)));
    out.push_back(std::move(r));
  }
  return out;
}

template <typename Scalar>
TensorRecord record_of(const std::string& name, const Tensor<Scalar>& t) {
  TensorRecord r{name, t.shape(), std::vector<double>(std::size_t(t.size()))};
  for (Index i = 0; i < t.size(); ++i) r.values[std::size_t(i)] = double(t[i]);
  return r;
}

template <typename Scalar>
void assign(const TensorRecord& r, Tensor<Scalar>& t) {
  if (r.shape != t.shape()) {
    throw std::runtime_error("checkpoint: tensor " + r.name + " has shape " + to_string(r.shape) + ", expected " +
                             to_string(t.shape()));
  }
  for (Index i = 0; i < t.size(); ++i) t[i] = Scalar(r.values[std::size_t(i)]);
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  Json manifest{{"format", "motionflow-checkpoint"},
                {"version", 1},
                {"model", c.model},
                {"precision", c.precision},
                {"epoch", c.epoch},
                {"best_epoch", c.best_epoch},
                {"optimizer_steps", c.optimizer_steps},
                {"val_history", c.val_history},
                {"feature_scale", c.feature_scale},
                {"parameters", describe(c.parameters)},
                {"first_moments", describe(c.first_moments)},
                {"second_moments", describe(c.second_moments)}};
  const std::string text = manifest.dump();
  std::string bytes(kCheckpointMagic, 8);
  put_u64(bytes, text.size());
  bytes += text;
  for (const auto* group : {&c.parameters, &c.first_moments, &c.second_moments})
    for (const auto& r : *group)
      for (double v : r.values) put_u64(bytes, std::bit_cast<std::uint64_t>(v));

  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("cannot move checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || bytes.compare(0, 8, kCheckpointMagic) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t length = get_u64(raw + 8);
  if (16 + length > bytes.size()) throw std::runtime_error(path + ": truncated manifest");
  Json manifest;
  try {
    manifest = Json::parse(bytes.substr(16, length));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad manifest: " + e.what());
  }
  if (manifest.value("format", "") != "motionflow-checkpoint" || manifest.value("version", 0) != 1) {
    throw std::runtime_error(path + ": unsupported checkpoint format");
  }
  Checkpoint c;
  from_json(manifest.at("model"), c.model);
  c.precision = manifest.at("precision").get<std::string>();
  c.epoch = manifest.at("epoch").get<std::int64_t>();
  c.best_epoch = manifest.at("best_epoch").get<std::int64_t>();
  c.optimizer_steps = manifest.at("optimizer_steps").get<std::uint64_t>();
  c.val_history = manifest.at("val_history").get<std::vector<double>>();
  c.feature_scale = manifest.at("feature_scale").get<std::vector<double>>();
  c.parameters = parse_records(manifest.at("parameters"), "parameters");
  c.first_moments = parse_records(manifest.at("first_moments"), "first_moments");
  c.second_moments = parse_records(manifest.at("second_moments"), "second_moments");

  std::size_t offset = 16 + length;
  for (auto* group : {&c.parameters, &c.first_moments, &c.second_moments})
    for (auto& r : *group)
      for (double& v : r.values) {
        if (offset + 8 > bytes.size()) throw std::runtime_error(path + ": truncated payload");
        v = std::bit_cast<double>(get_u64(raw + offset));
        offset += 8;
      }
  if (offset != bytes.size()) throw std::runtime_error(path + ": trailing bytes after payload");
  return c;
}

template <typename Scalar>
void capture_state(const MotionFlowModel<Scalar>& model, const Adam<Scalar>* optimizer, Checkpoint& out) {
  out.model = model.config();
  out.precision = std::is_same_v<Scalar, float> ? "f32" : "f64";
  out.parameters.clear();
  out.first_moments.clear();
  out.second_moments.clear();
  const auto& params = model.parameters();
  for (const auto* p : params) out.parameters.push_back(record_of(p->name(), p->value()));
  if (optimizer != nullptr) {
    const Adam<Scalar>& opt = *optimizer;
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.first_moments.push_back(record_of(params[i]->name(), opt.first_moments()[i]));
      out.second_moments.push_back(record_of(params[i]->name(), opt.second_moments()[i]));
    }
    out.optimizer_steps = opt.step_count();
  }
}

template <typename Scalar>
void restore_state(const Checkpoint& c, MotionFlowModel<Scalar>& model, Adam<Scalar>* optimizer) {
  const auto& params = model.parameters();
  if (c.parameters.size() != params.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(c.parameters.size()) + " tensors, model has " +
                             std::to_string(params.size()));
  }
  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& r : c.parameters) by_name[r.name] = &r;
  for (auto* p : params) {
    auto it = by_name.find(p->name());
    if (it == by_name.end()) throw std::runtime_error("checkpoint is missing parameter " + p->name());
    assign(*it->second, p->value());
  }
  if (optimizer != nullptr && !c.first_moments.empty()) {
    if (c.first_moments.size() != params.size() || c.second_moments.size() != params.size()) {
      throw std::runtime_error("checkpoint optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (c.first_moments[i].name != params[i]->name()) throw std::runtime_error("checkpoint optimizer order mismatch");
      assign(c.first_moments[i], optimizer->first_moments()[i]);
      assign(c.second_moments[i], optimizer->second_moments()[i]);
    }
    optimizer->set_step_count(c.optimizer_steps);
  }
}

template void capture_state(const MotionFlowModel<float>&, const Adam<float>*, Checkpoint&);
template void capture_state(const MotionFlowModel<double>&, const Adam<double>*, Checkpoint&);
template void restore_state(const Checkpoint&, MotionFlowModel<float>&, Adam<float>*);
template void restore_state(const Checkpoint&, MotionFlowModel<double>&, Adam<double>*);

}  // namespace motionflow
