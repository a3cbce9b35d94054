// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/io.hpp"
#include "nsteer/model.hpp"

namespace nsteer {

namespace {

constexpr const char* kMagic = "NSTEER1\n";
constexpr int kFormatVersion = 1;

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const NeuralSteerer& model, const TrainingSnapshot* training) {
  const SteererConfig& cfg = model.config();
  nlohmann::json h;
  h["format"] = "nsteer-checkpoint";
  h["format_version"] = kFormatVersion;
  h["variant"] = to_string(cfg.variant);
  h["freq_mode"] = to_string(cfg.freq_mode);
  h["layer_sizes"] = model.main_net.layer_sizes;
  h["phase_layer_sizes"] = model.phase_net.layer_sizes;
  h["hidden"] = cfg.hidden;
  h["phase_hidden"] = cfg.phase_hidden;
  h["num_channels"] = model.num_channels();
  h["num_bins"] = model.axis().num_bins();
  h["sample_rate_hz"] = model.axis().sample_rate_hz();
  h["omega0"] = cfg.omega0;
  h["seed"] = cfg.seed;
  h["learn_geometry"] = cfg.learn_geometry;
  h["physical_lr_scale"] = cfg.physical_lr_scale;
  h["detach_magnitude_condition"] = cfg.detach_magnitude_condition;
  h["reference_point"] = model.reference_point();
  h["speed_of_sound"] = model.speed_of_sound();

  std::vector<ArrayBlock> arrays;
  arrays.push_back({"main_net", "f64", model.main_net.values});
  arrays.push_back({"phase_net", "f64", model.phase_net.values});
  arrays.push_back({"tau", "f64", {model.tau}});
  std::vector<double> mics;
  for (const auto& m : model.mic_positions) mics.insert(mics.end(), m.begin(), m.end());
  arrays.push_back({"mic_positions", "f64", mics});

  nlohmann::json t = nullptr;
  if (training) {
    const OptimizerState& o = training->optimizer;
    t = {{"next_epoch", training->next_epoch},
         {"best_epoch", training->best_epoch},
         {"epochs_without_improvement", training->epochs_without_improvement},
         {"stopped_early", training->stopped_early},
         {"step_count", o.step_count},
         {"epoch", o.epoch},
         {"initial_learning_rate", o.initial_learning_rate},
         {"decay_per_epoch", o.decay_per_epoch},
         {"beta1", o.beta1},
         {"beta2", o.beta2},
         {"epsilon", o.epsilon}};
    arrays.push_back({"best_validation", "f64", {training->best_validation}});
    arrays.push_back({"current_params", "f64", to_vector(training->current_params)});
    arrays.push_back({"adam_first_moment", "f64", to_vector(o.first_moment)});
    arrays.push_back({"adam_second_moment", "f64", to_vector(o.second_moment)});
  }
  h["training"] = t;
  write_container(path, kMagic, std::move(h), arrays);
}

Checkpoint load_checkpoint(const std::string& path) {
  const Container c = read_container(path, kMagic);
  const nlohmann::json& h = c.header;
  const std::uint64_t header_pos = 8;
  Checkpoint out;
  try {
    if (h.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("unsupported checkpoint version " + h.at("format_version").dump(), header_pos);
    }
    SteererConfig cfg;
    cfg.variant = parse_variant(h.at("variant").get<std::string>());
    cfg.freq_mode = parse_freq_mode(h.at("freq_mode").get<std::string>());
    cfg.hidden = h.at("hidden").get<std::vector<int>>();
    cfg.phase_hidden = h.at("phase_hidden").get<std::vector<int>>();
    cfg.omega0 = h.at("omega0").get<double>();
    cfg.seed = h.at("seed").get<std::uint64_t>();
    cfg.learn_geometry = h.at("learn_geometry").get<bool>();
    cfg.physical_lr_scale = h.at("physical_lr_scale").get<double>();
    cfg.detach_magnitude_condition = h.at("detach_magnitude_condition").get<bool>();

    const auto channels = h.at("num_channels").get<std::size_t>();
    ArrayGeometry geom;
    geom.mic_positions.assign(channels, Vec3{0.0, 0.0, 0.0});
    geom.reference_point = h.at("reference_point").get<Vec3>();
    geom.speed_of_sound = h.at("speed_of_sound").get<double>();
    const FrequencyAxis axis(h.at("sample_rate_hz").get<double>(), h.at("num_bins").get<int>());
    out.model = NeuralSteerer(cfg, geom, axis);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), header_pos);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), header_pos);
  }

  NeuralSteerer& m = out.model;
  auto expect = [&](const std::string& name, std::size_t count) -> const std::vector<double>& {
    const auto& v = c.array(name);
    if (v.size() != count) {
      throw FormatError("array '" + name + "' has " + std::to_string(v.size()) + " values, header implies " +
                            std::to_string(count),
                        header_pos);
    }
    return v;
  };
  m.main_net.values = expect("main_net", m.main_net.values.size());
  m.phase_net.values = expect("phase_net", m.phase_net.values.size());
  m.tau = expect("tau", 1)[0];
  const auto& mics = expect("mic_positions", 3 * m.mic_positions.size());
  for (std::size_t i = 0; i < m.mic_positions.size(); ++i) {
    m.mic_positions[i] = {mics[3 * i], mics[3 * i + 1], mics[3 * i + 2]};
  }

  if (!h["training"].is_null()) {
    const nlohmann::json& t = h["training"];
    TrainingSnapshot s;
    try {
      s.next_epoch = t.at("next_epoch").get<std::int64_t>();
      s.best_epoch = t.at("best_epoch").get<std::int64_t>();
      s.epochs_without_improvement = t.at("epochs_without_improvement").get<std::int64_t>();
      s.stopped_early = t.at("stopped_early").get<bool>();
      s.optimizer.step_count = t.at("step_count").get<std::int64_t>();
      s.optimizer.epoch = t.at("epoch").get<std::int64_t>();
      s.optimizer.initial_learning_rate = t.at("initial_learning_rate").get<double>();
      s.optimizer.decay_per_epoch = t.at("decay_per_epoch").get<double>();
      s.optimizer.beta1 = t.at("beta1").get<double>();
      s.optimizer.beta2 = t.at("beta2").get<double>();
      s.optimizer.epsilon = t.at("epsilon").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad training section: ") + e.what(), header_pos);
    }
    const std::size_t n = m.num_parameters();
    s.best_validation = expect("best_validation", 1)[0];
    s.current_params = to_eigen(expect("current_params", n));
    s.optimizer.first_moment = to_eigen(expect("adam_first_moment", n));
    s.optimizer.second_moment = to_eigen(expect("adam_second_moment", n));
    out.training = std::move(s);
  }
  return out;
}

}  // namespace nsteer
