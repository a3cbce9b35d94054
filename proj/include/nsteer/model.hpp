// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsteer/sigproc.hpp"

namespace nsteer {

enum class Variant { Phase, MagThenPhase };
enum class FreqMode { Continuous, Discrete };

std::string to_string(Variant v);
std::string to_string(FreqMode m);
Variant parse_variant(std::string_view s);
FreqMode parse_freq_mode(std::string_view s);

// ---------------------------------------------------------------------------
// SIREN

/// Weights and biases of a sine-activated MLP packed layer by layer: the
/// row-major (out x in) weight matrix followed by the bias vector. Hidden
/// layers compute sin(omega0 (W a + b)); the last layer is linear.
struct SirenParams {
  std::vector<int> layer_sizes;
  double omega0 = 30.0;
  std::vector<double> values;

  std::size_t num_layers() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
};

std::size_t siren_parameter_count(std::span<const int> layer_sizes);

/// First layer uniform in [-1/n_in, 1/n_in], deeper layers uniform in
/// [-sqrt(6/n_in)/omega0, sqrt(6/n_in)/omega0], zero biases.
SirenParams siren_init(std::vector<int> layer_sizes, double omega0, std::uint64_t seed);

struct SirenTrace {
  std::vector<Eigen::MatrixXd> inputs;  // input of every layer, one column per sample
  std::vector<Eigen::MatrixXd> slopes;  // omega0 * cos(omega0 z) of every hidden layer
};

/// Evaluates the network on the columns of `x`.
Eigen::MatrixXd siren_forward(const SirenParams& net, const Eigen::MatrixXd& x, SirenTrace* trace = nullptr);

/// Accumulates dL/dparams into `grad` (same packing as `values`) and returns dL/dx.
Eigen::MatrixXd siren_backward(const SirenParams& net, const SirenTrace& trace, const Eigen::MatrixXd& dy,
                               std::span<double> grad);

// ---------------------------------------------------------------------------
// Output head

/// exp(g1) * exp(-j atan2(g2, g3)). atan2(0, 0) = 0.
cplx head_decode(double g1, double g2, double g3);

// ---------------------------------------------------------------------------
// Neural steerer

struct SteererConfig {
  Variant variant = Variant::MagThenPhase;
  FreqMode freq_mode = FreqMode::Discrete;
  std::vector<int> hidden{64, 64, 64, 64};
  std::vector<int> phase_hidden{64, 64};
  double omega0 = 30.0;
  std::uint64_t seed = 0;
  bool learn_geometry = true;
  /// Learning-rate multiplier applied to tau and the microphone positions.
  double physical_lr_scale = 0.1;
  /// MagThenPhase: the phase net reads the magnitudes as a fixed input, so
  /// the phase terms do not train the magnitude net. False gives the exact
  /// gradient of the loss through both nets.
  bool detach_magnitude_condition = true;
};

/// Continuous complex field (direction, frequency) -> I-channel steering vector.
/// The networks predict the air and per-microphone gains; the global delay and
/// the far-field steering term are computed from the learnable tau and
/// microphone positions.
class NeuralSteerer {
 public:
  NeuralSteerer() = default;
  NeuralSteerer(const SteererConfig& config, const ArrayGeometry& nominal, const FrequencyAxis& axis);

  const SteererConfig& config() const { return config_; }
  const FrequencyAxis& axis() const { return axis_; }
  std::size_t num_channels() const { return mic_positions.size(); }
  std::size_t num_components() const { return mic_positions.size() + 1; }
  const Vec3& reference_point() const { return reference_point_; }
  double speed_of_sound() const { return speed_of_sound_; }
  /// Current (learned) geometry.
  ArrayGeometry geometry() const;

  /// Width of the main network's output layer.
  int main_output_width() const;
  /// 3(I+1) in CF mode, 3(I+1)F in DF mode.
  int head_width() const;

  std::size_t num_parameters() const;
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& packed);
  /// Per-entry learning-rate multipliers in pack() order.
  Eigen::VectorXd learning_rate_scale() const;

  /// Offsets of the blocks in pack() order.
  std::size_t phase_net_offset() const { return main_net.values.size(); }
  std::size_t tau_offset() const { return main_net.values.size() + phase_net.values.size(); }
  std::size_t mic_offset() const { return tau_offset() + 1; }

  SirenParams main_net;
  SirenParams phase_net;  // empty unless MagThenPhase
  double tau = 0.0;
  std::vector<Vec3> mic_positions;

 private:
  SteererConfig config_;
  FrequencyAxis axis_;
  Vec3 reference_point_{0.0, 0.0, 0.0};
  double speed_of_sound_ = 343.0;
};

struct ModelOutput {
  std::vector<double> freqs;
  Eigen::VectorXcd g_air;  // K
  Spectra g_mic;  // I x K
  Spectra h_hat;  // I x K
};

/// Intermediate values needed by field_backward.
struct FieldTrace {
  Vec3 dir{};
  std::vector<double> freqs;
  SirenTrace main;
  SirenTrace phase;
  Eigen::MatrixXd g1, g2, g3;  // (I+1) x K raw head components, row 0 = air
};

/// Network input features: direction vector, plus 2 f / fs - 1 in CF mode.
Eigen::MatrixXd encode_inputs(const NeuralSteerer& model, const Vec3& dir, std::span<const double> freqs);

/// Evaluates the field at one direction. In DF mode `freqs` must be the model axis.
ModelOutput field_forward(const NeuralSteerer& model, const DoA& doa, std::span<const double> freqs,
                          FieldTrace* trace = nullptr);

/// Evaluates on a full equally spaced axis (convenience for both modes).
ModelOutput field_forward(const NeuralSteerer& model, const DoA& doa, const FrequencyAxis& axis,
                          FieldTrace* trace = nullptr);

/// Backpropagates dL/dh_hat (entries dL/dRe + j dL/dIm, I x K) into `grad`
/// (pack() layout, accumulated).
void field_backward(const NeuralSteerer& model, const FieldTrace& trace, const ModelOutput& out,
                    const Spectra& dh, std::span<double> grad);

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::int64_t step_count = 0;
  std::int64_t epoch = 0;
  double initial_learning_rate = 1e-3;
  double decay_per_epoch = 0.98;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// initial_learning_rate * decay_per_epoch^epoch.
  double learning_rate() const;
};

OptimizerState make_optimizer(std::size_t num_parameters, double lr0, double decay_per_epoch);

/// One bias-corrected Adam step. `lr_scale` may be empty (all ones).
void optimizer_step(OptimizerState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                    const Eigen::VectorXd& lr_scale = {});

/// Epoch boundary: the schedule advances by one decay factor.
void optimizer_end_epoch(OptimizerState& state);

// ---------------------------------------------------------------------------
// Checkpoints (NSTEER1 container)

/// Resume information stored alongside the model.
struct TrainingSnapshot {
  OptimizerState optimizer;
  Eigen::VectorXd current_params;
  std::int64_t next_epoch = 0;
  double best_validation = 0.0;
  std::int64_t best_epoch = -1;
  std::int64_t epochs_without_improvement = 0;
  bool stopped_early = false;
};

struct Checkpoint {
  NeuralSteerer model;  // best-validation parameters
  std::optional<TrainingSnapshot> training;
};

void save_checkpoint(const std::string& path, const NeuralSteerer& model,
                     const TrainingSnapshot* training = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nsteer
