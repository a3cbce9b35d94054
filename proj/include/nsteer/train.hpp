// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nsteer/data.hpp"
#include "nsteer/eval.hpp"
#include "nsteer/loss.hpp"
#include "nsteer/model.hpp"

namespace nsteer {

struct TrainConfig {
  std::int64_t epochs_max = 300;
  int batch_size = 18;
  double lr0 = 1e-3;
  double lr_decay = 0.98;
  int patience = 20;
  LossWeights weights;
  /// CF models: bins per batch for the spectral terms; 0 or F uses the full
  /// axis. DF models always use the full axis.
  int freq_subset_size = 16;
  std::uint64_t seed = 0;
  std::string checkpoint_path;  // written after every epoch when non-empty
  std::string log_path;         // CSV, written after every epoch when non-empty
  int log_every = 0;            // progress line on stderr every n epochs, 0 = quiet
  double grad_clip = 10.0;      // global norm, 0 disables
  Execution execution = Execution::Parallel;
  void validate() const;
};

struct EpochLog {
  std::int64_t epoch = 0;
  double learning_rate = 0.0;
  LossTerms train;  // mean over the epoch's batches
  double validation = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  NeuralSteerer model;        // best validation
  NeuralSteerer final_model;  // parameters after the last epoch run
  TrainingSnapshot snapshot;
  std::vector<EpochLog> log;
};

/// Off-grid directions and the equally spaced axis the causality term uses
/// for one step. DF models use their own axis; CF models draw N' from
/// {N/2, N, 2N}.
struct OffgridSample {
  std::vector<DoA> doas;
  FrequencyAxis axis;
};
OffgridSample sample_offgrid(const NeuralSteerer& model, int count, std::uint64_t seed, std::int64_t epoch,
                             std::int64_t batch);

struct BatchGradient {
  LossTerms terms;
  Eigen::VectorXd grad;  // pack() layout
};

/// Loss and gradient of one batch. Items are differentiated independently
/// (in parallel for Execution::Parallel) and reduced in index order, so both
/// execution modes give bit-identical results.
BatchGradient batch_gradient(const NeuralSteerer& model, const GridMeasurementSet& set, const BatchSpec& batch,
                             const OffgridSample& offgrid, const LossWeights& weights, Execution exec);

/// Mean per-node loss over `nodes` on the full axis, without frequency
/// weighting or the causality term.
double validation_loss(const NeuralSteerer& model, const GridMeasurementSet& set, std::span<const int> nodes,
                       const LossWeights& weights, Execution exec);

TrainResult train(const NeuralSteerer& initial, const GridMeasurementSet& set, const Split& split,
                  const TrainConfig& cfg);

/// Continues from a checkpoint written by train(). Throws FormatError when the
/// file carries no training state or does not match the dataset.
TrainResult resume(const std::string& checkpoint_path, const GridMeasurementSet& set, const Split& split,
                   const TrainConfig& cfg);

std::string training_log_csv(std::span<const EpochLog> log, bool header = true);
void write_training_log(const std::string& path, std::span<const EpochLog> log);

}  // namespace nsteer
