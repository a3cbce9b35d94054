// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

// Finite-difference audit of batch_gradient on a small two-microphone model.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "nsteer/train.hpp"
#include "oracles.hpp"

namespace oracle {

struct Scenario {
  nsteer::GridMeasurementSet set;
  nsteer::NeuralSteerer model;
  nsteer::BatchSpec batch;
  nsteer::OffgridSample offgrid;
};

/// 4 x 3 grid, F = 9, I = 2, two hidden layers of 16 units in each net.
inline Scenario tiny_scenario(nsteer::Variant variant, nsteer::FreqMode mode, std::uint64_t seed,
                              bool detach = false) {
  using namespace nsteer;
  SyntheticSceneConfig scene;
  scene.geometry.mic_positions = {{0.07, 0.05, 0.01}, {-0.02, -0.08, 0.0}};
  scene.mic_jitter = 0.003;
  scene.seed = seed;
  Scenario s;
  s.set = generate_synthetic(scene, 4, 3, FrequencyAxis(16000.0, 9));
  SteererConfig sc;
  sc.variant = variant;
  sc.freq_mode = mode;
  sc.hidden = {16, 16};
  sc.phase_hidden = {16, 16};
  sc.omega0 = 3.0;
  sc.seed = seed;
  sc.detach_magnitude_condition = detach;
  s.model = NeuralSteerer(sc, s.set.geometry, s.set.axis);
  // Move tau and the microphones off their initial values so every block has
  // a generic gradient.
  s.model.tau = 2.0e-4;
  s.model.mic_positions[0][2] += 0.004;
  s.batch.nodes = {1, 5, 10};
  s.batch.freq_bins = {0, 2, 3, 5, 8};
  s.offgrid = sample_offgrid(s.model, 2, seed, 0, 0);
  return s;
}

/// Loss with the frequency weights frozen at `w`, as a function of the packed parameters.
inline double loss_at(const Scenario& s, const Eigen::VectorXd& params, const nsteer::LossWeights& weights,
                      std::span<const double> w) {
  using namespace nsteer;
  NeuralSteerer m = s.model;
  m.unpack(params);
  std::vector<Spectra> preds, refs, off;
  for (int n : s.batch.nodes) {
    preds.push_back(field_forward(m, s.set.node_doa(n), m.axis()).h_hat);
    refs.push_back(s.set.node_spectra(n));
  }
  for (const auto& d : s.offgrid.doas) off.push_back(field_forward(m, d, s.offgrid.axis).h_hat);
  LossBatch b{preds, refs, s.batch.freq_bins, off, {}};
  b.fixed_freq_weights = w;
  return total_loss(b, weights).total;
}

/// Worst relative error over all entries; entries far below `scale` are
/// compared against 1e-3 * scale instead.
inline double worst_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& n, double scale) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(n[i]), 1e-3 * scale});
    worst = std::max(worst, std::abs(a[i] - n[i]) / denom);
  }
  return worst;
}

struct AuditResult {
  double networks = 0.0;
  double tau = 0.0;
  double mics = 0.0;
  bool sizes_match = false;

  double worst() const { return std::max({networks, tau, mics}); }
};

/// Analytic gradient against central differences, per parameter block.
inline AuditResult gradient_audit(const Scenario& s, const nsteer::LossWeights& weights) {
  using namespace nsteer;
  const BatchGradient g = batch_gradient(s.model, s.set, s.batch, s.offgrid, weights, Execution::Serial);
  // Reproduce the weights batch_gradient used so the oracle holds them constant.
  std::vector<Spectra> preds, refs;
  for (int n : s.batch.nodes) {
    preds.push_back(field_forward(s.model, s.set.node_doa(n), s.model.axis()).h_hat);
    refs.push_back(s.set.node_spectra(n));
  }
  LossGradients lg;
  total_loss(LossBatch{preds, refs, s.batch.freq_bins, {}, {}}, weights, &lg);
  const std::vector<double> w = lg.freq_weights;

  const Eigen::VectorXd x = s.model.pack();
  const auto tau = static_cast<Eigen::Index>(s.model.tau_offset());
  const auto mic = static_cast<Eigen::Index>(s.model.mic_offset());
  const auto mic_count = static_cast<Eigen::Index>(3 * s.model.mic_positions.size());
  // Steps in natural units: network weights as they are, tau in 0.1 ms, positions in cm.
  // A 1e-5 step leaves O(h^2) truncation error near 4e-5 on the causal term's
  // deepest weights; 1e-6 keeps both truncation and round-off below 1e-7.
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(x.size(), 1e-6);
  steps[tau] = 1e-6 * 1e-4;
  steps.segment(mic, mic_count).setConstant(1e-6 * 1e-2);
  const Eigen::VectorXd fd =
      central_difference([&](const Eigen::VectorXd& p) { return loss_at(s, p, weights, w); }, x, steps);
  AuditResult r;
  r.sizes_match = g.grad.size() == fd.size();
  if (!r.sizes_match) return r;
  // Compare in natural units: d/d(tau in 0.1 ms), d/d(position in cm).
  Eigen::VectorXd a = g.grad, n = fd;
  a[tau] *= 1e-4;
  n[tau] *= 1e-4;
  a.segment(mic, mic_count) *= 1e-2;
  n.segment(mic, mic_count) *= 1e-2;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), n.cwiseAbs().maxCoeff());
  r.networks = worst_relative_error(a.head(tau), n.head(tau), scale);
  r.tau = worst_relative_error(a.segment(tau, 1), n.segment(tau, 1), scale);
  r.mics = worst_relative_error(a.segment(mic, mic_count), n.segment(mic, mic_count), scale);
  return r;
}

}  // namespace oracle
