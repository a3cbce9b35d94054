// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <span>
#include <vector>

#include "nsteer/sigproc.hpp"

namespace nsteer {

struct LossWeights {
  double lambda1 = 10.0;        // phase term
  double lambda2 = 10.0;        // time-domain term
  double lambda_causal = 1.0;   // off-grid causality regularizer
  double epsilon_freq = 1.0;    // cumulative-residual weighting rate
  double eps_log = 1e-8;

  void validate() const;
};

// Scalar terms. When `grad` is non-null it receives dL/dRe + j dL/dIm of
// the prediction. L1 subgradients are 0 at ties.

/// |log(|h_hat| + eps) - log(|h| + eps)|
double logmag_l1(cplx h_hat, cplx h, double eps_log, cplx* grad = nullptr);

/// |cos(arg h_hat) - cos(arg h)| + |sin(arg h_hat) - sin(arg h)|, arg 0 = 0.
double phase_cos_sin_l1(cplx h_hat, cplx h, cplx* grad = nullptr);

/// Squared distance between the real time filters of two one-sided spectra.
double time_l2(std::span<const cplx> h_hat, std::span<const cplx> h, std::span<cplx> grad = {});
double time_l2(const ComplexSpectrum& h_hat, const ComplexSpectrum& h);

/// Causality residual of a one-sided spectrum sampled on an equally spaced axis.
double causal_loss(std::span<const cplx> h_hat, std::span<cplx> grad = {});

/// w_k = exp(-epsilon * sum_{k'<k} l_k' / max(1, k)) for losses listed in
/// ascending frequency order.
std::vector<double> freq_cumulative_weights(std::span<const double> per_freq_losses, double epsilon);

struct LossTerms {
  double logmag = 0.0;  // weighted log-magnitude term
  double phase = 0.0;   // lambda1 * weighted phase term
  double time = 0.0;    // lambda2 / F * time-domain term
  double causal = 0.0;  // lambda_causal * mean over off-grid directions
  double total = 0.0;
};

/// One batch of the training objective.
struct LossBatch {
  std::span<const Spectra> predictions;  // per batch direction, channels x F (full axis)
  std::span<const Spectra> references;   // same shapes
  std::vector<int> freq_bins;            // frequency subset for the spectral terms
  std::span<const Spectra> offgrid;      // predictions at off-grid directions on an equally spaced axis
  /// Overrides the cumulative weights (one per sorted freq_bins entry).
  std::span<const double> fixed_freq_weights;
};

struct LossGradients {
  std::vector<Spectra> predictions;
  std::vector<Spectra> offgrid;
  std::vector<double> freq_weights;  // weights applied to freq_bins (sorted ascending)
};

/// Sum over batch directions and channels of
///   (1/|F~|) sum_f w_f (logmag + lambda1 phase) + (lambda2/F) time_l2
/// plus lambda_causal times the mean over off-grid directions of the summed
/// channel causality residuals. The frequency weights come from the batch-mean
/// per-frequency losses and are held constant for differentiation.
/// Throws DataError when predictions and references do not pair up.
LossTerms total_loss(const LossBatch& batch, const LossWeights& weights, LossGradients* grads = nullptr);

}  // namespace nsteer
