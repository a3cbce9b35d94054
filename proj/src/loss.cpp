// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nsteer/errors.hpp"

namespace nsteer {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::span<const cplx> row(const Spectra& s, Eigen::Index i) {
  return {s.data() + i * s.cols(), static_cast<std::size_t>(s.cols())};
}

std::span<cplx> row(Spectra& s, Eigen::Index i) {
  return {s.data() + i * s.cols(), static_cast<std::size_t>(s.cols())};
}

}  // namespace

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda_causal < 0.0 || epsilon_freq < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  if (!(eps_log > 0.0)) throw std::invalid_argument("eps_log must be positive");
}

double logmag_l1(cplx h_hat, cplx h, double eps_log, cplx* grad) {
  const double mag = std::abs(h_hat);
  const double diff = std::log(mag + eps_log) - std::log(std::abs(h) + eps_log);
  if (grad) *grad = mag > 0.0 ? sign(diff) / (mag + eps_log) * (h_hat / mag) : cplx(0.0, 0.0);
  return std::abs(diff);
}

double phase_cos_sin_l1(cplx h_hat, cplx h, cplx* grad) {
  const double ah = std::arg(h_hat);  // std::arg(0) == 0
  const double ar = std::arg(h);
  const double dc = std::cos(ah) - std::cos(ar);
  const double ds = std::sin(ah) - std::sin(ar);
  if (grad) {
    const double x = h_hat.real();
    const double y = h_hat.imag();
    const double r2 = x * x + y * y;
    if (r2 > 0.0) {
      const double r3 = r2 * std::sqrt(r2);
      const double sc = sign(dc);
      const double ss = sign(ds);
      *grad = cplx((sc * y * y - ss * x * y) / r3, (-sc * x * y + ss * x * x) / r3);
    } else {
      *grad = 0.0;
    }
  }
  return std::abs(dc) + std::abs(ds);
}

double time_l2(std::span<const cplx> h_hat, std::span<const cplx> h, std::span<cplx> grad) {
  if (h_hat.size() != h.size()) throw std::invalid_argument("time_l2: spectra lengths differ");
  const std::vector<double> a = idft_real(h_hat);
  const std::vector<double> b = idft_real(h);
  std::vector<double> e(a.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    e[n] = a[n] - b[n];
    sum += e[n] * e[n];
  }
  if (!grad.empty()) {
    for (auto& v : e) v *= 2.0;
    const std::vector<cplx> g = idft_real_adjoint(e);
    std::copy(g.begin(), g.end(), grad.begin());
  }
  return sum;
}

double time_l2(const ComplexSpectrum& h_hat, const ComplexSpectrum& h) {
  if (!(h_hat.axis == h.axis)) throw std::invalid_argument("time_l2: frequency axes differ");
  return time_l2(std::span<const cplx>(h_hat.values), std::span<const cplx>(h.values));
}

double causal_loss(std::span<const cplx> h_hat, std::span<cplx> grad) {
  if (grad.empty()) return causal_residual(h_hat);
  return causal_residual(h_hat, grad);
}

std::vector<double> freq_cumulative_weights(std::span<const double> losses, double epsilon) {
  std::vector<double> w(losses.size(), 1.0);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    w[k] = std::exp(-epsilon * cumulative / static_cast<double>(std::max<std::size_t>(1, k)));
    cumulative += losses[k];
  }
  return w;
}

LossTerms total_loss(const LossBatch& batch, const LossWeights& weights, LossGradients* grads) {
  weights.validate();
  if (batch.predictions.size() != batch.references.size()) {
    throw DataError("total_loss: " + std::to_string(batch.predictions.size()) + " predictions but " +
                    std::to_string(batch.references.size()) + " references");
  }
  std::vector<int> bins = batch.freq_bins;
  std::sort(bins.begin(), bins.end());

  const std::size_t items = batch.predictions.size();
  Eigen::Index channels = 0;
  Eigen::Index num_bins = 0;
  for (std::size_t j = 0; j < items; ++j) {
    const Spectra& p = batch.predictions[j];
    const Spectra& r = batch.references[j];
    if (r.size() == 0) throw DataError("total_loss: missing reference for batch item " + std::to_string(j));
    if (p.rows() != r.rows() || p.cols() != r.cols()) {
      throw DataError("total_loss: prediction/reference shape mismatch at batch item " + std::to_string(j));
    }
    channels = p.rows();
    num_bins = p.cols();
  }
  for (int b : bins) {
    if (b < 0 || b >= num_bins) throw std::invalid_argument("total_loss: frequency bin out of range");
  }

  LossTerms terms;
  if (grads) {
    grads->predictions.assign(items, Spectra());
    for (std::size_t j = 0; j < items; ++j) {
      grads->predictions[j] = Spectra::Zero(channels, num_bins);
    }
    grads->offgrid.assign(batch.offgrid.size(), Spectra());
  }

  // Spectral terms: first pass for the per-frequency batch means behind the weights.
  const std::size_t nsub = bins.size();
  std::vector<double> lm(items * static_cast<std::size_t>(channels) * nsub);
  std::vector<double> ph(lm.size());
  std::vector<double> per_freq(nsub, 0.0);
  auto idx = [&](std::size_t j, Eigen::Index i, std::size_t q) {
    return (j * static_cast<std::size_t>(channels) + static_cast<std::size_t>(i)) * nsub + q;
  };
  for (std::size_t j = 0; j < items; ++j) {
    for (Eigen::Index i = 0; i < channels; ++i) {
      for (std::size_t q = 0; q < nsub; ++q) {
        const cplx p = batch.predictions[j](i, bins[q]);
        const cplx r = batch.references[j](i, bins[q]);
        lm[idx(j, i, q)] = logmag_l1(p, r, weights.eps_log);
        ph[idx(j, i, q)] = phase_cos_sin_l1(p, r);
        per_freq[q] += lm[idx(j, i, q)] + weights.lambda1 * ph[idx(j, i, q)];
      }
    }
  }
  const double pairs = static_cast<double>(items) * static_cast<double>(channels);
  if (pairs > 0.0) {
    for (auto& v : per_freq) v /= pairs;
  }
  std::vector<double> w;
  if (batch.fixed_freq_weights.empty()) {
    w = freq_cumulative_weights(per_freq, weights.epsilon_freq);
  } else {
    if (batch.fixed_freq_weights.size() != nsub) throw std::invalid_argument("total_loss: fixed weight count mismatch");
    w.assign(batch.fixed_freq_weights.begin(), batch.fixed_freq_weights.end());
  }
  if (grads) grads->freq_weights = w;

  const double inv_sub = nsub > 0 ? 1.0 / static_cast<double>(nsub) : 0.0;
  const double time_scale = num_bins > 0 ? weights.lambda2 / static_cast<double>(num_bins) : 0.0;
  std::vector<cplx> tgrad(static_cast<std::size_t>(num_bins));
  for (std::size_t j = 0; j < items; ++j) {
    for (Eigen::Index i = 0; i < channels; ++i) {
      for (std::size_t q = 0; q < nsub; ++q) {
        terms.logmag += inv_sub * w[q] * lm[idx(j, i, q)];
        terms.phase += weights.lambda1 * inv_sub * w[q] * ph[idx(j, i, q)];
        if (grads) {
          const cplx p = batch.predictions[j](i, bins[q]);
          const cplx r = batch.references[j](i, bins[q]);
          cplx g_lm, g_ph;
          logmag_l1(p, r, weights.eps_log, &g_lm);
          phase_cos_sin_l1(p, r, &g_ph);
          grads->predictions[j](i, bins[q]) += inv_sub * w[q] * (g_lm + weights.lambda1 * g_ph);
        }
      }
      if (weights.lambda2 > 0.0) {
        const auto p = row(batch.predictions[j], i);
        const auto r = row(batch.references[j], i);
        if (grads) {
          terms.time += time_scale * time_l2(p, r, tgrad);
          auto g = row(grads->predictions[j], i);
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += time_scale * tgrad[k];
        } else {
          terms.time += time_scale * time_l2(p, r);
        }
      }
    }
  }

  if (!batch.offgrid.empty() && weights.lambda_causal > 0.0) {
    const double scale = weights.lambda_causal / static_cast<double>(batch.offgrid.size());
    for (std::size_t j = 0; j < batch.offgrid.size(); ++j) {
      const Spectra& o = batch.offgrid[j];
      if (grads) grads->offgrid[j] = Spectra::Zero(o.rows(), o.cols());
      for (Eigen::Index i = 0; i < o.rows(); ++i) {
        if (grads) {
          auto g = row(grads->offgrid[j], i);
          terms.causal += scale * causal_loss(row(o, i), g);
          for (auto& v : g) v *= scale;
        } else {
          terms.causal += scale * causal_loss(row(o, i));
        }
      }
    }
  } else if (grads) {
    for (std::size_t j = 0; j < batch.offgrid.size(); ++j) {
      grads->offgrid[j] = Spectra::Zero(batch.offgrid[j].rows(), batch.offgrid[j].cols());
    }
  }

  terms.total = terms.logmag + terms.phase + terms.time + terms.causal;
  return terms;
}

}  // namespace nsteer
