// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/sigproc.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nsteer {

Vec3 direction(const DoA& doa) {
  const double ce = std::cos(doa.elevation);
  return {std::cos(doa.azimuth) * ce, std::sin(doa.azimuth) * ce, std::sin(doa.elevation)};
}

double great_circle_angle(const DoA& a, const DoA& b) {
  const Vec3 u = direction(a);
  const Vec3 v = direction(b);
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

FrequencyAxis::FrequencyAxis(double sample_rate_hz, int num_bins)
    : sample_rate_hz_(sample_rate_hz), num_bins_(num_bins) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw std::invalid_argument("frequency axis: sample rate must be positive");
  }
  if (num_bins < 2) {
    throw std::invalid_argument("frequency axis: need at least 2 bins, got " +
                                std::to_string(num_bins));
  }
}

std::vector<double> FrequencyAxis::frequencies() const {
  std::vector<double> f(static_cast<std::size_t>(num_bins_));
  for (int k = 0; k < num_bins_; ++k) f[static_cast<std::size_t>(k)] = frequency(k);
  return f;
}

void ArrayGeometry::validate() const {
  if (mic_positions.empty()) throw std::invalid_argument("array geometry: no microphones");
  if (!(speed_of_sound > 0.0)) throw std::invalid_argument("array geometry: speed of sound must be positive");
}

cplx algebraic_steering(const Vec3& dir, double f, const Vec3& mic, const Vec3& reference,
                        double speed_of_sound) {
  const double path = dir[0] * (mic[0] - reference[0]) + dir[1] * (mic[1] - reference[1]) +
                      dir[2] * (mic[2] - reference[2]);
  return std::polar(1.0, -kTwoPi * f * path / speed_of_sound);
}

cplx algebraic_steering(const DoA& doa, double f, std::size_t mic_index, const ArrayGeometry& geom) {
  if (mic_index >= geom.num_mics()) {
    throw std::out_of_range("algebraic_steering: mic index " + std::to_string(mic_index) +
                            " out of range for " + std::to_string(geom.num_mics()) + " mics");
  }
  return algebraic_steering(direction(doa), f, geom.mic_positions[mic_index], geom.reference_point,
                            geom.speed_of_sound);
}

cplx compose_steering(cplx d, cplx g_air, cplx g_mic, double tau, double f) {
  return std::polar(1.0, -kTwoPi * f * tau) * g_air * g_mic * d;
}

// ---------------------------------------------------------------------------

namespace {

void require_even(std::size_t n, const char* what) {
  if (n % 2 != 0 || n == 0) {
    throw std::invalid_argument(std::string(what) + ": sequence length must be even and positive, got " +
                                std::to_string(n));
  }
}

}  // namespace

void fft(std::span<cplx> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  // Eigen::FFT caches plans per object, so each thread keeps its own.
  thread_local Eigen::FFT<double> engine;
  thread_local std::vector<cplx> in, out;
  in.assign(data.begin(), data.end());
  if (inverse) {
    engine.inv(out, in);  // scales by 1/N
  } else {
    engine.fwd(out, in);
  }
  std::copy(out.begin(), out.end(), data.begin());
}

std::vector<cplx> onesided_to_full(std::span<const cplx> onesided) {
  const std::size_t f = onesided.size();
  if (f < 2) throw std::invalid_argument("onesided_to_full: need at least 2 bins");
  const std::size_t n = 2 * (f - 1);
  std::vector<cplx> full(n);
  full[0] = cplx(onesided[0].real(), 0.0);
  for (std::size_t k = 1; k + 1 < f; ++k) {
    full[k] = onesided[k];
    full[n - k] = std::conj(onesided[k]);
  }
  full[f - 1] = cplx(onesided[f - 1].real(), 0.0);
  return full;
}

std::vector<double> idft_real(std::span<const cplx> onesided) {
  std::vector<cplx> full = onesided_to_full(onesided);
  fft(full, true);
  std::vector<double> out(full.size());
  std::transform(full.begin(), full.end(), out.begin(), [](const cplx& v) { return v.real(); });
  return out;
}

TimeFilter idft_real(const ComplexSpectrum& spec) {
  if (static_cast<int>(spec.values.size()) != spec.axis.num_bins()) {
    throw std::invalid_argument("idft_real: spectrum length does not match its axis");
  }
  return TimeFilter{idft_real(std::span<const cplx>(spec.values)), spec.axis.sample_rate_hz()};
}

std::vector<cplx> dft_real(std::span<const double> samples) {
  require_even(samples.size(), "dft_real");
  std::vector<cplx> full(samples.begin(), samples.end());
  fft(full, false);
  full.resize(samples.size() / 2 + 1);
  return full;
}

ComplexSpectrum dft_real(const TimeFilter& filter) {
  require_even(filter.samples.size(), "dft_real");
  auto values = dft_real(std::span<const double>(filter.samples));
  const int bins = static_cast<int>(values.size());
  return ComplexSpectrum{std::move(values), FrequencyAxis(filter.sample_rate_hz, bins)};
}

std::vector<cplx> idft_real_adjoint(std::span<const double> time_grad) {
  const std::size_t n = time_grad.size();
  require_even(n, "idft_real_adjoint");
  std::vector<cplx> e(time_grad.begin(), time_grad.end());
  fft(e, false);
  const std::size_t f = n / 2 + 1;
  std::vector<cplx> grad(f);
  const double inv_n = 1.0 / static_cast<double>(n);
  grad[0] = cplx(e[0].real() * inv_n, 0.0);
  for (std::size_t k = 1; k + 1 < f; ++k) grad[k] = 2.0 * inv_n * e[k];
  grad[f - 1] = cplx(e[f - 1].real() * inv_n, 0.0);
  return grad;
}

std::vector<double> hilbert_freq(std::span<const double> x) {
  const std::size_t n = x.size();
  require_even(n, "hilbert_freq");
  std::vector<cplx> spec(x.begin(), x.end());
  fft(spec, false);
  const std::size_t half = n / 2;
  const cplx minus_j(0.0, -1.0);
  spec[0] = 0.0;
  spec[half] = 0.0;
  for (std::size_t k = 1; k < half; ++k) {
    spec[k] *= minus_j;
    spec[n - k] *= -minus_j;
  }
  fft(spec, true);
  std::vector<double> out(n);
  std::transform(spec.begin(), spec.end(), out.begin(), [](const cplx& v) { return v.real(); });
  return out;
}

namespace {

// r = -hilbert(Re H) - Im H on the full Hermitian grid.
std::vector<double> causal_residual_vector(std::span<const cplx> onesided) {
  if (onesided.size() < 3) throw std::invalid_argument("causal_residual: need at least 3 bins");
  const std::vector<cplx> full = onesided_to_full(onesided);
  std::vector<double> re(full.size());
  for (std::size_t k = 0; k < full.size(); ++k) re[k] = full[k].real();
  std::vector<double> r = hilbert_freq(re);
  for (std::size_t k = 0; k < full.size(); ++k) r[k] = -r[k] - full[k].imag();
  return r;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

double causal_residual(std::span<const cplx> onesided) {
  return squared_norm(causal_residual_vector(onesided));
}

double causal_residual(std::span<const cplx> onesided, std::span<cplx> grad) {
  if (grad.size() != onesided.size()) throw std::invalid_argument("causal_residual: gradient size mismatch");
  std::vector<double> r = causal_residual_vector(onesided);
  const double value = squared_norm(r);
  const std::size_t n = r.size();
  const std::size_t f = onesided.size();
  for (auto& x : r) x *= 2.0;
  // The Hilbert operator is antisymmetric, so the adjoint of -H is H.
  const std::vector<double> d_re = hilbert_freq(r);
  grad[0] = cplx(d_re[0], 0.0);
  grad[f - 1] = cplx(d_re[f - 1], 0.0);
  for (std::size_t k = 1; k + 1 < f; ++k) {
    // d/dIm: Im H_k = +Im h_k, Im H_{N-k} = -Im h_k, and dL/dIm H = -2r.
    grad[k] = cplx(d_re[k] + d_re[n - k], -r[k] + r[n - k]);
  }
  return value;
}

}  // namespace nsteer
