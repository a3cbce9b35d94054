// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace nsteer {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

/// Row-per-channel complex spectra (channels x bins), rows contiguous.
using Spectra = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Source direction of arrival. Azimuth in [0, 2pi), elevation in [-pi/2, pi/2].
struct DoA {
  double azimuth = 0.0;
  double elevation = 0.0;
};

/// Unit vector [cos(az)cos(el), sin(az)cos(el), sin(el)].
Vec3 direction(const DoA& doa);

/// Angle in radians between two directions on the sphere.
double great_circle_angle(const DoA& a, const DoA& b);

/// One-sided frequency grid: bin k sits at k * fs / (2 (F - 1)), DC through Nyquist.
class FrequencyAxis {
 public:
  FrequencyAxis() = default;
  FrequencyAxis(double sample_rate_hz, int num_bins);

  double sample_rate_hz() const { return sample_rate_hz_; }
  int num_bins() const { return num_bins_; }
  /// Length of the real time filter paired with this axis, N = 2 (F - 1).
  int fft_size() const { return 2 * (num_bins_ - 1); }
  double nyquist() const { return 0.5 * sample_rate_hz_; }
  double frequency(int k) const {
    return static_cast<double>(k) * sample_rate_hz_ / static_cast<double>(fft_size());
  }
  std::vector<double> frequencies() const;

  bool operator==(const FrequencyAxis&) const = default;

 private:
  double sample_rate_hz_ = 16000.0;
  int num_bins_ = 2;
};

struct ComplexSpectrum {
  std::vector<cplx> values;
  FrequencyAxis axis;
};

struct TimeFilter {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;
};

struct ArrayGeometry {
  std::vector<Vec3> mic_positions;
  Vec3 reference_point{0.0, 0.0, 0.0};
  double speed_of_sound = 343.0;

  std::size_t num_mics() const { return mic_positions.size(); }
  /// Throws std::invalid_argument when I < 1 or c <= 0.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Steering-vector algebra

/// Far-field anechoic steering coefficient exp(-j 2 pi f n^T (m_i - r) / c).
cplx algebraic_steering(const DoA& doa, double f, std::size_t mic_index, const ArrayGeometry& geom);

/// Same as above with an explicit microphone position (used by the learnable geometry).
cplx algebraic_steering(const Vec3& dir, double f, const Vec3& mic, const Vec3& reference,
                        double speed_of_sound);

/// exp(-j 2 pi f tau) * g_air * g_mic * d.
cplx compose_steering(cplx d, cplx g_air, cplx g_mic, double tau, double f);

// ---------------------------------------------------------------------------
// FFT kernels

/// In-place complex DFT of any length (Eigen's FFT module).
/// Forward is unnormalized; inverse applies 1/N.
void fft(std::span<cplx> data, bool inverse);

std::vector<cplx> onesided_to_full(std::span<const cplx> onesided);

/// Real length-N filter of a one-sided spectrum (Hermitian completion, 1/N inverse).
std::vector<double> idft_real(std::span<const cplx> onesided);
TimeFilter idft_real(const ComplexSpectrum& spec);

/// One-sided unnormalized DFT of an even-length real sequence.
std::vector<cplx> dft_real(std::span<const double> samples);
ComplexSpectrum dft_real(const TimeFilter& filter);

/// Gradient of a scalar loss with respect to the one-sided spectrum given its
/// gradient with respect to idft_real's output. Entries are dL/dRe + j dL/dIm.
std::vector<cplx> idft_real_adjoint(std::span<const double> time_grad);

/// Discrete Hilbert transform over the sequence index: DFT times -j sgn(k),
/// with DC and Nyquist zeroed.
std::vector<double> hilbert_freq(std::span<const double> x);

/// Squared norm of K(Re H) - Im H over the Hermitian-completed grid, with
/// K = -hilbert_freq. Zero for spectra of filters supported on samples [0, N/2).
double causal_residual(std::span<const cplx> onesided);

/// Same, also writing dL/dRe + j dL/dIm per one-sided bin into `grad`.
double causal_residual(std::span<const cplx> onesided, std::span<cplx> grad);

}  // namespace nsteer
