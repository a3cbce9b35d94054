// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

// Independent reference computations used by the tests. Nothing here calls
// into the library's FFT or autodiff code.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nsteer/data.hpp"
#include "nsteer/loss.hpp"
#include "nsteer/model.hpp"

namespace oracle {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;

/// O(N^2) DFT, e^{-j 2 pi k n / N}.
inline std::vector<cplx> direct_dft(std::span<const cplx> x, bool inverse = false) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * kPi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += x[t] * cplx(std::cos(ang), std::sin(ang));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

/// Real filter of a one-sided spectrum by the explicit cosine/sine sum.
inline std::vector<double> direct_idft_real(std::span<const cplx> h) {
  const std::size_t f = h.size();
  const std::size_t n = 2 * (f - 1);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = h[0].real() + ((t % 2) ? -1.0 : 1.0) * h[f - 1].real();
    for (std::size_t k = 1; k + 1 < f; ++k) {
      const double ang = 2.0 * kPi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      acc += 2.0 * (h[k].real() * std::cos(ang) - h[k].imag() * std::sin(ang));
    }
    x[t] = acc / static_cast<double>(n);
  }
  return x;
}

/// Hilbert transform by the direct sum with kernel (2/N) sin^2(pi m/2) cot(pi m/N)
/// for even N (the circular discrete Hilbert kernel, non-zero at odd lags).
inline std::vector<double> direct_hilbert(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t m = (t + n - s) % n;
      if (m % 2 == 0) continue;
      acc += x[s] * (2.0 / static_cast<double>(n)) / std::tan(kPi * static_cast<double>(m) / static_cast<double>(n));
    }
    y[t] = acc;
  }
  return y;
}

/// Central difference of f along every coordinate of x, with a step per coordinate.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, const Eigen::VectorXd& steps) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double step = steps[i];
    xp[i] = v + step;
    const double fp = f(xp);
    xp[i] = v - step;
    const double fm = f(xp);
    xp[i] = v;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace oracle
