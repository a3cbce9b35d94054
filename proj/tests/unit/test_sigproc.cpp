// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include <doctest.h>

#include <cmath>
#include <random>

#include "nsteer/sigproc.hpp"
#include "oracles.hpp"

using namespace nsteer;

namespace {

std::vector<cplx> random_onesided(std::mt19937_64& rng, std::size_t f) {
  std::normal_distribution<double> g;
  std::vector<cplx> h(f);
  for (auto& v : h) v = {g(rng), g(rng)};
  return h;
}

std::vector<cplx> delay_spectrum(int num_bins, double n0) {
  const int n = 2 * (num_bins - 1);
  std::vector<cplx> h(static_cast<std::size_t>(num_bins));
  for (int k = 0; k < num_bins; ++k) h[static_cast<std::size_t>(k)] = std::polar(1.0, -kTwoPi * k * n0 / n);
  return h;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("direction vectors are unit norm and azimuth periodic") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> az(0.0, kTwoPi), el(-kPi / 2, kPi / 2);
  for (int t = 0; t < 100; ++t) {
    const DoA d{az(rng), el(rng)};
    const Vec3 n = direction(d);
    CHECK(std::abs(std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]) - 1.0) < 1e-12);
    ArrayGeometry g;
    g.mic_positions = {{0.03, -0.07, 0.02}};
    const cplx a = algebraic_steering(d, 5000.0, 0, g);
    const cplx b = algebraic_steering(DoA{d.azimuth + kTwoPi, d.elevation}, 5000.0, 0, g);
    CHECK(std::abs(std::abs(a) - 1.0) < 1e-12);
    CHECK(std::abs(a - b) < 1e-12);
  }
}

TEST_CASE("frequency axis endpoints") {
  const FrequencyAxis ax(16000.0, 65);
  CHECK(ax.frequency(0) == 0.0);
  CHECK(ax.frequency(64) == doctest::Approx(8000.0).epsilon(1e-15));
  CHECK(ax.fft_size() == 128);
  CHECK_THROWS_AS(FrequencyAxis(16000.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyAxis(-1.0, 9), std::invalid_argument);
}

TEST_CASE("algebraic steering closed forms") {
  ArrayGeometry g;
  g.mic_positions = {{0.1, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  CHECK(std::abs(algebraic_steering(DoA{0.3, 0.2}, 0.0, 0, g) - cplx(1, 0)) < 1e-15);
  CHECK(std::abs(algebraic_steering(DoA{0.3, 0.2}, 3000.0, 1, g) - cplx(1, 0)) < 1e-15);
  // Phase of exp(-j 2 pi 1000 0.1 / 343) = -1.8318324 rad.
  CHECK(std::arg(algebraic_steering(DoA{0.0, 0.0}, 1000.0, 0, g)) == doctest::Approx(-1.8318324).epsilon(1e-7));
  CHECK_THROWS_AS(algebraic_steering(DoA{}, 100.0, 2, g), std::out_of_range);
}

TEST_CASE("compose steering") {
  CHECK(std::abs(compose_steering(cplx(0.6, 0.8), 1.0, 1.0, 0.0, 123.0) - cplx(0.6, 0.8)) < 1e-15);
  CHECK(std::abs(compose_steering(1.0, 1.0, 1.0, 1e-3, 250.0) - cplx(0, -1)) < 1e-15);
  CHECK(compose_steering(1.0, 0.0, 1.0, 1e-3, 250.0) == cplx(0, 0));
}

TEST_CASE("Hermitian completion") {
  const std::vector<cplx> h = {{1, 0.5}, {0, 1}, {2, 0}};
  const auto full = onesided_to_full(h);
  REQUIRE(full.size() == 4);
  CHECK(full[0] == cplx(1, 0));
  CHECK(full[1] == cplx(0, 1));
  CHECK(full[2] == cplx(2, 0));
  CHECK(full[3] == cplx(0, -1));
}

TEST_CASE("complex FFT matches the direct sum for power-of-two and other lengths") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (std::size_t n : {1u, 2u, 8u, 12u, 64u, 100u, 127u, 256u}) {
    std::vector<cplx> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    for (bool inverse : {false, true}) {
      auto y = x;
      fft(y, inverse);
      const auto ref = oracle::direct_dft(x, inverse);
      double err = 0.0, scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        err = std::max(err, std::abs(y[i] - ref[i]));
        scale = std::max(scale, std::abs(ref[i]));
      }
      CHECK(err <= 1e-12 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("idft_real closed forms") {
  const auto d0 = idft_real(std::vector<cplx>(5, 1.0));
  CHECK(d0[0] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < d0.size(); ++i) CHECK(std::abs(d0[i]) < 1e-15);
  const auto d3 = idft_real(delay_spectrum(5, 3.0));
  for (std::size_t i = 0; i < d3.size(); ++i) CHECK(std::abs(d3[i] - (i == 3 ? 1.0 : 0.0)) < 1e-14);
}

TEST_CASE("idft_real is linear") {
  std::mt19937_64 rng(3);
  const auto x = random_onesided(rng, 33), y = random_onesided(rng, 33);
  std::vector<cplx> z(33);
  for (std::size_t k = 0; k < 33; ++k) z[k] = 2.0 * x[k] - 0.5 * y[k];
  const auto tx = idft_real(x), ty = idft_real(y), tz = idft_real(z);
  for (std::size_t i = 0; i < tz.size(); ++i) CHECK(std::abs(tz[i] - (2.0 * tx[i] - 0.5 * ty[i])) < 1e-13);
}

TEST_CASE("dft_real closed forms and round trip") {
  std::vector<double> delta(16, 0.0);
  delta[0] = 1.0;
  for (const cplx& v : dft_real(delta)) CHECK(std::abs(v - cplx(1, 0)) < 1e-15);
  const auto c = dft_real(std::vector<double>(16, 0.25));
  CHECK(std::abs(c[0] - cplx(4.0, 0.0)) < 1e-14);
  for (std::size_t k = 1; k < c.size(); ++k) CHECK(std::abs(c[k]) < 1e-14);
  CHECK_THROWS_AS(dft_real(std::vector<double>(7, 0.0)), std::invalid_argument);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    auto h = random_onesided(rng, 65);
    h.front().imag(0.0);
    h.back().imag(0.0);
    const auto r = dft_real(idft_real(h));
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      err = std::max(err, std::abs(r[k] - h[k]));
      scale = std::max(scale, std::abs(h[k]));
    }
    CHECK(err <= 1e-10 * scale);
  }
}

TEST_CASE("idft_real adjoint satisfies <A x, y> = <x, A^T y>") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (std::size_t f : {5u, 17u, 65u}) {
    const auto x = random_onesided(rng, f);
    std::vector<double> y(2 * (f - 1));
    for (auto& v : y) v = g(rng);
    const auto ax = idft_real(x);
    const auto aty = idft_real_adjoint(y);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i];
    for (std::size_t k = 0; k < f; ++k) rhs += x[k].real() * aty[k].real() + x[k].imag() * aty[k].imag();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("hilbert_freq closed forms and involution") {
  const int n = 32;
  std::vector<double> c(n), s(n);
  for (int k0 : {1, 5, 15}) {
    for (int t = 0; t < n; ++t) {
      c[static_cast<std::size_t>(t)] = std::cos(kTwoPi * t * k0 / n);
      s[static_cast<std::size_t>(t)] = std::sin(kTwoPi * t * k0 / n);
    }
    const auto hc = hilbert_freq(c);
    const auto hs = hilbert_freq(s);
    for (int t = 0; t < n; ++t) {
      CHECK(std::abs(hc[static_cast<std::size_t>(t)] - s[static_cast<std::size_t>(t)]) < 1e-12);
      CHECK(std::abs(hs[static_cast<std::size_t>(t)] + c[static_cast<std::size_t>(t)]) < 1e-12);
    }
  }
  for (double v : hilbert_freq(std::vector<double>(n, 3.0))) CHECK(std::abs(v) < 1e-14);
  CHECK_THROWS_AS(hilbert_freq(std::vector<double>(7, 0.0)), std::invalid_argument);

  // Applied twice to a zero-mean, Nyquist-free sequence it negates the input.
  std::mt19937_64 rng(6);
  auto h = random_onesided(rng, 33);
  h.front() = 0.0;
  h.back() = 0.0;
  const auto x = idft_real(h);
  const auto hh = hilbert_freq(hilbert_freq(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(hh[i] + x[i]) < 1e-10);
}

TEST_CASE("FFT paths match the O(N^2) oracles") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (std::size_t n : {16u, 64u, 128u}) {
    for (int t = 0; t < 20; ++t) {
      const auto h = random_onesided(rng, n / 2 + 1);
      const auto fast = idft_real(h);
      const auto slow = oracle::direct_idft_real(h);
      double scale = 0.0;
      for (double v : slow) scale = std::max(scale, std::abs(v));
      CHECK(max_abs_diff(fast, slow) <= 1e-9 * scale);

      std::vector<double> x(n);
      for (auto& v : x) v = g(rng);
      const auto hf = hilbert_freq(x);
      const auto hs = oracle::direct_hilbert(x);
      scale = 0.0;
      for (double v : hs) scale = std::max(scale, std::abs(v));
      CHECK(max_abs_diff(hf, hs) <= 1e-9 * scale);
    }
  }
}

TEST_CASE("causal residual: delays vanish, advances cost 2N") {
  for (int f : {9, 33, 65}) {
    const int n = 2 * (f - 1);
    for (int n0 : {0, 1, 3, n / 2 - 1}) CHECK(causal_residual(delay_spectrum(f, n0)) < 1e-10 * n);
    for (int n0 : {1, 3, n / 2 - 1}) {
      CHECK(causal_residual(delay_spectrum(f, -n0)) == doctest::Approx(2.0 * n).epsilon(1e-9));
    }
  }
  CHECK(causal_residual(std::vector<cplx>(9, 0.7)) < 1e-15);
}

TEST_CASE("causal residual of random causal filters is zero") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const int n = 64;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(n, 0.0);
    for (int i = 0; i < n / 2; ++i) x[static_cast<std::size_t>(i)] = g(rng);
    CHECK(causal_residual(dft_real(x)) < 1e-9 * n);
    // Energy in the anti-causal half is penalized.
    x[n - 3] = 0.5;
    CHECK(causal_residual(dft_real(x)) > 0.0);
  }
}

TEST_CASE("causal residual gradient matches central differences") {
  std::mt19937_64 rng(9);
  const auto h = random_onesided(rng, 17);
  std::vector<cplx> grad(h.size());
  causal_residual(h, grad);
  for (std::size_t k = 0; k < h.size(); ++k) {
    for (int part = 0; part < 2; ++part) {
      const cplx e = part == 0 ? cplx(1e-6, 0) : cplx(0, 1e-6);
      auto hp = h, hm = h;
      hp[k] += e;
      hm[k] -= e;
      const double fd = (causal_residual(hp) - causal_residual(hm)) / 2e-6;
      const double an = part == 0 ? grad[k].real() : grad[k].imag();
      CHECK(an == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}
