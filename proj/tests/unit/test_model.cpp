// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nsteer/errors.hpp"
#include "nsteer/model.hpp"

using namespace nsteer;

namespace {

ArrayGeometry small_array() {
  ArrayGeometry g;
  g.mic_positions = {{0.05, 0.0, 0.0}, {0.0, 0.06, 0.01}, {-0.04, -0.02, 0.0}};
  return g;
}

SteererConfig tiny_config(Variant v, FreqMode m) {
  SteererConfig c;
  c.variant = v;
  c.freq_mode = m;
  c.hidden = {8, 8};
  c.phase_hidden = {8};
  c.omega0 = 5.0;
  c.seed = 21;
  return c;
}

// Straight-line SIREN evaluation over the packed layout: row-major weights
// then biases per layer, sine on hidden layers, linear output.
std::vector<double> naive_siren(const SirenParams& net, std::vector<double> a) {
  std::size_t o = 0;
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    const int in = net.layer_sizes[l];
    const int out = net.layer_sizes[l + 1];
    std::vector<double> z(static_cast<std::size_t>(out), 0.0);
    for (int r = 0; r < out; ++r) {
      double s = 0.0;
      for (int c = 0; c < in; ++c) s += net.values[o + static_cast<std::size_t>(r * in + c)] * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = s;
    }
    o += static_cast<std::size_t>(in * out);
    for (int r = 0; r < out; ++r) z[static_cast<std::size_t>(r)] += net.values[o + static_cast<std::size_t>(r)];
    o += static_cast<std::size_t>(out);
    const bool last = l + 2 == net.layer_sizes.size();
    if (!last) {
      for (double& v : z) v = std::sin(net.omega0 * v);
    }
    a = z;
  }
  return a;
}

// Independent evaluation of one channel at one frequency index k of `freqs`.
cplx naive_field(const NeuralSteerer& m, const DoA& doa, const std::vector<double>& freqs, std::size_t k,
                 std::size_t channel) {
  const double ce = std::cos(doa.elevation);
  const Vec3 n{ce * std::cos(doa.azimuth), ce * std::sin(doa.azimuth), std::sin(doa.elevation)};
  const bool cf = m.config().freq_mode == FreqMode::Continuous;
  std::vector<double> x{n[0], n[1], n[2]};
  if (cf) x.push_back(2.0 * freqs[k] / m.axis().sample_rate_hz() - 1.0);
  const std::size_t comps = m.num_components();
  const std::size_t fk = cf ? 0 : k;  // DF output block
  std::vector<double> g1(comps), g2(comps), g3(comps);
  const std::vector<double> y = naive_siren(m.main_net, x);
  if (m.config().variant == Variant::Phase) {
    for (std::size_t c = 0; c < comps; ++c) {
      g1[c] = y[(fk * comps + c) * 3 + 0];
      g2[c] = y[(fk * comps + c) * 3 + 1];
      g3[c] = y[(fk * comps + c) * 3 + 2];
    }
  } else {
    std::vector<double> px = x;
    px.insert(px.end(), y.begin(), y.end());
    const std::vector<double> p = naive_siren(m.phase_net, px);
    for (std::size_t c = 0; c < comps; ++c) {
      g1[c] = y[fk * comps + c];
      g2[c] = p[(fk * comps + c) * 2 + 0];
      g3[c] = p[(fk * comps + c) * 2 + 1];
    }
  }
  auto decode = [](double a, double b, double c) { return std::polar(std::exp(a), -std::atan2(b, c)); };
  const Vec3& mic = m.mic_positions[channel];
  const Vec3& ref = m.reference_point();
  const double proj = n[0] * (mic[0] - ref[0]) + n[1] * (mic[1] - ref[1]) + n[2] * (mic[2] - ref[2]);
  const double f = freqs[k];
  return std::polar(1.0, -2.0 * kPi * f * (m.tau + proj / m.speed_of_sound())) * decode(g1[0], g2[0], g3[0]) *
         decode(g1[channel + 1], g2[channel + 1], g3[channel + 1]);
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("nsteer_test_" + name)).string();
}

}  // namespace

TEST_CASE("head_decode closed forms") {
  const cplx a = head_decode(0.0, 0.0, 1.0);
  CHECK(a.real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(a.imag()) < 1e-15);
  const cplx b = head_decode(std::log(2.0), 0.0, 1.0);
  CHECK(b.real() == doctest::Approx(2.0).epsilon(1e-15));
  const cplx c = head_decode(0.0, 1.0, 0.0);
  CHECK(std::abs(c - cplx(0.0, -1.0)) < 1e-15);
  const cplx d = head_decode(0.3, 0.0, 0.0);
  CHECK(std::abs(d - cplx(std::exp(0.3), 0.0)) < 1e-15);
}

TEST_CASE("head_decode is invariant to positive scaling of the phase pair and has positive magnitude") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> s(1e-3, 1e3);
  for (int t = 0; t < 200; ++t) {
    const double g1 = u(rng), g2 = u(rng), g3 = u(rng), k = s(rng);
    const cplx a = head_decode(g1, g2, g3);
    const cplx b = head_decode(g1, k * g2, k * g3);
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
    CHECK(std::abs(a) > 0.0);
    CHECK(std::abs(std::abs(a) - std::exp(g1)) <= 1e-12 * std::exp(g1));
  }
}

TEST_CASE("siren_init is deterministic, seed dependent and bounded") {
  const SirenParams a = siren_init({4, 16, 3}, 30.0, 9);
  const SirenParams b = siren_init({4, 16, 3}, 30.0, 9);
  const SirenParams c = siren_init({4, 16, 3}, 30.0, 10);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK(a.values.size() == (4 + 1) * 16 + (16 + 1) * 3);
  const double first = 1.0 / 4.0;
  const double deeper = std::sqrt(6.0 / 16.0) / 30.0;
  for (std::size_t i = 0; i < 4 * 16; ++i) CHECK(std::abs(a.values[a.weight_offset(0) + i]) <= first);
  for (std::size_t i = 0; i < 16 * 3; ++i) CHECK(std::abs(a.values[a.weight_offset(1) + i]) <= deeper);
  for (std::size_t i = 0; i < 16; ++i) CHECK(a.values[a.bias_offset(0) + i] == 0.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.values[a.bias_offset(1) + i] == 0.0);

  CHECK_THROWS_AS(siren_init({4, 3}, 30.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(siren_init({4, 0, 3}, 30.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(siren_init({4, 8, 3}, 0.0, 0), std::invalid_argument);
}

TEST_CASE("head widths follow the channel count and frequency mode") {
  for (int mics : {1, 2, 5}) {
    ArrayGeometry g;
    for (int i = 0; i < mics; ++i) g.mic_positions.push_back({0.01 * i, 0.0, 0.0});
    for (int bins : {5, 17}) {
      const FrequencyAxis axis(16000.0, bins);
      for (Variant v : {Variant::Phase, Variant::MagThenPhase}) {
        const NeuralSteerer cf(tiny_config(v, FreqMode::Continuous), g, axis);
        const NeuralSteerer df(tiny_config(v, FreqMode::Discrete), g, axis);
        CHECK(cf.head_width() == 3 * (mics + 1));
        CHECK(df.head_width() == 3 * (mics + 1) * bins);
      }
    }
  }
}

TEST_CASE("zero network weights reduce the field to delay times far-field steering") {
  const ArrayGeometry g = small_array();
  const FrequencyAxis axis(16000.0, 9);
  for (Variant v : {Variant::Phase, Variant::MagThenPhase}) {
    for (FreqMode mode : {FreqMode::Continuous, FreqMode::Discrete}) {
      NeuralSteerer m(tiny_config(v, mode), g, axis);
      std::fill(m.main_net.values.begin(), m.main_net.values.end(), 0.0);
      std::fill(m.phase_net.values.begin(), m.phase_net.values.end(), 0.0);
      m.tau = 3.1e-4;
      const DoA doa{0.7, -0.2};
      const ModelOutput out = field_forward(m, doa, axis);
      for (int k = 0; k < axis.num_bins(); ++k) {
        const double f = axis.frequency(k);
        for (std::size_t i = 0; i < g.num_mics(); ++i) {
          const cplx want = std::polar(1.0, -2.0 * kPi * f * m.tau) * algebraic_steering(doa, f, i, g);
          CHECK(std::abs(out.h_hat(static_cast<Eigen::Index>(i), k) - want) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("reference-point microphones and zero delay leave only the network gains") {
  ArrayGeometry g;
  g.mic_positions = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
  const FrequencyAxis axis(16000.0, 9);
  const NeuralSteerer m(tiny_config(Variant::MagThenPhase, FreqMode::Continuous), g, axis);
  const ModelOutput out = field_forward(m, DoA{1.0, 0.4}, axis);
  for (int k = 0; k < axis.num_bins(); ++k) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(std::abs(out.h_hat(i, k) - out.g_air(k) * out.g_mic(i, k)) < 1e-13);
    }
  }
}

TEST_CASE("field_forward matches a straight-line re-implementation") {
  const ArrayGeometry g = small_array();
  const FrequencyAxis axis(16000.0, 9);
  for (Variant v : {Variant::Phase, Variant::MagThenPhase}) {
    for (FreqMode mode : {FreqMode::Continuous, FreqMode::Discrete}) {
      CAPTURE(to_string(v));
      CAPTURE(to_string(mode));
      NeuralSteerer m(tiny_config(v, mode), g, axis);
      m.tau = 1.7e-4;
      m.mic_positions[1][0] += 0.003;
      std::mt19937_64 rng(2);
      std::uniform_real_distribution<double> az(0.0, 2.0 * kPi), el(-1.2, 1.2);
      for (int t = 0; t < 5; ++t) {
        const DoA doa{az(rng), el(rng)};
        const std::vector<double> freqs = axis.frequencies();
        const ModelOutput out = field_forward(m, doa, axis);
        for (std::size_t k = 0; k < freqs.size(); ++k) {
          for (std::size_t i = 0; i < g.num_mics(); ++i) {
            const cplx want = naive_field(m, doa, freqs, k, i);
            const cplx got = out.h_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
          }
        }
      }
    }
  }
}

TEST_CASE("continuous-frequency models accept arbitrary frequencies, discrete ones only their axis") {
  const ArrayGeometry g = small_array();
  const FrequencyAxis axis(16000.0, 9);
  const NeuralSteerer cf(tiny_config(Variant::Phase, FreqMode::Continuous), g, axis);
  const std::vector<double> odd{123.0, 4567.0, 7999.0};
  const DoA doa{0.3, 0.1};
  const ModelOutput out = field_forward(cf, doa, std::span<const double>(odd));
  CHECK(out.h_hat.cols() == 3);
  for (std::size_t k = 0; k < odd.size(); ++k) {
    CHECK(std::abs(out.h_hat(0, static_cast<Eigen::Index>(k)) - naive_field(cf, doa, odd, k, 0)) < 1e-12);
  }
  const NeuralSteerer df(tiny_config(Variant::Phase, FreqMode::Discrete), g, axis);
  CHECK_THROWS_AS(field_forward(df, doa, std::span<const double>(odd)), std::invalid_argument);
  CHECK_THROWS_AS(field_forward(df, doa, FrequencyAxis(16000.0, 17)), std::invalid_argument);
}

TEST_CASE("the field is continuous across the azimuth seam") {
  const ArrayGeometry g = small_array();
  const FrequencyAxis axis(16000.0, 9);
  for (FreqMode mode : {FreqMode::Continuous, FreqMode::Discrete}) {
    const NeuralSteerer m(tiny_config(Variant::MagThenPhase, mode), g, axis);
    for (double el : {-0.8, 0.0, 0.5}) {
      const ModelOutput a = field_forward(m, DoA{1e-6, el}, axis);
      const ModelOutput b = field_forward(m, DoA{2.0 * kPi - 1e-6, el}, axis);
      CHECK((a.h_hat - b.h_hat).cwiseAbs().maxCoeff() < 1e-4);
    }
  }
}

TEST_CASE("pack and unpack are inverse and learning-rate scales cover the physical block") {
  const NeuralSteerer m(tiny_config(Variant::MagThenPhase, FreqMode::Discrete), small_array(), FrequencyAxis(16000.0, 5));
  NeuralSteerer n = m;
  Eigen::VectorXd p = m.pack();
  CHECK(p.size() == static_cast<Eigen::Index>(m.num_parameters()));
  p[static_cast<Eigen::Index>(m.tau_offset())] = 2e-3;
  p[static_cast<Eigen::Index>(m.mic_offset() + 4)] = 0.5;
  n.unpack(p);
  CHECK(n.tau == 2e-3);
  CHECK(n.mic_positions[1][1] == 0.5);
  CHECK(n.pack() == p);

  const Eigen::VectorXd s = m.learning_rate_scale();
  CHECK(s.head(static_cast<Eigen::Index>(m.tau_offset())).minCoeff() == 1.0);
  CHECK(s.tail(10).minCoeff() == doctest::Approx(0.1));
  CHECK(s.tail(10).maxCoeff() == doctest::Approx(0.1));

  SteererConfig frozen = tiny_config(Variant::Phase, FreqMode::Continuous);
  frozen.learn_geometry = false;
  const NeuralSteerer f(frozen, small_array(), FrequencyAxis(16000.0, 5));
  CHECK(f.learning_rate_scale().tail(10).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Adam: zero gradient, first step and schedule") {
  OptimizerState st = make_optimizer(1, 1e-3, 0.98);
  Eigen::VectorXd p(1);
  p << 0.25;
  optimizer_step(st, p, Eigen::VectorXd::Zero(1));
  CHECK(p[0] == 0.25);

  for (double g : {3.0, -0.02}) {
    OptimizerState s = make_optimizer(1, 1e-3, 0.98);
    Eigen::VectorXd q(1);
    q << 0.0;
    Eigen::VectorXd grad(1);
    grad << g;
    optimizer_step(s, q, grad);
    // Bias-corrected moments equal g and g^2 after one step.
    const double want = -1e-3 * g / (std::abs(g) + 1e-8);
    CHECK(q[0] == doctest::Approx(want).epsilon(1e-12));
  }

  OptimizerState s = make_optimizer(3, 1e-3, 0.98);
  for (int k = 0; k < 7; ++k) optimizer_end_epoch(s);
  CHECK(s.learning_rate() == doctest::Approx(1e-3 * std::pow(0.98, 7)).epsilon(1e-14));

  Eigen::VectorXd q = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(optimizer_step(s, q, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("learning-rate scales multiply the Adam step") {
  OptimizerState s = make_optimizer(2, 1e-3, 0.98);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2), scale(2);
  g << 1.0, 1.0;
  scale << 1.0, 0.1;
  optimizer_step(s, q, g, scale);
  CHECK(q[1] == doctest::Approx(0.1 * q[0]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  NeuralSteerer m(tiny_config(Variant::MagThenPhase, FreqMode::Continuous), small_array(), FrequencyAxis(16000.0, 9));
  m.tau = 1.234e-4;
  TrainingSnapshot snap;
  snap.optimizer = make_optimizer(m.num_parameters(), 1e-3, 0.98);
  snap.optimizer.first_moment.setConstant(0.5);
  snap.optimizer.step_count = 12;
  snap.optimizer.epoch = 4;
  snap.current_params = m.pack() * 1.5;
  snap.next_epoch = 4;
  snap.best_validation = 0.125;
  snap.best_epoch = 2;
  snap.epochs_without_improvement = 1;
  const std::string path = temp_path("ckpt_roundtrip.nst");
  save_checkpoint(path, m, &snap);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.model.pack() == m.pack());
  CHECK(c.model.config().variant == m.config().variant);
  CHECK(c.model.config().freq_mode == m.config().freq_mode);
  CHECK(c.model.axis() == m.axis());
  REQUIRE(c.training.has_value());
  CHECK(c.training->current_params == snap.current_params);
  CHECK(c.training->optimizer.first_moment == snap.optimizer.first_moment);
  CHECK(c.training->optimizer.step_count == 12);
  CHECK(c.training->best_epoch == 2);
  CHECK(c.training->best_validation == 0.125);

  save_checkpoint(path, m);
  CHECK_FALSE(load_checkpoint(path).training.has_value());
  std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const NeuralSteerer m(tiny_config(Variant::Phase, FreqMode::Discrete), small_array(), FrequencyAxis(16000.0, 5));
  const std::string path = temp_path("ckpt_corrupt.nst");
  save_checkpoint(path, m);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  write(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  write(bad);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  write(bytes + "extra");
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  write("");
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}
