// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace nsteer {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(Variant v) { return v == Variant::Phase ? "phase" : "mag_then_phase"; }
std::string to_string(FreqMode m) { return m == FreqMode::Continuous ? "cf" : "df"; }

Variant parse_variant(std::string_view s) {
  if (s == "phase") return Variant::Phase;
  if (s == "mag_then_phase") return Variant::MagThenPhase;
  throw std::invalid_argument("unknown model variant '" + std::string(s) + "' (phase|mag_then_phase)");
}

FreqMode parse_freq_mode(std::string_view s) {
  if (s == "cf") return FreqMode::Continuous;
  if (s == "df") return FreqMode::Discrete;
  throw std::invalid_argument("unknown frequency mode '" + std::string(s) + "' (cf|df)");
}

// ---------------------------------------------------------------------------
// SIREN

std::size_t siren_parameter_count(std::span<const int> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    n += static_cast<std::size_t>(sizes[l] + 1) * static_cast<std::size_t>(sizes[l + 1]);
  }
  return n;
}

std::size_t SirenParams::weight_offset(std::size_t layer) const {
  return siren_parameter_count(std::span<const int>(layer_sizes.data(), layer + 1));
}

std::size_t SirenParams::bias_offset(std::size_t layer) const {
  return weight_offset(layer) +
         static_cast<std::size_t>(layer_sizes[layer]) * static_cast<std::size_t>(layer_sizes[layer + 1]);
}

SirenParams siren_init(std::vector<int> layer_sizes, double omega0, std::uint64_t seed) {
  if (layer_sizes.size() < 3) throw std::invalid_argument("siren_init: need at least one hidden layer");
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("siren_init: layer sizes must be positive");
  }
  if (!(omega0 > 0.0)) throw std::invalid_argument("siren_init: omega0 must be positive");

  SirenParams net;
  net.layer_sizes = std::move(layer_sizes);
  net.omega0 = omega0;
  net.values.assign(siren_parameter_count(net.layer_sizes), 0.0);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double n_in = net.layer_sizes[l];
    const double bound = l == 0 ? 1.0 / n_in : std::sqrt(6.0 / n_in) / omega0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t w0 = net.weight_offset(l);
    const std::size_t count = static_cast<std::size_t>(net.layer_sizes[l]) * net.layer_sizes[l + 1];
    for (std::size_t i = 0; i < count; ++i) net.values[w0 + i] = dist(rng);
  }
  return net;
}

Eigen::MatrixXd siren_forward(const SirenParams& net, const Eigen::MatrixXd& x, SirenTrace* trace) {
  if (x.rows() != net.input_size()) throw std::invalid_argument("siren_forward: input width mismatch");
  const std::size_t layers = net.num_layers();
  if (trace) {
    trace->inputs.resize(layers);
    trace->slopes.resize(layers - 1);
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = net.layer_sizes[l];
    const int out = net.layer_sizes[l + 1];
    Eigen::Map<const RowMajorMatrix> w(net.values.data() + net.weight_offset(l), out, in);
    Eigen::Map<const Eigen::VectorXd> b(net.values.data() + net.bias_offset(l), out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    if (trace) trace->inputs[l] = a;
    if (l + 1 == layers) return z;
    const Eigen::ArrayXXd phase = net.omega0 * z.array();
    if (trace) trace->slopes[l] = net.omega0 * phase.cos();
    a = phase.sin().matrix();
  }
  return a;
}

Eigen::MatrixXd siren_backward(const SirenParams& net, const SirenTrace& trace, const Eigen::MatrixXd& dy,
                               std::span<double> grad) {
  const std::size_t layers = net.num_layers();
  Eigen::MatrixXd dz = dy;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = net.layer_sizes[l];
    const int out = net.layer_sizes[l + 1];
    if (l + 1 < layers) dz = dz.cwiseProduct(trace.slopes[l]);
    Eigen::Map<RowMajorMatrix> gw(grad.data() + net.weight_offset(l), out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + net.bias_offset(l), out);
    gw.noalias() += dz * trace.inputs[l].transpose();
    gb += dz.rowwise().sum();
    Eigen::Map<const RowMajorMatrix> w(net.values.data() + net.weight_offset(l), out, in);
    dz = w.transpose() * dz;
  }
  return dz;
}

// ---------------------------------------------------------------------------

cplx head_decode(double g1, double g2, double g3) {
  return std::polar(std::exp(g1), -std::atan2(g2, g3));
}

// ---------------------------------------------------------------------------

NeuralSteerer::NeuralSteerer(const SteererConfig& config, const ArrayGeometry& nominal, const FrequencyAxis& axis)
    : mic_positions(nominal.mic_positions),
      config_(config),
      axis_(axis),
      reference_point_(nominal.reference_point),
      speed_of_sound_(nominal.speed_of_sound) {
  nominal.validate();
  if (config.hidden.empty()) throw std::invalid_argument("neural steerer: main network needs hidden layers");
  const int components = static_cast<int>(num_components());
  const int input = config.freq_mode == FreqMode::Continuous ? 4 : 3;
  const int per_freq = config.freq_mode == FreqMode::Continuous ? 1 : axis.num_bins();

  std::vector<int> main_sizes{input};
  main_sizes.insert(main_sizes.end(), config.hidden.begin(), config.hidden.end());
  main_sizes.push_back(config.variant == Variant::Phase ? 3 * components * per_freq : components * per_freq);
  main_net = siren_init(main_sizes, config.omega0, config.seed);

  if (config.variant == Variant::MagThenPhase) {
    if (config.phase_hidden.empty()) throw std::invalid_argument("neural steerer: phase network needs hidden layers");
    std::vector<int> phase_sizes{input + components * per_freq};
    phase_sizes.insert(phase_sizes.end(), config.phase_hidden.begin(), config.phase_hidden.end());
    phase_sizes.push_back(2 * components * per_freq);
    // Distinct stream so the two nets do not share initial weights.
    phase_net = siren_init(phase_sizes, config.omega0, config.seed ^ 0x9e3779b97f4a7c15ULL);
  }
  if (head_width() != 3 * components * per_freq) throw std::logic_error("neural steerer: head width mismatch");
}

ArrayGeometry NeuralSteerer::geometry() const {
  return ArrayGeometry{mic_positions, reference_point_, speed_of_sound_};
}

int NeuralSteerer::main_output_width() const { return main_net.output_size(); }

int NeuralSteerer::head_width() const {
  if (config_.variant == Variant::Phase) return main_net.output_size();
  return main_net.output_size() + phase_net.output_size();
}

std::size_t NeuralSteerer::num_parameters() const {
  return main_net.values.size() + phase_net.values.size() + 1 + 3 * mic_positions.size();
}

Eigen::VectorXd NeuralSteerer::pack() const {
  Eigen::VectorXd p(static_cast<Eigen::Index>(num_parameters()));
  std::size_t o = 0;
  for (double v : main_net.values) p[static_cast<Eigen::Index>(o++)] = v;
  for (double v : phase_net.values) p[static_cast<Eigen::Index>(o++)] = v;
  p[static_cast<Eigen::Index>(o++)] = tau;
  for (const auto& m : mic_positions) {
    for (double v : m) p[static_cast<Eigen::Index>(o++)] = v;
  }
  return p;
}

void NeuralSteerer::unpack(const Eigen::VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != num_parameters()) {
    throw std::invalid_argument("neural steerer: packed parameter size mismatch");
  }
  std::size_t o = 0;
  for (double& v : main_net.values) v = p[static_cast<Eigen::Index>(o++)];
  for (double& v : phase_net.values) v = p[static_cast<Eigen::Index>(o++)];
  tau = p[static_cast<Eigen::Index>(o++)];
  for (auto& m : mic_positions) {
    for (double& v : m) v = p[static_cast<Eigen::Index>(o++)];
  }
}

Eigen::VectorXd NeuralSteerer::learning_rate_scale() const {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(num_parameters()));
  const double physical = config_.learn_geometry ? config_.physical_lr_scale : 0.0;
  s.tail(static_cast<Eigen::Index>(1 + 3 * mic_positions.size())).setConstant(physical);
  return s;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd encode_inputs(const NeuralSteerer& model, const Vec3& dir, std::span<const double> freqs) {
  if (model.config().freq_mode == FreqMode::Discrete) {
    Eigen::MatrixXd x(3, 1);
    x << dir[0], dir[1], dir[2];
    return x;
  }
  const auto k = static_cast<Eigen::Index>(freqs.size());
  Eigen::MatrixXd x(4, k);
  const double fs = model.axis().sample_rate_hz();
  for (Eigen::Index c = 0; c < k; ++c) {
    x(0, c) = dir[0];
    x(1, c) = dir[1];
    x(2, c) = dir[2];
    x(3, c) = 2.0 * freqs[static_cast<std::size_t>(c)] / fs - 1.0;
  }
  return x;
}

namespace {

void check_discrete_axis(const NeuralSteerer& model, std::span<const double> freqs) {
  const FrequencyAxis& axis = model.axis();
  bool ok = static_cast<int>(freqs.size()) == axis.num_bins();
  for (std::size_t k = 0; ok && k < freqs.size(); ++k) {
    ok = std::abs(freqs[k] - axis.frequency(static_cast<int>(k))) <= 1e-9 * axis.sample_rate_hz();
  }
  if (!ok) {
    throw std::invalid_argument("field_forward: discrete-frequency model can only be evaluated on its " +
                                std::to_string(axis.num_bins()) + "-bin training axis");
  }
}

// Row of the network output holding component c, frequency k, element t.
// Layouts: CF rows are indexed by component (columns are frequencies); DF rows
// enumerate (frequency, component) pairs in a single column.
struct HeadLayout {
  bool discrete;
  Eigen::Index components;

  Eigen::Index row(Eigen::Index c, Eigen::Index k, Eigen::Index t, Eigen::Index width) const {
    return discrete ? (k * components + c) * width + t : c * width + t;
  }
  Eigen::Index col(Eigen::Index k) const { return discrete ? 0 : k; }
};

}  // namespace

ModelOutput field_forward(const NeuralSteerer& model, const DoA& doa, std::span<const double> freqs,
                          FieldTrace* trace) {
  const bool discrete = model.config().freq_mode == FreqMode::Discrete;
  if (discrete) check_discrete_axis(model, freqs);

  const Vec3 dir = direction(doa);
  const auto comps = static_cast<Eigen::Index>(model.num_components());
  const auto nf = static_cast<Eigen::Index>(freqs.size());
  const HeadLayout layout{discrete, comps};

  FieldTrace local;
  FieldTrace& tr = trace ? *trace : local;
  tr.dir = dir;
  tr.freqs.assign(freqs.begin(), freqs.end());
  tr.g1.resize(comps, nf);
  tr.g2.resize(comps, nf);
  tr.g3.resize(comps, nf);

  const Eigen::MatrixXd x = encode_inputs(model, dir, freqs);
  const Eigen::MatrixXd y = siren_forward(model.main_net, x, &tr.main);

  if (model.config().variant == Variant::Phase) {
    for (Eigen::Index c = 0; c < comps; ++c) {
      for (Eigen::Index k = 0; k < nf; ++k) {
        tr.g1(c, k) = y(layout.row(c, k, 0, 3), layout.col(k));
        tr.g2(c, k) = y(layout.row(c, k, 1, 3), layout.col(k));
        tr.g3(c, k) = y(layout.row(c, k, 2, 3), layout.col(k));
      }
    }
  } else {
    Eigen::MatrixXd phase_in(x.rows() + y.rows(), x.cols());
    phase_in << x, y;
    const Eigen::MatrixXd p = siren_forward(model.phase_net, phase_in, &tr.phase);
    for (Eigen::Index c = 0; c < comps; ++c) {
      for (Eigen::Index k = 0; k < nf; ++k) {
        tr.g1(c, k) = y(layout.row(c, k, 0, 1), layout.col(k));
        tr.g2(c, k) = p(layout.row(c, k, 0, 2), layout.col(k));
        tr.g3(c, k) = p(layout.row(c, k, 1, 2), layout.col(k));
      }
    }
  }

  ModelOutput out;
  out.freqs = tr.freqs;
  const auto channels = comps - 1;
  out.g_air.resize(nf);
  out.g_mic.resize(channels, nf);
  out.h_hat.resize(channels, nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    const double f = freqs[static_cast<std::size_t>(k)];
    out.g_air(k) = head_decode(tr.g1(0, k), tr.g2(0, k), tr.g3(0, k));
    for (Eigen::Index i = 0; i < channels; ++i) {
      out.g_mic(i, k) = head_decode(tr.g1(i + 1, k), tr.g2(i + 1, k), tr.g3(i + 1, k));
      const cplx d = algebraic_steering(dir, f, model.mic_positions[static_cast<std::size_t>(i)],
                                        model.reference_point(), model.speed_of_sound());
      out.h_hat(i, k) = compose_steering(d, out.g_air(k), out.g_mic(i, k), model.tau, f);
    }
  }
  return out;
}

ModelOutput field_forward(const NeuralSteerer& model, const DoA& doa, const FrequencyAxis& axis, FieldTrace* trace) {
  const std::vector<double> f = axis.frequencies();
  return field_forward(model, doa, std::span<const double>(f), trace);
}

void field_backward(const NeuralSteerer& model, const FieldTrace& tr, const ModelOutput& out,
                    const Spectra& dh, std::span<double> grad) {
  if (grad.size() != model.num_parameters()) throw std::invalid_argument("field_backward: gradient size mismatch");
  const auto comps = static_cast<Eigen::Index>(model.num_components());
  const auto channels = comps - 1;
  const auto nf = static_cast<Eigen::Index>(tr.freqs.size());
  if (dh.rows() != channels || dh.cols() != nf) throw std::invalid_argument("field_backward: dh shape mismatch");
  const bool discrete = model.config().freq_mode == FreqMode::Discrete;
  const HeadLayout layout{discrete, comps};

  // h = exp(A + jB): A = g1_air + g1_mic, B = -phi_air - phi_mic - 2 pi f (tau + n.(m - r)/c).
  Eigen::MatrixXd d_g1 = Eigen::MatrixXd::Zero(comps, nf);
  Eigen::MatrixXd d_phi = Eigen::MatrixXd::Zero(comps, nf);
  double d_tau = 0.0;
  std::vector<Vec3> d_mic(static_cast<std::size_t>(channels), Vec3{0.0, 0.0, 0.0});
  const double c = model.speed_of_sound();
  for (Eigen::Index k = 0; k < nf; ++k) {
    const double f = tr.freqs[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < channels; ++i) {
      const cplx prod = std::conj(dh(i, k)) * out.h_hat(i, k);
      const double d_a = prod.real();   // dL/dA
      const double d_b = -prod.imag();  // dL/dB
      d_g1(0, k) += d_a;
      d_g1(i + 1, k) += d_a;
      d_phi(0, k) -= d_b;
      d_phi(i + 1, k) -= d_b;
      d_tau -= kTwoPi * f * d_b;
      auto& dm = d_mic[static_cast<std::size_t>(i)];
      for (int a = 0; a < 3; ++a) dm[a] -= kTwoPi * f / c * d_b * tr.dir[a];
    }
  }

  // phi = atan2(g2, g3)
  Eigen::MatrixXd d_g2(comps, nf), d_g3(comps, nf);
  for (Eigen::Index cc = 0; cc < comps; ++cc) {
    for (Eigen::Index k = 0; k < nf; ++k) {
      const double y = tr.g2(cc, k);
      const double x = tr.g3(cc, k);
      const double r2 = x * x + y * y;
      if (r2 > 0.0) {
        d_g2(cc, k) = d_phi(cc, k) * x / r2;
        d_g3(cc, k) = -d_phi(cc, k) * y / r2;
      } else {
        d_g2(cc, k) = 0.0;
        d_g3(cc, k) = 0.0;
      }
    }
  }

  const Eigen::Index cols = discrete ? 1 : nf;
  Eigen::MatrixXd dy = Eigen::MatrixXd::Zero(model.main_net.output_size(), cols);
  if (model.config().variant == Variant::Phase) {
    for (Eigen::Index cc = 0; cc < comps; ++cc) {
      for (Eigen::Index k = 0; k < nf; ++k) {
        dy(layout.row(cc, k, 0, 3), layout.col(k)) = d_g1(cc, k);
        dy(layout.row(cc, k, 1, 3), layout.col(k)) = d_g2(cc, k);
        dy(layout.row(cc, k, 2, 3), layout.col(k)) = d_g3(cc, k);
      }
    }
  } else {
    Eigen::MatrixXd dp(model.phase_net.output_size(), cols);
    for (Eigen::Index cc = 0; cc < comps; ++cc) {
      for (Eigen::Index k = 0; k < nf; ++k) {
        dy(layout.row(cc, k, 0, 1), layout.col(k)) = d_g1(cc, k);
        dp(layout.row(cc, k, 0, 2), layout.col(k)) = d_g2(cc, k);
        dp(layout.row(cc, k, 1, 2), layout.col(k)) = d_g3(cc, k);
      }
    }
    const Eigen::MatrixXd dx =
        siren_backward(model.phase_net, tr.phase, dp, grad.subspan(model.phase_net_offset(), model.phase_net.values.size()));
    // The phase net sees [encoded coords; magnitudes]; route the magnitude part back.
    if (!model.config().detach_magnitude_condition) dy += dx.bottomRows(dy.rows());
  }
  siren_backward(model.main_net, tr.main, dy, grad.subspan(0, model.main_net.values.size()));

  grad[model.tau_offset()] += d_tau;
  for (std::size_t i = 0; i < d_mic.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) grad[model.mic_offset() + 3 * i + a] += d_mic[i][a];
  }
}

// ---------------------------------------------------------------------------

double OptimizerState::learning_rate() const {
  return initial_learning_rate * std::pow(decay_per_epoch, static_cast<double>(epoch));
}

OptimizerState make_optimizer(std::size_t n, double lr0, double decay_per_epoch) {
  if (!(lr0 > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
  if (!(decay_per_epoch > 0.0)) throw std::invalid_argument("optimizer: decay must be positive");
  OptimizerState s;
  s.first_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.second_moment = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  s.initial_learning_rate = lr0;
  s.decay_per_epoch = decay_per_epoch;
  return s;
}

void optimizer_step(OptimizerState& s, Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                    const Eigen::VectorXd& lr_scale) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size() ||
      (lr_scale.size() != 0 && lr_scale.size() != params.size())) {
    throw std::invalid_argument("optimizer_step: shape mismatch");
  }
  ++s.step_count;
  s.first_moment = s.beta1 * s.first_moment + (1.0 - s.beta1) * grads;
  s.second_moment = s.beta2 * s.second_moment + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double t = static_cast<double>(s.step_count);
  const double c1 = 1.0 - std::pow(s.beta1, t);
  const double c2 = 1.0 - std::pow(s.beta2, t);
  const double lr = s.learning_rate();
  Eigen::ArrayXd update =
      (s.first_moment.array() / c1) / ((s.second_moment.array() / c2).sqrt() + s.epsilon);
  if (lr_scale.size() != 0) update *= lr_scale.array();
  params.array() -= lr * update;
}

void optimizer_end_epoch(OptimizerState& s) { ++s.epoch; }

}  // namespace nsteer
