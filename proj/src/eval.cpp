// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "nsteer/io.hpp"

namespace nsteer {

double rmse_time(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size() || est.empty()) throw std::invalid_argument("rmse_time: length mismatch");
  double s = 0.0;
  for (std::size_t n = 0; n < est.size(); ++n) s += (est[n] - ref[n]) * (est[n] - ref[n]);
  return std::sqrt(s / static_cast<double>(est.size()));
}

double rmse_time(const TimeFilter& est, const TimeFilter& ref) { return rmse_time(est.samples, ref.samples); }

double cosine_distance_time(std::span<const double> est, std::span<const double> ref, bool* zero_norm) {
  if (est.size() != ref.size()) throw std::invalid_argument("cosine_distance_time: length mismatch");
  double dot = 0.0, ne = 0.0, nr = 0.0;
  for (std::size_t n = 0; n < est.size(); ++n) {
    dot += est[n] * ref[n];
    ne += est[n] * est[n];
    nr += ref[n] * ref[n];
  }
  if (ne == 0.0 || nr == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 1.0;
  }
  if (zero_norm) *zero_norm = false;
  return std::clamp(1.0 - dot / (std::sqrt(ne) * std::sqrt(nr)), 0.0, 2.0);
}

double cosine_distance_time(const TimeFilter& est, const TimeFilter& ref, bool* zero_norm) {
  return cosine_distance_time(est.samples, ref.samples, zero_norm);
}

Band default_lsd_band(const FrequencyAxis& axis) { return {40.0, 0.95 * axis.nyquist()}; }

double lsd_db(std::span<const cplx> est, std::span<const cplx> ref, const FrequencyAxis& axis,
              std::optional<Band> band) {
  if (est.size() != ref.size() || static_cast<int>(est.size()) != axis.num_bins()) {
    throw std::invalid_argument("lsd_db: spectra do not match the axis");
  }
  constexpr double eps = 1e-8;
  double s = 0.0;
  int count = 0;
  for (int k = 0; k < axis.num_bins(); ++k) {
    const double f = axis.frequency(k);
    if (band && (f < band->first || f > band->second)) continue;
    const double d = 20.0 * std::log10(std::abs(est[static_cast<std::size_t>(k)]) + eps) -
                     20.0 * std::log10(std::abs(ref[static_cast<std::size_t>(k)]) + eps);
    s += d * d;
    ++count;
  }
  if (count == 0) throw std::invalid_argument("lsd_db: band contains no frequency bins");
  return std::sqrt(s / count);
}

// ---------------------------------------------------------------------------

Estimator model_estimator(const NeuralSteerer& model, std::string name) {
  if (name.empty()) name = "siren_" + to_string(model.config().variant) + "_" + to_string(model.config().freq_mode);
  const bool any_axis = model.config().freq_mode == FreqMode::Continuous;
  return {std::move(name), any_axis, [model](const DoA& doa, const FrequencyAxis& axis) {
            return field_forward(model, doa, axis).h_hat;
          }};
}

Estimator scf_estimator(ScfModel model, std::string name) {
  return {std::move(name), false, [m = std::move(model)](const DoA& doa, const FrequencyAxis& axis) {
            if (!(axis == m.axis)) throw std::invalid_argument("scf baseline only covers its measurement axis");
            return scf_interpolate(m, doa).spectra;
          }};
}

Estimator nearest_estimator(const GridMeasurementSet& set, std::vector<int> nodes, std::string name) {
  return {std::move(name), false, [&set, n = std::move(nodes)](const DoA& doa, const FrequencyAxis& axis) {
            if (!(axis == set.axis)) throw std::invalid_argument("nearest baseline only covers its measurement axis");
            return nearest_interpolate(set, n, doa);
          }};
}

Estimator oracle_estimator(const GridMeasurementSet& set, std::string name) {
  return {std::move(name), true, [&set](const DoA& doa, const FrequencyAxis& axis) -> Spectra {
            if (axis == set.axis) {
              for (int n = 0; n < set.num_nodes(); ++n) {
                const DoA d = set.node_doa(n);
                if (d.azimuth == doa.azimuth && d.elevation == doa.elevation) return set.node_spectra(n);
              }
            }
            if (!set.scene) throw std::invalid_argument("oracle: off-grid query on a set without a scene description");
            return synthetic_response(*set.scene, doa, axis);
          }};
}

// ---------------------------------------------------------------------------

namespace {

std::span<const cplx> row(const Spectra& s, Eigen::Index i) {
  return {s.data() + i * s.cols(), static_cast<std::size_t>(s.cols())};
}

}  // namespace

MetricReport evaluate_nodes(const Estimator& est, const GridMeasurementSet& set, std::span<const int> nodes,
                            const std::string& label, const FrequencyAxis& axis,
                            const std::function<Spectra(int node)>& reference, std::optional<Band> band,
                            Execution exec) {
  const int channels = set.num_channels();
  const auto count = static_cast<std::ptrdiff_t>(nodes.size());
  std::vector<NodeMetrics> rows(nodes.size() * static_cast<std::size_t>(channels));

  auto work = [&](std::ptrdiff_t q) {
    const int node = nodes[static_cast<std::size_t>(q)];
    const Spectra e = est.query(set.node_doa(node), axis);
    const Spectra r = reference(node);
    for (int i = 0; i < channels; ++i) {
      const auto er = row(e, i);
      const auto rr = row(r, i);
      const std::vector<double> et = idft_real(er);
      const std::vector<double> rt = idft_real(rr);
      NodeMetrics& m = rows[static_cast<std::size_t>(q) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(i)];
      m.node = node;
      m.channel = i;
      m.rmse = rmse_time(et, rt);
      m.cosine = cosine_distance_time(et, rt, &m.zero_norm);
      m.lsd = lsd_db(er, rr, axis, band);
    }
  };

  if (exec == Execution::Parallel) {
    // Exceptions must not escape an OpenMP region.
    std::vector<std::exception_ptr> errors(nodes.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t q = 0; q < count; ++q) {
      try {
        work(q);
      } catch (...) {
        errors[static_cast<std::size_t>(q)] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::ptrdiff_t q = 0; q < count; ++q) work(q);
  }

  MetricReport rep;
  rep.label = label;
  rep.estimator = est.name;
  rep.count = static_cast<int>(nodes.size());
  rep.channel_rmse.assign(static_cast<std::size_t>(channels), 0.0);
  rep.channel_cosine.assign(static_cast<std::size_t>(channels), 0.0);
  rep.channel_lsd.assign(static_cast<std::size_t>(channels), 0.0);
  for (const auto& m : rows) {
    const auto c = static_cast<std::size_t>(m.channel);
    rep.channel_rmse[c] += m.rmse;
    rep.channel_cosine[c] += m.cosine;
    rep.channel_lsd[c] += m.lsd;
    rep.zero_norm_flags += m.zero_norm ? 1 : 0;
  }
  if (rep.count > 0) {
    for (int c = 0; c < channels; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      rep.channel_rmse[cc] /= rep.count;
      rep.channel_cosine[cc] /= rep.count;
      rep.channel_lsd[cc] /= rep.count;
    }
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    rep.rmse_time = mean(rep.channel_rmse);
    rep.cosine_distance_time = mean(rep.channel_cosine);
    rep.lsd_db = mean(rep.channel_lsd);
  }
  rep.rows = std::move(rows);
  return rep;
}

MetricReport evaluate_nodes(const Estimator& est, const GridMeasurementSet& set, std::span<const int> nodes,
                            const std::string& label, Execution exec) {
  return evaluate_nodes(
      est, set, nodes, label, set.axis, [&set](int node) { return set.node_spectra(node); },
      default_lsd_band(set.axis), exec);
}

ProtocolKind parse_protocol(const std::string& s) {
  if (s == "interpolation") return ProtocolKind::Interpolation;
  if (s == "random_fraction") return ProtocolKind::RandomFraction;
  if (s == "freq_superres") return ProtocolKind::FreqSuperres;
  throw std::invalid_argument("unknown protocol '" + s + "' (interpolation|random_fraction|freq_superres)");
}

std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::Interpolation: return "interpolation";
    case ProtocolKind::RandomFraction: return "random_fraction";
    case ProtocolKind::FreqSuperres: return "freq_superres";
  }
  return "unknown";
}

std::vector<MetricReport> run_protocol(const Estimator& est, const GridMeasurementSet& set, const Split& split,
                                       const Protocol& protocol, Execution exec) {
  std::vector<MetricReport> out;
  if (protocol.kind != ProtocolKind::FreqSuperres) {
    out.push_back(evaluate_nodes(est, set, split.test, "held_out", exec));
    if (protocol.include_full_grid) {
      std::vector<int> all(static_cast<std::size_t>(set.num_nodes()));
      std::iota(all.begin(), all.end(), 0);
      out.push_back(evaluate_nodes(est, set, all, "full_grid", exec));
    }
    return out;
  }

  if (!est.any_axis) {
    throw std::invalid_argument("freq_superres needs a continuous-frequency estimator; '" + est.name +
                                "' only covers its training axis");
  }
  if (!set.scene) throw std::invalid_argument("freq_superres needs a synthetic dataset with a scene description");
  if (protocol.superres_factor < 1) throw std::invalid_argument("freq_superres: factor must be >= 1");
  SyntheticSceneConfig clean = *set.scene;
  clean.noise_std = 0.0;

  std::vector<int> all(static_cast<std::size_t>(set.num_nodes()));
  std::iota(all.begin(), all.end(), 0);
  const FrequencyAxis train_axis = set.axis;
  const FrequencyAxis target(set.axis.sample_rate_hz(), protocol.superres_factor * (set.num_bins() - 1) + 1);

  auto edge_band = [](const FrequencyAxis& axis) {
    const int m = std::max(1, static_cast<int>(std::ceil(0.05 * axis.num_bins())));
    return Band{axis.frequency(axis.num_bins() - m), axis.nyquist()};
  };
  auto truth_on = [&](const FrequencyAxis& axis) {
    return [&, axis](int node) { return synthetic_response(clean, set.node_doa(node), axis); };
  };
  out.push_back(evaluate_nodes(est, set, all, "train_res_in_band", train_axis, truth_on(train_axis),
                               default_lsd_band(train_axis), exec));
  out.push_back(evaluate_nodes(est, set, all, "target_in_band", target, truth_on(target), default_lsd_band(target), exec));
  out.push_back(evaluate_nodes(est, set, all, "target_edge_band", target, truth_on(target), edge_band(target), exec));
  out.push_back(evaluate_nodes(est, set, all, "train_res_edge_band", train_axis, truth_on(train_axis),
                               edge_band(train_axis), exec));
  return out;
}

void write_metrics_csv(const std::string& path, std::span<const MetricReport> reports) {
  std::string s = "estimator,split,node,channel,rmse_time,cosine_distance_time,lsd_db,zero_norm\n";
  char buf[256];
  for (const auto& r : reports) {
    for (const auto& m : r.rows) {
      std::snprintf(buf, sizeof buf, ",%d,%d,%.17g,%.17g,%.17g,%d\n", m.node, m.channel, m.rmse, m.cosine, m.lsd,
                    m.zero_norm ? 1 : 0);
      s += r.estimator + "," + r.label + buf;
    }
  }
  write_file_atomic(path, s);
}

void write_metrics_json(const std::string& path, std::span<const MetricReport> reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) {
    j.push_back({{"estimator", r.estimator},
                 {"split", r.label},
                 {"count", r.count},
                 {"rmse_time", r.rmse_time},
                 {"cosine_distance_time", r.cosine_distance_time},
                 {"lsd_db", r.lsd_db},
                 {"channel_rmse", r.channel_rmse},
                 {"channel_cosine", r.channel_cosine},
                 {"channel_lsd", r.channel_lsd},
                 {"zero_norm_flags", r.zero_norm_flags}});
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace nsteer
