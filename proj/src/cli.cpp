// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "nsteer/errors.hpp"
#include "nsteer/io.hpp"

namespace nsteer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a number");
  }
  return x;
}

std::int64_t parse_integer(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
  }
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

const std::vector<std::pair<std::string, std::string>>& RunConfig::known_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      // dataset and synthetic scene
      {"dataset", "dataset.nsv"},
      {"num_azimuths", "24"},
      {"num_elevations", "9"},
      {"num_bins", "65"},
      {"sample_rate_hz", "16000"},
      {"tau_true", "0.001"},
      {"air_alpha", "0.3"},
      {"directivity_order", "1"},
      {"directivity_tilt", "-0.3"},
      {"noise_std", "0"},
      {"mic_jitter", "0"},
      {"scene_seed", "0"},
      // split
      {"split", "regular_x2"},
      {"split_fraction", "0.5"},
      {"split_custom", ""},
      {"validation_fraction", "0.2"},
      {"split_seed", "0"},
      // model
      {"variant", "mag_then_phase"},
      {"freq_mode", "df"},
      {"hidden", "64,64,64,64"},
      {"phase_hidden", "64,64"},
      {"omega0", "30"},
      {"model_seed", "0"},
      {"learn_geometry", "true"},
      {"physical_lr_scale", "0.1"},
      {"detach_magnitudes", "true"},
      // training
      {"epochs_max", "300"},
      {"batch_size", "18"},
      {"lr0", "0.001"},
      {"lr_decay", "0.98"},
      {"patience", "20"},
      {"lambda1", "10"},
      {"lambda2", "10"},
      {"lambda_causal", "1"},
      {"epsilon_freq", "1"},
      {"eps_log", "1e-8"},
      {"freq_subset_size", "16"},
      {"train_seed", "0"},
      {"grad_clip", "10"},
      {"checkpoint", "model.nst"},
      {"train_log", "train_log.csv"},
      {"log_every", "0"},
      {"resume", "false"},
      // evaluation
      {"protocol", "interpolation"},
      {"superres_factor", "2"},
      {"estimators", "model,scf,nearest"},
      {"scf_interpolation", "real_imag"},
      {"include_full_grid", "true"},
      {"metrics_csv", "metrics.csv"},
      {"metrics_json", "metrics.json"},
      // interp
      {"interp_doas", ""},
      {"interp_azimuths", "0"},
      {"interp_elevations", "0"},
      {"interp_bins", "0"},
      {"interp_csv", "interp.csv"},
      {"interp_wav_dir", ""},
      // export
      {"export_kinds", "fraction,resolution"},
      {"export_fractions", "0.25,0.5,0.75"},
      {"export_seeds", "0,1,2"},
      {"export_factors", "0.5,1,2,4"},
      {"export_checkpoint", ""},
      {"export_fraction_csv", "fraction_sweep.csv"},
      {"export_resolution_csv", "resolution_sweep.csv"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& [k, v] : known_keys()) values_[k] = v;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  it->second = value;
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

void RunConfig::load_string(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    try {
      if (t.find('=') == std::string::npos) throw ConfigError("expected 'key = value'");
      set(t);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  load_string(ss.str(), path);
}

std::string RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, str(key)); }

std::int64_t RunConfig::integer(const std::string& key) const { return parse_integer(key, str(key)); }

std::uint64_t RunConfig::seed(const std::string& key) const {
  const std::int64_t v = integer(key);
  if (v < 0) throw ConfigError("key '" + key + "': seeds must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool RunConfig::flag(const std::string& key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> RunConfig::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& s : split_on(str(key), ',')) out.push_back(static_cast<int>(parse_integer(key, s)));
  return out;
}

std::vector<double> RunConfig::real_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split_on(str(key), ',')) out.push_back(parse_real(key, s));
  return out;
}

SyntheticSceneConfig RunConfig::scene() const {
  SyntheticSceneConfig s;
  s.tau_true = real("tau_true");
  s.air_alpha = real("air_alpha");
  s.directivity_order = static_cast<int>(integer("directivity_order"));
  s.directivity_tilt = real("directivity_tilt");
  s.noise_std = real("noise_std");
  s.mic_jitter = real("mic_jitter");
  s.seed = seed("scene_seed");
  s.validate();
  return s;
}

FrequencyAxis RunConfig::axis() const {
  return FrequencyAxis(real("sample_rate_hz"), static_cast<int>(integer("num_bins")));
}

SplitSpec RunConfig::split() const {
  SplitSpec s;
  s.mode = parse_split_mode(str("split"));
  s.fraction = real("split_fraction");
  s.custom_train = int_list("split_custom");
  s.validation_fraction = real("validation_fraction");
  s.seed = seed("split_seed");
  return s;
}

SteererConfig RunConfig::steerer() const {
  SteererConfig c;
  c.variant = parse_variant(str("variant"));
  c.freq_mode = parse_freq_mode(str("freq_mode"));
  c.hidden = int_list("hidden");
  c.phase_hidden = int_list("phase_hidden");
  c.omega0 = real("omega0");
  c.seed = seed("model_seed");
  c.learn_geometry = flag("learn_geometry");
  c.physical_lr_scale = real("physical_lr_scale");
  c.detach_magnitude_condition = flag("detach_magnitudes");
  return c;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.epochs_max = integer("epochs_max");
  t.batch_size = static_cast<int>(integer("batch_size"));
  t.lr0 = real("lr0");
  t.lr_decay = real("lr_decay");
  t.patience = static_cast<int>(integer("patience"));
  t.weights.lambda1 = real("lambda1");
  t.weights.lambda2 = real("lambda2");
  t.weights.lambda_causal = real("lambda_causal");
  t.weights.epsilon_freq = real("epsilon_freq");
  t.weights.eps_log = real("eps_log");
  t.freq_subset_size = static_cast<int>(integer("freq_subset_size"));
  t.seed = seed("train_seed");
  t.grad_clip = real("grad_clip");
  t.checkpoint_path = str("checkpoint");
  t.log_path = str("train_log");
  t.log_every = static_cast<int>(integer("log_every"));
  t.execution = execution_from_env();
  t.validate();
  return t;
}

Protocol RunConfig::protocol() const {
  Protocol p;
  p.kind = parse_protocol(str("protocol"));
  p.fraction = real("split_fraction");
  p.superres_factor = static_cast<int>(integer("superres_factor"));
  p.include_full_grid = flag("include_full_grid");
  return p;
}

Execution RunConfig::execution_from_env() {
  const char* v = std::getenv("NSTEER_THREADS");
  if (!v || !*v) return Execution::Parallel;
  const std::int64_t n = parse_integer("NSTEER_THREADS", v);
  if (n < 0) throw ConfigError("NSTEER_THREADS must be >= 0");
  if (n == 0) {
    omp_set_num_threads(1);
    return Execution::Serial;
  }
  omp_set_num_threads(static_cast<int>(n));
  return Execution::Parallel;
}

// ---------------------------------------------------------------------------
// Experiments

TrainResult train_from_config(const RunConfig& cfg, const GridMeasurementSet& set, const Split& split,
                              std::int64_t seed) {
  SteererConfig sc = cfg.steerer();
  TrainConfig tc = cfg.training();
  if (seed >= 0) {
    sc.seed = static_cast<std::uint64_t>(seed);
    tc.seed = static_cast<std::uint64_t>(seed);
  }
  tc.checkpoint_path.clear();
  tc.log_path.clear();
  const NeuralSteerer model(sc, set.geometry, set.axis);
  return train(model, set, split, tc);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<SweepRow> fraction_sweep(const RunConfig& cfg, const GridMeasurementSet& set,
                                     const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                     Execution exec) {
  if (fractions.empty()) throw ConfigError("fraction sweep: no fractions given");
  if (seeds.empty()) throw ConfigError("fraction sweep: no seeds given");
  std::vector<SweepRow> rows;
  for (double fr : fractions) {
    std::map<std::pair<std::string, std::string>, std::vector<double>> values;
    for (std::uint64_t s : seeds) {
      SplitSpec spec = cfg.split();
      spec.mode = SplitMode::RandomFraction;
      spec.fraction = fr;
      spec.seed = s;
      const Split split = make_split(set, spec);
      const TrainResult tr = train_from_config(cfg, set, split, static_cast<std::int64_t>(s));
      const std::vector<Estimator> ests = {model_estimator(tr.model, "siren"),
                                           nearest_estimator(set, split.seen(), "nearest")};
      for (const auto& e : ests) {
        const MetricReport r = evaluate_nodes(e, set, split.test, "held_out", exec);
        values[{e.name, "rmse_time"}].push_back(r.rmse_time);
        values[{e.name, "cosine_distance_time"}].push_back(r.cosine_distance_time);
        values[{e.name, "lsd_db"}].push_back(r.lsd_db);
      }
    }
    for (const auto& [key, v] : values) {
      SweepRow row;
      row.fraction = fr;
      row.model = key.first;
      row.metric = key.second;
      row.median = median(v);
      row.min = *std::min_element(v.begin(), v.end());
      row.max = *std::max_element(v.begin(), v.end());
      row.per_seed = v;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<ResolutionRow> resolution_sweep(const NeuralSteerer& model, const GridMeasurementSet& set,
                                            const std::vector<double>& factors, Execution exec) {
  if (factors.empty()) throw ConfigError("resolution sweep: no factors given");
  if (model.config().freq_mode != FreqMode::Continuous) {
    throw std::invalid_argument("resolution sweep needs a continuous-frequency (cf) model");
  }
  if (!set.scene) throw std::invalid_argument("resolution sweep needs a synthetic dataset with a scene description");
  SyntheticSceneConfig clean = *set.scene;
  clean.noise_std = 0.0;
  const Estimator est = model_estimator(model);
  std::vector<int> all(static_cast<std::size_t>(set.num_nodes()));
  std::iota(all.begin(), all.end(), 0);
  std::vector<ResolutionRow> rows;
  for (double f : factors) {
    const int bins = static_cast<int>(std::lround(f * (set.num_bins() - 1))) + 1;
    if (bins < 3) throw std::invalid_argument("resolution sweep: factor " + std::to_string(f) + " is too coarse");
    const FrequencyAxis axis(set.axis.sample_rate_hz(), bins);
    const int m = std::max(1, static_cast<int>(std::ceil(0.05 * bins)));
    const Band edge{axis.frequency(bins - m), axis.nyquist()};
    auto truth = [&](int node) { return synthetic_response(clean, set.node_doa(node), axis); };
    const double in_band =
        evaluate_nodes(est, set, all, "in_band", axis, truth, default_lsd_band(axis), exec).lsd_db;
    const double edge_band = evaluate_nodes(est, set, all, "edge_band", axis, truth, edge, exec).lsd_db;
    rows.push_back({f, bins, "in_band", in_band});
    rows.push_back({f, bins, "edge_band", edge_band});
  }
  return rows;
}

void write_wav_f32(const std::string& path, const std::vector<double>& samples, int sample_rate_hz) {
  std::string b;
  auto u32 = [&b](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [&b](std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>(v >> 8));
  };
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  b += "RIFF";
  u32(36 + data_bytes);
  b += "WAVEfmt ";
  u32(16);
  u16(3);  // IEEE float
  u16(1);
  u32(static_cast<std::uint32_t>(sample_rate_hz));
  u32(static_cast<std::uint32_t>(sample_rate_hz) * 4);
  u16(4);
  u16(32);
  b += "data";
  u32(data_bytes);
  for (double s : samples) {
    const auto f = static_cast<float>(s);
    std::uint32_t bits = 0;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  write_file_atomic(path, b);
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const GridMeasurementSet set =
      generate_synthetic(cfg.scene(), static_cast<int>(cfg.integer("num_azimuths")),
                         static_cast<int>(cfg.integer("num_elevations")), cfg.axis());
  save_dataset(set, cfg.str("dataset"));
  out << "wrote " << cfg.str("dataset") << ": " << set.num_azimuths() << "x" << set.num_elevations() << "x"
      << set.num_channels() << "x" << set.num_bins() << " (azimuths x elevations x channels x bins)\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  const GridMeasurementSet set = load_dataset(cfg.str("dataset"));
  const Split split = make_split(set, cfg.split());
  TrainConfig tc = cfg.training();
  if (tc.checkpoint_path.empty()) throw ConfigError("key 'checkpoint' must name an output file");
  TrainResult r;
  if (cfg.flag("resume") && std::filesystem::exists(tc.checkpoint_path)) {
    // The resumed epochs are appended to the existing log.
    std::string previous;
    if (!tc.log_path.empty() && std::filesystem::exists(tc.log_path)) {
      std::ifstream f(tc.log_path, std::ios::binary);
      std::stringstream ss;
      ss << f.rdbuf();
      previous = ss.str();
    }
    const std::string log_path = tc.log_path;
    tc.log_path.clear();
    r = resume(tc.checkpoint_path, set, split, tc);
    if (!log_path.empty()) {
      write_file_atomic(log_path, previous.empty() ? training_log_csv(r.log) : previous + training_log_csv(r.log, false));
    }
  } else {
    const NeuralSteerer model(cfg.steerer(), set.geometry, set.axis);
    r = train(model, set, split, tc);
    if (!tc.log_path.empty() && r.log.empty()) write_training_log(tc.log_path, r.log);
  }
  save_checkpoint(tc.checkpoint_path, r.model, &r.snapshot);
  out << "trained " << r.log.size() << " epochs; best validation loss " << fmt(r.snapshot.best_validation)
      << " at epoch " << r.snapshot.best_epoch << (r.snapshot.stopped_early ? " (early stop)" : "") << "; wrote "
      << tc.checkpoint_path << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
  const GridMeasurementSet set = load_dataset(cfg.str("dataset"));
  const Split split = make_split(set, cfg.split());
  const Protocol protocol = cfg.protocol();
  const Execution exec = RunConfig::execution_from_env();
  if (protocol.kind == ProtocolKind::RandomFraction && cfg.split().mode != SplitMode::RandomFraction) {
    throw ConfigError("protocol random_fraction needs split = random");
  }
  if (protocol.kind == ProtocolKind::Interpolation && cfg.split().mode == SplitMode::RandomFraction) {
    throw ConfigError("protocol interpolation needs split = regular_x2 or custom");
  }
  std::vector<Estimator> ests;
  std::optional<NeuralSteerer> model;
  for (const auto& name : split_on(cfg.str("estimators"), ',')) {
    if (name == "model") {
      model = load_checkpoint(cfg.str("checkpoint")).model;
      if (!(model->axis() == set.axis) || model->num_channels() != static_cast<std::size_t>(set.num_channels())) {
        throw FormatError("checkpoint does not match the dataset shape");
      }
      ests.push_back(model_estimator(*model));
    } else if (name == "scf") {
      ests.push_back(scf_estimator(scf_fit(set, split.seen(), parse_scf_interpolation(cfg.str("scf_interpolation")))));
    } else if (name == "nearest") {
      ests.push_back(nearest_estimator(set, split.seen()));
    } else if (name == "oracle") {
      ests.push_back(oracle_estimator(set));
    } else {
      throw ConfigError("key 'estimators': unknown estimator '" + name + "' (model|scf|nearest|oracle)");
    }
  }
  if (ests.empty()) throw ConfigError("key 'estimators' is empty");
  std::vector<MetricReport> reports;
  for (const auto& e : ests) {
    auto r = run_protocol(e, set, split, protocol, exec);
    reports.insert(reports.end(), r.begin(), r.end());
  }
  write_metrics_csv(cfg.str("metrics_csv"), reports);
  write_metrics_json(cfg.str("metrics_json"), reports);
  out << std::left << std::setw(28) << "estimator" << std::setw(22) << "split" << std::setw(8) << "nodes"
      << std::setw(14) << "rmse_time" << std::setw(14) << "cosine_dist" << "lsd_db\n";
  for (const auto& r : reports) {
    out << std::setw(28) << r.estimator << std::setw(22) << r.label << std::setw(8) << r.count << std::setw(14)
        << r.rmse_time << std::setw(14) << r.cosine_distance_time << r.lsd_db << "\n";
  }
}

std::vector<DoA> interp_doas(const RunConfig& cfg) {
  std::vector<DoA> doas;
  const double deg = kPi / 180.0;
  for (const auto& item : split_on(cfg.str("interp_doas"), ';')) {
    const auto parts = split_on(item, ',');
    if (parts.size() != 2) throw ConfigError("key 'interp_doas': expected 'az,el;az,el' in degrees, got '" + item + "'");
    doas.push_back({parse_real("interp_doas", parts[0]) * deg, parse_real("interp_doas", parts[1]) * deg});
  }
  const auto na = cfg.integer("interp_azimuths");
  const auto ne = cfg.integer("interp_elevations");
  if (na > 0 || ne > 0) {
    if (na < 1 || ne < 1) throw ConfigError("interp_azimuths and interp_elevations must both be positive");
    for (double az : default_azimuths(static_cast<int>(na))) {
      for (double el : default_elevations(static_cast<int>(ne))) doas.push_back({az, el});
    }
  }
  if (doas.empty()) throw ConfigError("no query directions: set interp_doas or interp_azimuths/interp_elevations");
  return doas;
}

void cmd_interp(const RunConfig& cfg, std::ostream& out) {
  const NeuralSteerer model = load_checkpoint(cfg.str("checkpoint")).model;
  const auto bins = cfg.integer("interp_bins");
  const FrequencyAxis axis = bins > 0 ? FrequencyAxis(model.axis().sample_rate_hz(), static_cast<int>(bins))
                                      : model.axis();
  if (model.config().freq_mode == FreqMode::Discrete && !(axis == model.axis())) {
    throw std::invalid_argument("a df model can only be queried on its training axis (F = " +
                                std::to_string(model.axis().num_bins()) + ")");
  }
  const std::vector<DoA> doas = interp_doas(cfg);

  std::optional<GridMeasurementSet> set;
  if (std::filesystem::exists(cfg.str("dataset"))) set = load_dataset(cfg.str("dataset"));

  const std::string wav_dir = cfg.str("interp_wav_dir");
  if (!wav_dir.empty()) std::filesystem::create_directories(wav_dir);
  std::string csv = "doa_index,azimuth_deg,elevation_deg,channel,frequency_hz,re,im\n";
  double max_residual = -1.0;
  int matched = 0;
  for (std::size_t d = 0; d < doas.size(); ++d) {
    const Spectra h = field_forward(model, doas[d], axis).h_hat;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      for (Eigen::Index k = 0; k < h.cols(); ++k) {
        csv += std::to_string(d) + "," + fmt(doas[d].azimuth * 180.0 / kPi) + "," +
               fmt(doas[d].elevation * 180.0 / kPi) + "," + std::to_string(i) + "," +
               fmt(axis.frequency(static_cast<int>(k))) + "," + fmt(h(i, k).real()) + "," + fmt(h(i, k).imag()) +
               "\n";
      }
      if (!wav_dir.empty()) {
        const std::vector<double> t = idft_real(std::span<const cplx>(h.data() + i * h.cols(),
                                                                      static_cast<std::size_t>(h.cols())));
        write_wav_f32((std::filesystem::path(wav_dir) / ("doa" + std::to_string(d) + "_ch" + std::to_string(i) +
                                                         ".wav"))
                          .string(),
                      t, static_cast<int>(std::lround(axis.sample_rate_hz())));
      }
    }
    if (set && axis == set->axis) {
      for (int n = 0; n < set->num_nodes(); ++n) {
        const DoA g = set->node_doa(n);
        if (std::abs(g.azimuth - doas[d].azimuth) < 1e-9 && std::abs(g.elevation - doas[d].elevation) < 1e-9) {
          max_residual = std::max(max_residual, (h - set->node_spectra(n)).cwiseAbs().maxCoeff());
          ++matched;
          break;
        }
      }
    }
  }
  write_file_atomic(cfg.str("interp_csv"), csv);
  out << "wrote " << cfg.str("interp_csv") << ": " << doas.size() << " directions x " << model.num_channels()
      << " channels x " << axis.num_bins() << " bins\n";
  if (matched > 0) {
    out << "grid-node residual: " << matched << " queries on dataset nodes, max |h_hat - h| = " << max_residual
        << "\n";
  }
}

void cmd_export(const RunConfig& cfg, std::ostream& out) {
  const GridMeasurementSet set = load_dataset(cfg.str("dataset"));
  const Execution exec = RunConfig::execution_from_env();
  const auto kinds = split_on(cfg.str("export_kinds"), ',');
  if (kinds.empty()) throw ConfigError("key 'export_kinds' is empty");
  for (const auto& kind : kinds) {
    if (kind == "fraction") {
      std::vector<std::uint64_t> seeds;
      for (int s : cfg.int_list("export_seeds")) {
        if (s < 0) throw ConfigError("key 'export_seeds': seeds must be non-negative");
        seeds.push_back(static_cast<std::uint64_t>(s));
      }
      const auto rows = fraction_sweep(cfg, set, cfg.real_list("export_fractions"), seeds, exec);
      std::string csv = "fraction,model,metric,median,min,max,num_seeds\n";
      for (const auto& r : rows) {
        csv += fmt(r.fraction) + "," + r.model + "," + r.metric + "," + fmt(r.median) + "," + fmt(r.min) + "," +
               fmt(r.max) + "," + std::to_string(r.per_seed.size()) + "\n";
      }
      write_file_atomic(cfg.str("export_fraction_csv"), csv);
      out << "wrote " << cfg.str("export_fraction_csv") << " (" << rows.size() << " rows)\n";
    } else if (kind == "resolution") {
      NeuralSteerer model;
      if (!cfg.str("export_checkpoint").empty()) {
        model = load_checkpoint(cfg.str("export_checkpoint")).model;
      } else {
        RunConfig cf = cfg;
        cf.set("freq_mode", "cf");
        model = train_from_config(cf, set, make_split(set, cfg.split())).model;
      }
      const auto rows = resolution_sweep(model, set, cfg.real_list("export_factors"), exec);
      std::string csv = "factor,num_bins,band,lsd_db\n";
      for (const auto& r : rows) {
        csv += fmt(r.factor) + "," + std::to_string(r.num_bins) + "," + r.band + "," + fmt(r.lsd_db) + "\n";
      }
      write_file_atomic(cfg.str("export_resolution_csv"), csv);
      out << "wrote " << cfg.str("export_resolution_csv") << " (" << rows.size() << " rows)\n";
    } else {
      throw ConfigError("key 'export_kinds': unknown kind '" + kind + "' (fraction|resolution)");
    }
  }
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const DataError*>(&e)) return "data";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "argument";
  if (dynamic_cast<const std::out_of_range*>(&e)) return "argument";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return "io";
  return "runtime";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural steering-vector fields: synthesis, training, evaluation and querying"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "generate a synthetic measurement grid"},
      {"train", "train a neural steerer"},
      {"eval", "run an evaluation protocol on a checkpoint and/or baselines"},
      {"interp", "query a checkpoint at arbitrary directions and frequencies"},
      {"export", "write plot-ready sweep tables"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "key = value configuration file");
    s->add_option("--set", overrides, "key=value override (repeatable)");
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "nsteer: error[usage]: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& o : overrides) {
      try {
        cfg.set(o);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("--set: ") + e.what());
      }
    }
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") cmd_synth(cfg, out);
    else if (name == "train") cmd_train(cfg, out);
    else if (name == "eval") cmd_eval(cfg, out);
    else if (name == "interp") cmd_interp(cfg, out);
    else cmd_export(cfg, out);
  } catch (const std::exception& e) {
    err << "nsteer: error[" << error_kind(e) << "]: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nsteer
