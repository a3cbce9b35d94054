// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "nsteer/errors.hpp"
#include "nsteer/io.hpp"

namespace nsteer {

namespace {

constexpr const char* kDatasetMagic = "NSVGRID1\n";
constexpr int kDatasetVersion = 1;

// Stream identifiers for seeded_rng.
constexpr std::uint64_t kStreamJitter = 1;
constexpr std::uint64_t kStreamNoise = 2;
constexpr std::uint64_t kStreamSplit = 3;
constexpr std::uint64_t kStreamBatches = 4;
constexpr std::uint64_t kStreamFreqSubset = 5;

double deg(double d) { return d * kPi / 180.0; }

}  // namespace

std::mt19937_64 seeded_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

DoA sample_sphere(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double az = kTwoPi * u(rng);
  const double el = std::asin(2.0 * u(rng) - 1.0);
  return {az, el};
}

ArrayGeometry default_array_geometry() {
  ArrayGeometry g;
  g.mic_positions = {
      {0.075, 0.070, 0.010},
      {0.075, -0.070, 0.010},
      {0.000, 0.085, -0.010},
      {0.000, -0.085, -0.010},
  };
  g.reference_point = {0.0, 0.0, 0.0};
  g.speed_of_sound = 343.0;
  return g;
}

void SyntheticSceneConfig::validate() const {
  geometry.validate();
  if (noise_std < 0.0) throw std::invalid_argument("scene: noise_std must be non-negative");
  if (mic_jitter < 0.0) throw std::invalid_argument("scene: mic_jitter must be non-negative");
  if (directivity_order < 0) throw std::invalid_argument("scene: directivity_order must be non-negative");
  if (!std::isfinite(tau_true) || !std::isfinite(air_alpha) || !std::isfinite(directivity_tilt)) {
    throw std::invalid_argument("scene: parameters must be finite");
  }
}

// ---------------------------------------------------------------------------

DoA GridMeasurementSet::node_doa(int node) const {
  return {azimuths[static_cast<std::size_t>(node_azimuth(node))],
          elevations[static_cast<std::size_t>(node_elevation(node))]};
}

std::size_t GridMeasurementSet::offset(int a, int e, int channel, int bin) const {
  const auto E = static_cast<std::size_t>(num_elevations());
  const auto I = static_cast<std::size_t>(num_channels());
  const auto F = static_cast<std::size_t>(num_bins());
  return ((static_cast<std::size_t>(a) * E + static_cast<std::size_t>(e)) * I + static_cast<std::size_t>(channel)) * F +
         static_cast<std::size_t>(bin);
}

Spectra GridMeasurementSet::node_spectra(int node) const {
  const int a = node_azimuth(node);
  const int e = node_elevation(node);
  Spectra s(num_channels(), num_bins());
  for (int i = 0; i < num_channels(); ++i) {
    for (int k = 0; k < num_bins(); ++k) {
      const std::complex<float> v = at(a, e, i, k);
      s(i, k) = cplx(v.real(), v.imag());
    }
  }
  return s;
}

void GridMeasurementSet::validate() const {
  geometry.validate();
  if (azimuths.empty() || elevations.empty()) throw DataError("dataset: empty grid");
  if (!std::is_sorted(azimuths.begin(), azimuths.end()) || !std::is_sorted(elevations.begin(), elevations.end())) {
    throw DataError("dataset: grid axes must be sorted");
  }
  const std::size_t expected = static_cast<std::size_t>(num_nodes()) * num_channels() * num_bins();
  if (data.size() != expected) {
    throw DataError("dataset: tensor has " + std::to_string(data.size()) + " entries, axes imply " +
                    std::to_string(expected));
  }
  for (const auto& v : data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DataError("dataset: non-finite entry");
  }
}

std::vector<double> default_azimuths(int count) {
  std::vector<double> az(static_cast<std::size_t>(count));
  for (int a = 0; a < count; ++a) az[static_cast<std::size_t>(a)] = kTwoPi * a / count;
  return az;
}

std::vector<double> default_elevations(int count) {
  std::vector<double> el(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    el[static_cast<std::size_t>(e)] = count == 1 ? 0.0 : deg(-80.0 + 160.0 * e / (count - 1));
  }
  return el;
}

std::vector<Vec3> true_mic_positions(const SyntheticSceneConfig& cfg) {
  std::vector<Vec3> mics = cfg.geometry.mic_positions;
  if (cfg.mic_jitter > 0.0) {
    auto rng = seeded_rng({cfg.seed, kStreamJitter});
    std::normal_distribution<double> n(0.0, cfg.mic_jitter);
    for (auto& m : mics) {
      for (double& v : m) v += n(rng);
    }
  }
  return mics;
}

namespace {

Spectra response_with_mics(const SyntheticSceneConfig& cfg, const std::vector<Vec3>& mics, const DoA& doa,
                           const FrequencyAxis& axis) {
  const Vec3 n = direction(doa);
  const auto& g = cfg.geometry;
  const double f_half = axis.nyquist();
  Spectra out(static_cast<Eigen::Index>(mics.size()), axis.num_bins());
  for (std::size_t i = 0; i < mics.size(); ++i) {
    // Directivity around the microphone's outward axis (nominal placement).
    Vec3 ax{g.mic_positions[i][0] - g.reference_point[0], g.mic_positions[i][1] - g.reference_point[1],
            g.mic_positions[i][2] - g.reference_point[2]};
    const double len = std::sqrt(ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2]);
    const double cos_theta = len > 0.0 ? (n[0] * ax[0] + n[1] * ax[1] + n[2] * ax[2]) / len : 1.0;
    constexpr double a = 0.5;
    // Floored so the cardioid null never reaches an exact zero.
    const double base = std::max(0.05, (1.0 - a) + a * cos_theta);
    const double directivity = std::pow(base, cfg.directivity_order);
    for (int k = 0; k < axis.num_bins(); ++k) {
      const double f = axis.frequency(k);
      const double tilt = std::clamp(1.0 + cfg.directivity_tilt * f / f_half, 0.05, 1.5);
      const cplx g_air = std::exp(-cfg.air_alpha * f / f_half);
      const cplx g_mic = directivity * tilt;
      const cplx d = algebraic_steering(n, f, mics[i], g.reference_point, g.speed_of_sound);
      out(static_cast<Eigen::Index>(i), k) = compose_steering(d, g_air, g_mic, cfg.tau_true, f);
    }
  }
  return out;
}

}  // namespace

Spectra synthetic_response(const SyntheticSceneConfig& cfg, const DoA& doa, const FrequencyAxis& axis) {
  return response_with_mics(cfg, true_mic_positions(cfg), doa, axis);
}

GridMeasurementSet generate_synthetic(const SyntheticSceneConfig& cfg, int num_azimuths, int num_elevations,
                                      const FrequencyAxis& axis) {
  cfg.validate();
  if (num_azimuths < 4 || num_elevations < 3 || axis.num_bins() < 9) {
    throw std::invalid_argument("generate_synthetic: grid needs A >= 4, E >= 3, F >= 9 (got " +
                                std::to_string(num_azimuths) + "x" + std::to_string(num_elevations) + "x" +
                                std::to_string(axis.num_bins()) + ")");
  }
  GridMeasurementSet set;
  set.azimuths = default_azimuths(num_azimuths);
  set.elevations = default_elevations(num_elevations);
  set.axis = axis;
  set.geometry = cfg.geometry;
  set.provenance = Provenance::Synthetic;
  set.scene = cfg;
  set.data.resize(static_cast<std::size_t>(num_azimuths) * num_elevations * cfg.geometry.num_mics() *
                  axis.num_bins());

  const std::vector<Vec3> mics = true_mic_positions(cfg);
  auto noise_rng = seeded_rng({cfg.seed, kStreamNoise});
  std::normal_distribution<double> noise(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);
  for (int a = 0; a < num_azimuths; ++a) {
    for (int e = 0; e < num_elevations; ++e) {
      const Spectra h = response_with_mics(cfg, mics, set.node_doa(set.node_index(a, e)), axis);
      for (int i = 0; i < set.num_channels(); ++i) {
        for (int k = 0; k < axis.num_bins(); ++k) {
          cplx v = h(i, k);
          if (cfg.noise_std > 0.0) v += cplx(noise(noise_rng), noise(noise_rng));
          set.at(a, e, i, k) = std::complex<float>(static_cast<float>(v.real()), static_cast<float>(v.imag()));
        }
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json geometry_json(const ArrayGeometry& g) {
  return {{"mic_positions", g.mic_positions}, {"reference_point", g.reference_point},
          {"speed_of_sound", g.speed_of_sound}};
}

ArrayGeometry geometry_from_json(const nlohmann::json& j) {
  ArrayGeometry g;
  g.mic_positions = j.at("mic_positions").get<std::vector<Vec3>>();
  g.reference_point = j.at("reference_point").get<Vec3>();
  g.speed_of_sound = j.at("speed_of_sound").get<double>();
  return g;
}

}  // namespace

void save_dataset(const GridMeasurementSet& set, const std::string& path) {
  set.validate();
  nlohmann::json h;
  h["format"] = "nsteer-grid";
  h["format_version"] = kDatasetVersion;
  h["azimuths"] = set.azimuths;
  h["elevations"] = set.elevations;
  h["sample_rate_hz"] = set.axis.sample_rate_hz();
  h["num_bins"] = set.axis.num_bins();
  h["num_channels"] = set.num_channels();
  h["layout"] = "azimuth,elevation,channel,bin;re,im";
  h["geometry"] = geometry_json(set.geometry);
  h["provenance"] = set.provenance == Provenance::Synthetic ? "synthetic" : "ingested";
  if (set.scene) {
    const auto& s = *set.scene;
    h["seed"] = s.seed;
    h["scene"] = {{"geometry", geometry_json(s.geometry)},
                  {"tau_true", s.tau_true},
                  {"air_alpha", s.air_alpha},
                  {"directivity_order", s.directivity_order},
                  {"directivity_tilt", s.directivity_tilt},
                  {"noise_std", s.noise_std},
                  {"mic_jitter", s.mic_jitter},
                  {"seed", s.seed}};
  } else {
    h["seed"] = nullptr;
    h["scene"] = nullptr;
  }
  std::vector<double> payload;
  payload.reserve(2 * set.data.size());
  for (const auto& v : set.data) {
    payload.push_back(v.real());
    payload.push_back(v.imag());
  }
  write_container(path, kDatasetMagic, std::move(h), {ArrayBlock{"data", "f32", std::move(payload)}});
}

GridMeasurementSet load_dataset(const std::string& path) {
  const Container c = read_container(path, kDatasetMagic);
  const nlohmann::json& h = c.header;
  const std::uint64_t header_pos = 9;
  GridMeasurementSet set;
  try {
    if (h.at("format_version").get<int>() != kDatasetVersion) {
      throw FormatError("unsupported dataset version " + h.at("format_version").dump(), header_pos);
    }
    set.azimuths = h.at("azimuths").get<std::vector<double>>();
    set.elevations = h.at("elevations").get<std::vector<double>>();
    set.axis = FrequencyAxis(h.at("sample_rate_hz").get<double>(), h.at("num_bins").get<int>());
    set.geometry = geometry_from_json(h.at("geometry"));
    if (h.at("num_channels").get<std::size_t>() != set.geometry.num_mics()) {
      throw FormatError("header num_channels disagrees with geometry", header_pos);
    }
    const std::string prov = h.at("provenance").get<std::string>();
    if (prov != "synthetic" && prov != "ingested") throw FormatError("unknown provenance '" + prov + "'", header_pos);
    set.provenance = prov == "synthetic" ? Provenance::Synthetic : Provenance::Ingested;
    if (!h.at("scene").is_null()) {
      const auto& s = h.at("scene");
      SyntheticSceneConfig cfg;
      cfg.geometry = geometry_from_json(s.at("geometry"));
      cfg.tau_true = s.at("tau_true").get<double>();
      cfg.air_alpha = s.at("air_alpha").get<double>();
      cfg.directivity_order = s.at("directivity_order").get<int>();
      cfg.directivity_tilt = s.at("directivity_tilt").get<double>();
      cfg.noise_std = s.at("noise_std").get<double>();
      cfg.mic_jitter = s.at("mic_jitter").get<double>();
      cfg.seed = s.at("seed").get<std::uint64_t>();
      set.scene = cfg;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad dataset header: ") + e.what(), header_pos);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad dataset header: ") + e.what(), header_pos);
  }

  const auto& payload = c.array("data");
  const std::size_t expected =
      2 * static_cast<std::size_t>(set.num_nodes()) * set.num_channels() * set.num_bins();
  if (payload.size() != expected) {
    throw FormatError("payload holds " + std::to_string(payload.size()) + " values, header dimensions imply " +
                          std::to_string(expected),
                      header_pos);
  }
  set.data.resize(expected / 2);
  for (std::size_t i = 0; i < set.data.size(); ++i) {
    set.data[i] = std::complex<float>(static_cast<float>(payload[2 * i]), static_cast<float>(payload[2 * i + 1]));
  }
  try {
    set.validate();
  } catch (const DataError& e) {
    throw FormatError(e.what(), header_pos);
  }
  return set;
}

// ---------------------------------------------------------------------------

SplitMode parse_split_mode(const std::string& s) {
  if (s == "regular_x2") return SplitMode::RegularX2;
  if (s == "random_fraction") return SplitMode::RandomFraction;
  if (s == "custom") return SplitMode::Custom;
  throw std::invalid_argument("unknown split mode '" + s + "' (regular_x2|random_fraction|custom)");
}

std::vector<int> Split::seen() const {
  std::vector<int> s = train;
  s.insert(s.end(), validation.begin(), validation.end());
  std::sort(s.begin(), s.end());
  return s;
}

Split make_split(const GridMeasurementSet& set, const SplitSpec& spec) {
  if (!(spec.validation_fraction >= 0.0 && spec.validation_fraction < 1.0)) {
    throw std::invalid_argument("split: validation_fraction must be in [0, 1)");
  }
  const int nodes = set.num_nodes();
  std::vector<int> seen;
  auto rng = seeded_rng({spec.seed, kStreamSplit});
  switch (spec.mode) {
    case SplitMode::RegularX2:
      for (int a = 0; a < set.num_azimuths(); a += 2) {
        for (int e = 0; e < set.num_elevations(); e += 2) seen.push_back(set.node_index(a, e));
      }
      break;
    case SplitMode::RandomFraction: {
      if (!(spec.fraction > 0.0 && spec.fraction < 1.0)) {
        throw std::invalid_argument("split: fraction must be in (0, 1)");
      }
      const auto count = static_cast<int>(std::ceil(spec.fraction * nodes - 1e-9));
      std::vector<int> all(static_cast<std::size_t>(nodes));
      std::iota(all.begin(), all.end(), 0);
      std::shuffle(all.begin(), all.end(), rng);
      seen.assign(all.begin(), all.begin() + count);
      break;
    }
    case SplitMode::Custom: {
      std::set<int> unique;
      for (int n : spec.custom_train) {
        if (n < 0 || n >= nodes) throw std::invalid_argument("split: custom node index " + std::to_string(n) + " out of range");
        if (!unique.insert(n).second) throw std::invalid_argument("split: duplicate custom node " + std::to_string(n));
      }
      seen.assign(unique.begin(), unique.end());
      break;
    }
  }
  if (seen.empty()) throw std::invalid_argument("split: no training nodes");
  std::sort(seen.begin(), seen.end());

  Split out;
  auto val_count = static_cast<int>(std::lround(spec.validation_fraction * static_cast<double>(seen.size())));
  if (spec.validation_fraction > 0.0 && seen.size() >= 2) val_count = std::clamp(val_count, 1, static_cast<int>(seen.size()) - 1);
  std::vector<int> shuffled = seen;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  out.validation.assign(shuffled.begin(), shuffled.begin() + val_count);
  out.train.assign(shuffled.begin() + val_count, shuffled.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());

  std::vector<char> used(static_cast<std::size_t>(nodes), 0);
  for (int n : seen) used[static_cast<std::size_t>(n)] = 1;
  for (int n = 0; n < nodes; ++n) {
    if (!used[static_cast<std::size_t>(n)]) out.test.push_back(n);
  }
  return out;
}

BatchIterator::BatchIterator(std::vector<int> train_nodes, int batch_size, int freq_subset_size, int num_bins,
                             std::uint64_t seed)
    : nodes_(std::move(train_nodes)),
      batch_size_(batch_size),
      freq_subset_size_(freq_subset_size),
      num_bins_(num_bins),
      seed_(seed) {
  if (nodes_.empty()) throw std::invalid_argument("batch iterator: no training nodes");
  if (batch_size < 1 || batch_size > static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("batch iterator: batch size " + std::to_string(batch_size) + " not in [1, " +
                                std::to_string(nodes_.size()) + "]");
  }
  if (freq_subset_size < 0) throw std::invalid_argument("batch iterator: negative frequency subset size");
}

std::vector<BatchSpec> BatchIterator::epoch(std::int64_t index) const {
  std::vector<int> order = nodes_;
  auto rng = seeded_rng({seed_, kStreamBatches, static_cast<std::uint64_t>(index)});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<BatchSpec> batches;
  const bool subset = freq_subset_size_ > 0 && freq_subset_size_ < num_bins_;
  for (std::size_t start = 0, b = 0; start < order.size(); start += static_cast<std::size_t>(batch_size_), ++b) {
    BatchSpec spec;
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size_));
    spec.nodes.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<int> bins(static_cast<std::size_t>(num_bins_));
    std::iota(bins.begin(), bins.end(), 0);
    if (subset) {
      auto frng = seeded_rng({seed_, kStreamFreqSubset, static_cast<std::uint64_t>(index), b});
      std::shuffle(bins.begin(), bins.end(), frng);
      bins.resize(static_cast<std::size_t>(freq_subset_size_));
      std::sort(bins.begin(), bins.end());
    }
    spec.freq_bins = std::move(bins);
    batches.push_back(std::move(spec));
  }
  return batches;
}

}  // namespace nsteer
