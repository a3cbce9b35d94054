// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsteer/baseline.hpp"
#include "nsteer/data.hpp"
#include "nsteer/eval.hpp"
#include "nsteer/model.hpp"
#include "nsteer/train.hpp"

namespace nsteer {

/// Bad configuration key or value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` configuration with '#' comments. Every key has a
/// default; unknown keys are rejected.
class RunConfig {
 public:
  RunConfig();

  /// Reads a file; errors carry the 1-based line number.
  void load_file(const std::string& path);
  void load_string(const std::string& text, const std::string& origin = "<string>");
  /// `key=value` override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  static const std::vector<std::pair<std::string, std::string>>& known_keys();  // key, default

  std::string str(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;
  std::vector<double> real_list(const std::string& key) const;

  SyntheticSceneConfig scene() const;
  FrequencyAxis axis() const;
  SplitSpec split() const;
  SteererConfig steerer() const;
  TrainConfig training() const;
  Protocol protocol() const;
  /// Serial when NSTEER_THREADS=0, otherwise parallel (and caps the thread count).
  static Execution execution_from_env();

 private:
  std::map<std::string, std::string> values_;
};

/// Trains a model from scratch with the configured steerer and training
/// settings on `split`, overriding the seeds with `seed` when non-negative.
TrainResult train_from_config(const RunConfig& cfg, const GridMeasurementSet& set, const Split& split,
                              std::int64_t seed = -1);

struct SweepRow {
  double fraction = 0.0;
  std::string model;
  std::string metric;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::vector<double> per_seed;
};

/// Held-out metrics of the configured model and the nearest-node baseline
/// for random training fractions, median over seeds.
std::vector<SweepRow> fraction_sweep(const RunConfig& cfg, const GridMeasurementSet& set,
                                     const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                     Execution exec);

struct ResolutionRow {
  double factor = 0.0;
  int num_bins = 0;
  std::string band;  // in_band | edge_band
  double lsd_db = 0.0;
};

/// LSD of a continuous-frequency model against the noise-free scene on
/// equally spaced axes with factor * (F - 1) + 1 bins, over all grid nodes.
std::vector<ResolutionRow> resolution_sweep(const NeuralSteerer& model, const GridMeasurementSet& set,
                                            const std::vector<double>& factors, Execution exec);

/// 32-bit float mono WAV.
void write_wav_f32(const std::string& path, const std::vector<double>& samples, int sample_rate_hz);

/// Entry point of the `nsteer` tool. Returns the process exit code; errors
/// are printed to `err` as a single line.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace nsteer
