// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsteer/baseline.hpp"
#include "nsteer/data.hpp"
#include "nsteer/model.hpp"

namespace nsteer {

enum class Execution { Serial, Parallel };

// ---------------------------------------------------------------------------
// Metrics

double rmse_time(std::span<const double> est, std::span<const double> ref);
double rmse_time(const TimeFilter& est, const TimeFilter& ref);

/// 1 - <est, ref> / (|est| |ref|). A zero-norm input yields 1 and sets `zero_norm`.
double cosine_distance_time(std::span<const double> est, std::span<const double> ref, bool* zero_norm = nullptr);
double cosine_distance_time(const TimeFilter& est, const TimeFilter& ref, bool* zero_norm = nullptr);

using Band = std::pair<double, double>;  // hertz, inclusive

/// [40 Hz, 0.95 * Nyquist].
Band default_lsd_band(const FrequencyAxis& axis);

/// RMS difference of 20 log10(|.| + 1e-8) over the bins inside `band`
/// (all bins when absent). Throws when the band holds no bin.
double lsd_db(std::span<const cplx> est, std::span<const cplx> ref, const FrequencyAxis& axis,
              std::optional<Band> band = std::nullopt);

// ---------------------------------------------------------------------------
// Estimators under evaluation

struct Estimator {
  std::string name;
  bool any_axis = false;  // can be queried off the training frequency axis
  std::function<Spectra(const DoA&, const FrequencyAxis&)> query;
};

Estimator model_estimator(const NeuralSteerer& model, std::string name = "");
Estimator scf_estimator(ScfModel model, std::string name = "scf");
Estimator nearest_estimator(const GridMeasurementSet& set, std::vector<int> nodes, std::string name = "nearest");
/// Returns the stored measurement at grid nodes on the dataset axis and the
/// analytic scene response everywhere else (synthetic sets only).
Estimator oracle_estimator(const GridMeasurementSet& set, std::string name = "oracle");

// ---------------------------------------------------------------------------
// Reports

struct NodeMetrics {
  int node = 0;
  int channel = 0;
  double rmse = 0.0;
  double cosine = 0.0;
  double lsd = 0.0;
  bool zero_norm = false;
};

struct MetricReport {
  std::string label;       // e.g. held_out, full_grid
  std::string estimator;
  double rmse_time = 0.0;  // channel-averaged
  double cosine_distance_time = 0.0;
  double lsd_db = 0.0;
  std::vector<double> channel_rmse;
  std::vector<double> channel_cosine;
  std::vector<double> channel_lsd;
  int count = 0;           // evaluated nodes
  int zero_norm_flags = 0;
  std::vector<NodeMetrics> rows;
};

/// Compares the estimator against `reference(node)` at each node on `axis`.
/// Per-node work runs in parallel; aggregation is in node order.
MetricReport evaluate_nodes(const Estimator& est, const GridMeasurementSet& set, std::span<const int> nodes,
                            const std::string& label, const FrequencyAxis& axis,
                            const std::function<Spectra(int node)>& reference, std::optional<Band> band,
                            Execution exec = Execution::Parallel);

/// Reference = stored measurements on the dataset axis.
MetricReport evaluate_nodes(const Estimator& est, const GridMeasurementSet& set, std::span<const int> nodes,
                            const std::string& label, Execution exec = Execution::Parallel);

enum class ProtocolKind { Interpolation, RandomFraction, FreqSuperres };

struct Protocol {
  ProtocolKind kind = ProtocolKind::Interpolation;
  double fraction = 0.5;        // RandomFraction
  int superres_factor = 2;      // FreqSuperres: target axis has factor * (F - 1) + 1 bins
  bool include_full_grid = true;
};

ProtocolKind parse_protocol(const std::string& s);
std::string to_string(ProtocolKind k);

/// Interpolation / RandomFraction: held_out (and full_grid) time and LSD metrics.
/// FreqSuperres: LSD against the regenerated noise-free scene, reported as
/// train_res_in_band, target_in_band, target_edge_band and train_res_edge_band
/// (edge band = top 5% of bins). Throws std::invalid_argument when the
/// estimator cannot be queried off-axis or the set has no scene description.
std::vector<MetricReport> run_protocol(const Estimator& est, const GridMeasurementSet& set, const Split& split,
                                       const Protocol& protocol, Execution exec = Execution::Parallel);

/// One CSV row per (node, channel).
void write_metrics_csv(const std::string& path, std::span<const MetricReport> reports);
/// Summary without the per-node rows.
void write_metrics_json(const std::string& path, std::span<const MetricReport> reports);

}  // namespace nsteer
