// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nsteer/sigproc.hpp"

namespace nsteer {

/// Deterministic generator for a (seed, stream, ...) tuple. Independent
/// streams keep e.g. batch order unaffected by off-grid sampling.
std::mt19937_64 seeded_rng(std::initializer_list<std::uint64_t> key);

/// Uniform on the sphere: uniform azimuth, elevation = asin(U[-1, 1]).
DoA sample_sphere(std::mt19937_64& rng);

/// Four-microphone head-worn array (glasses-like frame), reference at the origin.
ArrayGeometry default_array_geometry();

enum class Provenance { Synthetic, Ingested };

/// Ground-truth generator parameters.
struct SyntheticSceneConfig {
  ArrayGeometry geometry = default_array_geometry();
  double tau_true = 1e-3;           // seconds
  double air_alpha = 0.3;           // nepers at Nyquist
  int directivity_order = 1;
  double directivity_tilt = -0.3;   // relative gain change at Nyquist
  double noise_std = 0.0;
  /// Std (m) of the offset between the true and the nominal microphone
  /// positions. The dataset stores the nominal geometry.
  double mic_jitter = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Complex steering vectors on an (azimuth x elevation) grid, stored
/// [azimuth][elevation][channel][bin] in single precision.
struct GridMeasurementSet {
  std::vector<double> azimuths;    // sorted, radians
  std::vector<double> elevations;  // sorted, radians
  FrequencyAxis axis;
  ArrayGeometry geometry;
  Provenance provenance = Provenance::Synthetic;
  std::optional<SyntheticSceneConfig> scene;
  std::vector<std::complex<float>> data;

  int num_azimuths() const { return static_cast<int>(azimuths.size()); }
  int num_elevations() const { return static_cast<int>(elevations.size()); }
  int num_channels() const { return static_cast<int>(geometry.num_mics()); }
  int num_bins() const { return axis.num_bins(); }
  int num_nodes() const { return num_azimuths() * num_elevations(); }

  int node_index(int a, int e) const { return a * num_elevations() + e; }
  int node_azimuth(int node) const { return node / num_elevations(); }
  int node_elevation(int node) const { return node % num_elevations(); }
  DoA node_doa(int node) const;

  std::size_t offset(int a, int e, int channel, int bin) const;
  std::complex<float>& at(int a, int e, int channel, int bin) { return data[offset(a, e, channel, bin)]; }
  std::complex<float> at(int a, int e, int channel, int bin) const { return data[offset(a, e, channel, bin)]; }

  /// channels x F spectra of one node in double precision.
  Spectra node_spectra(int node) const;

  /// Throws DataError on inconsistent dimensions or non-finite entries.
  void validate() const;
};

/// A azimuths 0, 2pi/A, ...; E elevations equally spaced in [-80, 80] degrees.
std::vector<double> default_azimuths(int count);
std::vector<double> default_elevations(int count);

/// True microphone positions of a scene (nominal plus seeded jitter).
std::vector<Vec3> true_mic_positions(const SyntheticSceneConfig& cfg);

/// Noise-free ground truth at an arbitrary direction and axis.
Spectra synthetic_response(const SyntheticSceneConfig& cfg, const DoA& doa, const FrequencyAxis& axis);

GridMeasurementSet generate_synthetic(const SyntheticSceneConfig& cfg, int num_azimuths, int num_elevations,
                                      const FrequencyAxis& axis);

/// NSVGRID1 container: JSON header then interleaved little-endian f32 (re, im).
void save_dataset(const GridMeasurementSet& set, const std::string& path);
GridMeasurementSet load_dataset(const std::string& path);

// ---------------------------------------------------------------------------
// Splits and batching

enum class SplitMode { RegularX2, RandomFraction, Custom };

struct SplitSpec {
  SplitMode mode = SplitMode::RegularX2;
  double fraction = 0.5;            // RandomFraction
  std::vector<int> custom_train;    // Custom, node indices
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
};

SplitMode parse_split_mode(const std::string& s);

/// Node indices; sorted, pairwise disjoint, union is the whole grid.
struct Split {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;

  /// train and validation together (what the baselines are fitted on).
  std::vector<int> seen() const;
};

Split make_split(const GridMeasurementSet& set, const SplitSpec& spec);

struct BatchSpec {
  std::vector<int> nodes;
  std::vector<int> freq_bins;  // ascending
};

/// Epoch-indexed batches: a permutation of the training nodes cut into
/// batch_size chunks, each with a random frequency subset when
/// 0 < freq_subset_size < F. Depends only on (seed, epoch).
class BatchIterator {
 public:
  BatchIterator(std::vector<int> train_nodes, int batch_size, int freq_subset_size, int num_bins,
                std::uint64_t seed);

  std::vector<BatchSpec> epoch(std::int64_t index) const;

 private:
  std::vector<int> nodes_;
  int batch_size_;
  int freq_subset_size_;
  int num_bins_;
  std::uint64_t seed_;
};

}  // namespace nsteer
