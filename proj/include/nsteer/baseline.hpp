// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <span>
#include <string>
#include <vector>

#include "nsteer/data.hpp"

namespace nsteer {

enum class ScfInterpolation { RealImag, MagPhase };

ScfInterpolation parse_scf_interpolation(const std::string& s);

/// Spatial characteristic function h / d on a tensor-product grid, d being the
/// far-field steering term of the nominal geometry.
struct ScfModel {
  std::vector<double> azimuths;
  std::vector<double> elevations;
  FrequencyAxis axis;
  ArrayGeometry geometry;
  ScfInterpolation interpolation = ScfInterpolation::RealImag;
  std::vector<cplx> values;  // [azimuth][elevation][channel][bin]

  int num_channels() const { return static_cast<int>(geometry.num_mics()); }
  std::size_t offset(std::size_t a, std::size_t e, std::size_t channel, std::size_t bin) const;
};

/// Fit on every node of the set.
ScfModel scf_fit(const GridMeasurementSet& set, ScfInterpolation interpolation = ScfInterpolation::RealImag);

/// Fit on a subset of nodes. The subset must be a full tensor product of some
/// azimuth and elevation indices (e.g. the regular x2 grid); throws otherwise.
ScfModel scf_fit(const GridMeasurementSet& set, std::span<const int> nodes,
                 ScfInterpolation interpolation = ScfInterpolation::RealImag);

struct InterpolatedSpectra {
  Spectra spectra;                 // channels x F on the model axis
  bool elevation_clamped = false;  // query outside the grid's elevation coverage
};

/// Bilinear in (azimuth, elevation) with azimuth wrap-around, then times d at the query.
InterpolatedSpectra scf_interpolate(const ScfModel& model, const DoA& doa);

/// Measurement at the great-circle-nearest node among `nodes` (ties: lowest index).
Spectra nearest_interpolate(const GridMeasurementSet& set, std::span<const int> nodes, const DoA& doa);
Spectra nearest_interpolate(const GridMeasurementSet& set, const DoA& doa);

}  // namespace nsteer
