// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace nsteer {

ScfInterpolation parse_scf_interpolation(const std::string& s) {
  if (s == "real_imag") return ScfInterpolation::RealImag;
  if (s == "mag_phase") return ScfInterpolation::MagPhase;
  throw std::invalid_argument("unknown SCF interpolation '" + s + "' (real_imag|mag_phase)");
}

std::size_t ScfModel::offset(std::size_t a, std::size_t e, std::size_t channel, std::size_t bin) const {
  return ((a * elevations.size() + e) * geometry.num_mics() + channel) * static_cast<std::size_t>(axis.num_bins()) +
         bin;
}

ScfModel scf_fit(const GridMeasurementSet& set, ScfInterpolation interpolation) {
  std::vector<int> all(static_cast<std::size_t>(set.num_nodes()));
  std::iota(all.begin(), all.end(), 0);
  return scf_fit(set, all, interpolation);
}

ScfModel scf_fit(const GridMeasurementSet& set, std::span<const int> nodes, ScfInterpolation interpolation) {
  std::set<int> az_idx, el_idx, node_set(nodes.begin(), nodes.end());
  for (int n : nodes) {
    az_idx.insert(set.node_azimuth(n));
    el_idx.insert(set.node_elevation(n));
  }
  if (node_set.size() != az_idx.size() * el_idx.size() || az_idx.size() < 2 || el_idx.size() < 2) {
    throw std::invalid_argument("scf_fit: nodes do not form a tensor-product grid with >= 2x2 points");
  }
  for (int a : az_idx) {
    for (int e : el_idx) {
      if (!node_set.count(set.node_index(a, e))) {
        throw std::invalid_argument("scf_fit: nodes do not form a tensor-product grid");
      }
    }
  }

  ScfModel m;
  for (int a : az_idx) m.azimuths.push_back(set.azimuths[static_cast<std::size_t>(a)]);
  for (int e : el_idx) m.elevations.push_back(set.elevations[static_cast<std::size_t>(e)]);
  m.axis = set.axis;
  m.geometry = set.geometry;
  m.interpolation = interpolation;
  m.values.resize(m.azimuths.size() * m.elevations.size() * set.geometry.num_mics() *
                  static_cast<std::size_t>(set.num_bins()));
  std::size_t ai = 0;
  for (int a : az_idx) {
    std::size_t ei = 0;
    for (int e : el_idx) {
      const DoA doa = set.node_doa(set.node_index(a, e));
      for (int i = 0; i < set.num_channels(); ++i) {
        for (int k = 0; k < set.num_bins(); ++k) {
          const std::complex<float> h = set.at(a, e, i, k);
          const cplx d = algebraic_steering(doa, set.axis.frequency(k), static_cast<std::size_t>(i), set.geometry);
          m.values[m.offset(ai, ei, static_cast<std::size_t>(i), static_cast<std::size_t>(k))] =
              cplx(h.real(), h.imag()) / d;
        }
      }
      ++ei;
    }
    ++ai;
  }
  return m;
}

namespace {

struct Bracket {
  std::size_t lo, hi;
  double t;  // weight of hi
};

Bracket azimuth_bracket(const std::vector<double>& az, double theta) {
  theta = std::fmod(theta, kTwoPi);
  if (theta < 0.0) theta += kTwoPi;
  const std::size_t n = az.size();
  auto it = std::upper_bound(az.begin(), az.end(), theta);
  if (it == az.begin() || it == az.end()) {
    // Across the seam between the last and the first node.
    const double span = az.front() + kTwoPi - az.back();
    double offset = theta - az.back();
    if (offset < 0.0) offset += kTwoPi;
    return {n - 1, 0, offset / span};
  }
  const auto hi = static_cast<std::size_t>(it - az.begin());
  const std::size_t lo = hi - 1;
  return {lo, hi, (theta - az[lo]) / (az[hi] - az[lo])};
}

Bracket elevation_bracket(const std::vector<double>& el, double phi, bool& clamped) {
  clamped = false;
  if (phi <= el.front()) {
    clamped = phi < el.front();
    return {0, 0, 0.0};
  }
  if (phi >= el.back()) {
    clamped = phi > el.back();
    return {el.size() - 1, el.size() - 1, 0.0};
  }
  auto it = std::upper_bound(el.begin(), el.end(), phi);
  const auto hi = static_cast<std::size_t>(it - el.begin());
  const std::size_t lo = hi - 1;
  return {lo, hi, (phi - el[lo]) / (el[hi] - el[lo])};
}

}  // namespace

InterpolatedSpectra scf_interpolate(const ScfModel& m, const DoA& doa) {
  bool clamped = false;
  const Bracket ab = azimuth_bracket(m.azimuths, doa.azimuth);
  const Bracket eb = elevation_bracket(m.elevations, doa.elevation, clamped);
  const double w00 = (1.0 - ab.t) * (1.0 - eb.t);
  const double w01 = (1.0 - ab.t) * eb.t;
  const double w10 = ab.t * (1.0 - eb.t);
  const double w11 = ab.t * eb.t;

  InterpolatedSpectra out;
  out.elevation_clamped = clamped;
  out.spectra.resize(m.num_channels(), m.axis.num_bins());
  for (int i = 0; i < m.num_channels(); ++i) {
    const auto ci = static_cast<std::size_t>(i);
    for (int k = 0; k < m.axis.num_bins(); ++k) {
      const auto ck = static_cast<std::size_t>(k);
      const cplx v00 = m.values[m.offset(ab.lo, eb.lo, ci, ck)];
      const cplx v01 = m.values[m.offset(ab.lo, eb.hi, ci, ck)];
      const cplx v10 = m.values[m.offset(ab.hi, eb.lo, ci, ck)];
      const cplx v11 = m.values[m.offset(ab.hi, eb.hi, ci, ck)];
      cplx scf;
      if (m.interpolation == ScfInterpolation::RealImag) {
        scf = w00 * v00 + w01 * v01 + w10 * v10 + w11 * v11;
      } else {
        const double mag = w00 * std::abs(v00) + w01 * std::abs(v01) + w10 * std::abs(v10) + w11 * std::abs(v11);
        auto unit = [](cplx v) { return std::abs(v) > 0.0 ? v / std::abs(v) : cplx(1.0, 0.0); };
        const cplx dir = w00 * unit(v00) + w01 * unit(v01) + w10 * unit(v10) + w11 * unit(v11);
        scf = std::polar(mag, std::arg(dir));
      }
      out.spectra(i, k) = scf * algebraic_steering(doa, m.axis.frequency(k), ci, m.geometry);
    }
  }
  return out;
}

Spectra nearest_interpolate(const GridMeasurementSet& set, std::span<const int> nodes, const DoA& doa) {
  if (nodes.empty()) throw std::invalid_argument("nearest_interpolate: no nodes");
  int best = -1;
  double best_angle = 0.0;
  std::vector<int> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  for (int n : sorted) {
    const double angle = great_circle_angle(doa, set.node_doa(n));
    if (best < 0 || angle < best_angle) {
      best = n;
      best_angle = angle;
    }
  }
  return set.node_spectra(best);
}

Spectra nearest_interpolate(const GridMeasurementSet& set, const DoA& doa) {
  std::vector<int> all(static_cast<std::size_t>(set.num_nodes()));
  std::iota(all.begin(), all.end(), 0);
  return nearest_interpolate(set, all, doa);
}

}  // namespace nsteer
