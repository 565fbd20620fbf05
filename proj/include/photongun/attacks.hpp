// Copyright 2026 The photongun Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Eavesdropping models that exploit multi-photon pulses. Every calculator
// takes PhotonStats only, so the statistics may come from the closed forms,
// the propagator or the Monte Carlo estimator.

#pragma once

#include "photongun/analytics.hpp"
#include "photongun/propagator.hpp"

#include <cmath>
#include <limits>

namespace photongun {

enum DetectableBy : unsigned {
  kUndetectable = 0,
  kLossAnomaly = 1u << 0,
  kStatisticsAnomaly = 1u << 1,
};

struct AttackReport {
  double eve_fraction = 0.0;  // share of Bob's bits known to Eve
  double bob_rate = 0.0;      // pulses that give Bob a bit
  unsigned detectable_by = kUndetectable;
  bool degenerate = false;        // no pulse carries a photon
  bool multiphoton_warning = false;  // P(n >= 3) not negligible next to P(2)
  bool extension = false;         // value comes from a model beyond the threshold statement
};

namespace detail {

inline void require_fraction(const char* field, double v) {
  require_finite(field, v);
  if (v < 0.0 || v > 1.0) throw ParameterError(field, "must lie in [0, 1]");
}

}  // namespace detail

/// Eve taps a fraction `tap` of the beam and keeps photons that split off
/// from two-photon pulses. Higher photon numbers are assumed negligible; the
/// warning flag is raised when P(n >= 3) >= 1% of P(2).
inline AttackReport beamsplitter_attack(const PhotonStats& stats, double tap) {
  detail::require_fraction("tap", tap);
  AttackReport report;
  report.detectable_by = kLossAnomaly;
  const double p2 = stats.p(2);
  const double beyond_two = stats.p_at_least_two() - p2;
  report.multiphoton_warning = beyond_two >= 0.01 * p2 && beyond_two > 0.0;
  for (std::size_t n = 1; n < stats.p_n.size(); ++n)
    report.bob_rate += stats.p_n[n] * (1.0 - std::pow(tap, static_cast<double>(n)));
  if (stats.p_e <= 0.0) {
    report.degenerate = true;
    return report;
  }
  report.eve_fraction = 2.0 * tap * (1.0 - tap) * p2 / stats.p_e;
  return report;
}

/// Eve counts photons non-destructively and keeps one photon from every
/// multi-photon pulse.
inline AttackReport qnd_attack(const PhotonStats& stats) {
  AttackReport report;
  report.detectable_by = kStatisticsAnomaly;
  report.bob_rate = stats.p_e;
  if (stats.p_e <= 0.0) {
    report.degenerate = true;
    return report;
  }
  report.eve_fraction = stats.f_il;
  return report;
}

/// Eve replaces a lossy line of efficiency `line_efficiency` with a lossless
/// one and forwards multi-photon pulses preferentially. Below the threshold
/// line_efficiency < f_il she learns everything; above it the proportional
/// share f_il / line_efficiency is a modelling extension (flagged).
inline AttackReport lossy_line_attack(const PhotonStats& stats, double line_efficiency) {
  detail::require_finite("line_efficiency", line_efficiency);
  if (line_efficiency <= 0.0 || line_efficiency > 1.0)
    throw ParameterError("line_efficiency", "must lie in (0, 1]");
  AttackReport report;
  report.detectable_by = kUndetectable;
  report.bob_rate = line_efficiency * stats.p_e;
  if (stats.p_e <= 0.0) {
    report.degenerate = true;
    return report;
  }
  if (line_efficiency < stats.f_il) {
    report.eve_fraction = 1.0;
  } else {
    report.eve_fraction = std::min(1.0, stats.f_il / line_efficiency);
    report.extension = true;
  }
  return report;
}

struct SourceComparison {
  double dipole_f_il = 0.0;
  double poisson_f_il = 0.0;
  double improvement_ratio = 0.0;
  bool infinite_ratio = false;  // dipole_f_il == 0
};

/// Leakage of the source against an attenuated Poissonian source with the
/// same probability p_e_match of a non-empty pulse.
inline SourceComparison compare_sources(const PhotonStats& dipole_stats, double p_e_match) {
  SourceComparison out;
  out.dipole_f_il = dipole_stats.f_il;
  out.poisson_f_il = poisson_f_il(p_e_match);
  if (out.dipole_f_il > 0.0) {
    out.improvement_ratio = out.poisson_f_il / out.dipole_f_il;
  } else {
    out.infinite_ratio = true;
    out.improvement_ratio = std::numeric_limits<double>::infinity();
  }
  return out;
}

/// f_il < P_1 / 2, the leakage form of the anticorrelation criterion.
inline bool anticorrelation_criterion(const PhotonStats& stats) {
  return stats.f_il < 0.5 * stats.p_1_exact;
}

}  // namespace photongun
