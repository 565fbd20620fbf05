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

// Closed-form photon statistics of the two-level source (metastable level
// neglected, ground-state start) and the Poissonian baseline.
//
// Apart from two_level_emission's pe_exact, everything here is in the
// long-period limit exp(-gamma * period) -> 0. The propagator evolves the
// finite period and is the reference these are tested against.

#pragma once

#include "photongun/rates.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace photongun {

namespace detail {

inline void validate_two_level(double r, double gamma, double delta_t) {
  require_nonnegative("r", r);
  require_finite("gamma", gamma);
  if (gamma <= 0.0) throw ParameterError("gamma", "must be > 0");
  require_finite("delta_t", delta_t);
  if (delta_t <= 0.0) throw ParameterError("delta_t", "must be > 0");
}

// (1 - e^-y) / y, with the removable singularity at 0.
inline double exprel(double y) { return y == 0.0 ? 1.0 : -std::expm1(-y) / y; }

// Below this |y| = |r - gamma| * delta_t the single-emission probability is
// evaluated from its Taylor series around r = gamma.
inline constexpr double kSingleEmissionSeam = 1e-2;

// G(y) = ((1 - e^-y)/y - e^-y) / y = sum_{k>=1} (-1)^(k+1) k y^(k-1) / (k+1)!
inline double single_emission_kernel_series(double y) {
  double sum = 0.0;
  double power = 1.0;      // y^(k-1)
  double factorial = 2.0;  // (k+1)!
  for (int k = 1; k <= 14; ++k) {
    const double sign = (k % 2 == 1) ? 1.0 : -1.0;
    sum += sign * k * power / factorial;
    power *= y;
    factorial *= (k + 2);
  }
  return sum;
}

}  // namespace detail

/// Two-level emission probabilities with unit collection efficiency.
struct TwoLevelClosedForm {
  double pe_exact = 0.0;   // >= 1 photon over a finite period
  double pe_approx = 0.0;  // 1 - exp(-r delta_t)
  double p1 = 0.0;         // exactly one photon
  // Whether exp(-gamma * period) -> 0 was applied to each value.
  struct {
    bool pe_exact = false;
    bool pe_approx = true;
    bool p1 = true;
  } long_period_limit;
};

/// Single-emission probability in the long-period limit. `force_series`
/// selects the branch explicitly (for seam tests); by default the series is
/// used when |r - gamma| * delta_t < kSingleEmissionSeam.
inline double single_emission_probability(double r, double gamma, double delta_t,
                                          std::optional<bool> force_series = std::nullopt) {
  detail::validate_two_level(r, gamma, delta_t);
  const double x = delta_t;
  const double y = (r - gamma) * x;
  const bool series = force_series.value_or(std::abs(y) < detail::kSingleEmissionSeam);
  // p1 = r x [ r x e^{-gamma x} G(y) + e^{-r x} ]
  double weighted_kernel;  // e^{-gamma x} G(y)
  if (series) {
    weighted_kernel = std::exp(-gamma * x) * detail::single_emission_kernel_series(y);
  } else {
    const double slow = std::exp(-gamma * x);
    const double fast = std::exp(-r * x);
    weighted_kernel = ((slow - fast) / y - fast) / y;
  }
  return r * x * (r * x * weighted_kernel + std::exp(-r * x));
}

inline TwoLevelClosedForm two_level_emission(double r, double gamma, double delta_t,
                                             double period) {
  detail::validate_two_level(r, gamma, delta_t);
  detail::require_finite("period", period);
  if (delta_t > period) throw ParameterError("delta_t", "must not exceed period");

  TwoLevelClosedForm out;
  if (r == 0.0) return out;
  const double x = delta_t;
  const double y = (r - gamma) * x;
  out.pe_approx = -std::expm1(-r * x);
  // Probability that the excitation is still pending at the end of the
  // period: r/(r-gamma) e^{-gamma T} (1 - e^{-y}), written without overflow.
  double pending;
  if (std::abs(y) < 0.5) {
    pending = r * x * std::exp(-gamma * period) * detail::exprel(y);
  } else {
    pending = r / (r - gamma) *
              (std::exp(-gamma * period) - std::exp(-gamma * (period - x) - r * x));
  }
  out.pe_exact = out.pe_approx - pending;
  out.p1 = single_emission_probability(r, gamma, delta_t);
  return out;
}

/// Roots r' >= gamma' of the generating-function system during the pulse.
struct EffectiveRates {
  double r_prime = 0.0;
  double gamma_prime = 0.0;
};

inline EffectiveRates effective_rates(double r, double gamma, double eta) {
  detail::require_nonnegative("r", r);
  detail::require_finite("gamma", gamma);
  if (gamma <= 0.0) throw ParameterError("gamma", "must be > 0");
  const Collection c(eta);
  const double gap = r - gamma;
  const double disc = std::sqrt(gap * gap + 4.0 * c.eta_bar() * r * gamma);
  EffectiveRates out;
  out.r_prime = 0.5 * (r + gamma + disc);
  // From the product r' gamma' = eta r gamma; avoids cancellation when r >> gamma.
  out.gamma_prime = out.r_prime > 0.0 ? c.eta() * r * gamma / out.r_prime : 0.0;
  return out;
}

/// Statistics of detected photons.
struct CollectionStats {
  double pi_0 = 1.0;
  double pi_e = 0.0;
  double pi_1 = 0.0;
  double f_il = 0.0;
  bool degenerate = false;  // pi_e == 0, f_il reported as 0
};

namespace detail {

inline CollectionStats finish_collection_stats(double pi_0, double pi_1) {
  CollectionStats s;
  s.pi_0 = std::clamp(pi_0, 0.0, 1.0);
  s.pi_e = 1.0 - s.pi_0;
  s.pi_1 = std::clamp(pi_1, 0.0, s.pi_e);
  if (s.pi_e > 0.0) {
    s.f_il = std::clamp((s.pi_e - s.pi_1) / s.pi_e, 0.0, 1.0);
  } else {
    s.degenerate = true;
  }
  return s;
}

}  // namespace detail

/// Detection statistics of the two-level source in the long-period limit.
///
/// With c = (r + gamma)/2 and h = (r' - gamma')/2 the no-detection
/// probability is
///
///   Pi_0 = e^{-c x} [cosh(h x) + K sinh(h x)/h],  K = eta_bar r - (r - gamma)/2,
///
/// which depends on h only through h^2 = ((r - gamma)^2 + 4 eta_bar r gamma)/4
/// and so has no singularity at r' = gamma'. Pi_1 = eta dPi_0/d(eta_bar) with
/// d(h^2)/d(eta_bar) = r gamma:
///
///   dPi_0/d(eta_bar) = e^{-c x} [ r gamma x S/2 + r S + K r gamma dS ],
///   S = sinh(h x)/h,  dS = dS/d(h^2) = (x cosh(h x) - S) / (2 h^2).
inline CollectionStats collection_stats(double r, double gamma, double delta_t, double eta) {
  detail::validate_two_level(r, gamma, delta_t);
  const Collection collection(eta);
  if (r == 0.0) return detail::finish_collection_stats(1.0, 0.0);

  const double x = delta_t;
  const EffectiveRates roots = effective_rates(r, gamma, eta);
  const double c = 0.5 * (r + gamma);
  const double h2 = 0.25 * ((r - gamma) * (r - gamma) + 4.0 * collection.eta_bar() * r * gamma);
  const double h = std::sqrt(h2);
  const double hx = h * x;
  const double slow = std::exp(-roots.gamma_prime * x);
  const double fast = std::exp(-roots.r_prime * x);

  // All three carry the e^{-c x} factor.
  const double cosh_term = 0.5 * (slow + fast);
  double sinh_term;
  if (hx > 0.5) {
    sinh_term = (slow - fast) / (2.0 * h);
  } else {
    sinh_term = std::exp(-c * x) * (h > 0.0 ? std::sinh(hx) / h : x);
  }
  double sinh_slope;
  if (hx > 1.0) {
    sinh_slope = (x * cosh_term - sinh_term) / (2.0 * h2);
  } else {
    // x^3 sum_{k>=1} k (h x)^{2(k-1)} / (2k+1)!
    const double z = hx * hx;
    double sum = 0.0;
    double power = 1.0;
    double factorial = 6.0;
    for (int k = 1; k <= 20; ++k) {
      sum += k * power / factorial;
      power *= z;
      factorial *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
    }
    sinh_slope = std::exp(-c * x) * x * x * x * sum;
  }

  const double k_coef = collection.eta_bar() * r - 0.5 * (r - gamma);
  const double pi_0 = cosh_term + k_coef * sinh_term;
  const double slope = r * gamma * x * sinh_term / 2.0 + r * sinh_term +
                       k_coef * r * gamma * sinh_slope;
  return detail::finish_collection_stats(pi_0, collection.eta() * slope);
}

/// Same quantities assuming at most two photons are emitted per pulse.
inline CollectionStats collection_stats_two_photon_approx(double r, double gamma, double delta_t,
                                                          double eta) {
  detail::validate_two_level(r, gamma, delta_t);
  const Collection collection(eta);
  if (r == 0.0) return detail::finish_collection_stats(1.0, 0.0);
  const double pe = -std::expm1(-r * delta_t);
  const double p1 = single_emission_probability(r, gamma, delta_t);
  const double eb = collection.eta_bar();
  const double pi_0 = 1.0 - pe + eb * p1 + eb * eb * (pe - p1);
  const double pi_1 = collection.eta() * (p1 + 2.0 * eb * (pe - p1));
  return detail::finish_collection_stats(pi_0, pi_1);
}

/// Below this emission probability the Poisson leakage is taken from its
/// power series.
inline constexpr double kPoissonSeriesBelow = 1e-6;

/// Leakage f_il of an attenuated Poissonian source emitting at least one
/// photon with probability p_e.
inline double poisson_f_il(double p_e) {
  detail::require_finite("p_e", p_e);
  if (p_e < 0.0 || p_e >= 1.0) throw ParameterError("p_e", "must lie in [0, 1)");
  if (p_e == 0.0) return 0.0;
  if (p_e < kPoissonSeriesBelow) {
    // sum_k p^k / (k (k+1)) = p/2 (1 + p/3 + p^2/6 + p^3/10)
    return 0.5 * p_e * (1.0 + p_e / 3.0 * (1.0 + p_e / 2.0 * (1.0 + 0.6 * p_e)));
  }
  return 1.0 - (1.0 - 1.0 / p_e) * std::log1p(-p_e);
}

/// Mean-value shelving model: leaving the metastable level happens at
/// gamma_m + r_d (r_d only during the pulse when deshelving is pulse-gated).
struct ShelvingFigures {
  double leave_per_period = 0.0;  // (gamma_m + r_d) * period
  double duty_factor = 1.0;

  /// Probability of still being shelved after q periods.
  double survival(double q) const { return std::exp(-leave_per_period * q); }
};

inline ShelvingFigures shelving_figures(const DipoleParams& dipole, const PulseTrain& pulses,
                                        double p_e) {
  dipole.validate();
  pulses.validate();
  detail::require_finite("p_e", p_e);
  if (p_e < 0.0 || p_e > 1.0) throw ParameterError("p_e", "must lie in [0, 1]");
  const double deshelving_time =
      pulses.deshelving == Deshelving::always ? pulses.period : pulses.delta_t;
  ShelvingFigures out;
  out.leave_per_period = dipole.gamma_m * pulses.period + dipole.r_d * deshelving_time;
  const double entering = dipole.beta * p_e;
  if (entering > 0.0) out.duty_factor = out.leave_per_period / (entering + out.leave_per_period);
  return out;
}

}  // namespace photongun
