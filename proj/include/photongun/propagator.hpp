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

// Exact propagation of the piecewise-constant rate equations over one pulse
// period, both for plain level populations and resolved by the number of
// emitted (or detected) photons.
//
// The propagator always evolves the true finite period; it never takes the
// long-period limit used by the closed forms in analytics.hpp.

#pragma once

#include "photongun/expm.hpp"
#include "photongun/rates.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <string>
#include <vector>

namespace photongun {

/// Occupation probabilities of levels 1, 2, 3 (sub-probabilities for
/// conditional evolutions).
struct LevelDistribution {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();

  static LevelDistribution in(Level level) {
    LevelDistribution d;
    d.p(index_of(level)) = 1.0;
    return d;
  }

  double operator[](Level level) const { return p(index_of(level)); }
  double total() const { return p.sum(); }

  void validate() const {
    constexpr double slack = 1e-12;
    if (!p.allFinite()) throw ParameterError("state", "non-finite occupation");
    if ((p.array() < -slack).any() || (p.array() > 1.0 + slack).any())
      throw ParameterError("state", "occupations must lie in [0, 1]");
    if (total() > 1.0 + slack) throw ParameterError("state", "total occupation exceeds 1");
  }
};

/// Which generator a cycle propagation uses.
class GeneratorKind {
 public:
  enum class Tag { population, conditional, tilde };

  static GeneratorKind population() { return GeneratorKind(Tag::population, Collection(0.0)); }
  static GeneratorKind conditional() { return GeneratorKind(Tag::conditional, Collection(1.0)); }
  static GeneratorKind tilde(Collection collection) { return GeneratorKind(Tag::tilde, collection); }

  Tag tag() const noexcept { return tag_; }
  const Collection& collection() const noexcept { return collection_; }

  RateGenerator build(const DipoleParams& dipole, double pump) const {
    switch (tag_) {
      case Tag::population: return build_population_generator(dipole, pump);
      case Tag::conditional: return build_conditional_generator(dipole, pump);
      case Tag::tilde: return build_tilde_generator(dipole, pump, collection_);
    }
    return {};
  }

 private:
  GeneratorKind(Tag tag, Collection collection) : tag_(tag), collection_(collection) {}
  Tag tag_;
  Collection collection_;
};

namespace detail {

/// Dipole parameters in force between pulses.
inline DipoleParams off_pulse_dipole(const DipoleParams& dipole, const PulseTrain& pulses) {
  DipoleParams off = dipole;
  if (pulses.deshelving == Deshelving::pulse_only) off.r_d = 0.0;
  return off;
}

}  // namespace detail

/// exp(gen * dt) * state.
inline LevelDistribution expm_propagate(const RateGenerator& gen, const LevelDistribution& state,
                                        double dt, ExpmMethod method = ExpmMethod::automatic) {
  if (!std::isfinite(dt) || dt < 0.0) throw ParameterError("dt", "must be finite and >= 0");
  detail::require_finite_matrix(gen.matrix);
  LevelDistribution out;
  out.p = expm<3>(gen.matrix * dt, method) * state.p;
  return out;
}

/// Pulse-on segment at pump rate r for delta_t, then pulse-off for the rest
/// of the period.
inline LevelDistribution propagate_cycle(const DipoleParams& dipole, const PulseTrain& pulses,
                                         const GeneratorKind& kind,
                                         const LevelDistribution& initial) {
  dipole.validate();
  pulses.validate();
  initial.validate();
  const RateGenerator on = kind.build(dipole, pulses.r);
  const RateGenerator off = kind.build(detail::off_pulse_dipole(dipole, pulses), 0.0);
  return expm_propagate(off, expm_propagate(on, initial, pulses.delta_t), pulses.off_duration());
}

/// Linear map taking the level distribution at the start of a period to the
/// one at its end.
inline Eigen::Matrix3d cycle_map(const DipoleParams& dipole, const PulseTrain& pulses,
                                 const GeneratorKind& kind) {
  dipole.validate();
  pulses.validate();
  const RateGenerator on = kind.build(dipole, pulses.r);
  const RateGenerator off = kind.build(detail::off_pulse_dipole(dipole, pulses), 0.0);
  return expm<3>(off.matrix * pulses.off_duration()) * expm<3>(on.matrix * pulses.delta_t);
}

struct SteadyStateOptions {
  double tolerance = 1e-12;
  long max_iterations = 1'000'000;
};

/// Fixed point of the one-period population map.
///
/// When the fixed point is unique it is solved for directly, since slow
/// shelving dynamics can make successive iterates differ by less than the
/// tolerance while still far from the limit. Otherwise (several closed
/// classes, e.g. an unreachable metastable level) the map is iterated from
/// the ground state until successive distributions differ by less than
/// options.tolerance. Throws NumericalError with the last residual if the
/// iteration cap is hit.
inline LevelDistribution steady_cycle_distribution(const DipoleParams& dipole,
                                                   const PulseTrain& pulses,
                                                   const SteadyStateOptions& options = {}) {
  const Eigen::Matrix3d map = cycle_map(dipole, pulses, GeneratorKind::population());

  Eigen::Matrix3d system = map - Eigen::Matrix3d::Identity();
  system.row(2).setOnes();
  Eigen::FullPivLU<Eigen::Matrix3d> lu(system);
  lu.setThreshold(1e-13);
  if (lu.isInvertible()) {
    Eigen::Vector3d x = lu.solve(Eigen::Vector3d(0.0, 0.0, 1.0));
    x = x.cwiseMax(0.0);
    x /= x.sum();
    // One polishing step through the map itself.
    x = map * x;
    if ((map * x - x).cwiseAbs().maxCoeff() < options.tolerance) return LevelDistribution{x};
  }

  Eigen::Vector3d x = LevelDistribution::in(Level::ground).p;
  double residual = 0.0;
  for (long i = 0; i < options.max_iterations; ++i) {
    const Eigen::Vector3d next = map * x;
    residual = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (residual < options.tolerance) return LevelDistribution{x};
  }
  char message[160];
  std::snprintf(message, sizeof message,
                "steady_cycle_distribution: no convergence after %ld cycles, residual = %.3e",
                options.max_iterations, residual);
  throw NumericalError(message);
}

// ---------------------------------------------------------------------------
// Photon-number resolved propagation
// ---------------------------------------------------------------------------

/// What the count index of a CountResolvedState counts.
class CountVariant {
 public:
  enum class Tag { emitted, collected };

  static CountVariant emitted() { return CountVariant(Tag::emitted, Collection(1.0)); }
  static CountVariant collected(Collection collection) {
    return CountVariant(Tag::collected, collection);
  }

  Tag tag() const noexcept { return tag_; }
  const Collection& collection() const noexcept { return collection_; }

 private:
  CountVariant(Tag tag, Collection collection) : tag_(tag), collection_(collection) {}
  Tag tag_;
  Collection collection_;
};

/// blocks[n] is the sub-distribution over levels having counted exactly n
/// photons; tail_mass is what was pushed past the cutoff.
struct CountResolvedState {
  std::vector<LevelDistribution> blocks;
  double tail_mass = 0.0;

  std::size_t cutoff() const noexcept { return blocks.empty() ? 0 : blocks.size() - 1; }
  double block_total(std::size_t n) const { return blocks.at(n).total(); }

  double total() const {
    double sum = tail_mass;
    for (const auto& b : blocks) sum += b.total();
    return sum;
  }

  /// Sum over photon numbers: the unconditional level distribution (minus
  /// the truncated tail).
  LevelDistribution level_marginal() const {
    LevelDistribution out;
    for (const auto& b : blocks) out.p += b.p;
    return out;
  }
};

namespace detail {

/// Block-bidiagonal count-resolved generator: `within` acts inside each block,
/// `feed` moves counted events into the next block.
struct CountChain {
  Eigen::Matrix3d within;
  Eigen::Matrix3d feed = Eigen::Matrix3d::Zero();
};

inline CountChain count_chain(const DipoleParams& dipole, double pump, const CountVariant& variant) {
  const int g = index_of(Level::ground);
  const int e = index_of(Level::excited);
  CountChain chain;
  if (variant.tag() == CountVariant::Tag::emitted) {
    chain.within = build_conditional_generator(dipole, pump).matrix;
    chain.feed(g, e) = dipole.gamma;
  } else {
    chain.within = build_tilde_generator(dipole, pump, variant.collection()).matrix;
    chain.feed(g, e) = variant.collection().eta() * dipole.gamma;
  }
  return chain;
}

// Poisson mass of the uniformized chain per sub-interval. exp(-32) is far
// from underflow and keeps the number of series terms below ~100.
inline constexpr double kUniformizationSpan = 32.0;

// Largest q * dt accepted; the work grows linearly with it.
inline constexpr double kMaxUniformizedExposure = 1e8;

/// Uniformization (Jensen's method): exp(G t) = sum_k Pois(k; q t) (I + G/q)^k
/// with q the largest outflow rate. Every term is non-negative, so mass
/// accounting (including the tail beyond the cutoff) is exact up to the
/// Poisson truncation, which is cut below 1e-20 per sub-interval.
inline void propagate_counts(const CountChain& chain, double dt, std::vector<Eigen::Vector3d>& blocks,
                             double& tail) {
  const double q = (-chain.within.diagonal()).maxCoeff();
  if (!(q > 0.0) || dt <= 0.0) return;
  if (!(q * dt <= kMaxUniformizedExposure))
    throw NumericalError("count-resolved propagation: rate * duration = " + std::to_string(q * dt) +
                         " is beyond the supported range");
  const Eigen::Matrix3d step = Eigen::Matrix3d::Identity() + chain.within / q;
  const Eigen::Matrix3d feed = chain.feed / q;
  const std::size_t last = blocks.size() - 1;

  const auto pieces = static_cast<long>(std::ceil(q * dt / kUniformizationSpan));
  const double span = q * dt / static_cast<double>(pieces);

  std::vector<Eigen::Vector3d> term(blocks.size()), next(blocks.size()), acc(blocks.size());
  for (long piece = 0; piece < pieces; ++piece) {
    // Highest block that can hold mass so far.
    std::size_t reach = 0;
    for (std::size_t n = 0; n <= last; ++n)
      if ((blocks[n].array() != 0.0).any()) reach = n;

    term = blocks;
    std::fill(next.begin(), next.end(), Eigen::Vector3d::Zero());
    double term_tail = tail;
    double weight = std::exp(-span);
    for (std::size_t n = 0; n <= last; ++n) acc[n] = weight * term[n];
    double acc_tail = weight * term_tail;

    for (long k = 1;; ++k) {
      const std::size_t top = std::min(last, reach + 1);
      next[0] = step * term[0];
      for (std::size_t n = 1; n <= top; ++n) next[n] = step * term[n] + feed * term[n - 1];
      double next_tail = term_tail;
      if (reach == last) next_tail += (feed * term[last]).sum();
      reach = top;
      std::swap(term, next);
      term_tail = next_tail;

      weight *= span / static_cast<double>(k);
      for (std::size_t n = 0; n <= reach; ++n) acc[n] += weight * term[n];
      acc_tail += weight * term_tail;
      if (static_cast<double>(k) > span && weight < 1e-20) break;
    }
    blocks = acc;
    tail = acc_tail;
  }
}

}  // namespace detail

/// Propagates one period resolved by photon count, keeping counts 0..cutoff.
/// Truncation is not an error: the mass beyond the cutoff is reported in
/// tail_mass. For the collected variant, block n weighs the detection of
/// exactly n photons and block 0 reproduces the tilde generator's evolution.
inline CountResolvedState count_resolved_cycle(const DipoleParams& dipole, const PulseTrain& pulses,
                                               const CountVariant& variant, std::size_t cutoff,
                                               const LevelDistribution& initial) {
  dipole.validate();
  pulses.validate();
  initial.validate();
  if (cutoff < 1) throw ParameterError("cutoff", "must be >= 1");

  std::vector<Eigen::Vector3d> blocks(cutoff + 1, Eigen::Vector3d::Zero());
  blocks[0] = initial.p;
  double tail = 0.0;
  detail::propagate_counts(detail::count_chain(dipole, pulses.r, variant), pulses.delta_t, blocks,
                           tail);
  detail::propagate_counts(
      detail::count_chain(detail::off_pulse_dipole(dipole, pulses), 0.0, variant),
      pulses.off_duration(), blocks, tail);

  CountResolvedState state;
  state.blocks.reserve(blocks.size());
  for (const auto& b : blocks) state.blocks.push_back(LevelDistribution{b});
  state.tail_mass = std::max(0.0, tail);
  return state;
}

struct CutoffPolicy {
  std::size_t initial = 16;
  std::size_t cap = 1024;
  double tail_tolerance = 1e-10;
};

/// count_resolved_cycle with the cutoff doubled until the tail drops below
/// policy.tail_tolerance or the cap is reached.
inline CountResolvedState count_resolved_cycle_auto(const DipoleParams& dipole,
                                                    const PulseTrain& pulses,
                                                    const CountVariant& variant,
                                                    const LevelDistribution& initial,
                                                    const CutoffPolicy& policy = {}) {
  std::size_t cutoff = std::max<std::size_t>(1, policy.initial);
  for (;;) {
    CountResolvedState state = count_resolved_cycle(dipole, pulses, variant, cutoff, initial);
    if (state.tail_mass < policy.tail_tolerance || cutoff >= policy.cap) return state;
    cutoff = std::min(cutoff * 2, policy.cap);
  }
}

/// Per-period count statistics.
struct PhotonStats {
  std::vector<double> p_n;
  double tail = 0.0;
  double p_e = 0.0;        // at least one
  double p_1_exact = 0.0;  // exactly one
  double f_il = 0.0;       // P(n >= 2) / P(n >= 1)
  bool degenerate = false; // p_e == 0; f_il is then reported as 0

  double p_at_least_two() const { return p_e - p_1_exact; }
  double p(std::size_t n) const { return n < p_n.size() ? p_n[n] : 0.0; }
};

/// Builds PhotonStats from count probabilities. Sums are taken over the
/// n >= 1 and n >= 2 terms directly rather than by subtraction, so small
/// probabilities keep full relative precision.
inline PhotonStats stats_from_distribution(std::vector<double> p_n, double tail) {
  PhotonStats s;
  s.p_n = std::move(p_n);
  s.tail = tail;
  double multi = tail;
  for (std::size_t n = 2; n < s.p_n.size(); ++n) multi += s.p_n[n];
  s.p_1_exact = s.p_n.size() > 1 ? s.p_n[1] : 0.0;
  s.p_e = s.p_1_exact + multi;
  if (s.p_e > 0.0) {
    s.f_il = std::clamp(multi / s.p_e, 0.0, 1.0);
  } else {
    s.f_il = 0.0;
    s.degenerate = true;
  }
  return s;
}

inline PhotonStats stats_from_counts(const CountResolvedState& state) {
  std::vector<double> p_n;
  p_n.reserve(state.blocks.size());
  for (const auto& b : state.blocks) p_n.push_back(b.total());
  return stats_from_distribution(std::move(p_n), state.tail_mass);
}

/// Emitted-photon statistics of one period started from `initial`.
inline PhotonStats propagated_emission_stats(const DipoleParams& dipole, const PulseTrain& pulses,
                                             const LevelDistribution& initial,
                                             const CutoffPolicy& policy = {}) {
  return stats_from_counts(
      count_resolved_cycle_auto(dipole, pulses, CountVariant::emitted(), initial, policy));
}

/// Detected-photon statistics of one period started from `initial`.
inline PhotonStats propagated_collection_stats(const DipoleParams& dipole, const PulseTrain& pulses,
                                               const Collection& collection,
                                               const LevelDistribution& initial,
                                               const CutoffPolicy& policy = {}) {
  return stats_from_counts(count_resolved_cycle_auto(
      dipole, pulses, CountVariant::collected(collection), initial, policy));
}

}  // namespace photongun
