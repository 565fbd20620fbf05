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

// Physical parameters of the three-level emitter and the transition-rate
// generators built from them.
//
// Level indexing is fixed: Ground = 1, Excited = 2, Metastable = 3, stored at
// matrix/vector index (level - 1). Generators are column oriented: entry
// (b, c) is the rate of flow into level b out of level c, the diagonal holds
// the negative total outflow, and a generator acts on a column vector of
// level probabilities, dp/dt = G p.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace photongun {

/// Raised when a physical parameter is out of its domain. `field()` names
/// the offending parameter.
class ParameterError : public std::invalid_argument {
 public:
  ParameterError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Raised when a numerical routine hits non-finite data or fails to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Level : int { ground = 1, excited = 2, metastable = 3 };

constexpr int index_of(Level level) noexcept { return static_cast<int>(level) - 1; }

constexpr Level level_at(int index) noexcept { return static_cast<Level>(index + 1); }

inline const char* to_string(Level level) noexcept {
  switch (level) {
    case Level::ground: return "ground";
    case Level::excited: return "excited";
    case Level::metastable: return "metastable";
  }
  return "?";
}

namespace detail {

inline void require_finite(const char* field, double value) {
  if (!std::isfinite(value)) throw ParameterError(field, "must be finite");
}

inline void require_nonnegative(const char* field, double value) {
  require_finite(field, value);
  if (value < 0.0) throw ParameterError(field, "must be >= 0");
}

}  // namespace detail

/// Rates of the emitter. `gamma` is the 2->1 radiative rate, `beta * gamma`
/// the 2->3 rate, `gamma_m` the 3->1 metastable decay and `r_d` the 3->2
/// deshelving rate.
struct DipoleParams {
  double gamma = 1.0;
  double beta = 0.0;
  double gamma_m = 0.0;
  double r_d = 0.0;

  void validate() const {
    detail::require_finite("gamma", gamma);
    if (gamma <= 0.0) throw ParameterError("gamma", "must be > 0");
    detail::require_nonnegative("beta", beta);
    detail::require_nonnegative("gamma_m", gamma_m);
    detail::require_nonnegative("r_d", r_d);
  }
};

/// When the deshelving rate acts within a period.
enum class Deshelving { always, pulse_only };

/// Rectangular excitation pulses: pump rate `r` for `delta_t`, repeated every
/// `period`.
struct PulseTrain {
  double r = 0.0;
  double delta_t = 0.0;
  double period = 0.0;
  Deshelving deshelving = Deshelving::always;

  double off_duration() const noexcept { return period - delta_t; }

  void validate() const {
    detail::require_nonnegative("r", r);
    detail::require_finite("delta_t", delta_t);
    detail::require_finite("period", period);
    if (delta_t <= 0.0) throw ParameterError("delta_t", "must be > 0");
    if (delta_t > period) throw ParameterError("delta_t", "must not exceed period");
  }
};

/// Detection efficiency. The miss probability is always derived.
class Collection {
 public:
  explicit Collection(double eta) : eta_(eta) {
    detail::require_finite("eta", eta);
    if (eta < 0.0 || eta > 1.0) throw ParameterError("eta", "must lie in [0, 1]");
  }

  double eta() const noexcept { return eta_; }
  double eta_bar() const noexcept { return 1.0 - eta_; }

  friend bool operator==(const Collection&, const Collection&) = default;

 private:
  double eta_;
};

/// The 2->1 transition counted as a photon event, with the rate at which such
/// events leave the evolution described by the generator (0 when the event is
/// refilled into the ground state, as for plain populations).
struct EmissionTag {
  Level from = Level::excited;
  Level to = Level::ground;
  double counted_rate = 0.0;

  friend bool operator==(const EmissionTag&, const EmissionTag&) = default;
};

struct RateGenerator {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Zero();
  EmissionTag emit;

  double at(Level into, Level from) const { return matrix(index_of(into), index_of(from)); }

  Eigen::RowVector3d column_sums() const { return matrix.colwise().sum(); }
};

namespace detail {

// Conditional (no-emission) generator: the 2->1 emission leaves the system.
inline Eigen::Matrix3d conditional_matrix(const DipoleParams& d, double pump) {
  const int g = index_of(Level::ground);
  const int e = index_of(Level::excited);
  const int m = index_of(Level::metastable);
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(g, g) = -pump;
  a(e, g) = pump;
  a(e, e) = -(1.0 + d.beta) * d.gamma;
  a(m, e) = d.beta * d.gamma;
  a(g, m) = d.gamma_m;
  a(e, m) = d.r_d;
  a(m, m) = -(d.gamma_m + d.r_d);
  return a;
}

inline void validate_inputs(const DipoleParams& dipole, double pump) {
  dipole.validate();
  require_nonnegative("pump", pump);
}

}  // namespace detail

/// Unconditional level populations. Columns sum to zero.
inline RateGenerator build_population_generator(const DipoleParams& dipole, double pump) {
  detail::validate_inputs(dipole, pump);
  RateGenerator gen;
  gen.matrix = detail::conditional_matrix(dipole, pump);
  gen.matrix(index_of(Level::ground), index_of(Level::excited)) = dipole.gamma;
  gen.emit.counted_rate = 0.0;
  return gen;
}

/// Populations conditioned on no photon having been emitted: the ground
/// state is not refilled by emission, so column 2 sums to -gamma.
inline RateGenerator build_conditional_generator(const DipoleParams& dipole, double pump) {
  detail::validate_inputs(dipole, pump);
  RateGenerator gen;
  gen.matrix = detail::conditional_matrix(dipole, pump);
  gen.emit.counted_rate = dipole.gamma;
  return gen;
}

/// Generating-function populations weighted by eta_bar per missed photon:
/// the conditional generator plus an eta_bar * gamma refill of the ground
/// state. Its total mass is the probability of detecting nothing.
inline RateGenerator build_tilde_generator(const DipoleParams& dipole, double pump,
                                           const Collection& collection) {
  detail::validate_inputs(dipole, pump);
  RateGenerator gen;
  gen.matrix = detail::conditional_matrix(dipole, pump);
  // Exactly the population generator at eta = 0 and the conditional one at
  // eta = 1: 1.0 * gamma and 0.0 * gamma are exact.
  gen.matrix(index_of(Level::ground), index_of(Level::excited)) =
      collection.eta_bar() * dipole.gamma;
  gen.emit.counted_rate = collection.eta() * dipole.gamma;
  return gen;
}

}  // namespace photongun
