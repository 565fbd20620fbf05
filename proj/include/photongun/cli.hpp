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

// Batch front-end behind the `photongun` executable: JSON run configuration,
// figure presets and the analyze / sweep / mc / attack / validate modes.
//
// Rates are in units of gamma and times in units of 1/gamma; gamma itself
// defaults to 1. Everything here writes to caller-supplied streams so the
// modes can be exercised in-process.

#pragma once

#include "photongun/analytics.hpp"
#include "photongun/attacks.hpp"
#include "photongun/montecarlo.hpp"
#include "photongun/parallel.hpp"
#include "photongun/propagator.hpp"
#include "photongun/rates.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace photongun::cli {

/// Invalid configuration; `field()` is the dotted path of the culprit.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Mode { analyze, sweep, mc, attack, validate };

inline std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "analyze") return Mode::analyze;
  if (s == "sweep") return Mode::sweep;
  if (s == "mc") return Mode::mc;
  if (s == "attack") return Mode::attack;
  if (s == "validate") return Mode::validate;
  return std::nullopt;
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitConfig = 2;

struct SweepAxis {
  std::string variable = "r";
  double min = 1.0;
  double max = 1000.0;
  int points = 11;
  bool log = true;

  std::vector<double> grid() const {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(points - 1);
      g[i] = log ? std::exp(std::log(min) + f * (std::log(max) - std::log(min)))
                 : min + f * (max - min);
    }
    // Pin the end points exactly.
    g.front() = min;
    g.back() = max;
    return g;
  }
};

struct McSettings {
  std::uint64_t cycles = 1'000'000;
  std::uint64_t burn_in = 0;
  std::uint64_t shard_cycles = 4096;
};

struct AttackSettings {
  double tap = 0.5;
  double line_efficiency = 0.001;
};

struct ValidateSettings {
  double sigma = 3.0;         // Monte Carlo agreement, in standard errors
  double abs_tol = 1e-6;      // closed form vs propagator
  double duty_tol = 0.05;     // Monte Carlo duty factor vs mean-value model
  std::uint64_t cycles = 200'000;
};

/// Reference operating point unless the file says otherwise.
struct RunConfig {
  DipoleParams dipole{1.0, 0.0, 0.0, 0.0};
  PulseTrain pulses{1000.0, 0.01, 50.0, Deshelving::always};
  double eta = 0.2;
  std::optional<SweepAxis> sweep;
  McSettings mc;
  AttackSettings attack;
  ValidateSettings validate;
  std::optional<Mode> mode;  // if set, must agree with the command
  std::uint64_t seed = 1;
  std::string output;
};

namespace detail {

using nlohmann::json;

inline double number_at(const json& obj, const std::string& key, const std::string& path,
                        double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path + "." + key, "must be finite");
  return d;
}

inline std::uint64_t count_at(const json& obj, const std::string& key, const std::string& path,
                              std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(path + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<const char*> known) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key))
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
  }
}

inline const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  return root.contains(name) ? root.at(name) : empty;
}

}  // namespace detail

inline void validate_config(const RunConfig& c) {
  try {
    c.dipole.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("dipole." + e.field(), e.what());
  }
  try {
    c.pulses.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("pulses." + e.field(), e.what());
  }
  try {
    Collection{c.eta};
  } catch (const ParameterError&) {
    throw ConfigError("collection.eta", "must lie in [0, 1]");
  }
  if (c.sweep) {
    const SweepAxis& a = *c.sweep;
    static const std::set<std::string> variables{"r", "delta_t", "eta", "beta",
                                                 "gamma_m", "r_d", "period"};
    if (!variables.count(a.variable)) throw ConfigError("sweep.variable", "unknown sweep variable");
    if (a.points < 2) throw ConfigError("sweep.points", "must be >= 2");
    if (!(a.min <= a.max)) throw ConfigError("sweep.max", "must be >= sweep.min");
    if (a.log && !(a.min > 0.0)) throw ConfigError("sweep.min", "must be > 0 on a log axis");
  }
  if (c.mc.cycles < 1) throw ConfigError("monte_carlo.cycles", "must be >= 1");
  if (c.mc.burn_in >= c.mc.cycles) throw ConfigError("monte_carlo.burn_in", "must be < cycles");
  if (c.mc.shard_cycles < 1) throw ConfigError("monte_carlo.shard_cycles", "must be >= 1");
  if (!(c.attack.tap >= 0.0 && c.attack.tap <= 1.0))
    throw ConfigError("attack.tap", "must lie in [0, 1]");
  if (!(c.attack.line_efficiency > 0.0 && c.attack.line_efficiency <= 1.0))
    throw ConfigError("attack.line_efficiency", "must lie in (0, 1]");
  if (!(c.validate.sigma > 0.0)) throw ConfigError("validate.sigma", "must be > 0");
  if (!(c.validate.abs_tol > 0.0)) throw ConfigError("validate.abs_tol", "must be > 0");
  if (!(c.validate.duty_tol > 0.0)) throw ConfigError("validate.duty_tol", "must be > 0");
  if (c.validate.cycles < 2) throw ConfigError("validate.cycles", "must be >= 2");
}

/// Parses a JSON configuration document. Unknown fields are errors.
inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  detail::reject_unknown(root, "",
                         {"mode", "dipole", "pulses", "collection", "sweep", "monte_carlo",
                          "attack", "validate", "seed", "output"});
  RunConfig c;
  if (root.contains("mode")) {
    const json& v = root.at("mode");
    c.mode = v.is_string() ? parse_mode(v.get<std::string>()) : std::nullopt;
    if (!c.mode) throw ConfigError("mode", "expected analyze, sweep, mc, attack or validate");
  }

  const json& d = detail::section(root, "dipole");
  detail::reject_unknown(d, "dipole", {"gamma", "beta", "gamma_m", "r_d"});
  c.dipole.gamma = detail::number_at(d, "gamma", "dipole", c.dipole.gamma);
  c.dipole.beta = detail::number_at(d, "beta", "dipole", c.dipole.beta);
  c.dipole.gamma_m = detail::number_at(d, "gamma_m", "dipole", c.dipole.gamma_m);
  c.dipole.r_d = detail::number_at(d, "r_d", "dipole", c.dipole.r_d);

  const json& p = detail::section(root, "pulses");
  detail::reject_unknown(p, "pulses", {"r", "delta_t", "period", "deshelving"});
  c.pulses.r = detail::number_at(p, "r", "pulses", c.pulses.r);
  c.pulses.delta_t = detail::number_at(p, "delta_t", "pulses", c.pulses.delta_t);
  c.pulses.period = detail::number_at(p, "period", "pulses", c.pulses.period);
  if (p.contains("deshelving")) {
    const json& v = p.at("deshelving");
    if (v == "always") {
      c.pulses.deshelving = Deshelving::always;
    } else if (v == "pulse_only") {
      c.pulses.deshelving = Deshelving::pulse_only;
    } else {
      throw ConfigError("pulses.deshelving", "expected \"always\" or \"pulse_only\"");
    }
  }

  const json& col = detail::section(root, "collection");
  detail::reject_unknown(col, "collection", {"eta"});
  c.eta = detail::number_at(col, "eta", "collection", c.eta);

  if (root.contains("sweep")) {
    const json& s = root.at("sweep");
    detail::reject_unknown(s, "sweep", {"variable", "min", "max", "points", "scale"});
    SweepAxis a;
    if (s.contains("variable")) {
      if (!s.at("variable").is_string()) throw ConfigError("sweep.variable", "expected a string");
      a.variable = s.at("variable").get<std::string>();
    }
    a.min = detail::number_at(s, "min", "sweep", a.min);
    a.max = detail::number_at(s, "max", "sweep", a.max);
    a.points = static_cast<int>(detail::count_at(s, "points", "sweep", a.points));
    if (s.contains("scale")) {
      const json& v = s.at("scale");
      if (v == "log") {
        a.log = true;
      } else if (v == "linear") {
        a.log = false;
      } else {
        throw ConfigError("sweep.scale", "expected \"log\" or \"linear\"");
      }
    }
    c.sweep = a;
  }

  const json& m = detail::section(root, "monte_carlo");
  detail::reject_unknown(m, "monte_carlo", {"cycles", "burn_in", "shard_cycles"});
  c.mc.cycles = detail::count_at(m, "cycles", "monte_carlo", c.mc.cycles);
  c.mc.burn_in = detail::count_at(m, "burn_in", "monte_carlo", c.mc.burn_in);
  c.mc.shard_cycles = detail::count_at(m, "shard_cycles", "monte_carlo", c.mc.shard_cycles);

  const json& at = detail::section(root, "attack");
  detail::reject_unknown(at, "attack", {"tap", "line_efficiency"});
  c.attack.tap = detail::number_at(at, "tap", "attack", c.attack.tap);
  c.attack.line_efficiency =
      detail::number_at(at, "line_efficiency", "attack", c.attack.line_efficiency);

  const json& v = detail::section(root, "validate");
  detail::reject_unknown(v, "validate", {"sigma", "abs_tol", "duty_tol", "cycles"});
  c.validate.sigma = detail::number_at(v, "sigma", "validate", c.validate.sigma);
  c.validate.abs_tol = detail::number_at(v, "abs_tol", "validate", c.validate.abs_tol);
  c.validate.duty_tol = detail::number_at(v, "duty_tol", "validate", c.validate.duty_tol);
  c.validate.cycles = detail::count_at(v, "cycles", "validate", c.validate.cycles);

  c.seed = detail::count_at(root, "seed", "", c.seed);
  if (root.contains("output")) {
    if (!root.at("output").is_string()) throw ConfigError("output", "expected a string");
    c.output = root.at("output").get<std::string>();
  }
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// 17 significant digits, '.' decimal separator regardless of locale.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string short_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Single operating point
// ---------------------------------------------------------------------------

/// Propagator statistics of one operating point, started from the long-run
/// distribution at pulse arrival.
struct PointStats {
  PhotonStats emitted;
  PhotonStats collected;
  LevelDistribution start;
};

inline PointStats evaluate_point(const DipoleParams& dipole, const PulseTrain& pulses, double eta) {
  PointStats s;
  s.start = steady_cycle_distribution(dipole, pulses);
  s.emitted = propagated_emission_stats(dipole, pulses, s.start);
  s.collected = propagated_collection_stats(dipole, pulses, Collection(eta), s.start);
  return s;
}

inline void run_analyze(const RunConfig& c, std::ostream& out) {
  const PointStats point = evaluate_point(c.dipole, c.pulses, c.eta);
  const double gamma = c.dipole.gamma;
  const TwoLevelClosedForm emission =
      two_level_emission(c.pulses.r, gamma, c.pulses.delta_t, c.pulses.period);
  const CollectionStats closed = collection_stats(c.pulses.r, gamma, c.pulses.delta_t, c.eta);
  const ShelvingFigures shelving = shelving_figures(c.dipole, c.pulses, point.emitted.p_e);

  auto row = [&](const char* name, double analytic, double numeric) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-22s %-16s %-16s\n", name, short_number(analytic).c_str(),
                  short_number(numeric).c_str());
    out << buf;
  };
  out << "operating point: gamma=" << short_number(gamma) << " beta=" << short_number(c.dipole.beta)
      << " gamma_m=" << short_number(c.dipole.gamma_m) << " r_d=" << short_number(c.dipole.r_d)
      << " r=" << short_number(c.pulses.r) << " delta_t=" << short_number(c.pulses.delta_t)
      << " period=" << short_number(c.pulses.period) << " eta=" << short_number(c.eta) << "\n";
  if (c.dipole.beta > 0.0)
    out << "note: closed forms neglect the metastable level (beta > 0 here)\n";
  out << "quantity               closed-form      propagator\n";
  row("P_e (emitted)", emission.pe_exact, point.emitted.p_e);
  row("P_1 (emitted)", emission.p1, point.emitted.p_1_exact);
  row("Pi_0", closed.pi_0, point.collected.p(0));
  row("Pi_e", closed.pi_e, point.collected.p_e);
  row("Pi_1", closed.pi_1, point.collected.p_1_exact);
  row("f_il", closed.f_il, point.collected.f_il);
  const double pe_match = point.collected.p_e;
  if (pe_match < 1.0) {
    const SourceComparison cmp = compare_sources(point.collected, pe_match);
    out << "f_il_poisson           " << short_number(cmp.poisson_f_il) << "\n";
    out << "improvement_ratio      "
        << (cmp.infinite_ratio ? std::string("inf") : short_number(cmp.improvement_ratio)) << "\n";
  }
  out << "duty_factor_M          " << short_number(shelving.duty_factor) << "\n";
  out << "metastable_at_pulse    " << short_number(point.start[Level::metastable]) << "\n";
  out << "anticorrelated         " << (anticorrelation_criterion(point.collected) ? "yes" : "no")
      << "\n";
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepSeries {
  std::string label;  // empty for a plain config sweep
  RunConfig base;
  SweepAxis axis;
};

struct SweepRow {
  double x = 0.0;
  double pe = 0.0;
  double pi_e = 0.0;
  double pi_1 = 0.0;
  double fil = 0.0;
  double fil_poisson = 0.0;
};

inline constexpr const char* kSweepHeader = "x,pe,pi_e,pi_1,fil,fil_poisson";

inline void set_variable(RunConfig& c, const std::string& variable, double value) {
  if (variable == "r") c.pulses.r = value;
  else if (variable == "delta_t") c.pulses.delta_t = value;
  else if (variable == "period") c.pulses.period = value;
  else if (variable == "eta") c.eta = value;
  else if (variable == "beta") c.dipole.beta = value;
  else if (variable == "gamma_m") c.dipole.gamma_m = value;
  else if (variable == "r_d") c.dipole.r_d = value;
  else throw ConfigError("sweep.variable", "unknown sweep variable");
}

/// Sweep series for a preset name, or the config's own sweep when `preset`
/// is empty. Presets run at eta = 0.2 on top of the configured dipole and
/// period.
inline std::vector<SweepSeries> sweep_series(const RunConfig& c, const std::string& preset) {
  std::vector<SweepSeries> series;
  auto labelled = [&](double delta_t, SweepAxis axis) {
    SweepSeries s{"delta_t=" + short_number(delta_t), c, axis};
    s.base.eta = 0.2;
    s.base.pulses.delta_t = delta_t;
    return s;
  };
  if (preset.empty()) {
    if (!c.sweep) throw ConfigError("sweep", "no sweep axis configured and no --preset given");
    series.push_back({"", c, *c.sweep});
  } else if (preset == "fig2") {
    // Pump swept over pulse energies r * delta_t from 1e-2 to 10.
    for (double dt : {0.1, 0.01}) series.push_back(labelled(dt, {"r", 0.01 / dt, 10.0 / dt, 41, true}));
  } else if (preset == "fig3") {
    SweepSeries s{"r=100", c, {"delta_t", 1e-3, 10.0, 41, true}};
    s.base.eta = 0.2;
    s.base.pulses.r = 100.0;
    series.push_back(s);
  } else if (preset == "fig4") {
    for (double dt : {0.01, 0.1}) series.push_back(labelled(dt, {"r", 1.0, 1e4, 41, true}));
  } else {
    throw ConfigError("--preset", "unknown preset '" + preset + "' (fig2, fig3, fig4)");
  }
  return series;
}

inline std::vector<SweepRow> evaluate_series(const SweepSeries& s, unsigned threads) {
  const std::vector<double> grid = s.axis.grid();
  // Validate every point before spending any time on one.
  std::vector<RunConfig> points(grid.size(), s.base);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    set_variable(points[i], s.axis.variable, grid[i]);
    validate_config(points[i]);
  }
  std::vector<SweepRow> rows(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    const RunConfig& pc = points[i];
    const PointStats st = evaluate_point(pc.dipole, pc.pulses, pc.eta);
    SweepRow& row = rows[i];
    row.x = grid[i];
    row.pe = st.emitted.p_e;
    row.pi_e = st.collected.p_e;
    row.pi_1 = st.collected.p_1_exact;
    row.fil = st.collected.f_il;
    row.fil_poisson = row.pi_e < 1.0 ? poisson_f_il(row.pi_e) : std::nan("");
  });
  return rows;
}

/// Writes the CSV. Multi-series presets put a "# <label>" line before each
/// series' header.
inline void run_sweep(const RunConfig& c, const std::string& preset, unsigned threads,
                      std::ostream& out) {
  const std::vector<SweepSeries> series = sweep_series(c, preset);
  for (const SweepSeries& s : series) {
    const std::vector<SweepRow> rows = evaluate_series(s, threads);
    if (!s.label.empty()) out << "# " << s.label << "\n";
    out << kSweepHeader << "\n";
    for (const SweepRow& r : rows) {
      out << csv_number(r.x) << ',' << csv_number(r.pe) << ',' << csv_number(r.pi_e) << ','
          << csv_number(r.pi_1) << ',' << csv_number(r.fil) << ',' << csv_number(r.fil_poisson)
          << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Monte Carlo and attacks
// ---------------------------------------------------------------------------

inline McConfig mc_config(const RunConfig& c, std::uint64_t cycles, unsigned threads) {
  McConfig mc;
  mc.n_cycles = cycles;
  mc.seed = c.seed;
  mc.thinning = Collection(c.eta);
  mc.burn_in = std::min(c.mc.burn_in, cycles - 1);
  mc.shard_cycles = c.mc.shard_cycles;
  mc.threads = threads;
  return mc;
}

inline void run_mc(const RunConfig& c, unsigned threads, std::ostream& out) {
  const McConfig mc = mc_config(c, c.mc.cycles, threads);
  const McStats est = estimate_stats(c.dipole, c.pulses, mc);
  const PointStats point = evaluate_point(c.dipole, c.pulses, c.eta);
  auto row = [&](const char* name, const McEstimate& e, double reference) {
    char buf[200];
    const double z = e.std_error > 0.0 ? (e.mean - reference) / e.std_error : 0.0;
    std::snprintf(buf, sizeof buf, "%-12s %-14s +- %-12s propagator %-14s z=%+.3f\n", name,
                  short_number(e.mean).c_str(), short_number(e.std_error).c_str(),
                  short_number(reference).c_str(), z);
    out << buf;
  };
  out << "cycles " << mc.n_cycles << " burn_in " << mc.burn_in << " seed " << mc.seed << "\n";
  row("pi_0", est.pi_0, point.collected.p(0));
  row("pi_1", est.pi_1, point.collected.p_1_exact);
  row("pi_ge2", est.pi_ge2, point.collected.p_at_least_two());
  row("f_il", est.f_il, point.collected.f_il);
  row("p_e_emitted", est.p_e_emitted, point.emitted.p_e);
  if (est.f_il_degenerate) out << "f_il degenerate: no detections\n";
  if (c.dipole.beta > 0.0) {
    const McEstimate duty = estimate_duty_factor(c.dipole, c.pulses, mc);
    const ShelvingFigures sh = shelving_figures(c.dipole, c.pulses, point.emitted.p_e);
    row("duty_factor", duty, sh.duty_factor);
  }
}

inline void run_attack(const RunConfig& c, std::ostream& out) {
  const PointStats point = evaluate_point(c.dipole, c.pulses, c.eta);
  const PhotonStats& s = point.collected;
  auto flags = [](unsigned f) {
    if (f == kUndetectable) return std::string("none");
    std::string r;
    if (f & kLossAnomaly) r += "loss_anomaly";
    if (f & kStatisticsAnomaly) r += (r.empty() ? "" : ",") + std::string("statistics_anomaly");
    return r;
  };
  auto report = [&](const char* name, const AttackReport& a) {
    out << name << ": eve_fraction=" << short_number(a.eve_fraction)
        << " bob_rate=" << short_number(a.bob_rate) << " detectable_by=" << flags(a.detectable_by);
    if (a.degenerate) out << " [degenerate]";
    if (a.multiphoton_warning) out << " [warning: n>=3 not negligible]";
    if (a.extension) out << " [extension: proportional model]";
    out << "\n";
  };
  out << "Pi_e=" << short_number(s.p_e) << " Pi_1=" << short_number(s.p_1_exact)
      << " f_il=" << short_number(s.f_il) << "\n";
  report("beamsplitter", beamsplitter_attack(s, c.attack.tap));
  report("qnd", qnd_attack(s));
  report("lossy_line", lossy_line_attack(s, c.attack.line_efficiency));
  if (s.p_e < 1.0) {
    const SourceComparison cmp = compare_sources(s, s.p_e);
    out << "poisson_at_same_Pi_e: f_il=" << short_number(cmp.poisson_f_il) << " improvement_ratio="
        << (cmp.infinite_ratio ? std::string("inf") : short_number(cmp.improvement_ratio)) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Check {
  std::string name;
  enum class Status { pass, fail, skip } status = Status::pass;
  double deviation = 0.0;
  double tolerance = 0.0;
  std::string note;
};

struct ValidationReport {
  std::vector<Check> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (c.status == Check::Status::fail) return false;
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["passed"] = passed();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json e;
      e["name"] = c.name;
      e["status"] = c.status == Check::Status::pass   ? "pass"
                    : c.status == Check::Status::fail ? "fail"
                                                      : "skip";
      e["deviation"] = c.deviation;
      e["tolerance"] = c.tolerance;
      if (!c.note.empty()) e["note"] = c.note;
      j["checks"].push_back(e);
    }
    return j;
  }
};

/// Cross-checks closed forms, propagator and Monte Carlo at the configured
/// operating point.
inline ValidationReport run_validate(const RunConfig& c, unsigned threads) {
  ValidationReport report;
  auto check = [&](std::string name, double deviation, double tolerance, std::string note = {}) {
    Check ch{std::move(name), Check::Status::pass, deviation, tolerance, std::move(note)};
    if (!(deviation <= tolerance)) ch.status = Check::Status::fail;
    report.checks.push_back(std::move(ch));
  };
  auto skip = [&](std::string name, std::string note) {
    report.checks.push_back({std::move(name), Check::Status::skip, 0.0, 0.0, std::move(note)});
  };

  const DipoleParams& d = c.dipole;
  const PulseTrain& p = c.pulses;
  const Collection eta(c.eta);

  // Generators.
  {
    const RateGenerator pop = build_population_generator(d, p.r);
    const RateGenerator cond = build_conditional_generator(d, p.r);
    check("rates.tilde_eta0_is_population",
          (build_tilde_generator(d, p.r, Collection(0.0)).matrix - pop.matrix).cwiseAbs().maxCoeff(),
          0.0);
    check("rates.tilde_eta1_is_conditional",
          (build_tilde_generator(d, p.r, Collection(1.0)).matrix - cond.matrix).cwiseAbs().maxCoeff(),
          0.0);
    check("rates.population_column_sums", pop.column_sums().cwiseAbs().maxCoeff(),
          1e-15 * (p.r + (2.0 + d.beta) * d.gamma + d.gamma_m + d.r_d));
  }

  // Matrix exponential routes.
  {
    const Eigen::Matrix3d a = build_population_generator(d, p.r).matrix * p.delta_t;
    if (const auto e = expm_eigen<3>(a)) {
      check("propagator.expm_eigen_vs_series", (*e - expm_series<3>(a)).cwiseAbs().maxCoeff(), 1e-10);
    } else {
      skip("propagator.expm_eigen_vs_series", "eigenvector basis ill-conditioned");
    }
  }

  const LevelDistribution ground = LevelDistribution::in(Level::ground);
  const CountResolvedState emitted =
      count_resolved_cycle_auto(d, p, CountVariant::emitted(), ground);
  const CountResolvedState collected =
      count_resolved_cycle_auto(d, p, CountVariant::collected(eta), ground);
  check("propagator.mass_conservation",
        std::max(std::abs(emitted.total() - 1.0), std::abs(collected.total() - 1.0)), 1e-9);
  {
    const LevelDistribution pop = propagate_cycle(d, p, GeneratorKind::population(), ground);
    check("propagator.count_marginal_is_population",
          (emitted.level_marginal().p - pop.p).cwiseAbs().maxCoeff(), 1e-9 + emitted.tail_mass);
    const LevelDistribution tilde = propagate_cycle(d, p, GeneratorKind::tilde(eta), ground);
    check("propagator.collected_block0_is_tilde",
          (collected.blocks[0].p - tilde.p).cwiseAbs().maxCoeff(), 1e-10);
    double generating = 0.0;
    for (std::size_t n = 0; n < emitted.blocks.size(); ++n)
      generating += std::pow(eta.eta_bar(), static_cast<double>(n)) * emitted.block_total(n);
    check("propagator.generating_function_identity", std::abs(generating - tilde.total()),
          1e-10 + emitted.tail_mass);
  }

  const PhotonStats prop = stats_from_counts(collected);
  const bool limit_applies = d.beta == 0.0 && std::exp(-d.gamma * p.off_duration()) < 1e-12;
  if (limit_applies) {
    const CollectionStats closed = collection_stats(p.r, d.gamma, p.delta_t, c.eta);
    check("analytics.pi_0_vs_propagator", std::abs(closed.pi_0 - prop.p(0)), c.validate.abs_tol);
    check("analytics.pi_1_vs_propagator", std::abs(closed.pi_1 - prop.p_1_exact), c.validate.abs_tol);
    check("analytics.single_emission_vs_propagator",
          std::abs(single_emission_probability(p.r, d.gamma, p.delta_t) -
                   stats_from_counts(emitted).p_1_exact),
          c.validate.abs_tol);
  } else {
    const char* why = "closed forms need beta = 0 and exp(-gamma (period - delta_t)) < 1e-12";
    skip("analytics.pi_0_vs_propagator", why);
    skip("analytics.pi_1_vs_propagator", why);
    skip("analytics.single_emission_vs_propagator", why);
  }
  {
    const EffectiveRates er = effective_rates(p.r, d.gamma, c.eta);
    const double sum_dev = std::abs(er.r_prime + er.gamma_prime - (p.r + d.gamma)) / (p.r + d.gamma);
    const double prod = c.eta * p.r * d.gamma;
    const double prod_dev = prod > 0.0 ? std::abs(er.r_prime * er.gamma_prime - prod) / prod
                                       : std::abs(er.r_prime * er.gamma_prime);
    check("analytics.effective_rate_identities", std::max(sum_dev, prod_dev), 1e-12);
  }

  // Monte Carlo against the propagator started from the long-run state.
  const PointStats point = evaluate_point(d, p, c.eta);
  const McConfig mc = mc_config(c, c.validate.cycles, threads);
  const McStats est = estimate_stats(d, p, mc);
  auto z_check = [&](std::string name, const McEstimate& e, double reference) {
    if (e.std_error > 0.0) {
      check(std::move(name), std::abs(e.mean - reference) / e.std_error, c.validate.sigma,
            "deviation in standard errors");
    } else {
      check(std::move(name), std::abs(e.mean - reference), 1e-12, "degenerate sample");
    }
  };
  z_check("montecarlo.pi_0", est.pi_0, point.collected.p(0));
  z_check("montecarlo.pi_1", est.pi_1, point.collected.p_1_exact);
  if (est.f_il_degenerate) {
    skip("montecarlo.f_il", "no detections");
  } else {
    z_check("montecarlo.f_il", est.f_il, point.collected.f_il);
  }
  if (d.beta == 0.0) {
    // Score test per bin: the standard error comes from the reference
    // probability, so sparse bins are handled without special cases.
    const std::uint64_t n = est.chain.total.cycles;
    for (std::size_t k = 0; k <= 4; ++k) {
      const double ref = point.emitted.p(k);
      const double observed = static_cast<double>(est.chain.total.emitted_count(k)) / n;
      const double se = std::sqrt(ref * (1.0 - ref) / static_cast<double>(n));
      const std::string name = "montecarlo.emitted_bin_" + std::to_string(k);
      if (se > 0.0) {
        check(name, std::abs(observed - ref) / se, c.validate.sigma, "deviation in standard errors");
      } else {
        check(name, std::abs(observed - ref), 0.0, "reference probability is 0 or 1");
      }
    }
  } else {
    const McEstimate duty = estimate_duty_factor(d, p, mc);
    const ShelvingFigures sh = shelving_figures(d, p, point.emitted.p_e);
    check("montecarlo.duty_factor_vs_mean_value_model", std::abs(duty.mean - sh.duty_factor),
          c.validate.duty_tol, "absolute; the mean-value model assumes beta P_e << 1");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Command dispatch
// ---------------------------------------------------------------------------

struct Command {
  Mode mode = Mode::analyze;
  std::optional<std::string> config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  bool deshelve_in_pulse_only = false;
  unsigned threads = 0;
};

/// Runs one command and returns the process exit code: 0 success, 1
/// numerical failure (or failed validation), 2 configuration error.
inline int run_command(const Command& cmd, std::ostream& out, std::ostream& err) {
  try {
    RunConfig config = cmd.config_path ? load_config(*cmd.config_path) : RunConfig{};
    if (cmd.seed) config.seed = *cmd.seed;
    if (cmd.deshelve_in_pulse_only) config.pulses.deshelving = Deshelving::pulse_only;
    if (config.mode && *config.mode != cmd.mode)
      throw ConfigError("mode", "does not match the command");
    if (!cmd.preset.empty() && cmd.mode != Mode::sweep)
      throw ConfigError("--preset", "only valid with the sweep command");
    const std::string out_path = cmd.out_path.value_or(config.output);

    std::ofstream file;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary | std::ios::trunc);
      if (!file) throw ConfigError("--out", "cannot open " + out_path + " for writing");
    }
    std::ostream& sink = out_path.empty() ? out : file;

    int code = kExitOk;
    switch (cmd.mode) {
      case Mode::analyze: run_analyze(config, sink); break;
      case Mode::sweep: run_sweep(config, cmd.preset, cmd.threads, sink); break;
      case Mode::mc: run_mc(config, cmd.threads, sink); break;
      case Mode::attack: run_attack(config, sink); break;
      case Mode::validate: {
        const ValidationReport report = run_validate(config, cmd.threads);
        sink << report.to_json().dump(2) << "\n";
        if (!report.passed()) {
          err << "validate: one or more checks failed\n";
          code = kExitNumerical;
        }
        break;
      }
    }
    sink.flush();
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace photongun::cli
