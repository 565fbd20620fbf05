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

// Stochastic simulation of the emitter as a jump process over pulse trains,
// with per-photon binomial detector thinning.
//
// Cycles form a single Markov chain: each starts in the level the previous
// one ended in. Randomness is tied to (seed, cycle index) through
// CycleStream, and the chain is cut into fixed-size shards that are simulated
// concurrently from an assumed ground-state start and then repaired in shard
// order (re-simulating only until the repaired path meets the speculative
// one). The result is bit-identical to a serial run for any thread count.

#pragma once

#include "photongun/parallel.hpp"
#include "photongun/philox.hpp"
#include "photongun/rates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace photongun {

struct McConfig {
  std::uint64_t n_cycles = 1'000'000;
  std::uint64_t seed = 1;
  Collection thinning{1.0};
  std::uint64_t burn_in = 0;
  Level start = Level::ground;
  unsigned threads = 0;               // 0: default_thread_count()
  std::uint64_t shard_cycles = 4096;  // also the batch length for batch-mean errors

  void validate() const {
    if (n_cycles < 1) throw ParameterError("n_cycles", "must be >= 1");
    if (burn_in >= n_cycles) throw ParameterError("burn_in", "must be < n_cycles");
    if (shard_cycles < 1) throw ParameterError("shard_cycles", "must be >= 1");
  }
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
};

struct CycleOutcome {
  std::uint32_t emitted = 0;
  std::uint32_t collected = 0;
  Level end_level = Level::ground;
  bool shelved = false;
};

/// One period of the jump process starting in `start`.
inline CycleOutcome simulate_cycle(const DipoleParams& dipole, const PulseTrain& pulses,
                                   const Collection& collection, Level start,
                                   CycleStream& stream) {
  CycleOutcome out;
  Level level = start;
  out.shelved = (start == Level::metastable);

  auto run_segment = [&](double pump, double deshelve, double length) {
    double t = 0.0;
    for (;;) {
      double total = 0.0;
      switch (level) {
        case Level::ground: total = pump; break;
        case Level::excited: total = (1.0 + dipole.beta) * dipole.gamma; break;
        case Level::metastable: total = dipole.gamma_m + deshelve; break;
      }
      if (total <= 0.0) return;
      t += -std::log(stream.uniform()) / total;
      if (t >= length) return;
      const double pick = stream.uniform() * total;
      switch (level) {
        case Level::ground:
          level = Level::excited;
          break;
        case Level::excited:
          if (pick <= dipole.gamma) {
            level = Level::ground;
            ++out.emitted;
            if (stream.uniform() <= collection.eta()) ++out.collected;
          } else {
            level = Level::metastable;
            out.shelved = true;
          }
          break;
        case Level::metastable:
          level = pick <= dipole.gamma_m ? Level::ground : Level::excited;
          break;
      }
    }
  };

  run_segment(pulses.r, dipole.r_d, pulses.delta_t);
  run_segment(0.0, pulses.deshelving == Deshelving::always ? dipole.r_d : 0.0,
              pulses.off_duration());
  out.end_level = level;
  return out;
}

/// Additive per-cycle counts. Supports removal so repaired shards can swap
/// speculative outcomes for the true ones.
struct McTally {
  static constexpr std::size_t kJointMax = 8;

  std::uint64_t cycles = 0;
  std::uint64_t emitted_sum = 0;
  std::uint64_t shelved = 0;
  std::vector<std::uint64_t> emitted_hist;
  std::vector<std::uint64_t> collected_hist;
  // joint[k][j]: emitted == k and collected == j, for k < kJointMax.
  std::array<std::array<std::uint64_t, kJointMax>, kJointMax> joint{};
  std::array<std::uint64_t, 3> end_level{};

  void add(const CycleOutcome& o) { apply(o, +1); }
  void remove(const CycleOutcome& o) { apply(o, -1); }

  void merge(const McTally& other) {
    cycles += other.cycles;
    emitted_sum += other.emitted_sum;
    shelved += other.shelved;
    grow(emitted_hist, other.emitted_hist.size());
    grow(collected_hist, other.collected_hist.size());
    for (std::size_t i = 0; i < other.emitted_hist.size(); ++i) emitted_hist[i] += other.emitted_hist[i];
    for (std::size_t i = 0; i < other.collected_hist.size(); ++i)
      collected_hist[i] += other.collected_hist[i];
    for (std::size_t k = 0; k < kJointMax; ++k)
      for (std::size_t j = 0; j < kJointMax; ++j) joint[k][j] += other.joint[k][j];
    for (std::size_t l = 0; l < 3; ++l) end_level[l] += other.end_level[l];
  }

  std::uint64_t emitted_count(std::size_t n) const {
    return n < emitted_hist.size() ? emitted_hist[n] : 0;
  }
  std::uint64_t collected_count(std::size_t n) const {
    return n < collected_hist.size() ? collected_hist[n] : 0;
  }

 private:
  static void grow(std::vector<std::uint64_t>& v, std::size_t size) {
    if (v.size() < size) v.resize(size, 0);
  }

  // Unsigned wrap-around makes -1 steps exact as long as every removal
  // matches an earlier addition.
  void apply(const CycleOutcome& o, int sign) {
    const auto step = static_cast<std::uint64_t>(static_cast<std::int64_t>(sign));
    cycles += step;
    emitted_sum += step * o.emitted;
    if (o.shelved) shelved += step;
    grow(emitted_hist, o.emitted + 1);
    grow(collected_hist, o.collected + 1);
    emitted_hist[o.emitted] += step;
    collected_hist[o.collected] += step;
    if (o.emitted < kJointMax) joint[o.emitted][o.collected] += step;
    end_level[index_of(o.end_level)] += step;
  }
};

/// Tallies of a whole chain, with one tally per shard for batch-mean errors.
struct ChainResult {
  McTally total;
  std::vector<McTally> shards;
  Level final_level = Level::ground;
};

namespace detail {

struct ShardRun {
  McTally tally;
  Level end = Level::ground;
};

inline ShardRun run_shard(const DipoleParams& dipole, const PulseTrain& pulses,
                          const McConfig& mc, std::uint64_t begin, std::uint64_t end,
                          Level start) {
  ShardRun run;
  Level level = start;
  for (std::uint64_t i = begin; i < end; ++i) {
    CycleStream stream(mc.seed, i);
    const CycleOutcome o = simulate_cycle(dipole, pulses, mc.thinning, level, stream);
    if (i >= mc.burn_in) run.tally.add(o);
    level = o.end_level;
  }
  run.end = level;
  return run;
}

}  // namespace detail

inline ChainResult run_chain(const DipoleParams& dipole, const PulseTrain& pulses,
                             const McConfig& mc) {
  dipole.validate();
  pulses.validate();
  mc.validate();
  const std::uint64_t n_shards = (mc.n_cycles + mc.shard_cycles - 1) / mc.shard_cycles;
  auto shard_begin = [&](std::uint64_t s) { return s * mc.shard_cycles; };
  auto shard_end = [&](std::uint64_t s) { return std::min(mc.n_cycles, (s + 1) * mc.shard_cycles); };

  std::vector<detail::ShardRun> runs(n_shards);
  parallel_for(n_shards, mc.threads, [&](std::size_t s) {
    const Level assumed = s == 0 ? mc.start : Level::ground;
    runs[s] = detail::run_shard(dipole, pulses, mc, shard_begin(s), shard_end(s), assumed);
  });

  // Repair shards whose true start differs from the assumed ground state.
  for (std::uint64_t s = 1; s < n_shards; ++s) {
    Level truth = runs[s - 1].end;
    Level guess = Level::ground;
    if (truth == guess) continue;
    auto& run = runs[s];
    for (std::uint64_t i = shard_begin(s); i < shard_end(s) && truth != guess; ++i) {
      CycleStream spec_stream(mc.seed, i);
      CycleStream true_stream(mc.seed, i);
      const CycleOutcome spec = simulate_cycle(dipole, pulses, mc.thinning, guess, spec_stream);
      const CycleOutcome real = simulate_cycle(dipole, pulses, mc.thinning, truth, true_stream);
      if (i >= mc.burn_in) {
        run.tally.remove(spec);
        run.tally.add(real);
      }
      guess = spec.end_level;
      truth = real.end_level;
    }
    // Paths that met share the rest of the shard, including its end level.
    if (truth != guess) run.end = truth;
  }

  ChainResult result;
  result.shards.reserve(n_shards);
  for (auto& run : runs) {
    result.total.merge(run.tally);
    result.shards.push_back(std::move(run.tally));
  }
  result.final_level = runs.back().end;
  return result;
}

namespace detail {

inline McEstimate binomial_estimate(std::uint64_t hits, std::uint64_t n) {
  McEstimate e;
  e.n = n;
  if (n == 0) return e;
  e.mean = static_cast<double>(hits) / static_cast<double>(n);
  e.std_error = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(n));
  return e;
}

// Ratio sum(a)/sum(b) with a batch-means delta-method error.
inline McEstimate ratio_estimate(const std::vector<double>& a, const std::vector<double>& b,
                                 std::uint64_t n) {
  McEstimate e;
  e.n = n;
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  if (sb <= 0.0) return e;
  e.mean = sa / sb;
  const std::size_t k = a.size();
  if (k < 2) return e;
  double ss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = a[i] - e.mean * b[i];
    ss += d * d;
  }
  e.std_error = std::sqrt(ss * static_cast<double>(k) / static_cast<double>(k - 1)) / sb;
  return e;
}

}  // namespace detail

/// Monte Carlo estimates of the detected-photon statistics.
struct McStats {
  McEstimate pi_0;
  McEstimate pi_1;
  McEstimate pi_ge2;
  McEstimate f_il;
  McEstimate p_e_emitted;
  bool f_il_degenerate = false;  // no detection at all
  /// Fraction of cycles ending in each level, with batch-mean errors.
  std::array<McEstimate, 3> end_level;
  ChainResult chain;
};

inline McStats estimate_stats(const DipoleParams& dipole, const PulseTrain& pulses,
                              const McConfig& mc) {
  McStats out;
  out.chain = run_chain(dipole, pulses, mc);
  const McTally& t = out.chain.total;
  const std::uint64_t n = t.cycles;
  const std::uint64_t none = t.collected_count(0);
  const std::uint64_t one = t.collected_count(1);
  const std::uint64_t detected = n - none;
  const std::uint64_t multi = detected - one;

  out.pi_0 = detail::binomial_estimate(none, n);
  out.pi_1 = detail::binomial_estimate(one, n);
  out.pi_ge2 = detail::binomial_estimate(multi, n);
  out.p_e_emitted = detail::binomial_estimate(n - t.emitted_count(0), n);
  // f_il given a detection is a binomial proportion over the detected cycles.
  out.f_il = detail::binomial_estimate(multi, detected);
  out.f_il.n = n;
  out.f_il_degenerate = detected == 0;

  for (int l = 0; l < 3; ++l) {
    std::vector<double> hits, sizes;
    for (const auto& s : out.chain.shards) {
      hits.push_back(static_cast<double>(s.end_level[l]));
      sizes.push_back(static_cast<double>(s.cycles));
    }
    out.end_level[l] = detail::ratio_estimate(hits, sizes, n);
  }
  return out;
}

/// Long-run emitted-photon rate with shelving relative to the same source
/// without the metastable channel (beta = 0), with identical per-cycle random
/// streams for both runs. The error comes from paired batch means.
inline McEstimate estimate_duty_factor(const DipoleParams& dipole, const PulseTrain& pulses,
                                       const McConfig& mc) {
  dipole.validate();
  mc.validate();
  if (dipole.beta == 0.0) return McEstimate{1.0, 0.0, mc.n_cycles - mc.burn_in};
  DipoleParams reference = dipole;
  reference.beta = 0.0;
  const ChainResult shelving = run_chain(dipole, pulses, mc);
  const ChainResult plain = run_chain(reference, pulses, mc);
  std::vector<double> a, b;
  for (std::size_t s = 0; s < shelving.shards.size(); ++s) {
    a.push_back(static_cast<double>(shelving.shards[s].emitted_sum));
    b.push_back(static_cast<double>(plain.shards[s].emitted_sum));
  }
  return detail::ratio_estimate(a, b, shelving.total.cycles);
}

}  // namespace photongun
