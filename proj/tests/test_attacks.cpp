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

#include "photongun/attacks.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace photongun {
namespace {

PhotonStats poisson_stats(double mu, std::size_t n_max = 60) {
  std::vector<double> p(n_max + 1);
  double term = std::exp(-mu);
  for (std::size_t n = 0; n <= n_max; ++n) {
    p[n] = term;
    term *= mu / static_cast<double>(n + 1);
  }
  return stats_from_distribution(p, 0.0);
}

PhotonStats operating_point() {
  return propagated_collection_stats({1.0, 0, 0, 0}, {1000.0, 0.01, 50.0}, Collection(0.2),
                                     LevelDistribution::in(Level::ground));
}

TEST(Beamsplitter, NoTapNoInformation) {
  const AttackReport r = beamsplitter_attack(stats_from_distribution({0.8, 0.18, 0.02}, 0.0), 0.0);
  EXPECT_EQ(r.eve_fraction, 0.0);
  EXPECT_EQ(r.detectable_by, kLossAnomaly);
}

TEST(Beamsplitter, HalfTap) {
  const PhotonStats s = stats_from_distribution({0.8, 0.18, 0.02}, 0.0);
  const AttackReport r = beamsplitter_attack(s, 0.5);
  EXPECT_NEAR(r.eve_fraction, 0.05, 1e-15);
  EXPECT_NEAR(r.eve_fraction, s.p(2) / (2.0 * s.p_e), 1e-15);
  EXPECT_FALSE(r.multiphoton_warning);
  // Bob loses half the singles and a quarter of the pairs.
  EXPECT_NEAR(r.bob_rate, 0.18 * 0.5 + 0.02 * 0.75, 1e-15);
}

TEST(Beamsplitter, ConcaveWithMaximumAtHalf) {
  const PhotonStats s = operating_point();
  double best = -1.0, best_tap = -1.0;
  std::vector<double> values;
  for (int i = 0; i <= 100; ++i) {
    const double tap = i / 100.0;
    const double v = beamsplitter_attack(s, tap).eve_fraction;
    values.push_back(v);
    if (v > best) {
      best = v;
      best_tap = tap;
    }
  }
  EXPECT_DOUBLE_EQ(best_tap, 0.5);
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    EXPECT_LE(values[i - 1] + values[i + 1], 2.0 * values[i] + 1e-18);
}

TEST(Beamsplitter, WarnsWhenHigherOrdersMatter) {
  EXPECT_TRUE(beamsplitter_attack(poisson_stats(1.0), 0.5).multiphoton_warning);
  EXPECT_FALSE(beamsplitter_attack(operating_point(), 0.5).multiphoton_warning);
}

TEST(Beamsplitter, DegenerateAndInvalid) {
  const PhotonStats dark = stats_from_distribution({1.0}, 0.0);
  EXPECT_TRUE(beamsplitter_attack(dark, 0.5).degenerate);
  EXPECT_EQ(beamsplitter_attack(dark, 0.5).eve_fraction, 0.0);
  EXPECT_THROW(beamsplitter_attack(dark, 1.5), ParameterError);
}

TEST(Qnd, EqualsLeakage) {
  EXPECT_EQ(qnd_attack(stats_from_distribution({0.8, 0.2}, 0.0)).eve_fraction, 0.0);
  const PhotonStats s = stats_from_distribution({0.8, 0.18, 0.02}, 0.0);
  EXPECT_EQ(qnd_attack(s).eve_fraction, s.f_il);
  EXPECT_NEAR(qnd_attack(s).eve_fraction, 0.1, 1e-15);
  EXPECT_EQ(qnd_attack(s).detectable_by, kStatisticsAnomaly);
  for (double mu : {0.01, 0.1, 0.5, 2.0}) {
    const PhotonStats p = poisson_stats(mu);
    EXPECT_EQ(qnd_attack(p).eve_fraction, p.f_il);
  }
}

TEST(Qnd, OperatingPoint) {
  EXPECT_NEAR(qnd_attack(operating_point()).eve_fraction, 0.002, 5e-4);
}

PhotonStats with_leakage(double f_il) {
  // p_e = 0.2 with the requested share of multi-photon pulses.
  return stats_from_distribution({0.8, 0.2 * (1 - f_il), 0.2 * f_il}, 0.0);
}

TEST(LossyLine, BelowThresholdEveKnowsEverything) {
  const AttackReport r = lossy_line_attack(with_leakage(0.002), 0.001);
  EXPECT_EQ(r.eve_fraction, 1.0);
  EXPECT_EQ(r.detectable_by, kUndetectable);
  EXPECT_FALSE(r.extension);
}

TEST(LossyLine, AboveThresholdIsProportionalExtension) {
  const AttackReport r = lossy_line_attack(with_leakage(0.002), 0.01);
  EXPECT_NEAR(r.eve_fraction, 0.2, 1e-12);
  EXPECT_TRUE(r.extension);
  EXPECT_EQ(r.detectable_by, kUndetectable);
  EXPECT_EQ(lossy_line_attack(with_leakage(0.0), 0.3).eve_fraction, 0.0);
  EXPECT_THROW(lossy_line_attack(with_leakage(0.0), 0.0), ParameterError);
}

TEST(CompareSources, PoissonAgainstItselfIsOne) {
  for (double mu : {0.01, 0.2, 1.0}) {
    const PhotonStats p = poisson_stats(mu);
    EXPECT_NEAR(compare_sources(p, p.p_e).improvement_ratio, 1.0, 1e-12);
  }
}

TEST(CompareSources, PerfectSourceIsInfinitelyBetter) {
  const SourceComparison c = compare_sources(stats_from_distribution({0.8, 0.2}, 0.0), 0.2);
  EXPECT_TRUE(c.infinite_ratio);
  EXPECT_TRUE(std::isinf(c.improvement_ratio));
}

TEST(CompareSources, DipoleBeatsPoissonOverShortPulses) {
  const LevelDistribution g = LevelDistribution::in(Level::ground);
  for (double dt : {0.001, 0.01, 0.03, 0.1}) {
    for (int k = 0; k <= 12; ++k) {
      const double energy = std::pow(10.0, -2.0 + k / 4.0);  // r dT in [0.01, 10]
      const PhotonStats s =
          propagated_collection_stats({1.0, 0, 0, 0}, {energy / dt, dt, 50.0}, Collection(0.2), g);
      const SourceComparison c = compare_sources(s, s.p_e);
      EXPECT_GT(c.improvement_ratio, 1.0) << "dt=" << dt << " r dt=" << energy;
    }
  }
}

TEST(Anticorrelation, Criterion) {
  EXPECT_TRUE(anticorrelation_criterion(operating_point()));
  EXPECT_FALSE(anticorrelation_criterion(poisson_stats(2.0)));
}

}  // namespace
}  // namespace photongun
