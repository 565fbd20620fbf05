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

#include "photongun/rates.hpp"

#include <gtest/gtest.h>

#include <random>

namespace photongun {
namespace {

constexpr Level G = Level::ground;
constexpr Level E = Level::excited;
constexpr Level M = Level::metastable;

DipoleParams random_dipole(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DipoleParams d;
  d.gamma = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
  d.beta = u(rng) < 0.2 ? 0.0 : u(rng);
  d.gamma_m = u(rng) * 0.1;
  d.r_d = u(rng) < 0.3 ? 0.0 : u(rng);
  return d;
}

double scale_of(const RateGenerator& g) { return g.matrix.cwiseAbs().maxCoeff(); }

TEST(Levels, IndexMappingIsFixed) {
  EXPECT_EQ(index_of(G), 0);
  EXPECT_EQ(index_of(E), 1);
  EXPECT_EQ(index_of(M), 2);
  EXPECT_EQ(level_at(2), M);
  EXPECT_STREQ(to_string(E), "excited");
}

TEST(DipoleParams, RejectsInvalidFieldsByName) {
  auto field_of = [](DipoleParams d) {
    try {
      d.validate();
    } catch (const ParameterError& e) {
      return e.field();
    }
    return std::string("none");
  };
  EXPECT_EQ(field_of({0.0, 0, 0, 0}), "gamma");
  EXPECT_EQ(field_of({1.0, -0.1, 0, 0}), "beta");
  EXPECT_EQ(field_of({1.0, 0, -1, 0}), "gamma_m");
  EXPECT_EQ(field_of({1.0, 0, 0, std::nan("")}), "r_d");
  EXPECT_EQ(field_of({1.0, 0.1, 0.01, 0.5}), "none");
}

TEST(PulseTrain, RequiresPulseInsidePeriod) {
  EXPECT_NO_THROW((PulseTrain{10.0, 1.0, 1.0}.validate()));
  EXPECT_THROW((PulseTrain{10.0, 2.0, 1.0}.validate()), ParameterError);
  EXPECT_THROW((PulseTrain{10.0, 0.0, 1.0}.validate()), ParameterError);
  EXPECT_THROW((PulseTrain{-1.0, 0.1, 1.0}.validate()), ParameterError);
}

TEST(Collection, DerivesEtaBar) {
  const Collection c(0.2);
  EXPECT_DOUBLE_EQ(c.eta_bar(), 0.8);
  EXPECT_THROW(Collection(1.5), ParameterError);
  EXPECT_THROW(Collection(-0.1), ParameterError);
}

TEST(PopulationGenerator, PureDecay) {
  const RateGenerator g = build_population_generator({1.0, 0, 0, 0}, 0.0);
  Eigen::Matrix3d want = Eigen::Matrix3d::Zero();
  want(0, 1) = 1.0;
  want(1, 1) = -1.0;
  EXPECT_EQ(g.matrix, want);
  EXPECT_EQ(g.column_sums(), Eigen::RowVector3d::Zero());
}

TEST(PopulationGenerator, ThreeLevelEntries) {
  const RateGenerator g = build_population_generator({1.0, 0.1, 0.01, 0.5}, 100.0);
  EXPECT_DOUBLE_EQ(g.at(E, E), -1.1);
  EXPECT_DOUBLE_EQ(g.at(M, E), 0.1);
  EXPECT_DOUBLE_EQ(g.at(E, M), 0.5);
  EXPECT_DOUBLE_EQ(g.at(G, M), 0.01);
  EXPECT_DOUBLE_EQ(g.at(E, G), 100.0);
  EXPECT_DOUBLE_EQ(g.at(G, G), -100.0);
  EXPECT_DOUBLE_EQ(g.at(G, E), 1.0);
  EXPECT_DOUBLE_EQ(g.at(M, M), -0.51);
}

TEST(ConditionalGenerator, TwoLevelReduction) {
  const RateGenerator g = build_conditional_generator({1.0, 0, 0, 0}, 5.0);
  EXPECT_EQ(g.at(G, G), -5.0);
  EXPECT_EQ(g.at(E, G), 5.0);
  EXPECT_EQ(g.at(E, E), -1.0);
  EXPECT_EQ(g.at(G, E), 0.0);
  EXPECT_EQ(g.emit.from, E);
  EXPECT_EQ(g.emit.to, G);
  EXPECT_EQ(g.emit.counted_rate, 1.0);
}

TEST(ConditionalGenerator, NoRefillWithShelving) {
  const RateGenerator g = build_conditional_generator({1.0, 0.1, 0.0, 0.0}, 0.0);
  EXPECT_DOUBLE_EQ(g.at(E, E), -1.1);
  EXPECT_EQ(g.at(G, E), 0.0);
}

TEST(TildeGenerator, TwoLevelReduction) {
  const RateGenerator g = build_tilde_generator({1.0, 0, 0, 0}, 5.0, Collection(0.2));
  EXPECT_DOUBLE_EQ(g.at(G, E), 0.8);
  EXPECT_EQ(g.at(E, E), -1.0);
  EXPECT_DOUBLE_EQ(g.emit.counted_rate, 0.2);
}

TEST(TildeGenerator, EndpointsAreExact) {
  const DipoleParams d{1.3, 0.07, 0.02, 0.4};
  const double pump = 17.0;
  const RateGenerator t0 = build_tilde_generator(d, pump, Collection(0.0));
  const RateGenerator t1 = build_tilde_generator(d, pump, Collection(1.0));
  EXPECT_EQ(t0.matrix, build_population_generator(d, pump).matrix);
  EXPECT_EQ(t1.matrix, build_conditional_generator(d, pump).matrix);
}

TEST(Generators, RejectNegativePump) {
  EXPECT_THROW(build_population_generator({}, -1.0), ParameterError);
  try {
    build_conditional_generator({}, -1.0);
  } catch (const ParameterError& e) {
    EXPECT_EQ(e.field(), "pump");
  }
}

TEST(GeneratorProperties, RandomDraws) {
  std::mt19937_64 rng(20261016);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const DipoleParams d = random_dipole(rng);
    const double pump = u(rng) < 0.1 ? 0.0 : std::exp(u(rng) * std::log(1e4));
    const Collection c(u(rng));
    const RateGenerator pop = build_population_generator(d, pump);
    const RateGenerator cond = build_conditional_generator(d, pump);
    const RateGenerator tilde = build_tilde_generator(d, pump, c);
    const double ulp = 4e-16;
    for (const RateGenerator* g : {&pop, &cond, &tilde}) {
      for (int b = 0; b < 3; ++b)
        for (int col = 0; col < 3; ++col)
          if (b != col) EXPECT_GE(g->matrix(b, col), 0.0);
    }
    const Eigen::RowVector3d ps = pop.column_sums();
    EXPECT_LE(ps.cwiseAbs().maxCoeff(), ulp * scale_of(pop));
    const Eigen::RowVector3d cs = cond.column_sums();
    EXPECT_LE(std::abs(cs(0)), ulp * scale_of(cond));
    EXPECT_NEAR(cs(1), -d.gamma, ulp * scale_of(cond));
    EXPECT_LE(std::abs(cs(2)), ulp * scale_of(cond));
    const Eigen::RowVector3d ts = tilde.column_sums();
    EXPECT_NEAR(ts(1), -c.eta() * d.gamma, ulp * scale_of(tilde));
    EXPECT_LE(std::abs(ts(0)) + std::abs(ts(2)), 2 * ulp * scale_of(tilde));
  }
}

}  // namespace
}  // namespace photongun
