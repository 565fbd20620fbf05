// Generated by tests/oracles/oracle.py; do not edit by hand.
#pragma once

namespace photongun::oracle {

inline constexpr double kOpPi0 = 7.9873094268646506e-1;
inline constexpr double kOpPi1 = 2.0094869298724212e-1;
inline constexpr double kOpPiE = 2.0126905731353494e-1;
inline constexpr double kOpFil = 1.5917217011344171e-3;
inline constexpr double kOpPoissonRatio = 6.7951847996044579e+1;
inline constexpr double kOpEmitted0 = 4.5399929762484852e-5;
inline constexpr double kOpEmitted1 = 9.9198696221156817e-1;
inline constexpr double kOpEmitted2 = 7.9417747113401988e-3;
inline constexpr double kOpEmitted3 = 2.5816712723330214e-5;
inline constexpr double kOpP1Closed = 9.9198696221156817e-1;
inline constexpr double kOpCollected0 = 7.9873094268646506e-1;
inline constexpr double kOpCollected1 = 2.0094869298724212e-1;
inline constexpr double kOpCollected2 = 3.201565279421087e-4;
inline constexpr double kRatesRPrime = 1.000800159904032e+3;
inline constexpr double kRatesGammaPrime = 1.9984009596798851e-1;
inline constexpr double kMidPi0 = 5.8529417212420896e-1;
inline constexpr double kMidPi1 = 3.9823105428561576e-1;
inline constexpr double kMidPeExactT3 = 8.2906003020836686e-1;
inline constexpr double kMidP1 = 7.9879935647279138e-1;
inline constexpr double kDegenerateP1 = 3.7908166232039589e-1;
inline constexpr double kPoissonAt02 = 1.0742579474316098e-1;
inline constexpr double kPoissonAtMu1 = 4.1802329313067358e-1;
inline constexpr double kFig2PumpAtPiE01 = 6.8442067806120204;
inline constexpr double kFig2RatioAtPiE01 = 2.3556202953067968e+1;

}  // namespace photongun::oracle
