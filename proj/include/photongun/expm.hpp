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

// Matrix exponential of small dense real matrices.
//
// Two independent routes: an eigendecomposition, used when the eigenvector
// basis is well conditioned, and scaling-and-squaring of a truncated Taylor
// series, which also covers defective matrices (e.g. pump rate == decay rate).

#pragma once

#include "photongun/rates.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <optional>

namespace photongun {

enum class ExpmMethod { automatic, eigen, series };

/// Eigenvector bases with a 2-norm condition number at or above this go to
/// the series route.
inline constexpr double kMaxEigenCondition = 1e8;

namespace detail {

template <typename Derived>
void require_finite_matrix(const Eigen::MatrixBase<Derived>& a) {
  if (!a.allFinite()) throw NumericalError("matrix exponential: non-finite matrix entry");
}

template <int N>
double norm1(const Eigen::Matrix<double, N, N>& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace detail

/// exp(a) through a = V diag(l) V^-1. Empty if the decomposition fails or
/// cond(V) >= max_condition.
template <int N>
std::optional<Eigen::Matrix<double, N, N>> expm_eigen(const Eigen::Matrix<double, N, N>& a,
                                                      double max_condition = kMaxEigenCondition) {
  using Real = Eigen::Matrix<double, N, N>;
  using Complex = Eigen::Matrix<std::complex<double>, N, N>;
  detail::require_finite_matrix(a);
  Eigen::EigenSolver<Real> solver(a);
  if (solver.info() != Eigen::Success) return std::nullopt;
  const Complex basis = solver.eigenvectors();
  Eigen::JacobiSVD<Complex> svd(basis);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 0.0) || sv(0) / smallest >= max_condition) return std::nullopt;
  const Eigen::Matrix<std::complex<double>, N, 1> growth = solver.eigenvalues().array().exp();
  // V diag(e^l) V^-1 == (V^-T diag(e^l) V^T)^T; solve instead of inverting.
  const Complex scaled = basis * growth.asDiagonal();
  const Complex result = basis.transpose().partialPivLu().solve(scaled.transpose()).transpose();
  const Real real = result.real();
  if (!real.allFinite()) return std::nullopt;
  return real;
}

/// exp(a) by scaling a to 1-norm <= 1/2, summing the Taylor series to
/// machine precision and squaring back.
template <int N>
Eigen::Matrix<double, N, N> expm_series(const Eigen::Matrix<double, N, N>& a) {
  using Real = Eigen::Matrix<double, N, N>;
  detail::require_finite_matrix(a);
  const double norm = detail::norm1<N>(a);
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Real scaled = a / std::ldexp(1.0, squarings);

  Real sum = Real::Identity();
  Real term = Real::Identity();
  for (int k = 1; k <= 40; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    sum += term;
    if (detail::norm1<N>(term) <= std::numeric_limits<double>::epsilon() * 1e-2 * detail::norm1<N>(sum))
      break;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

template <int N>
Eigen::Matrix<double, N, N> expm(const Eigen::Matrix<double, N, N>& a,
                                 ExpmMethod method = ExpmMethod::automatic) {
  switch (method) {
    case ExpmMethod::series:
      return expm_series<N>(a);
    case ExpmMethod::eigen:
      if (auto e = expm_eigen<N>(a)) return *e;
      throw NumericalError("matrix exponential: eigenvector basis is ill-conditioned");
    case ExpmMethod::automatic:
      break;
  }
  if (auto e = expm_eigen<N>(a)) return *e;
  return expm_series<N>(a);
}

}  // namespace photongun
