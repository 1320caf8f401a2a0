// Copyright 2026 The diracep Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "diracep/errors.hpp"
#include "diracep/types.hpp"

namespace diracep {

namespace detail {

template <int N>
std::string echo(const Matrix<N>& m) {
  std::ostringstream os;
  os.precision(17);
  os << m;
  return os.str();
}

// Descending real part, ties broken by descending imaginary part.
inline bool eig_before(cplx a, cplx b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

}  // namespace detail

/// Eigendecomposition with deterministic local ordering.
template <int N>
Spectrum<N> eig(const Matrix<N>& m) {
  if (!m.allFinite()) throw NonConvergence("eig: non-finite input\n" + detail::echo(m));
  Eigen::ComplexEigenSolver<Matrix<N>> solver(m, true);
  if (solver.info() != Eigen::Success)
    throw NonConvergence("eig: QR iteration did not converge for\n" + detail::echo(m));

  const auto& w = solver.eigenvalues();
  const auto& v = solver.eigenvectors();
  const int n = static_cast<int>(w.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return detail::eig_before(w(a), w(b)); });

  Spectrum<N> out;
  out.values.resize(n);
  out.right.resize(n, n);
  const double scale = std::max(m.norm(), 1e-300);
  for (int i = 0; i < n; ++i) {
    out.values(i) = w(order[i]);
    out.right.col(i) = v.col(order[i]).normalized();
    const double res = (m * out.right.col(i) - out.values(i) * out.right.col(i)).norm();
    if (res > 1e-10 * scale)
      throw NonConvergence("eig: residual " + std::to_string(res) + " above tolerance for\n" +
                           detail::echo(m));
  }
  return out;
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues in [-1e-10, 0) are clamped to zero.
template <int N>
Matrix<N> psd_sqrt(const Matrix<N>& m, double clamp = 1e-10) {
  const Matrix<N> herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix<N>> solver(herm);
  const auto& w = solver.eigenvalues();
  if (w.minCoeff() < -clamp)
    throw MetricViolation("psd_sqrt: eigenvalue " + std::to_string(w.minCoeff()) +
                              " below zero (metric lost positivity)",
                          w.minCoeff());
  const auto root = w.cwiseMax(0.0).cwiseSqrt().template cast<cplx>();
  return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().adjoint();
}

/// Condition number of the eigenvector matrix used by step_propagator.
inline constexpr double kDiagonalisableCond = 1e8;

/// exp(-i h dt) for a general (possibly non-normal) h.
template <int N>
Matrix<N> step_propagator(const Matrix<N>& h, double dt) {
  const int n = static_cast<int>(h.rows());
  if (dt == 0.0) return Matrix<N>::Identity(n, n);
  const double scale = std::max(1.0, max_abs<N>(h));

  if (hermiticity_error<N>(h) <= 1e-12 * scale) {
    Eigen::SelfAdjointEigenSolver<Matrix<N>> solver(0.5 * (h + h.adjoint()));
    const auto& w = solver.eigenvalues();
    Vector<N> phase(n);
    for (int i = 0; i < n; ++i) phase(i) = std::exp(cplx(0.0, -w(i) * dt));
    return solver.eigenvectors() * phase.asDiagonal() * solver.eigenvectors().adjoint();
  }

  Eigen::ComplexEigenSolver<Matrix<N>> solver(h, true);
  if (solver.info() == Eigen::Success) {
    const auto& w = solver.eigenvalues();
    double growth = 0.0;
    for (int i = 0; i < n; ++i) growth = std::max(growth, w(i).imag() * dt);
    if (growth > 700.0)
      throw Error("step_propagator: overflow, largest Im(E)*dt = " + std::to_string(growth));
    const Matrix<N>& v = solver.eigenvectors();
    Eigen::JacobiSVD<Matrix<N>> svd(v);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / std::max(sv(n - 1), 1e-300);
    if (cond < kDiagonalisableCond) {
      const double res = (h * v - v * w.asDiagonal()).norm();
      if (res <= 1e-10 * std::max(h.norm(), 1e-300) * v.norm()) {
        Vector<N> ex(n);
        for (int i = 0; i < n; ++i) ex(i) = std::exp(cplx(0.0, -dt) * w(i));
        return v * ex.asDiagonal() * v.inverse();
      }
    }
  }

  // Scaling and squaring with a truncated Taylor series.
  const Matrix<N> a = cplx(0.0, -dt) * h;
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix<N> b = a / std::ldexp(1.0, squarings);
  Matrix<N> term = Matrix<N>::Identity(n, n);
  Matrix<N> sum = term;
  for (int k = 1; k < 40; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * sum.cwiseAbs().maxCoeff()) break;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  if (!sum.allFinite()) throw Error("step_propagator: overflow in scaling and squaring");
  return sum;
}

/// exp(-i h dt) psi.
template <int N>
Vector<N> propagate_const(const Matrix<N>& h, const Vector<N>& psi, double dt) {
  return step_propagator<N>(h, dt) * psi;
}

/// n+1 equally spaced times covering [t0, t1].
inline std::vector<double> uniform_grid(double t0, double t1, int n) {
  if (n < 1) throw Error("uniform_grid: need at least one step");
  std::vector<double> g(n + 1);
  for (int i = 0; i <= n; ++i) g[i] = t0 + (t1 - t0) * static_cast<double>(i) / n;
  g[n] = t1;
  return g;
}

struct OrderedOptions {
  /// Bound on max|H(mid_j) - H(mid_{j-1})| * dt for consecutive midpoints.
  double step_tolerance = 1e-2;
  bool keep_states = true;
};

template <int N>
using Sampler = std::function<Matrix<N>(double)>;

/// Time-ordered product of midpoint-sampled step propagators on a grid.
/// The observer sees (index, time, state) at every grid point.
template <int N, class Observer>
Trajectory<N> propagate_ordered(const Sampler<N>& h_of_t, const Vector<N>& psi0,
                                const std::vector<double>& grid, const OrderedOptions& opt,
                                Observer&& observe) {
  if (grid.empty()) throw Error("propagate_ordered: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw Error("propagate_ordered: grid not strictly increasing");

  Trajectory<N> traj;
  Vector<N> psi = psi0;
  if (opt.keep_states) traj.push(grid[0], psi);
  observe(std::size_t{0}, grid[0], static_cast<const Vector<N>&>(psi));

  Matrix<N> previous;
  bool have_previous = false;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double dt = grid[j + 1] - grid[j];
    const Matrix<N> h = h_of_t(grid[j] + 0.5 * dt);
    if (have_previous) {
      const double jump = max_abs<N>(h - previous) * dt;
      if (jump > opt.step_tolerance)
        throw StepToleranceExceeded("propagate_ordered: |dH|*dt = " + std::to_string(jump) +
                                        " exceeds tolerance on [" + std::to_string(grid[j]) +
                                        ", " + std::to_string(grid[j + 1]) + "]",
                                    grid[j], grid[j + 1]);
    }
    previous = h;
    have_previous = true;
    psi = step_propagator<N>(h, dt) * psi;
    if (opt.keep_states) traj.push(grid[j + 1], psi);
    observe(j + 1, grid[j + 1], static_cast<const Vector<N>&>(psi));
  }
  return traj;
}

template <int N>
Trajectory<N> propagate_ordered(const Sampler<N>& h_of_t, const Vector<N>& psi0,
                                const std::vector<double>& grid,
                                const OrderedOptions& opt = {}) {
  return propagate_ordered<N>(h_of_t, psi0, grid, opt,
                              [](std::size_t, double, const Vector<N>&) {});
}

}  // namespace diracep
