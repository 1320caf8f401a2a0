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
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "diracep/errors.hpp"
#include "diracep/numerics.hpp"
#include "diracep/types.hpp"

namespace diracep {

inline constexpr double kDefaultMetricScale = 1.3;
inline constexpr double kDefaultTimeScale = 5e4;
/// Smallest admissible eigenvalue of M - I.
inline constexpr double kPositivityMargin = 1e-8;

/// Time-local objects of the dilation at model time t.
struct DilationFrame {
  double t = 0.0;
  double s = 1.0;
  Matrix3 M, eta, deta, Gamma, Lambda;
  Matrix6 Htot;

  [[nodiscard]] double hermiticity() const {
    return std::max({hermiticity_error<3>(Gamma), hermiticity_error<3>(Lambda),
                     hermiticity_error<6>(Htot) / s});
  }
};

/// M(t) = exp(-i h^dagger t) M(0) exp(i h t) with M(0) = m0_scale * I.
inline Matrix3 metric_M(const Matrix3& h, double t, double m0_scale = kDefaultMetricScale) {
  if (!(m0_scale > 1.0)) throw Error("metric_M: M(0) scale must exceed 1");
  const Matrix3 p = step_propagator<3>(h, -t);  // exp(i h t)
  return m0_scale * (p.adjoint() * p);
}

/// dM/dt = i (M h - h^dagger M).
inline Matrix3 metric_rate(const Matrix3& h, const Matrix3& m) {
  return cplx(0, 1) * (m * h - h.adjoint() * m);
}

/// eta = (M - I)^{1/2} in the gauge U(t) = I. Refuses when M - I is not
/// safely positive rather than clamping.
inline Matrix3 eta_of_t(const Matrix3& m, double t) {
  const Matrix3 x = 0.5 * (m + m.adjoint()) - Matrix3::Identity();
  const double lowest = Eigen::SelfAdjointEigenSolver<Matrix3>(x).eigenvalues().minCoeff();
  if (!(lowest > kPositivityMargin))
    throw DilationWindowExceeded("dilation window exceeded at t = " + std::to_string(t) +
                                     ": min eig(M - I) = " + std::to_string(lowest),
                                 t);
  return psd_sqrt<3>(x);
}

/// Solves eta X + X eta = dM in the eigenbasis of eta.
inline Matrix3 eta_rate(const Matrix3& eta, const Matrix3& dm) {
  Eigen::SelfAdjointEigenSolver<Matrix3> solver(0.5 * (eta + eta.adjoint()));
  const auto& w = solver.eigenvalues();
  if (w.minCoeff() < 1e-12) throw Error("eta_rate: eta is singular, Sylvester solve ill-posed");
  const Matrix3& v = solver.eigenvectors();
  Matrix3 y = v.adjoint() * dm * v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) y(i, j) /= (w(i) + w(j));
  return v * y * v.adjoint();
}

/// Gamma acts on the mI = 1 manifold, Lambda on mI = 0.
inline std::pair<Matrix3, Matrix3> gamma_lambda(const Matrix3& h, const Matrix3& m,
                                                const Matrix3& eta, const Matrix3& deta) {
  const cplx i(0, 1);
  const Matrix3 minv = m.inverse();
  const Matrix3 lam_hat = (h + (i * deta + eta * h) * eta) * minv;
  const Matrix3 gam_hat = i * (h * eta - eta * h - i * deta) * minv;
  return {lam_hat + gam_hat, lam_hat - gam_hat};
}

/// s * blockdiag(Gamma, Lambda): levels 1-3 carry mI = 1, levels 4-6 mI = 0.
inline Matrix6 assemble_htot(const Matrix3& gamma, const Matrix3& lambda, double s) {
  Matrix6 out = Matrix6::Zero();
  out.topLeftCorner<3, 3>() = s * gamma;
  out.bottomRightCorner<3, 3>() = s * lambda;
  return out;
}

inline DilationFrame frame_from_metric(const Matrix3& h, const Matrix3& m, double t, double s) {
  DilationFrame f;
  f.t = t;
  f.s = s;
  f.M = m;
  f.eta = eta_of_t(m, t);
  f.deta = eta_rate(f.eta, metric_rate(h, m));
  std::tie(f.Gamma, f.Lambda) = gamma_lambda(h, m, f.eta, f.deta);
  f.Htot = assemble_htot(f.Gamma, f.Lambda, s);
  return f;
}

/// Frame for a time-independent h.
inline DilationFrame make_frame(const Matrix3& h, double t, double m0_scale = kDefaultMetricScale,
                                double s = 1.0) {
  return frame_from_metric(h, metric_M(h, t, m0_scale), t, s);
}

// ---------------------------------------------------------------------------
// Ancilla encoding. The nuclear qubit has |1> <-> mI = 1 (levels 1-3) and
// |0> <-> mI = 0 (levels 4-6). The ancilla states are
//   |-> = (|0> - i|1>)/sqrt2,   |+> = (i|0> - |1>)/sqrt2,
// i.e. the sigma_y eigenvectors with a global phase i on |+>. That phase is
// what makes the blocks Gamma, Lambda reproduce psi|-> + (eta psi)|+>.

struct AncillaSplit {
  Vector3 minus;  // <-|Psi>, unnormalised
  Vector3 plus;   // <+|Psi>
  double probability = 0.0;
};

inline Vector6 embed(const Vector3& on_minus, const Vector3& on_plus) {
  const cplx i(0, 1);
  const double r = 1.0 / std::sqrt(2.0);
  Vector6 out;
  out.head<3>() = r * (-i * on_minus - on_plus);
  out.tail<3>() = r * (on_minus + i * on_plus);
  return out;
}

inline AncillaSplit postselect(const Vector6& joint) {
  const cplx i(0, 1);
  const double r = 1.0 / std::sqrt(2.0);
  const Vector3 a1 = joint.head<3>(), a0 = joint.tail<3>();
  AncillaSplit out;
  out.minus = r * (a0 + i * a1);
  out.plus = r * (-i * a0 - a1);
  out.probability = out.minus.squaredNorm();
  return out;
}

/// Normalised psi0 |-> + eta0 psi0 |+>.
inline Vector6 prepare_initial(const Vector3& psi0, double eta0) {
  if (!(eta0 > 0)) throw Error("prepare_initial: eta0 must be positive");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw Error("prepare_initial: psi0 must be normalised");
  return embed(psi0, eta0 * psi0).normalized();
}

/// Rotation angle of the nuclear preparation pulse.
inline double preparation_angle(double eta0) { return 2.0 * std::atan(eta0); }

/// max over [0, T] of |exp(-i h t)|_2^2: the smallest M(0) scale keeping M - I
/// positive over the horizon.
inline double required_metric_scale(const Matrix3& h, double horizon, int samples = 400) {
  double worst = 1.0;
  for (int k = 0; k <= samples; ++k) {
    const double t = horizon * k / samples;
    const double n = Eigen::JacobiSVD<Matrix3>(step_propagator<3>(h, t)).singularValues()(0);
    worst = std::max(worst, n * n);
  }
  return worst;
}

struct DilationResult {
  Trajectory<6> joint;
  Trajectory<3> postselected;       // renormalised <-| projections
  std::vector<double> probability;  // postselection success per grid time
  double max_hermiticity = 0.0;     // Gamma, Lambda at every step midpoint
  double max_ancilla_error = 0.0;   // |<+|Psi> - eta <-|Psi>| per grid time
  double m0_scale = kDefaultMetricScale;
};

/// Joint evolution under Htot(t) for a constant h. Times in the grid are model
/// times; Htot is scaled by s and stepped for dt/s, so only the bookkeeping
/// of physical units depends on s.
inline DilationResult dilated_evolve(const Matrix3& h, const Vector3& psi0,
                                     const std::vector<double>& grid,
                                     double m0_scale = kDefaultMetricScale,
                                     double s = kDefaultTimeScale) {
  if (grid.size() < 2) throw Error("dilated_evolve: grid needs at least two times");
  if (grid.front() != 0.0) throw Error("dilated_evolve: grid must start at t = 0");
  DilationResult out;
  out.m0_scale = m0_scale;
  const double eta0 = std::sqrt(m0_scale - 1.0);
  Vector6 joint = prepare_initial(psi0, eta0);

  auto record = [&](double t) {
    const AncillaSplit split = postselect(joint);
    const DilationFrame f = make_frame(h, t, m0_scale, s);
    out.max_ancilla_error = std::max(out.max_ancilla_error, (split.plus - f.eta * split.minus).norm());
    out.joint.push(t, joint);
    out.postselected.push(t, split.minus.normalized());
    out.probability.push_back(split.probability);
  };
  record(0.0);
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double dt = grid[j + 1] - grid[j];
    const DilationFrame f = make_frame(h, grid[j] + 0.5 * dt, m0_scale, s);
    out.max_hermiticity = std::max(out.max_hermiticity, f.hermiticity());
    const Matrix6 herm = 0.5 * (f.Htot + f.Htot.adjoint());
    joint = step_propagator<6>(herm, dt / s) * joint;
    record(grid[j + 1]);
  }
  return out;
}

/// Time-dependent variant. M(t) = W(t)^dagger M(0) W(t) with W the inverse of
/// the non-Hermitian propagator, accumulated in half steps so that frames are
/// available at grid points and step midpoints.
inline DilationResult dilated_evolve(const Sampler<3>& h_of_t, const Vector3& psi0,
                                     const std::vector<double>& grid,
                                     double m0_scale = kDefaultMetricScale,
                                     double s = kDefaultTimeScale) {
  if (grid.size() < 2) throw Error("dilated_evolve: grid needs at least two times");
  if (!(m0_scale > 1.0)) throw Error("dilated_evolve: M(0) scale must exceed 1");
  DilationResult out;
  out.m0_scale = m0_scale;
  Vector6 joint = prepare_initial(psi0, std::sqrt(m0_scale - 1.0));
  Matrix3 w = Matrix3::Identity();
  auto metric = [&] { return m0_scale * (w.adjoint() * w); };

  auto record = [&](double t) {
    const AncillaSplit split = postselect(joint);
    const DilationFrame f = frame_from_metric(h_of_t(t), metric(), t, s);
    out.max_ancilla_error = std::max(out.max_ancilla_error, (split.plus - f.eta * split.minus).norm());
    out.joint.push(t, joint);
    out.postselected.push(t, split.minus.normalized());
    out.probability.push_back(split.probability);
  };
  record(grid.front());
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const double t0 = grid[j], dt = grid[j + 1] - grid[j];
    w = w * step_propagator<3>(h_of_t(t0 + 0.25 * dt), -0.5 * dt);
    const DilationFrame f = frame_from_metric(h_of_t(t0 + 0.5 * dt), metric(), t0 + 0.5 * dt, s);
    out.max_hermiticity = std::max(out.max_hermiticity, f.hermiticity());
    joint = step_propagator<6>(0.5 * (f.Htot + f.Htot.adjoint()), dt / s) * joint;
    w = w * step_propagator<3>(h_of_t(t0 + 0.75 * dt), -0.5 * dt);
    record(grid[j + 1]);
  }
  return out;
}

}  // namespace diracep
