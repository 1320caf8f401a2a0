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
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "diracep/errors.hpp"
#include "diracep/model.hpp"
#include "diracep/numerics.hpp"
#include "diracep/types.hpp"

namespace diracep {

// ---------------------------------------------------------------------------
// Steady states of exp(-i g(H) t)

enum class GForm { i_h, minus_i_h, inverse_shifted };

/// i_h selects the largest Re E, minus_i_h the smallest, inverse_shifted the
/// eigenvalue just above Re c.
struct GFunction {
  GForm form = GForm::i_h;
  cplx c = 0.0;
};

inline Matrix3 g_matrix(const Matrix3& h, const GFunction& g) {
  const cplx i(0, 1);
  switch (g.form) {
    case GForm::i_h: return i * h;
    case GForm::minus_i_h: return -i * h;
    case GForm::inverse_shifted: {
      const auto e = eig<3>(h).values;
      for (int k = 0; k < 3; ++k)
        if (std::abs(e(k) - g.c) <= 1e-8)
          throw Error("g_matrix: shift c coincides with an eigenvalue");
      return i * (h - g.c * Matrix3::Identity()).inverse();
    }
  }
  return h;
}

/// Shift halfway between the two smallest real parts, which makes the
/// inverse-shifted form pick the middle eigenvalue.
inline GFunction default_inverse_shift(const Matrix3& h) {
  const auto e = eig<3>(h).values;
  return {GForm::inverse_shifted, 0.5 * (e(1).real() + e(2).real())};
}

struct SteadyStateOptions {
  double horizon = 200.0;
  double rate_tol = 1e-10;  // relative state change per unit model time
  double residual_tol = 1e-6;
  double first_step = 1.0;
};

struct SteadyState {
  Vector3 state;
  cplx eigenvalue;
  double residual = 0.0;
  double time = 0.0;
};

inline Vector3 random_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Vector3 v;
  for (int k = 0; k < 3; ++k) v(k) = cplx(g(rng), g(rng));
  return v.normalized();
}

/// Evolves under g(H) with renormalisation. The step propagator is squared
/// each iteration, so elapsed time doubles and Jordan-block convergence (1/t)
/// at an exceptional point stays affordable.
inline SteadyState steady_state_eigenstate(const Matrix3& h, const GFunction& g, const Vector3& psi_init,
                                           const SteadyStateOptions& o = {}) {
  if (psi_init.norm() == 0) throw Error("steady_state_eigenstate: initial state is zero");
  Matrix3 step = step_propagator<3>(g_matrix(h, g), o.first_step);
  double dt = o.first_step, t = 0.0;
  Vector3 psi = psi_init.normalized();
  while (t < o.horizon) {
    Vector3 next = step * psi;
    const double n = next.norm();
    if (!(n > 0) || !std::isfinite(n)) throw Error("steady_state_eigenstate: state collapsed");
    next /= n;
    const cplx overlap = psi.dot(next);
    if (std::abs(overlap) > 0) next *= std::conj(overlap) / std::abs(overlap);
    const double change = (next - psi).norm();
    psi = next;
    t += dt;
    if (change / dt < o.rate_tol) break;
    step = step * step;
    step /= max_abs<3>(step);
    dt *= 2;
  }
  SteadyState out;
  out.state = psi;
  out.eigenvalue = psi.dot(h * psi);
  out.residual = (h * psi - out.eigenvalue * psi).norm();
  out.time = t;
  if (!(out.residual <= o.residual_tol))
    throw UnresolvedSteadyState<SteadyState>(
        "steady_state_eigenstate: unresolved within horizon " + std::to_string(o.horizon) +
            " (residual " + std::to_string(out.residual) + ")",
        out, out.residual);
  return out;
}

inline SteadyState steady_state_eigenstate(const ModelParams& p, const GFunction& g, const Vector3& psi_init,
                                           const SteadyStateOptions& o = {}) {
  return steady_state_eigenstate(build_hamiltonian(p), g, psi_init, o);
}

// ---------------------------------------------------------------------------
// Measurement rotations

struct MeasurementSetting {
  double a = 0, b = 0, c = 0, d = 0;
  friend bool operator==(const MeasurementSetting&, const MeasurementSetting&) = default;
};

/// Rotation on levels 1-2.
inline Matrix3 rotation_u(double a, double b) {
  const cplx i(0, 1);
  Matrix3 u = Matrix3::Identity();
  u(0, 0) = u(1, 1) = std::cos(a);
  u(0, 1) = -i * std::sin(a) * std::exp(-i * b);
  u(1, 0) = -i * std::sin(a) * std::exp(i * b);
  return u;
}

/// Rotation on levels 2-3.
inline Matrix3 rotation_v(double c, double d) {
  const cplx i(0, 1);
  Matrix3 v = Matrix3::Identity();
  v(1, 1) = v(2, 2) = std::cos(c);
  v(1, 2) = -i * std::sin(c) * std::exp(-i * d);
  v(2, 1) = -i * std::sin(c) * std::exp(i * d);
  return v;
}

inline Matrix3 readout_unitary(const MeasurementSetting& s) { return rotation_u(s.a, s.b) * rotation_v(s.c, s.d); }

inline std::array<double, 3> populations(const Vector3& state, const MeasurementSetting& s) {
  const Vector3 x = readout_unitary(s) * state;
  const double n = x.squaredNorm();
  return {std::norm(x(0)) / n, std::norm(x(1)) / n, std::norm(x(2)) / n};
}

/// P2 / P3 after the readout rotation.
inline double population_ratio(const Vector3& state, const MeasurementSetting& s) {
  const auto p = populations(state, s);
  if (!(p[2] > 1e-12))
    throw Error("population_ratio: level-3 population underflows; choose a different setting");
  return p[1] / p[2];
}

/// Screened settings for the eigenvalue inversion (one per eigenstate).
inline std::array<MeasurementSetting, 3> default_eigen_settings() {
  constexpr double pi = std::numbers::pi;
  return {{{pi / 4, pi / 2, 0, pi / 2}, {0, pi / 2, 3 * pi / 8, pi / 2}, {3 * pi / 8, pi / 2, 3 * pi / 8, pi / 2}}};
}

// ---------------------------------------------------------------------------
// Eigenvalues from population ratios

struct EigenSolveOptions {
  int sign_k1 = 1;  // sign branch for k1, k2 (only squares follow from the ratios)
  int sign_k2 = 1;
  double residual_tol = 1e-6;
};

struct EigenSolution {
  std::array<double, 3> E{};
  double residual = 0.0;  // max |F_i - r_i| / (1 + r_i)
  double jacobian_cond = 0.0;
};

namespace detail {

inline Vector3 closed_form_vector(double e, double k1, double k2) {
  return Vector3(e * (e + 2 * k1 - 3) + k2 * k2 - 1, (e + 2 * k1 - 3) * (1 + k2), (1 + k2) * (1 + k2));
}

struct RatioModel {
  std::array<double, 3> ratios;
  std::array<MeasurementSetting, 3> settings;
  EigenSolveOptions opt;

  [[nodiscard]] Eigen::Vector3d residual(double e1, double e2) const {
    const double e3 = 6 - e1 - e2;
    const auto [a2, b2] = squared_params_from_eigenvalues(e1, e2, e3);
    const double k1 = opt.sign_k1 * std::sqrt(std::max(a2, 0.0));
    const double k2 = opt.sign_k2 * std::sqrt(std::max(b2, 0.0));
    const double e[3] = {e1, e2, e3};
    Eigen::Vector3d r;
    for (int i = 0; i < 3; ++i) {
      const Vector3 x = readout_unitary(settings[i]) * closed_form_vector(e[i], k1, k2);
      const double den = std::norm(x(2));
      const double f = den > 1e-300 ? std::norm(x(1)) / den : 1e300;
      r(i) = (f - ratios[i]) / (1 + ratios[i]);
    }
    return r;
  }

  [[nodiscard]] Eigen::Matrix<double, 3, 2> jacobian(double e1, double e2) const {
    const double h = 1e-7;
    Eigen::Matrix<double, 3, 2> j;
    j.col(0) = (residual(e1 + h, e2) - residual(e1 - h, e2)) / (2 * h);
    j.col(1) = (residual(e1, e2 + h) - residual(e1, e2 - h)) / (2 * h);
    return j;
  }
};

// Levenberg-Marquardt on two unknowns.
inline Eigen::Vector2d levenberg_marquardt(const RatioModel& m, Eigen::Vector2d x, int max_iter = 300) {
  double mu = 1e-3;
  Eigen::Vector3d r = m.residual(x(0), x(1));
  double cost = r.squaredNorm();
  for (int it = 0; it < max_iter && cost > 1e-32; ++it) {
    const auto j = m.jacobian(x(0), x(1));
    const Eigen::Matrix2d jtj = j.transpose() * j;
    const Eigen::Vector2d g = j.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      const Eigen::Matrix2d a = jtj + mu * Eigen::Matrix2d::Identity() * std::max(1.0, jtj.diagonal().maxCoeff());
      const Eigen::Vector2d step = a.ldlt().solve(-g);
      const Eigen::Vector2d y = x + step;
      const Eigen::Vector3d ry = m.residual(y(0), y(1));
      if (ry.allFinite() && ry.squaredNorm() < cost) {
        x = y;
        r = ry;
        const bool tiny = step.norm() < 1e-15 * (1 + x.norm());
        cost = ry.squaredNorm();
        mu = std::max(mu / 3, 1e-15);
        improved = !tiny;
        break;
      }
      mu *= 4;
    }
    if (!improved) break;
  }
  return x;
}

}  // namespace detail

inline constexpr std::array<std::array<double, 2>, 8> kEigenStarts = {
    {{3, 2}, {4, 2.5}, {5, 1}, {3.5, 3}, {2.5, 2.4}, {4.5, 1.5}, {3.2, 2.9}, {6, 0.5}}};

/// Recovers (E1, E2, E3) with E1 + E2 + E3 = 6 built in. Multi-start local
/// solve; the ordered root with the smallest residual wins.
inline EigenSolution solve_eigenvalues(const std::array<double, 3>& ratios,
                                       const std::array<MeasurementSetting, 3>& settings = default_eigen_settings(),
                                       const EigenSolveOptions& opt = {}) {
  const detail::RatioModel model{ratios, settings, opt};
  EigenSolution best;
  best.residual = INFINITY;
  std::ostringstream landscape;
  for (const auto& s : kEigenStarts) {
    const Eigen::Vector2d x = detail::levenberg_marquardt(model, {s[0], s[1]});
    const double e3 = 6 - x(0) - x(1);
    const double res = model.residual(x(0), x(1)).cwiseAbs().maxCoeff();
    landscape << " (" << s[0] << "," << s[1] << ")->(" << x(0) << "," << x(1) << ") res " << res << ";";
    if (!(x(0) >= x(1) - 1e-9 && x(1) >= e3 - 1e-9)) continue;
    if (res < best.residual) {
      best.E = {x(0), x(1), e3};
      best.residual = res;
    }
  }
  if (!(best.residual < opt.residual_tol))
    throw NoRoot("solve_eigenvalues: no ordered root with residual below " + std::to_string(opt.residual_tol) +
                 "; starts:" + landscape.str());
  const auto j = model.jacobian(best.E[0], best.E[1]);
  const auto sv = Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>>(j).singularValues();
  best.jacobian_cond = sv(0) / std::max(sv(1), 1e-300);
  return best;
}

// ---------------------------------------------------------------------------
// Counts and records

struct TomographyRecord {
  MeasurementSetting setting;
  long long shots = 0;  // 0 = exact populations
  std::array<double, 3> p{};
};

/// Exact populations for shots = 0, otherwise a multinomial draw.
inline TomographyRecord simulate_counts(const Vector3& state, const MeasurementSetting& s, long long shots,
                                        std::mt19937_64& rng) {
  if (shots < 0) throw Error("simulate_counts: shots must be non-negative");
  TomographyRecord rec{s, shots, populations(state, s)};
  if (shots == 0) return rec;
  long long left = shots;
  double mass = 1.0;
  std::array<long long, 3> n{};
  for (int j = 0; j < 2; ++j) {
    const double q = mass > 0 ? std::clamp(rec.p[j] / mass, 0.0, 1.0) : 0.0;
    n[j] = std::binomial_distribution<long long>(left, q)(rng);
    left -= n[j];
    mass -= rec.p[j];
  }
  n[2] = left;
  for (int j = 0; j < 3; ++j) rec.p[j] = static_cast<double>(n[j]) / static_cast<double>(shots);
  return rec;
}

/// Ratio P2 / P3 from a record.
inline double record_ratio(const TomographyRecord& r) {
  if (!(r.p[2] > 0)) throw Error("record_ratio: no level-3 counts");
  return r.p[1] / r.p[2];
}

/// Residual tolerance matching multinomial noise: 5 sigma of (F - r)/(1 + r).
inline double ratio_noise_tolerance(const std::array<TomographyRecord, 3>& recs) {
  double tol = 1e-6;
  for (const auto& r : recs) {
    if (r.shots == 0) continue;
    const double n = static_cast<double>(r.shots);
    const double p2 = std::max(r.p[1], 1.0 / n), p3 = std::max(r.p[2], 1.0 / n);
    const double ratio = p2 / p3;
    const double sigma = ratio * std::sqrt(1 / (n * p2) + 1 / (n * p3)) / (1 + ratio);
    tol = std::max(tol, 5 * sigma);
  }
  return tol;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood state reconstruction

using DensityMatrix = Matrix3;

inline DensityMatrix projector(const Vector3& v) { return v * v.adjoint() / v.squaredNorm(); }

/// Settings spanning all nine real parameters of a qutrit density matrix.
inline std::vector<MeasurementSetting> default_tomography_settings() {
  constexpr double q = std::numbers::pi / 4, h = std::numbers::pi / 2;
  return {{0, 0, 0, 0}, {q, 0, 0, 0}, {q, h, 0, 0}, {0, 0, q, 0},
          {0, 0, q, h}, {q, 0, h, 0}, {q, h, h, 0}};
}

namespace detail {

// Hermitian matrix as nine reals: diagonal, then Re/Im of the upper triangle.
inline Eigen::Matrix<double, 9, 1> hermitian_coordinates(const Matrix3& m) {
  Eigen::Matrix<double, 9, 1> v;
  v << m(0, 0).real(), m(1, 1).real(), m(2, 2).real(), m(0, 1).real(), m(0, 1).imag(), m(0, 2).real(),
      m(0, 2).imag(), m(1, 2).real(), m(1, 2).imag();
  return v;
}

inline std::vector<Matrix3> outcome_projectors(const MeasurementSetting& s) {
  const Matrix3 u = readout_unitary(s);
  std::vector<Matrix3> out;
  for (int j = 0; j < 3; ++j) out.push_back(u.adjoint() * Matrix3::Identity().col(j) * Matrix3::Identity().row(j) * u);
  return out;
}

}  // namespace detail

/// Number of real density-matrix directions the settings leave unconstrained.
inline int unconstrained_directions(const std::vector<MeasurementSetting>& settings) {
  std::vector<Eigen::Matrix<double, 9, 1>> rows;
  for (const auto& s : settings)
    for (const auto& p : detail::outcome_projectors(s)) rows.push_back(detail::hermitian_coordinates(p));
  if (rows.empty()) return 9;
  Eigen::MatrixXd a(rows.size(), 9);
  for (std::size_t r = 0; r < rows.size(); ++r) a.row(r) = rows[r].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k) rank += sv(k) > 1e-9 * sv(0);
  return 9 - rank;
}

struct MleOptions {
  int max_iter = 5000;
  double gradient_tol = 1e-8;
};

struct MleResult {
  DensityMatrix rho;
  double gradient_norm = 0.0;
  int iterations = 0;
  double neg_log_likelihood = 0.0;
};

namespace detail {

struct Likelihood {
  std::vector<Matrix3> proj;
  std::vector<double> weight;  // frequency times record weight

  static Matrix3 factor(const Eigen::Matrix<double, 9, 1>& x) {
    Matrix3 t = Matrix3::Zero();
    t(0, 0) = x(0);
    t(1, 1) = x(1);
    t(2, 2) = x(2);
    t(1, 0) = cplx(x(3), x(4));
    t(2, 0) = cplx(x(5), x(6));
    t(2, 1) = cplx(x(7), x(8));
    return t;
  }

  static Matrix3 rho(const Eigen::Matrix<double, 9, 1>& x) {
    const Matrix3 t = factor(x);
    const Matrix3 a = t.adjoint() * t;
    return a / a.trace().real();
  }

  [[nodiscard]] double value(const Eigen::Matrix<double, 9, 1>& x, Eigen::Matrix<double, 9, 1>* grad) const {
    const Matrix3 t = factor(x);
    const Matrix3 a = t.adjoint() * t;
    const double tau = a.trace().real();
    if (!(tau > 0)) return INFINITY;
    const Matrix3 r = a / tau;
    double f = 0.0;
    Matrix3 g = Matrix3::Zero();
    for (std::size_t k = 0; k < proj.size(); ++k) {
      if (weight[k] == 0) continue;
      const double p = (proj[k] * r).trace().real();
      if (!(p > 0)) return INFINITY;
      f -= weight[k] * std::log(p);
      g -= (weight[k] / p) * proj[k];
    }
    if (grad) {
      const Matrix3 gh = (g - (g * r).trace().real() * Matrix3::Identity()) / tau;
      const Matrix3 kk = gh * t.adjoint();
      auto d = [&](int i, int j) { return kk(j, i); };
      (*grad)(0) = 2 * d(0, 0).real();
      (*grad)(1) = 2 * d(1, 1).real();
      (*grad)(2) = 2 * d(2, 2).real();
      (*grad)(3) = 2 * d(1, 0).real();
      (*grad)(4) = -2 * d(1, 0).imag();
      (*grad)(5) = 2 * d(2, 0).real();
      (*grad)(6) = -2 * d(2, 0).imag();
      (*grad)(7) = 2 * d(2, 1).real();
      (*grad)(8) = -2 * d(2, 1).imag();
    }
    return f;
  }
};

}  // namespace detail

/// Maximum-likelihood density matrix over rho = T^dagger T / tr, T lower
/// triangular, by BFGS with backtracking.
inline MleResult mle_reconstruct(const std::vector<TomographyRecord>& records, const MleOptions& o = {}) {
  std::vector<MeasurementSetting> settings;
  for (const auto& r : records) settings.push_back(r.setting);
  if (const int missing = unconstrained_directions(settings); missing > 0)
    throw IncompleteSettings("mle_reconstruct: settings leave " + std::to_string(missing) +
                                 " real density-matrix directions unconstrained",
                             missing);
  detail::Likelihood like;
  double total = 0.0;
  for (const auto& r : records) total += static_cast<double>(std::max<long long>(r.shots, 1));
  for (const auto& r : records) {
    const auto proj = detail::outcome_projectors(r.setting);
    const double w = static_cast<double>(std::max<long long>(r.shots, 1)) / total;
    for (int j = 0; j < 3; ++j) {
      like.proj.push_back(proj[j]);
      like.weight.push_back(w * r.p[j]);
    }
  }

  using Vec9 = Eigen::Matrix<double, 9, 1>;
  Vec9 x = Vec9::Zero();
  x(0) = x(1) = x(2) = 1.0 / std::sqrt(3.0);
  Vec9 g;
  double f = like.value(x, &g);
  Eigen::Matrix<double, 9, 9> hinv = Eigen::Matrix<double, 9, 9>::Identity();
  MleResult out;
  int it = 0;
  for (; it < o.max_iter && g.norm() > o.gradient_tol; ++it) {
    Vec9 dir = -hinv * g;
    if (dir.dot(g) >= 0) {
      hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0, fn = INFINITY;
    Vec9 xn, gn;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dir;
      fn = like.value(xn, &gn);
      if (fn <= f + 1e-4 * step * g.dot(dir)) break;
      step *= 0.5;
    }
    if (!(fn < f) && !(fn <= f && gn.norm() < g.norm())) break;
    const Vec9 sv = xn - x, yv = gn - g;
    const double sy = sv.dot(yv);
    if (sy > 1e-300) {
      const Eigen::Matrix<double, 9, 9> id = Eigen::Matrix<double, 9, 9>::Identity();
      const double rho_k = 1.0 / sy;
      hinv = (id - rho_k * sv * yv.transpose()) * hinv * (id - rho_k * yv * sv.transpose()) +
             rho_k * sv * sv.transpose();
    }
    // Keep the factor at unit scale; rho is invariant under rescaling T.
    const double scale = detail::Likelihood::factor(xn).norm();
    x = xn / scale;
    gn *= scale;
    hinv /= scale * scale;
    f = fn;
    g = gn;
  }
  out.rho = detail::Likelihood::rho(x);
  out.rho = 0.5 * (out.rho + out.rho.adjoint());
  out.gradient_norm = g.norm();
  out.iterations = it;
  out.neg_log_likelihood = f;
  return out;
}

/// Uhlmann fidelity [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  for (const DensityMatrix* m : {&rho, &sigma}) {
    if (hermiticity_error<3>(*m) > 1e-9) throw Error("fidelity: input is not Hermitian");
    const double lo = Eigen::SelfAdjointEigenSolver<Matrix3>(0.5 * (*m + m->adjoint())).eigenvalues().minCoeff();
    if (lo < -1e-10) throw MetricViolation("fidelity: input is not positive semidefinite", lo);
    if (std::abs(m->trace().real() - 1.0) > 1e-8) throw Error("fidelity: input trace is not 1");
  }
  // Eigenvalues at round-off level are zeroed: their square roots would
  // otherwise contribute ~1e-8 for pure states.
  constexpr double floor = 1e-13;
  const Eigen::SelfAdjointEigenSolver<Matrix3> er(0.5 * (rho + rho.adjoint()));
  Eigen::Vector3d lr = er.eigenvalues();
  for (int k = 0; k < 3; ++k) lr(k) = lr(k) > floor ? std::sqrt(lr(k)) : 0.0;
  const Matrix3 root = er.eigenvectors() * lr.cast<cplx>().asDiagonal() * er.eigenvectors().adjoint();
  const Matrix3 inner = root * sigma * root;
  const auto w = Eigen::SelfAdjointEigenSolver<Matrix3>(0.5 * (inner + inner.adjoint())).eigenvalues();
  double s = 0.0;
  for (int k = 0; k < 3; ++k) s += w(k) > floor ? std::sqrt(w(k)) : 0.0;
  return std::clamp(s * s, 0.0, 1.0);
}

}  // namespace diracep
