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

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

#include "diracep/readout.hpp"
#include "oracles.hpp"

namespace {

using namespace diracep;
constexpr double kPi = std::numbers::pi;

double pure_overlap(const Vector3& a, const Vector3& b) {
  return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

// Real roots of det(E - H), sorted descending, from the trace invariants.
std::array<double, 3> oracle_eigenvalues(double k1, double k2) {
  const Matrix3 h = build_hamiltonian(k1, k2);
  const cplx t1 = h.trace(), t2 = (h * h).trace();
  const cplx d = h.determinant();
  auto r = oracle::cubic_roots(1.0, -t1.real(), 0.5 * (t1 * t1 - t2).real(), -d.real());
  std::array<double, 3> e{r[0].real(), r[1].real(), r[2].real()};
  std::sort(e.begin(), e.end(), std::greater<>());
  return e;
}

std::array<double, 3> forward_ratios(double k1, double k2, const std::array<MeasurementSetting, 3>& s) {
  const auto e = oracle_eigenvalues(k1, k2);
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = population_ratio(analytic_eigenstate(at(k1, k2), e[i]), s[i]);
  return r;
}

TEST(SteadyState, InverseShiftPicksZeroModeAtDiracPoint) {
  const Vector3 want = Vector3(0, -6, 4) / std::sqrt(52.0);
  const auto s = steady_state_eigenstate(at(0, 1), {GForm::inverse_shifted, -0.1}, random_state(7));
  EXPECT_NEAR(pure_overlap(s.state, want), 1.0, 1e-10);
  EXPECT_NEAR(std::abs(s.eigenvalue), 0.0, 1e-8);
}

TEST(SteadyState, ForwardFormReachesCoalescedDirection) {
  SteadyStateOptions o;
  o.horizon = 1e9;
  const auto s = steady_state_eigenstate(at(0, 1), {GForm::i_h}, random_state(3), o);
  EXPECT_NEAR(pure_overlap(s.state, Vector3(0, 0, 1)), 1.0, 1e-6);
  EXPECT_LE(s.residual, 1e-6);
}

TEST(SteadyState, DefaultHorizonIsNotEnoughAtDiracPoint) {
  EXPECT_THROW(steady_state_eigenstate(at(0, 1), {GForm::i_h}, random_state(3)),
               UnresolvedSteadyState<SteadyState>);
}

TEST(SteadyState, OppositeFormsGiveDistinctStates) {
  const auto up = steady_state_eigenstate(at(0.3, 1), {GForm::i_h}, random_state(1));
  const auto down = steady_state_eigenstate(at(0.3, 1), {GForm::minus_i_h}, random_state(1));
  EXPECT_NEAR(up.eigenvalue.real(), 3.6, 1e-8);
  EXPECT_NEAR(down.eigenvalue.real(), 0.0, 1e-8);
  EXPECT_LT(pure_overlap(up.state, down.state), 0.99);
}

TEST(SteadyState, DefaultShiftSelectsMiddleEigenvalue) {
  const Matrix3 h = build_hamiltonian(0.3, 1);
  const auto s = steady_state_eigenstate(h, default_inverse_shift(h), random_state(2));
  EXPECT_NEAR(s.eigenvalue.real(), 2.4, 1e-8);
}

TEST(SteadyState, ShiftOnEigenvalueRejected) {
  EXPECT_THROW(g_matrix(build_hamiltonian(0.3, 1), {GForm::inverse_shifted, 0.0}), Error);
}

TEST(SteadyState, ResidualPropertyOnRandomPoints) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  int checked = 0;
  while (checked < 100) {
    const double k1 = u(rng), k2 = u(rng);
    if (std::abs(disc::value(k1, k2)) <= 0.1) continue;
    ++checked;
    for (GForm f : {GForm::i_h, GForm::minus_i_h}) {
      try {
        const auto s = steady_state_eigenstate(at(k1, k2), {f}, random_state(checked));
        EXPECT_LE(s.residual, 1e-6);
      } catch (const UnresolvedSteadyState<SteadyState>&) {
        // allowed: e.g. a complex pair with equal real parts
      }
    }
  }
}

TEST(Ratio, IdentitySettingComponentArithmetic) {
  const MeasurementSetting id{};
  EXPECT_NEAR(population_ratio(Vector3(0, -6, 4) / std::sqrt(52.0), id), 2.25, 1e-14);
  EXPECT_THROW(population_ratio(Vector3(1, 0, 0), id), Error);
  EXPECT_EQ(population_ratio(Vector3(0, 0, 1), id), 0.0);
}

TEST(Ratio, GlobalPhaseInvariant) {
  const Vector3 v = random_state(5);
  const MeasurementSetting s{0.3, 0.7, 1.1, -0.4};
  EXPECT_NEAR(population_ratio(v, s), population_ratio(std::exp(cplx(0, 1.9)) * v, s), 1e-13);
}

TEST(Ratio, RotationsAreUnitary) {
  const Matrix3 u = readout_unitary({0.3, 0.7, 1.1, -0.4});
  EXPECT_LT((u * u.adjoint() - Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(EigenSolve, RecoversLinePoint) {
  const auto s = default_eigen_settings();
  const auto sol = solve_eigenvalues(forward_ratios(0.3, 1, s), s);
  EXPECT_NEAR(sol.E[0], 3.6, 1e-6);
  EXPECT_NEAR(sol.E[1], 2.4, 1e-6);
  EXPECT_NEAR(sol.E[2], 0.0, 1e-6);
  EXPECT_EQ(sol.E[0] + sol.E[1] + sol.E[2], 6.0);
  EXPECT_LT(sol.jacobian_cond, 1e6);
}

TEST(EigenSolve, RecoversDiracPoint) {
  const auto s = default_eigen_settings();
  const auto sol = solve_eigenvalues(forward_ratios(0, 1, s), s);
  EXPECT_NEAR(sol.E[0], 3.0, 1e-6);
  EXPECT_NEAR(sol.E[1], 3.0, 1e-6);
  EXPECT_NEAR(sol.E[2], 0.0, 1e-6);
}

TEST(EigenSolve, GridRoundTrip) {
  const auto s = default_eigen_settings();
  for (double k1 : {0.0, 0.2, 0.4, 0.6, 0.8})
    for (double k2 : {0.3, 0.5, 0.7, 0.9, 1.1}) {
      if (disc::value(k1, k2) < 0) continue;
      if (std::abs(k2 - 1) < 0.05 && std::abs(k1) < 0.05) continue;
      const auto truth = oracle_eigenvalues(k1, k2);
      const auto sol = solve_eigenvalues(forward_ratios(k1, k2, s), s);
      for (int i = 0; i < 3; ++i) EXPECT_NEAR(sol.E[i], truth[i], 1e-6) << k1 << "," << k2;
    }
}

TEST(EigenSolve, InconsistentRatiosHaveNoRoot) {
  EXPECT_THROW(solve_eigenvalues({50.0, 1e-3, 7.0}), NoRoot);
}

TEST(EigenSolve, ShotNoiseMedianError) {
  const auto s = default_eigen_settings();
  const ModelParams p = at(0, 0.8);
  const auto truth = oracle_eigenvalues(0, 0.8);
  std::vector<double> err;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::array<TomographyRecord, 3> recs;
    std::array<double, 3> ratios{};
    for (int i = 0; i < 3; ++i) {
      recs[i] = simulate_counts(analytic_eigenstate(p, truth[i]), s[i], 100000, rng);
      ratios[i] = record_ratio(recs[i]);
    }
    EigenSolveOptions o;
    o.residual_tol = ratio_noise_tolerance(recs);
    const auto sol = solve_eigenvalues(ratios, s, o);
    double e = 0;
    for (int i = 0; i < 3; ++i) e = std::max(e, std::abs(sol.E[i] - truth[i]));
    err.push_back(e);
  }
  std::nth_element(err.begin(), err.begin() + 50, err.end());
  EXPECT_LT(err[50], 0.1);
}

TEST(Counts, ExactAndReproducible) {
  std::mt19937_64 rng(1);
  const auto exact = simulate_counts(Vector3(0, 0, 1), {}, 0, rng);
  EXPECT_EQ(exact.p[2], 1.0);
  EXPECT_EQ(exact.p[0] + exact.p[1], 0.0);
  const Vector3 v = random_state(9);
  std::mt19937_64 a(42), b(42);
  const auto ra = simulate_counts(v, {0.4, 0, 0.2, 0}, 1000, a);
  const auto rb = simulate_counts(v, {0.4, 0, 0.2, 0}, 1000, b);
  EXPECT_EQ(ra.p, rb.p);
  EXPECT_NEAR(ra.p[0] + ra.p[1] + ra.p[2], 1.0, 1e-12);
}

TEST(Counts, LargeShotConvergence) {
  const Vector3 v = random_state(4);
  const MeasurementSetting s{0.5, 0.2, 0.9, 0.1};
  std::mt19937_64 rng(5);
  const long long n = 10000000;
  const auto rec = simulate_counts(v, s, n, rng);
  const auto exact = populations(v, s);
  for (int j = 0; j < 3; ++j) {
    const double sigma = std::sqrt(exact[j] * (1 - exact[j]) / static_cast<double>(n));
    EXPECT_LT(std::abs(rec.p[j] - exact[j]), 3 * sigma + 1e-15);
  }
}

TEST(Tomography, DefaultSettingsComplete) {
  EXPECT_EQ(unconstrained_directions(default_tomography_settings()), 0);
  EXPECT_GT(unconstrained_directions({{0, 0, 0, 0}, {kPi / 4, 0, 0, 0}}), 0);
}

TEST(Tomography, IncompleteSettingsRejected) {
  std::mt19937_64 rng(0);
  std::vector<TomographyRecord> recs{simulate_counts(Vector3(0, 0, 1), {}, 0, rng)};
  try {
    mle_reconstruct(recs);
    FAIL();
  } catch (const IncompleteSettings& e) {
    EXPECT_EQ(e.unconstrained_directions(), 6);
  }
}

std::vector<TomographyRecord> records_for(const Vector3& v, long long shots, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TomographyRecord> out;
  for (const auto& s : default_tomography_settings()) out.push_back(simulate_counts(v, s, shots, rng));
  return out;
}

void expect_physical(const DensityMatrix& r) {
  EXPECT_LT(hermiticity_error<3>(r), 1e-12);
  EXPECT_NEAR(r.trace().real(), 1.0, 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix3>(r).eigenvalues().minCoeff(), -1e-10);
}

TEST(Mle, NoiselessPureStates) {
  for (const Vector3& v : {Vector3(0, 0, 1), Vector3(Vector3(0, -6, 4) / std::sqrt(52.0))}) {
    const auto res = mle_reconstruct(records_for(v, 0, 0));
    expect_physical(res.rho);
    EXPECT_GT(fidelity(res.rho, projector(v)), 0.9999);
  }
}

TEST(Mle, ShotNoiseAtDiracPoint) {
  const Vector3 states[] = {Vector3(0, 0, 1), Vector3(Vector3(0, -6, 4) / std::sqrt(52.0))};
  int seed = 0;
  for (const auto& v : states) {
    const auto res = mle_reconstruct(records_for(v, 100000, ++seed));
    expect_physical(res.rho);
    EXPECT_GT(fidelity(res.rho, projector(v)), 0.99);
  }
}

TEST(Mle, ArbitraryPopulationsStayPhysical) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TomographyRecord> recs;
  for (const auto& s : default_tomography_settings()) {
    std::array<double, 3> p{u(rng), u(rng), u(rng)};
    const double t = p[0] + p[1] + p[2];
    for (double& x : p) x /= t;
    recs.push_back({s, 1000, p});
  }
  expect_physical(mle_reconstruct(recs).rho);
}

TEST(Fidelity, PureStatesAndSymmetry) {
  const Vector3 a = random_state(1), b = random_state(2);
  const DensityMatrix pa = projector(a), pb = projector(b);
  EXPECT_NEAR(fidelity(pa, pa), 1.0, 1e-10);
  EXPECT_NEAR(fidelity(pa, pb), pure_overlap(a, b), 1e-8);
  EXPECT_NEAR(fidelity(pa, pb), fidelity(pb, pa), 1e-10);
}

TEST(Fidelity, DiracPointEigenstates) {
  const Vector3 coalesced(0, 0, 1), zero = Vector3(0, -6, 4) / std::sqrt(52.0);
  EXPECT_NEAR(fidelity(projector(coalesced), projector(zero)), 4.0 / 13.0, 1e-12);
}

TEST(Fidelity, MonotoneTowardMixed) {
  const DensityMatrix p = projector(random_state(6));
  const DensityMatrix mixed = Matrix3::Identity() / 3.0;
  double prev = 1.0;
  for (double w : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    const double f = fidelity(p, (1 - w) * p + w * mixed);
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(Fidelity, RejectsNonPositive) {
  DensityMatrix bad = Matrix3::Zero();
  bad(0, 0) = 1.2;
  bad(1, 1) = -0.2;
  EXPECT_THROW(fidelity(bad, bad), MetricViolation);
}

}  // namespace
