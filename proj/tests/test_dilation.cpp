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

#include "diracep/dilation.hpp"
#include "diracep/model.hpp"
#include "oracles.hpp"

namespace {

using namespace diracep;

double pure_infidelity(const Vector3& a, const Vector3& b) {
  return 1.0 - std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

TEST(Metric, InitialValueAndHermitianLimit) {
  const Matrix3 h = build_hamiltonian(0, 1);
  EXPECT_LT((metric_M(h, 0.0) - 1.3 * Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-15);
  const Matrix3 herm = build_hamiltonian(0.3, 0);
  for (double t : {0.5, 3.0})
    EXPECT_LT((metric_M(herm, t) - 1.3 * Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Metric, HermitianAndAboveOneAtShortTime) {
  const Matrix3 m = metric_M(build_hamiltonian(0, 1), 0.02);
  EXPECT_LT(hermiticity_error<3>(m), 1e-12);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix3>(m).eigenvalues().minCoeff(), 1.0);
}

TEST(Metric, RateMatchesFiniteDifference) {
  const Matrix3 h = build_hamiltonian(0.2, 0.9);
  const double t = 0.05, d = 1e-5;
  const Matrix3 fd = (metric_M(h, t + d) - metric_M(h, t - d)) / (2 * d);
  EXPECT_LT((fd - metric_rate(h, metric_M(h, t))).norm(), 1e-6);
}

TEST(Metric, RejectsScaleNotAboveOne) { EXPECT_THROW(metric_M(Matrix3::Identity(), 0, 1.0), Error); }

TEST(Eta, InitialValueAndAngle) {
  const Matrix3 eta = eta_of_t(metric_M(build_hamiltonian(0, 1), 0), 0);
  EXPECT_LT((eta - std::sqrt(0.3) * Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(preparation_angle(std::sqrt(0.3)), 1.0021, 1e-4);
}

TEST(Eta, SquareReproducesMetric) {
  const Matrix3 h = build_hamiltonian(0.3, 1);
  for (double t : {0.0, 0.01, 0.03}) {
    const Matrix3 m = metric_M(h, t);
    const Matrix3 eta = eta_of_t(m, t);
    EXPECT_LT((eta * eta + Matrix3::Identity() - m).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Eta, ConstantForHermitianH) {
  const Matrix3 h = build_hamiltonian(0.1, 0);
  const Matrix3 a = eta_of_t(metric_M(h, 0.0), 0.0), b = eta_of_t(metric_M(h, 4.0), 4.0);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Eta, RateSolvesSylvester) {
  const Matrix3 h = build_hamiltonian(0, 1);
  const Matrix3 m = metric_M(h, 0.02, 3.0);
  const Matrix3 eta = eta_of_t(m, 0.02);
  const Matrix3 dm = metric_rate(h, m);
  const Matrix3 x = eta_rate(eta, dm);
  EXPECT_LT((eta * x + x * eta - dm).cwiseAbs().maxCoeff(), 1e-12);
  const double d = 1e-6;
  const Matrix3 fd = (eta_of_t(metric_M(h, 0.02 + d, 3.0), 0) - eta_of_t(metric_M(h, 0.02 - d, 3.0), 0)) / (2 * d);
  EXPECT_LT((fd - x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Eta, WindowExceededReportsTime) {
  const Matrix3 h = build_hamiltonian(0, 1);
  try {
    for (double t = 0; t < 1; t += 0.01) eta_of_t(metric_M(h, t), t);
    FAIL();
  } catch (const DilationWindowExceeded& e) {
    EXPECT_GT(e.time(), 0.05);
    EXPECT_LT(e.time(), 0.12);
  }
}

TEST(GammaLambda, HermitianLimitReducesToH) {
  const Matrix3 h = build_hamiltonian(0.4, 0);
  const DilationFrame f = make_frame(h, 1.0);
  EXPECT_LT((f.Lambda - h).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((f.Gamma - h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GammaLambda, HermitianAtDiracPoint) {
  const DilationFrame f = make_frame(build_hamiltonian(0, 1), 0.0);
  EXPECT_LT(hermiticity_error<3>(f.Gamma), 1e-10);
  EXPECT_LT(hermiticity_error<3>(f.Lambda), 1e-10);
  const DilationFrame g = make_frame(build_hamiltonian(0.3, 1), 0.7, 20.0);
  EXPECT_LT(g.hermiticity(), 1e-10);
}

TEST(Htot, BlockStructure) {
  const DilationFrame f = make_frame(build_hamiltonian(0, 1), 0.0, 1.3, 5e4);
  EXPECT_TRUE((f.Htot.topRightCorner<3, 3>().array() == cplx(0)).all());
  EXPECT_TRUE((f.Htot.bottomLeftCorner<3, 3>().array() == cplx(0)).all());
  EXPECT_EQ(assemble_htot(Matrix3::Identity(), Matrix3::Identity(), 1.0), Matrix6::Identity());
  Eigen::VectorXd blocks(6);
  blocks << Eigen::SelfAdjointEigenSolver<Matrix3>(f.Gamma).eigenvalues(),
      Eigen::SelfAdjointEigenSolver<Matrix3>(f.Lambda).eigenvalues();
  std::sort(blocks.data(), blocks.data() + 6);
  Eigen::VectorXd all = Eigen::SelfAdjointEigenSolver<Matrix6>(f.Htot).eigenvalues();
  EXPECT_LT((all - 5e4 * blocks).cwiseAbs().maxCoeff(), 1e-9 * 5e4);
}

TEST(Prepare, Normalised) {
  const Vector6 j = prepare_initial(Vector3(0, 1, 0), std::sqrt(0.3));
  EXPECT_NEAR(j.norm(), 1.0, 1e-15);
  const AncillaSplit split = postselect(j);
  EXPECT_NEAR(split.probability, 1.0 / 1.3, 1e-12);
  EXPECT_NEAR(split.probability, 0.769, 1e-3);
  EXPECT_LT((split.minus.normalized() - Vector3(0, 1, 0)).norm(), 1e-14);
  EXPECT_LT((split.plus - std::sqrt(0.3) * split.minus).norm(), 1e-14);
  EXPECT_THROW(prepare_initial(Vector3(0, 1, 0), 0.0), Error);
}

TEST(Prepare, SmallEtaLimit) {
  const Vector3 psi = Vector3(1, cplx(0, 1), 0).normalized();
  const Vector6 j = prepare_initial(psi, 1e-12);
  EXPECT_LT((j - embed(psi, Vector3::Zero())).norm(), 1e-11);
  EXPECT_NEAR(postselect(j).probability, 1.0, 1e-12);
}

TEST(DilatedEvolve, MatchesDirectPropagation) {
  const Matrix3 h = build_hamiltonian(0, 1);
  const Vector3 psi0(0, 1, 0);
  const double scale = 1.5 * required_metric_scale(h, 2.0);
  const auto res = dilated_evolve(h, psi0, uniform_grid(0, 2, 2000), scale);
  for (std::size_t k = 0; k < res.joint.size(); ++k) {
    const Vector3 direct = propagate_const<3>(h, psi0, res.joint.times[k]);
    EXPECT_LT(pure_infidelity(direct, res.postselected.states[k]), 1e-10);
    EXPECT_NEAR(res.joint.norms[k], 1.0, 1e-9);
  }
  EXPECT_LT(res.max_hermiticity, 1e-9);
  EXPECT_LT(res.max_ancilla_error, 1e-5);
}

TEST(DilatedEvolve, HermitianHKeepsProbability) {
  const auto res = dilated_evolve(build_hamiltonian(0.2, 0), Vector3(1, 0, 0), uniform_grid(0, 1, 100));
  for (double p : res.probability) EXPECT_NEAR(p, 1 / 1.3, 1e-12);
}

TEST(DilatedEvolve, EigenstateIsStationary) {
  const Matrix3 h = build_hamiltonian(0, 1);
  const auto res = dilated_evolve(h, Vector3(0, 0, 1), uniform_grid(0, 1, 200), 15.0);
  for (const auto& v : res.postselected.states) EXPECT_LT(pure_infidelity(v, Vector3(0, 0, 1)), 1e-10);
}

TEST(DilatedEvolve, RefusesBeyondWindow) {
  EXPECT_THROW(dilated_evolve(build_hamiltonian(0, 1), Vector3(0, 1, 0), uniform_grid(0, 2, 200)),
               DilationWindowExceeded);
}

TEST(DilatedEvolve, TimeDependentPathAgreesWithDirect) {
  auto h = [](double t) { return build_hamiltonian(0.1 * std::sin(t), 0.9 + 0.1 * std::cos(t)); };
  const Vector3 psi0(0, 1, 0);
  const auto grid = uniform_grid(0, 1, 1000);
  const auto res = dilated_evolve(Sampler<3>(h), psi0, grid, 10.0);
  const auto direct = propagate_ordered<3>(h, psi0, uniform_grid(0, 1, 4000));
  EXPECT_LT(pure_infidelity(direct.states.back(), res.postselected.states.back()), 1e-8);
  EXPECT_NEAR(res.joint.norms.back(), 1.0, 1e-9);
  const auto constant = dilated_evolve(Sampler<3>([](double) { return build_hamiltonian(0, 1); }),
                                       psi0, uniform_grid(0, 0.5, 100), 10.0);
  const auto exact = dilated_evolve(build_hamiltonian(0, 1), psi0, uniform_grid(0, 0.5, 100), 10.0);
  EXPECT_LT((constant.joint.states.back() - exact.joint.states.back()).norm(), 1e-10);
}

}  // namespace
