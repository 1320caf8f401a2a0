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

// Independent reference computations used only by the tests.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace oracle {

using cplx = std::complex<double>;

// Roots of a x^3 + b x^2 + c x + d by the trigonometric / Cardano formula,
// polished with two Newton steps.
inline std::array<cplx, 3> cubic_roots(double a, double b, double c, double d) {
  const cplx A = b / a, B = c / a, C = d / a;
  const cplx p = B - A * A / 3.0;
  const cplx q = 2.0 * A * A * A / 27.0 - A * B / 3.0 + C;
  const cplx disc = q * q / 4.0 + p * p * p / 27.0;
  cplx u = std::pow(-q / 2.0 + std::sqrt(disc), 1.0 / 3.0);
  if (std::abs(u) < 1e-14) u = std::pow(-q / 2.0 - std::sqrt(disc), 1.0 / 3.0);
  const cplx w(-0.5, std::sqrt(3.0) / 2.0);
  std::array<cplx, 3> r;
  for (int k = 0; k < 3; ++k) {
    const cplx uk = u * std::pow(w, k);
    const cplx vk = std::abs(uk) < 1e-300 ? cplx(0) : -p / (3.0 * uk);
    r[k] = uk + vk - A / 3.0;
  }
  for (auto& x : r) {
    for (int it = 0; it < 2; ++it) {
      const cplx f = ((x + A) * x + B) * x + C;
      const cplx df = (3.0 * x + 2.0 * A) * x + B;
      if (std::abs(df) > 1e-8) x -= f / df;
    }
  }
  return r;
}

// Discriminant of a generic cubic.
inline double cubic_discriminant(double a, double b, double c, double d) {
  return 18 * a * b * c * d - 4 * b * b * b * d + b * b * c * c - 4 * a * c * c * c -
         27 * a * a * d * d;
}

// exp(A) by direct power series; intended for |A| < 1.
template <class M>
M taylor_exp(const M& a, int terms = 60) {
  M term = M::Identity(a.rows(), a.cols());
  M sum = term;
  for (int k = 1; k < terms; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

// exp(-i h t) by repeated Taylor steps of length t/steps.
template <class M>
M series_propagator(const M& h, double t, int steps) {
  const M step = taylor_exp<M>(cplx(0.0, -t / steps) * h);
  M out = M::Identity(h.rows(), h.cols());
  for (int i = 0; i < steps; ++i) out = step * out;
  return out;
}

template <class F>
double central_difference(F&& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

}  // namespace oracle
