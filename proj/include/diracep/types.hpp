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

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace diracep {

using cplx = std::complex<double>;

template <int N>
using Matrix = Eigen::Matrix<cplx, N, N>;

template <int N>
using Vector = Eigen::Matrix<cplx, N, 1>;

using Matrix3 = Matrix<3>;
using Vector3 = Vector<3>;
using Matrix6 = Matrix<6>;
using Vector6 = Vector<6>;

/// A point in the two-parameter plane.
struct Point2 {
  double k1 = 0.0;
  double k2 = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.k1 + b.k1, a.k2 + b.k2}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.k1 - b.k1, a.k2 - b.k2}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.k1, s * a.k2}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double norm(Point2 p) { return std::hypot(p.k1, p.k2); }

/// Eigenvalues with matching right eigenvectors (columns), unit-normalised.
template <int N>
struct Spectrum {
  enum class Ordering { local, sweep_tracked };

  Vector<N> values;
  Matrix<N> right;
  Ordering ordering = Ordering::local;

  [[nodiscard]] Vector<N> vector(int i) const { return right.col(i); }
};

/// Time grid with one state per time. Norms are cached for inspection.
template <int N>
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector<N>> states;
  std::vector<double> norms;

  void push(double t, const Vector<N>& psi) {
    times.push_back(t);
    states.push_back(psi);
    norms.push_back(psi.norm());
  }
  [[nodiscard]] std::size_t size() const { return times.size(); }
};

template <int N>
double max_abs(const Matrix<N>& m) {
  return m.cwiseAbs().maxCoeff();
}

/// Largest entry of |m - m^dagger|.
template <int N>
double hermiticity_error(const Matrix<N>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace diracep
