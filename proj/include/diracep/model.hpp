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
#include <string>
#include <utility>
#include <vector>

#include "diracep/errors.hpp"
#include "diracep/numerics.hpp"
#include "diracep/types.hpp"

namespace diracep {

enum class Variant { nearest, next_nearest };

struct ModelParams {
  double k1 = 0.0;
  double k2 = 0.0;
  Variant variant = Variant::nearest;

  [[nodiscard]] Point2 point() const { return {k1, k2}; }
  /// Lattice index range m = -half..half.
  [[nodiscard]] int half_width() const { return variant == Variant::nearest ? 1 : 2; }
};

inline ModelParams at(double k1, double k2) { return {k1, k2, Variant::nearest}; }
inline ModelParams at(Point2 p) { return {p.k1, p.k2, Variant::nearest}; }

/// The 3x3 non-Hermitian model. Real for real (k1, k2).
inline Matrix3 build_hamiltonian(const ModelParams& p) {
  if (p.variant != Variant::nearest)
    throw Error("build_hamiltonian: only the nearest-neighbour variant has a 3x3 form");
  const double a = p.k1, b = p.k2;
  Matrix3 h;
  h << 3 + 2 * a, 1 - b, 0,
       1 + b, 0, 1 - b,
       0, 1 + b, 3 - 2 * a;
  return h;
}

inline Matrix3 build_hamiltonian(double k1, double k2) { return build_hamiltonian(at(k1, k2)); }

/// Truncated tight-binding block on m = -(N-1)/2 .. (N-1)/2. Diagonal (m+k1)^2,
/// hops (1-k2)/2 towards larger m and (1+k2)/2 towards smaller m. N = 5 adds the
/// same couplings at distance two.
template <int N>
Matrix<N> build_tb_block(const ModelParams& p) {
  static_assert(N == 3 || N == 5, "tight-binding block must be 3 or 5 wide");
  const int half = (N - 1) / 2;
  if (half != p.half_width())
    throw Error("build_tb_block: block size " + std::to_string(N) + " does not match variant");
  Matrix<N> h = Matrix<N>::Zero();
  const double right = 0.5 * (1.0 - p.k2), left = 0.5 * (1.0 + p.k2);
  for (int i = 0; i < N; ++i) {
    const double m = i - half;
    h(i, i) = (m + p.k1) * (m + p.k1);
    for (int d = 1; d <= half; ++d) {
      if (i + d < N) {
        h(i, i + d) = right;
        h(i + d, i) = left;
      }
    }
  }
  return h;
}

struct CharPoly {
  // P(E) = f3 E^3 + f2 E^2 + f1 E + f0
  double f3, f2, f1, f0;
  double discriminant;

  [[nodiscard]] cplx operator()(cplx e) const { return ((f3 * e + f2) * e + f1) * e + f0; }
};

namespace disc {

inline double value(double a, double b) {
  const double a2 = a * a, b2 = b * b;
  const double a4 = a2 * a2, b4 = b2 * b2;
  return 256 * a4 * a2 - 768 * a4 + 2928 * a2 - 384 * a4 * b2 - 1824 * a2 * b2 +
         192 * a2 * b4 - 168 * b2 + 132 * b4 - 32 * b4 * b2 + 68;
}

inline std::array<double, 2> gradient(double a, double b) {
  const double a2 = a * a, b2 = b * b;
  const double da = 1536 * a2 * a2 * a - 3072 * a2 * a + 5856 * a - 1536 * a2 * a * b2 -
                    3648 * a * b2 + 384 * a * b2 * b2;
  const double db = -768 * a2 * a2 * b - 3648 * a2 * b + 768 * a2 * b2 * b - 336 * b +
                    528 * b2 * b - 192 * b2 * b2 * b;
  return {da, db};
}

/// Row-major {d2/da2, d2/dadb, d2/dbda, d2/db2}.
inline std::array<double, 4> hessian(double a, double b) {
  const double a2 = a * a, b2 = b * b;
  const double aa = 7680 * a2 * a2 - 9216 * a2 + 5856 - 4608 * a2 * b2 - 3648 * b2 + 384 * b2 * b2;
  const double ab = -3072 * a2 * a * b - 7296 * a * b + 1536 * a * b2 * b;
  const double bb = -768 * a2 * a2 - 3648 * a2 + 2304 * a2 * b2 - 336 + 1584 * b2 - 960 * b2 * b2;
  return {aa, ab, ab, bb};
}

}  // namespace disc

inline double discriminant(double k1, double k2) { return disc::value(k1, k2); }

inline CharPoly char_poly(const ModelParams& p) {
  if (p.variant != Variant::nearest) throw Error("char_poly: nearest-neighbour variant only");
  return {-1.0, 6.0, 4 * p.k1 * p.k1 - 2 * p.k2 * p.k2 - 7, 6 * (p.k2 * p.k2 - 1),
          disc::value(p.k1, p.k2)};
}

namespace detail {

template <int N>
void sort_local(Vector<N>& v) {
  std::sort(v.data(), v.data() + v.size(), eig_before);
}

}  // namespace detail

/// Closed-form eigenvalues on the lines k2 = 1 and k1 = 0, locally ordered.
inline Vector3 line_spectrum(const ModelParams& p, double on_line_tol = 1e-12) {
  if (p.variant != Variant::nearest) throw Error("line_spectrum: nearest-neighbour variant only");
  Vector3 e;
  if (std::abs(p.k2 - 1.0) <= on_line_tol) {
    e << 3 + 2 * std::abs(p.k1), 3 - 2 * std::abs(p.k1), 0.0;
  } else if (std::abs(p.k1) <= on_line_tol) {
    const cplx root = std::sqrt(cplx(17 - 8 * p.k2 * p.k2, 0.0));
    e << 3.0, (3.0 + root) / 2.0, (3.0 - root) / 2.0;
  } else {
    throw Error("line_spectrum: (" + std::to_string(p.k1) + ", " + std::to_string(p.k2) +
                ") lies on neither k2 = 1 nor k1 = 0");
  }
  detail::sort_local<3>(e);
  return e;
}

struct ConeDirection {
  double theta = 0.0;
  double dk = 0.0;

  [[nodiscard]] Point2 offset() const { return {std::cos(theta) * dk, std::sin(theta) * dk}; }
};

/// First-order slopes of the two upper eigenvalues along a ray from (0, 1).
inline std::pair<double, double> cone_expansion(double theta) {
  const double s = std::sin(theta), c = std::cos(theta);
  const double r = std::sqrt(s * s + 9 * c * c);
  return {2 * (-s + r) / 3, 2 * (-s - r) / 3};
}

/// Normalised right eigenvector from the closed form.
inline Vector3 analytic_eigenstate(const ModelParams& p, cplx e, double eig_tol = 1e-8) {
  if (p.variant != Variant::nearest)
    throw Error("analytic_eigenstate: nearest-neighbour variant only");
  if (std::abs(p.k2 + 1.0) < 1e-14)
    throw Error("analytic_eigenstate: closed form vanishes at k2 = -1; use eig instead");
  const CharPoly cp = char_poly(p);
  const double scale = 1.0 + std::pow(std::abs(e), 3);
  if (std::abs(cp(e)) > eig_tol * scale)
    throw Error("analytic_eigenstate: E is not an eigenvalue (|P(E)| = " +
                std::to_string(std::abs(cp(e))) + ")");
  const double a = p.k1, b = p.k2;
  Vector3 v;
  const cplx shifted = e + (2 * a - 3);
  v << e * shifted + (b * b - 1), shifted * (1 + b), (1 + b) * (1 + b);
  const double n = v.norm();
  if (n < 1e-14) throw Error("analytic_eigenstate: closed-form vector vanishes");
  v /= n;
  const Matrix3 h = build_hamiltonian(p);
  const double res = (h * v - e * v).norm();
  if (res > 1e-9 * std::max(1.0, h.norm()))
    throw Error("analytic_eigenstate: residual " + std::to_string(res) + " too large");
  return v;
}

/// Eigendecomposition at one parameter point for either variant.
template <int N>
Spectrum<N> spectrum_at(const ModelParams& p) {
  if constexpr (N == 3) {
    if (p.variant == Variant::nearest) return eig<3>(build_hamiltonian(p));
    throw Error("spectrum_at: 3x3 requested for next-nearest variant");
  } else {
    return eig<N>(build_tb_block<N>(p));
  }
}

/// Reorder each spectrum to continue the previous one. A linear predictor from
/// the last two points is matched greedily, so exact crossings keep their sheets.
template <int N>
std::vector<Spectrum<N>> track_spectra(std::vector<Spectrum<N>> specs) {
  for (std::size_t s = 1; s < specs.size(); ++s) {
    const int n = static_cast<int>(specs[s].values.size());
    Vector<N> predicted = specs[s - 1].values;
    if (s >= 2) predicted = 2.0 * specs[s - 1].values - specs[s - 2].values;
    std::vector<bool> used_prev(n, false), used_new(n, false);
    std::vector<int> assign(n, -1);
    for (int round = 0; round < n; ++round) {
      double best = INFINITY;
      int bi = -1, bj = -1;
      for (int i = 0; i < n; ++i) {
        if (used_prev[i]) continue;
        for (int j = 0; j < n; ++j) {
          if (used_new[j]) continue;
          const double d = std::abs(predicted(i) - specs[s].values(j));
          // Ties within 1e-12 go to the lower previous index, then lower new index.
          if (d < best - 1e-12) {
            best = d;
            bi = i;
            bj = j;
          }
        }
      }
      used_prev[bi] = used_new[bj] = true;
      assign[bi] = bj;
    }
    Spectrum<N> re = specs[s];
    for (int i = 0; i < n; ++i) {
      re.values(i) = specs[s].values(assign[i]);
      re.right.col(i) = specs[s].right.col(assign[i]);
    }
    specs[s] = std::move(re);
  }
  for (auto& sp : specs) sp.ordering = Spectrum<N>::Ordering::sweep_tracked;
  return specs;
}

template <int N>
std::vector<Spectrum<N>> sweep_tracked_spectra(const std::vector<ModelParams>& path,
                                               double max_step = 0.05) {
  std::vector<Spectrum<N>> specs;
  specs.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0 && norm(path[i].point() - path[i - 1].point()) > max_step + 1e-12)
      throw Error("sweep_tracked_spectra: consecutive points further apart than " +
                  std::to_string(max_step));
    specs.push_back(spectrum_at<N>(path[i]));
  }
  return track_spectra<N>(std::move(specs));
}

struct Symmetric3 {
  cplx sum, pairwise, product;
};

inline Symmetric3 elementary_symmetric(cplx e1, cplx e2, cplx e3) {
  return {e1 + e2 + e3, e1 * e2 + e2 * e3 + e1 * e3, e1 * e2 * e3};
}

/// Inverts the pairwise and product relations for (k1^2, k2^2).
inline std::pair<double, double> squared_params_from_eigenvalues(double e1, double e2, double e3) {
  const double s2 = e1 * e2 + e2 * e3 + e1 * e3, s3 = e1 * e2 * e3;
  return {(27 - 3 * s2 + s3) / 12, (s3 + 6) / 6};
}

}  // namespace diracep
