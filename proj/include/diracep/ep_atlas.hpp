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
#include <optional>
#include <string>
#include <vector>

#include "diracep/errors.hpp"
#include "diracep/model.hpp"
#include "diracep/numerics.hpp"
#include "diracep/parallel.hpp"
#include "diracep/types.hpp"

namespace diracep {

/// Axis-aligned sampling rectangle; n1, n2 are node counts per axis.
struct Rect {
  double k1_min = -1, k1_max = 1, k2_min = -1, k2_max = 1;
  int n1 = 41, n2 = 41;

  [[nodiscard]] double k1(int i) const { return n1 == 1 ? k1_min : k1_min + (k1_max - k1_min) * i / (n1 - 1); }
  [[nodiscard]] double k2(int j) const { return n2 == 1 ? k2_min : k2_min + (k2_max - k2_min) * j / (n2 - 1); }
  [[nodiscard]] bool contains(Point2 p) const {
    return p.k1 >= k1_min && p.k1 <= k1_max && p.k2 >= k2_min && p.k2 <= k2_max;
  }
};

// ---------------------------------------------------------------------------
// Parameter families. A family exposes the matrix at a point and a scalar
// degeneracy measure that vanishes on the exceptional set.

/// The 3x3 model with its closed-form discriminant.
struct NearestFamily {
  static constexpr int dim = 3;
  [[nodiscard]] Matrix3 matrix(Point2 p) const { return build_hamiltonian(p.k1, p.k2); }
  [[nodiscard]] double degeneracy(Point2 p) const { return disc::value(p.k1, p.k2); }
  [[nodiscard]] std::optional<Point2> normal(Point2 p) const {
    const auto g = disc::gradient(p.k1, p.k2);
    return Point2{g[0], g[1]};
  }
  double degeneracy_tolerance = 1e-8;
};

/// Smallest pairwise eigenvalue gap of a matrix.
template <int N>
double min_gap(const Vector<N>& e) {
  double g = INFINITY;
  for (int i = 0; i < e.size(); ++i)
    for (int j = 0; j < i; ++j) g = std::min(g, std::abs(e(i) - e(j)));
  return g;
}

/// The five-site lattice block with distance-two hops.
struct NextNearestFamily {
  static constexpr int dim = 5;
  [[nodiscard]] Matrix<5> matrix(Point2 p) const {
    return build_tb_block<5>({p.k1, p.k2, Variant::next_nearest});
  }
  [[nodiscard]] double degeneracy(Point2 p) const { return min_gap<5>(eig<5>(matrix(p)).values); }
  [[nodiscard]] std::optional<Point2> normal(Point2) const { return std::nullopt; }
  double degeneracy_tolerance = 1e-6;
};

// ---------------------------------------------------------------------------
// Discriminant scan

struct ScanMark {
  enum class Kind { sign_change, touching };
  int i = 0, j = 0;  // lower-left node of a cell, or the node itself for touching
  Kind kind = Kind::sign_change;
  Point2 where;
};

struct DiscriminantField {
  Rect rect;
  std::vector<double> values;  // values[j * n1 + i]
  std::vector<ScanMark> marks;

  [[nodiscard]] double at(int i, int j) const { return values[static_cast<std::size_t>(j) * rect.n1 + i]; }
};

/// Samples the discriminant and marks cells whose corners bracket zero, plus
/// nodes that are local extrema of the field pointing towards zero (candidate
/// isolated zeros, which never change sign).
inline DiscriminantField scan_discriminant(const Rect& r) {
  if (r.n1 < 2 || r.n2 < 2) {
    if (r.n1 == 1 && r.n2 == 1) {
      return {r, {disc::value(r.k1_min, r.k2_min)}, {}};
    }
    throw Error("scan_discriminant: need at least two nodes per axis");
  }
  DiscriminantField f;
  f.rect = r;
  f.values.assign(static_cast<std::size_t>(r.n1) * r.n2, 0.0);
  parallel_for(static_cast<std::size_t>(r.n2), [&](std::size_t j) {
    for (int i = 0; i < r.n1; ++i)
      f.values[j * r.n1 + i] = disc::value(r.k1(i), r.k2(static_cast<int>(j)));
  });

  for (int j = 0; j + 1 < r.n2; ++j) {
    for (int i = 0; i + 1 < r.n1; ++i) {
      const double c[4] = {f.at(i, j), f.at(i + 1, j), f.at(i, j + 1), f.at(i + 1, j + 1)};
      const double lo = *std::min_element(c, c + 4), hi = *std::max_element(c, c + 4);
      if (lo <= 0.0 && hi >= 0.0)
        f.marks.push_back({i, j, ScanMark::Kind::sign_change,
                           {0.5 * (r.k1(i) + r.k1(i + 1)), 0.5 * (r.k2(j) + r.k2(j + 1))}});
    }
  }
  for (int j = 1; j + 1 < r.n2; ++j) {
    for (int i = 1; i + 1 < r.n1; ++i) {
      const double v = f.at(i, j);
      bool extremum = true;
      for (int dj = -1; dj <= 1 && extremum; ++dj)
        for (int di = -1; di <= 1 && extremum; ++di) {
          if (di == 0 && dj == 0) continue;
          const double w = f.at(i + di, j + dj);
          if (w * v < 0 || std::abs(w) < std::abs(v)) extremum = false;
        }
      if (extremum) f.marks.push_back({i, j, ScanMark::Kind::touching, {r.k1(i), r.k2(j)}});
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Refinement onto the zero set

struct EPLocation {
  Point2 at;
  double delta = 0.0;
  /// Zero of the discriminant with vanishing gradient and definite curvature.
  bool isolated = false;
};

namespace detail {

inline double hess_det(const std::array<double, 4>& h) { return h[0] * h[3] - h[1] * h[2]; }

inline Point2 hessian_step(Point2 x) {
  const auto g = disc::gradient(x.k1, x.k2);
  const auto h = disc::hessian(x.k1, x.k2);
  const double det = hess_det(h);
  if (std::abs(det) < 1e-300) return x;
  return {x.k1 - (h[3] * g[0] - h[1] * g[1]) / det, x.k2 - (-h[2] * g[0] + h[0] * g[1]) / det};
}

inline Point2 projection_step(Point2 x) {
  const double d = disc::value(x.k1, x.k2);
  const auto g = disc::gradient(x.k1, x.k2);
  const double gn2 = g[0] * g[0] + g[1] * g[1];
  if (gn2 < 1e-300) return x;
  Point2 step{d * g[0] / gn2, d * g[1] / gn2};
  const double len = norm(step);
  if (len > 0.1) step = (0.1 / len) * step;
  return x - step;
}

inline bool gradient_vanishes(Point2 x) {
  const auto g = disc::gradient(x.k1, x.k2);
  const auto h = disc::hessian(x.k1, x.k2);
  const double hs = std::abs(h[0]) + std::abs(h[1]) + std::abs(h[3]);
  return std::hypot(g[0], g[1]) <= 1e-6 * (1.0 + hs);
}

// Bisection along the gradient line through x, within +-radius.
inline std::optional<Point2> bisect_along_gradient(Point2 x, double radius, double tol) {
  const auto g = disc::gradient(x.k1, x.k2);
  const double gn = std::hypot(g[0], g[1]);
  if (gn < 1e-300) return std::nullopt;
  const Point2 u{g[0] / gn, g[1] / gn};
  auto f = [&](double s) { const Point2 p = x + s * u; return disc::value(p.k1, p.k2); };
  const double f0 = f(0);
  for (int k = 1; k <= 64; ++k) {
    for (double sgn : {1.0, -1.0}) {
      double a = 0, b = sgn * radius * k / 64;
      double fa = f0, fb = f(b);
      if (fa * fb > 0) continue;
      for (int it = 0; it < 200 && std::abs(b - a) > 1e-16; ++it) {
        const double m = 0.5 * (a + b), fm = f(m);
        if (std::abs(fm) < tol) return x + m * u;
        if (fa * fm <= 0) { b = m; fb = fm; } else { a = m; fa = fm; }
      }
      const Point2 p = x + 0.5 * (a + b) * u;
      if (std::abs(disc::value(p.k1, p.k2)) < tol) return p;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Newton projection onto the discriminant zero set, with a curvature step for
/// touching zeros and bisection as the fallback.
inline EPLocation refine_ep(Point2 seed, double tol = 1e-10, int max_iter = 100) {
  Point2 x = seed;
  double d = disc::value(x.k1, x.k2);
  for (int it = 0; it < max_iter && std::abs(d) >= tol; ++it) {
    const Point2 a = detail::projection_step(x), b = detail::hessian_step(x);
    const double da = disc::value(a.k1, a.k2), db = disc::value(b.k1, b.k2);
    const bool take_b = std::abs(db) < std::abs(da) && norm(b - x) < 0.25;
    x = take_b ? b : a;
    d = take_b ? db : da;
  }
  if (std::abs(d) >= tol) {
    if (auto p = detail::bisect_along_gradient(x, 0.1, tol)) {
      x = *p;
      d = disc::value(x.k1, x.k2);
    }
  }
  if (!(std::abs(d) < tol) || !std::isfinite(d))
    throw Error("refine_ep: seed (" + std::to_string(seed.k1) + ", " + std::to_string(seed.k2) +
                ") does not refine onto the exceptional set (|Delta| = " + std::to_string(std::abs(d)) + ")");
  EPLocation out{x, d, false};
  const auto h = disc::hessian(x.k1, x.k2);
  if (detail::gradient_vanishes(x) && detail::hess_det(h) > 0) {
    // Polish the isolated zero to the curvature minimum.
    for (int it = 0; it < 20; ++it) {
      const Point2 y = detail::hessian_step(x);
      const double dy = disc::value(y.k1, y.k2);
      if (!(std::abs(dy) <= std::abs(d)) || norm(y - x) > 1e-3) break;
      const bool done = norm(y - x) < 1e-16;
      x = y;
      d = dy;
      if (done) break;
    }
    out = {x, d, true};
  }
  return out;
}

/// Scan, refine every candidate, and merge duplicates.
inline std::vector<EPLocation> locate_eps(const Rect& r, double merge = 1e-6) {
  const DiscriminantField field = scan_discriminant(r);
  std::vector<std::optional<EPLocation>> refined(field.marks.size());
  parallel_for(field.marks.size(), [&](std::size_t m) {
    try {
      const EPLocation loc = refine_ep(field.marks[m].where);
      const double h1 = (r.k1_max - r.k1_min) / std::max(1, r.n1 - 1);
      const double h2 = (r.k2_max - r.k2_min) / std::max(1, r.n2 - 1);
      if (std::abs(loc.at.k1 - field.marks[m].where.k1) <= 1.5 * h1 &&
          std::abs(loc.at.k2 - field.marks[m].where.k2) <= 1.5 * h2)
        refined[m] = loc;
    } catch (const Error&) {
    }
  });
  std::vector<EPLocation> out;
  for (const auto& loc : refined) {
    if (!loc) continue;
    bool dup = false;
    for (const auto& o : out) dup = dup || norm(o.at - loc->at) < merge;
    if (!dup) out.push_back(*loc);
  }
  std::sort(out.begin(), out.end(), [](const EPLocation& a, const EPLocation& b) {
    return a.at.k2 != b.at.k2 ? a.at.k2 < b.at.k2 : a.at.k1 < b.at.k1;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Tracing the exceptional line

struct TraceResult {
  EPLocation start;
  std::vector<Point2> vertices;
  /// Unit tangent directions of the zero set leaving the start point. Empty
  /// for an isolated zero; four for a crossing of two lines.
  std::vector<Point2> branch_directions;
};

namespace detail {

inline Point2 unit_tangent(Point2 x) {
  const auto g = disc::gradient(x.k1, x.k2);
  const double n = std::hypot(g[0], g[1]);
  return {-g[1] / n, g[0] / n};
}

inline std::optional<Point2> correct_onto_line(Point2 x, double step, double tol) {
  for (int it = 0; it < 50; ++it) {
    const double d = disc::value(x.k1, x.k2);
    if (std::abs(d) < tol) return x;
    const Point2 y = projection_step(x);
    if (norm(y - x) > step) break;
    x = y;
  }
  return bisect_along_gradient(x, step, tol);
}

inline void walk(Point2 from, Point2 tangent, double step, int max_steps, const Rect& domain,
                 double tol, std::vector<Point2>& out) {
  Point2 x = from;
  Point2 t = tangent;
  for (int s = 0; s < max_steps; ++s) {
    const auto y = correct_onto_line(x + step * t, step, tol);
    if (!y || !domain.contains(*y)) return;
    out.push_back(*y);
    if (gradient_vanishes(*y)) return;
    Point2 nt = unit_tangent(*y);
    if (nt.k1 * t.k1 + nt.k2 * t.k2 < 0) nt = -1.0 * nt;
    t = nt;
    x = *y;
    if (out.size() > 3 && norm(*y - from) < 0.5 * step) return;  // closed curve
  }
}

}  // namespace detail

inline TraceResult trace_exceptional_line(Point2 seed, double step, int max_steps = 4000,
                                          Rect domain = {-3, 3, -3, 3, 2, 2}, double tol = 1e-10) {
  if (!(step > 0)) throw Error("trace_exceptional_line: step must be positive");
  TraceResult res;
  res.start = refine_ep(seed, tol);
  const Point2 p = res.start.at;

  if (detail::gradient_vanishes(p)) {
    const auto h = disc::hessian(p.k1, p.k2);
    if (detail::hess_det(h) > 0) {
      res.vertices = {p};
      return res;
    }
    // Indefinite curvature: branches along the null directions of the Hessian.
    const double tr = h[0] + h[3], det = detail::hess_det(h);
    const double disc2 = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    const double l1 = tr / 2 + disc2, l2 = tr / 2 - disc2;
    Point2 e1 = std::abs(h[1]) > 1e-300 ? Point2{l1 - h[3], h[1]} : Point2{1, 0};
    if (std::abs(h[1]) <= 1e-300 && h[0] < h[3]) e1 = {0, 1};
    e1 = (1.0 / norm(e1)) * e1;
    const Point2 e2{-e1.k2, e1.k1};
    for (double s : {1.0, -1.0}) {
      Point2 d = std::sqrt(std::abs(l2)) * e1 + s * std::sqrt(std::abs(l1)) * e2;
      d = (1.0 / norm(d)) * d;
      res.branch_directions.push_back(d);
      res.branch_directions.push_back(-1.0 * d);
    }
    res.vertices = {p};
    for (const Point2& d : res.branch_directions) {
      std::vector<Point2> branch;
      detail::walk(p, d, step, max_steps, domain, tol, branch);
      res.vertices.insert(res.vertices.end(), branch.begin(), branch.end());
    }
    return res;
  }

  const Point2 t = detail::unit_tangent(p);
  res.branch_directions = {t, -1.0 * t};
  std::vector<Point2> fwd, back;
  detail::walk(p, t, step, max_steps, domain, tol, fwd);
  detail::walk(p, -1.0 * t, step, max_steps, domain, tol, back);
  res.vertices.assign(back.rbegin(), back.rend());
  res.vertices.push_back(p);
  res.vertices.insert(res.vertices.end(), fwd.begin(), fwd.end());
  return res;
}

// ---------------------------------------------------------------------------
// Classification

enum class EPKind { dirac, typical, hermitian_dp };

inline const char* to_string(EPKind k) {
  switch (k) {
    case EPKind::dirac: return "dirac";
    case EPKind::typical: return "typical";
    case EPKind::hermitian_dp: return "hermitian_dp";
  }
  return "?";
}

struct EPRecord {
  Point2 location;
  EPKind kind = EPKind::typical;
  double dispersion_exponent = 0.0;
  double coalescence = 0.0;
  double spectrum_real_radius = 0.0;
  bool ring_real = false;
  /// Spectrum real on one side of the zero set and complex on the other.
  bool reality_transition = false;
};

struct ClassifyOptions {
  double coalescence_offset = 1e-6;
  double ring_radius = 0.05;
  int ring_samples = 64;
  double fit_min = 1e-4, fit_max = 1e-2;
  int fit_samples = 9;
  double imag_tol = 1e-9;
};

namespace detail {

// Indices of the two eigenvalues closest to `centre`.
template <int N>
std::pair<int, int> closest_pair(const Vector<N>& e, cplx centre) {
  int a = -1, b = -1;
  double da = INFINITY, db = INFINITY;
  for (int i = 0; i < e.size(); ++i) {
    const double d = std::abs(e(i) - centre);
    if (d < da) { b = a; db = da; a = i; da = d; }
    else if (d < db) { b = i; db = d; }
  }
  return {std::min(a, b), std::max(a, b)};
}

// Value at which the closest pair of eigenvalues meets.
template <int N>
cplx degenerate_value(const Vector<N>& e) {
  double best = INFINITY;
  cplx v = e(0);
  for (int i = 0; i < e.size(); ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(e(i) - e(j)) < best) { best = std::abs(e(i) - e(j)); v = 0.5 * (e(i) + e(j)); }
  return v;
}

template <int N>
bool all_real(const Vector<N>& e, double tol) {
  return e.imag().cwiseAbs().maxCoeff() < tol;
}

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double den = n * sxx - sx * sx;
  if (*hi - *lo < 1e-12 || std::abs(den) < 1e-300) throw Error("log-log fit is degenerate (all offsets equal)");
  return (n * sxy - sx * sy) / den;
}

inline std::vector<double> log_offsets(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo * std::pow(hi / lo, n == 1 ? 0.0 : double(i) / (n - 1));
  return out;
}

template <class Family>
double splitting_exponent(const Family& fam, Point2 at, Point2 dir, cplx centre,
                          const ClassifyOptions& o) {
  constexpr int N = Family::dim;
  std::vector<double> lx, ly;
  for (double dk : log_offsets(o.fit_min, o.fit_max, o.fit_samples)) {
    const auto e = eig<N>(fam.matrix(at + dk * dir)).values;
    const auto [a, b] = closest_pair<N>(e, centre);
    lx.push_back(std::log(dk));
    ly.push_back(std::log(std::max(std::abs(e(a) - e(b)), 1e-300)));
  }
  return fit_slope(lx, ly);
}

}  // namespace detail

/// Decides Dirac / typical / Hermitian degeneracy from eigenvector
/// coalescence, reality on a ring, and the dispersion exponent.
template <class Family>
EPRecord classify_ep(const Family& fam, Point2 at, const ClassifyOptions& o = {}) {
  constexpr int N = Family::dim;
  if (!(std::abs(fam.degeneracy(at)) < fam.degeneracy_tolerance))
    throw Error("classify_ep: (" + std::to_string(at.k1) + ", " + std::to_string(at.k2) +
                ") is not on the exceptional set; refine first");
  const cplx centre = detail::degenerate_value<N>(eig<N>(fam.matrix(at)).values);

  EPRecord rec;
  rec.location = at;

  constexpr int kDirections = 8;
  double overlap = 0.0;
  for (int d = 0; d < kDirections; ++d) {
    const double th = (d + 0.5) * 2 * std::numbers::pi / kDirections;
    const Point2 p = at + o.coalescence_offset * Point2{std::cos(th), std::sin(th)};
    const auto sp = eig<N>(fam.matrix(p));
    const auto [a, b] = detail::closest_pair<N>(sp.values, centre);
    overlap += std::abs(sp.right.col(a).dot(sp.right.col(b)));
  }
  rec.coalescence = std::min(1.0, overlap / kDirections);

  auto ring_is_real = [&](double radius) {
    for (int s = 0; s < o.ring_samples; ++s) {
      const double th = 2 * std::numbers::pi * s / o.ring_samples;
      const Point2 p = at + radius * Point2{std::cos(th), std::sin(th)};
      if (!detail::all_real<N>(eig<N>(fam.matrix(p)).values, o.imag_tol)) return false;
    }
    return true;
  };
  rec.ring_real = ring_is_real(o.ring_radius);
  for (double radius : {o.ring_radius, 0.02, 0.01, 0.005, 0.002, 0.001}) {
    if (radius > o.ring_radius) continue;
    if (radius == o.ring_radius ? rec.ring_real : ring_is_real(radius)) {
      rec.spectrum_real_radius = radius;
      break;
    }
  }

  std::optional<Point2> nrm = fam.normal(at);
  if (nrm && norm(*nrm) > 1e-6) {
    const Point2 u = (1.0 / norm(*nrm)) * *nrm;
    rec.dispersion_exponent = detail::splitting_exponent(fam, at, u, centre, o);
    const bool plus = detail::all_real<N>(eig<N>(fam.matrix(at + 1e-3 * u)).values, o.imag_tol);
    const bool minus = detail::all_real<N>(eig<N>(fam.matrix(at - 1e-3 * u)).values, o.imag_tol);
    rec.reality_transition = plus != minus;
  } else {
    std::vector<double> ex;
    for (int d = 0; d < kDirections; ++d) {
      const double th = (d + 0.5) * 2 * std::numbers::pi / kDirections;
      ex.push_back(detail::splitting_exponent(fam, at, {std::cos(th), std::sin(th)}, centre, o));
    }
    std::sort(ex.begin(), ex.end());
    rec.dispersion_exponent = 0.5 * (ex[kDirections / 2 - 1] + ex[kDirections / 2]);
  }

  if (rec.coalescence < 0.5) rec.kind = EPKind::hermitian_dp;
  else if (rec.ring_real && rec.dispersion_exponent > 0.75) rec.kind = EPKind::dirac;
  else rec.kind = EPKind::typical;
  return rec;
}

inline EPRecord classify_ep(Point2 at, const ClassifyOptions& o = {}) {
  return classify_ep(NearestFamily{}, at, o);
}

// ---------------------------------------------------------------------------
// Overlap scaling near a degeneracy

struct OverlapScaling {
  double exponent = 0.0;
  std::vector<double> offsets;
  std::vector<double> infidelity;  // 1 - F12 per offset
};

template <class Family>
OverlapScaling overlap_scaling(const Family& fam, Point2 centre, Point2 direction,
                               const std::vector<double>& offsets) {
  constexpr int N = Family::dim;
  if (offsets.size() < 5) throw Error("overlap_scaling: need at least five offsets");
  const cplx e0 = detail::degenerate_value<N>(eig<N>(fam.matrix(centre)).values);
  const Point2 u = (1.0 / norm(direction)) * direction;
  OverlapScaling out;
  std::vector<double> lx, ly;
  for (double dk : offsets) {
    const auto sp = eig<N>(fam.matrix(centre + dk * u));
    const auto [a, b] = detail::closest_pair<N>(sp.values, e0);
    const double f = std::abs(sp.right.col(a).dot(sp.right.col(b)));
    out.offsets.push_back(dk);
    out.infidelity.push_back(1.0 - f);
    lx.push_back(std::log(dk));
    ly.push_back(std::log(std::max(1.0 - f, 1e-300)));
  }
  out.exponent = detail::fit_slope(lx, ly);
  return out;
}

enum class Axis { k1, k2 };

/// Approach to the Dirac point (0, 1) along k1 (k2 = 1) or along k2 from below.
inline OverlapScaling overlap_scaling(Axis axis, const std::vector<double>& offsets) {
  return overlap_scaling(NearestFamily{}, {0, 1}, axis == Axis::k1 ? Point2{1, 0} : Point2{0, -1},
                         offsets);
}

// ---------------------------------------------------------------------------
// Degeneracy search for families without a closed-form discriminant

namespace detail {

template <class Family>
Point2 compass_minimise(const Family& fam, Point2 x, double step, double min_step = 1e-12) {
  double fx = fam.degeneracy(x);
  while (step > min_step) {
    bool moved = false;
    for (int d = 0; d < 8; ++d) {
      const double th = d * std::numbers::pi / 4;
      const Point2 y = x + step * Point2{std::cos(th), std::sin(th)};
      const double fy = fam.degeneracy(y);
      if (fy < fx) { x = y; fx = fy; moved = true; break; }
    }
    if (!moved) step *= 0.5;
  }
  return x;
}

}  // namespace detail

/// Grid search for local minima of the degeneracy measure, refined by compass
/// search and classified. Only points that refine onto the exceptional set are
/// returned.
template <class Family>
std::vector<EPRecord> find_degeneracies(const Family& fam, const Rect& r) {
  const auto vals = parallel_map<double>(static_cast<std::size_t>(r.n1) * r.n2, [&](std::size_t idx) {
    return fam.degeneracy({r.k1(static_cast<int>(idx % r.n1)), r.k2(static_cast<int>(idx / r.n1))});
  });
  auto v = [&](int i, int j) { return vals[static_cast<std::size_t>(j) * r.n1 + i]; };
  std::vector<Point2> seeds;
  for (int j = 0; j < r.n2; ++j)
    for (int i = 0; i < r.n1; ++i) {
      bool minimum = true;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int a = i + di, b = j + dj;
          if ((di || dj) && a >= 0 && b >= 0 && a < r.n1 && b < r.n2 && v(a, b) < v(i, j)) minimum = false;
        }
      if (minimum) seeds.push_back({r.k1(i), r.k2(j)});
    }
  const double h = std::max((r.k1_max - r.k1_min) / std::max(1, r.n1 - 1),
                            (r.k2_max - r.k2_min) / std::max(1, r.n2 - 1));
  const auto refined = parallel_map<std::optional<EPRecord>>(seeds.size(), [&](std::size_t s) -> std::optional<EPRecord> {
    const Point2 p = detail::compass_minimise(fam, seeds[s], 0.5 * h);
    if (!(fam.degeneracy(p) < fam.degeneracy_tolerance)) return std::nullopt;
    return classify_ep(fam, p);
  });
  std::vector<EPRecord> out;
  for (const auto& rec : refined) {
    if (!rec) continue;
    bool dup = false;
    for (const auto& o : out) dup = dup || norm(o.location - rec->location) < 1e-6;
    if (!dup) out.push_back(*rec);
  }
  std::sort(out.begin(), out.end(), [](const EPRecord& a, const EPRecord& b) {
    return a.location.k1 != b.location.k1 ? a.location.k1 < b.location.k1 : a.location.k2 < b.location.k2;
  });
  return out;
}

/// Dirac points of the next-nearest-neighbour block near the line k2 = 1.
inline std::vector<EPRecord> next_nearest_dirac_points(const Rect& r = {-1, 1, 0.8, 1.2, 41, 9}) {
  std::vector<EPRecord> out;
  for (const auto& rec : find_degeneracies(NextNearestFamily{}, r))
    if (rec.kind == EPKind::dirac) out.push_back(rec);
  return out;
}

}  // namespace diracep
