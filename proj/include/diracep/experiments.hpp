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
#include <vector>

#include "diracep/dilation.hpp"
#include "diracep/errors.hpp"
#include "diracep/model.hpp"
#include "diracep/numerics.hpp"
#include "diracep/parallel.hpp"
#include "diracep/types.hpp"

namespace diracep {

enum class Direction { ccw, cw };

inline const char* to_string(Direction d) { return d == Direction::ccw ? "ccw" : "cw"; }

/// Circle k(t) = center + R (cos th, sin th), th = theta0 +/- 2 pi t / T.
struct LoopSpec {
  Point2 center{0.0, 1.0};
  double R = 0.2;
  double T = 5000.0;
  Direction direction = Direction::cw;
  double theta0 = 0.0;

  [[nodiscard]] double angle(double t) const {
    const double w = 2 * std::numbers::pi / T;
    return theta0 + (direction == Direction::ccw ? w : -w) * t;
  }
  [[nodiscard]] Point2 point(double t) const {
    const double th = angle(t);
    return {center.k1 + R * std::cos(th), center.k2 + R * std::sin(th)};
  }
  [[nodiscard]] Matrix3 hamiltonian(double t) const {
    const Point2 k = point(t);
    return build_hamiltonian(k.k1, k.k2);
  }
  [[nodiscard]] LoopSpec reversed() const {
    LoopSpec l = *this;
    l.direction = direction == Direction::ccw ? Direction::cw : Direction::ccw;
    return l;
  }
};

enum class LoopPreset { phase_loop, through_k2, through_k1 };

/// phase_loop:  k1 = R cos wt,          k2 = 1 - R sin wt   (R = 0.2)
/// through_k2:  k1 = 0.4 sin wt,        k2 = 0.6 - 0.4 cos wt
/// through_k1:  k1 = -0.2 - 0.2 cos wt, k2 = 1 + 0.2 sin wt
/// Each preset carries the sense of its formula; reversed() flips it.
inline LoopSpec make_loop(LoopPreset preset, double T) {
  constexpr double pi = std::numbers::pi;
  switch (preset) {
    case LoopPreset::phase_loop: return {{0.0, 1.0}, 0.2, T, Direction::cw, 0.0};
    case LoopPreset::through_k2: return {{0.0, 0.6}, 0.4, T, Direction::ccw, -pi / 2};
    case LoopPreset::through_k1: return {{-0.2, 1.0}, 0.2, T, Direction::cw, pi};
  }
  throw Error("make_loop: unknown preset");
}

inline std::vector<double> loop_grid(const LoopSpec& loop, double max_dt, int min_steps) {
  if (!(loop.T > 0)) throw Error("loop: duration must be positive");
  if (!(loop.R >= 0)) throw Error("loop: radius must be non-negative");
  const int n = std::max(min_steps, static_cast<int>(std::ceil(loop.T / max_dt)));
  return uniform_grid(0.0, loop.T, n);
}

// ---------------------------------------------------------------------------
// Geometric phase

struct PhaseOptions {
  double max_dt = 0.5;
  int min_steps = 2000;
  double leakage_threshold = 1e-2;
};

struct PhaseReport {
  cplx total, dynamical, geometric;
  int eigenindex = 1;
  double leakage = 0.0;
};

namespace detail {

inline PhaseReport follow_eigenstate(const LoopSpec& loop, int eigenindex, const PhaseOptions& o) {
  if (eigenindex < 1 || eigenindex > 3) throw Error("eigenindex must be 1, 2 or 3");
  const auto grid = loop_grid(loop, o.max_dt, o.min_steps);
  std::vector<Spectrum<3>> specs;
  specs.reserve(grid.size());
  for (double t : grid) {
    const Point2 k = loop.point(t);
    if (!(disc::value(k.k1, k.k2) > 0))
      throw Error("geometric_phase: spectrum not all-real at (" + std::to_string(k.k1) + ", " +
                  std::to_string(k.k2) + ")");
    specs.push_back(eig<3>(build_hamiltonian(k.k1, k.k2)));
  }
  specs = track_spectra<3>(std::move(specs));
  const int idx = eigenindex - 1;

  PhaseReport rep;
  rep.eigenindex = eigenindex;
  cplx previous_overlap = 0.0, total = 0.0;
  double leakage = 0.0;
  auto reference = [&](std::size_t n) {
    return analytic_eigenstate(at(loop.point(grid[n])), specs[n].values(idx).real());
  };
  const Vector3 psi0 = reference(0);
  OrderedOptions opt;
  opt.keep_states = false;
  propagate_ordered<3>([&](double t) { return loop.hamiltonian(t); }, psi0, grid, opt,
                       [&](std::size_t n, double, const Vector3& psi) {
                         const cplx z = reference(n).dot(psi);
                         leakage = std::max(leakage, 1.0 - std::abs(z) / psi.norm());
                         if (n > 0) total += cplx(0, 1) * std::log(z / previous_overlap);
                         previous_overlap = z;
                       });
  cplx dyn = 0.0;
  for (std::size_t n = 0; n + 1 < grid.size(); ++n)
    dyn += 0.5 * (specs[n].values(idx) + specs[n + 1].values(idx)) * (grid[n + 1] - grid[n]);
  rep.total = total;
  rep.dynamical = dyn;
  rep.geometric = total - dyn;
  rep.leakage = leakage;
  return rep;
}

}  // namespace detail

/// Total phase is accumulated as i * sum log(z[n+1] / z[n]) against the
/// real closed-form eigenvector, so no single-log branch cut is crossed.
inline PhaseReport geometric_phase(const LoopSpec& loop, int eigenindex, const PhaseOptions& o = {}) {
  PhaseReport rep = detail::follow_eigenstate(loop, eigenindex, o);
  if (rep.leakage > o.leakage_threshold)
    throw Error("geometric_phase: non-adiabatic leakage " + std::to_string(rep.leakage) + " exceeds " +
                std::to_string(o.leakage_threshold) + "; increase the loop duration T");
  return rep;
}

inline std::array<PhaseReport, 3> geometric_phases(const LoopSpec& loop, const PhaseOptions& o = {}) {
  const auto v = parallel_map<PhaseReport>(3, [&](std::size_t i) {
    return geometric_phase(loop, static_cast<int>(i) + 1, o);
  });
  return {v[0], v[1], v[2]};
}

/// Max over the loop of 1 - |<tracked eigenstate|psi / |psi|>|.
inline double adiabaticity_check(const LoopSpec& loop, int eigenindex, const PhaseOptions& o = {}) {
  return detail::follow_eigenstate(loop, eigenindex, o).leakage;
}

// ---------------------------------------------------------------------------
// Mode switching

enum class TimeConvention { dimensionless, physical };

inline const char* to_string(TimeConvention c) {
  return c == TimeConvention::physical ? "physical" : "dimensionless";
}

struct SwitchOptions {
  TimeConvention convention = TimeConvention::dimensionless;
  double passage_time = 1.0;  // T_s in seconds, physical convention only
  double time_scale = kDefaultTimeScale;
  double max_dt = 1.0;
  int min_steps = 2000;
};

struct SwitchReport {
  int start_index = 1;
  int end_index = 1;
  std::array<double, 3> overlaps{};  // normalised |<v_j|psi(T)>| per final eigenstate
  double overlap = 0.0;
  double efficiency = 0.0;  // |psi(T)|^2 / |psi(0)|^2
  Direction direction = Direction::ccw;
  TimeConvention convention = TimeConvention::dimensionless;
  double duration = 0.0;
};

/// Propagates eigenstate start_index (1 = largest E at k(0)) around the loop
/// without renormalising.
inline SwitchReport mode_switch(LoopSpec loop, int start_index, const SwitchOptions& o = {}) {
  if (start_index < 1 || start_index > 3) throw Error("mode_switch: start index must be 1, 2 or 3");
  if (o.convention == TimeConvention::physical) loop.T = o.passage_time * o.time_scale;
  const auto grid = loop_grid(loop, o.max_dt, o.min_steps);
  const Point2 k0 = loop.point(0.0);
  const Vector3 psi0 = eig<3>(build_hamiltonian(k0.k1, k0.k2)).vector(start_index - 1).normalized();
  OrderedOptions opt;
  opt.keep_states = false;
  Vector3 psi = psi0;
  propagate_ordered<3>([&](double t) { return loop.hamiltonian(t); }, psi0, grid, opt,
                       [&](std::size_t, double, const Vector3& v) { psi = v; });
  const Point2 k1 = loop.point(loop.T);
  const auto fin = eig<3>(build_hamiltonian(k1.k1, k1.k2));
  SwitchReport rep;
  rep.start_index = start_index;
  rep.direction = loop.direction;
  rep.convention = o.convention;
  rep.duration = loop.T;
  for (int j = 0; j < 3; ++j) rep.overlaps[j] = std::abs(fin.vector(j).normalized().dot(psi)) / psi.norm();
  const auto best = std::max_element(rep.overlaps.begin(), rep.overlaps.end());
  rep.end_index = static_cast<int>(best - rep.overlaps.begin()) + 1;
  rep.overlap = *best;
  rep.efficiency = psi.squaredNorm();
  return rep;
}

/// Starts 1 and 2 in both directions: (ccw,1), (ccw,2), (cw,1), (cw,2).
inline std::array<SwitchReport, 4> mode_switch_table(LoopPreset preset, const SwitchOptions& o = {},
                                                     double T = 5e4) {
  const LoopSpec base = make_loop(preset, T);
  const auto v = parallel_map<SwitchReport>(4, [&](std::size_t i) {
    LoopSpec l = base;
    const Direction want = i < 2 ? Direction::ccw : Direction::cw;
    if (l.direction != want) l = l.reversed();
    return mode_switch(l, static_cast<int>(i % 2) + 1, o);
  });
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace diracep
