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

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "diracep/dilation.hpp"
#include "diracep/errors.hpp"
#include "diracep/types.hpp"

namespace diracep {

/// NV ground-state constants in Hz (B in gauss, gyromagnetic ratios in Hz/G).
struct NVConstants {
  double D = 2.87e9;
  double Q = -4.95e6;
  double A = -2.16e6;
  double B = 501.0;
  double gamma_e = 2.8025e6;
  double gamma_n = 307.7;
};

/// Levels 1..6 are |mS = 1, 0, -1> x |mI = 1>, then the same with mI = 0.
struct LevelStructure {
  std::array<double, 6> energies{};  // Hz
  std::map<std::string, double> omega;  // "12", "23", "13", "45", "56", "46"

  [[nodiscard]] double transition(int i, int j) const {
    return omega.at(std::to_string(i + 1) + std::to_string(j + 1));
  }
};

inline constexpr std::array<int, 3> kElectronSpin = {1, 0, -1};

inline LevelStructure nv_levels(const NVConstants& c = {}) {
  const double we = c.gamma_e * c.B, wn = c.gamma_n * c.B;
  LevelStructure out;
  for (int block = 0; block < 2; ++block) {
    const int mi = block == 0 ? 1 : 0;
    for (int k = 0; k < 3; ++k) {
      const int ms = kElectronSpin[k];
      out.energies[3 * block + k] =
          c.D * ms * ms + we * ms + c.Q * mi * mi + wn * mi + c.A * ms * mi;
    }
  }
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}})
    out.omega[std::to_string(i + 1) + std::to_string(j + 1)] =
        std::abs(out.energies[i] - out.energies[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Channels

/// How the element phase enters the rotating-frame coupling: forms a and c
/// carry exp(-i phi), form b carries exp(+i phi).
enum class CouplingForm { a, b, c };

struct ChannelSpec {
  const char* label;
  int i, j;  // driven element (i, j), i < j, zero-based level indices
  CouplingForm form;
};

inline constexpr std::array<ChannelSpec, 6> kChannels = {{
    {"MW1", 1, 2, CouplingForm::b},
    {"MW2", 0, 1, CouplingForm::a},
    {"MW3", 4, 5, CouplingForm::b},
    {"MW4", 3, 4, CouplingForm::a},
    {"EF1", 0, 2, CouplingForm::c},
    {"EF2", 3, 5, CouplingForm::c},
}};

struct PulseChannel {
  std::string label;
  double omega_hz = 0.0;
  std::vector<double> amplitude_hz;
  std::vector<double> phase_rad;
};

struct PulseSchedule {
  std::vector<double> times;             // seconds, uniform
  std::vector<PulseChannel> channels;    // in kChannels order
  std::vector<std::array<double, 6>> d;  // diagonal of Htot per sample
};

namespace detail {

inline std::vector<std::array<double, 6>> cumulative_trapezoid(
    const std::vector<double>& t, const std::vector<std::array<double, 6>>& d) {
  std::vector<std::array<double, 6>> out(t.size());
  out[0].fill(0.0);
  for (std::size_t k = 1; k < t.size(); ++k)
    for (int j = 0; j < 6; ++j)
      out[k][j] = out[k - 1][j] + 0.5 * (t[k] - t[k - 1]) * (d[k][j] + d[k - 1][j]);
  return out;
}

// Frame phase accumulated between the two levels of a channel.
inline double frame_phase(const ChannelSpec& c, const std::array<double, 6>& integral) {
  return c.form == CouplingForm::b ? integral[c.j] - integral[c.i] : integral[c.i] - integral[c.j];
}

inline void unwrap(std::vector<double>& phase) {
  for (std::size_t k = 1; k < phase.size(); ++k) {
    const double jump = phase[k] - phase[k - 1];
    phase[k] -= 2 * std::numbers::pi * std::round(jump / (2 * std::numbers::pi));
  }
}

}  // namespace detail

/// Solves the rotating-frame matching equations sample by sample. Carriers sit
/// on the bare transitions; every shift from the diagonal of Htot is absorbed
/// into the phase.
inline PulseSchedule synthesize_pulses(const std::vector<Matrix6>& htot, const std::vector<double>& times,
                                       const LevelStructure& levels) {
  if (htot.size() != times.size() || times.empty())
    throw Error("synthesize_pulses: need one Htot sample per time");
  PulseSchedule out;
  out.times = times;
  out.d.resize(times.size());
  for (std::size_t k = 0; k < htot.size(); ++k) {
    const Matrix6& h = htot[k];
    const double scale = std::max(1e-300, max_abs<6>(h));
    const double cross = std::max(h.topRightCorner<3, 3>().cwiseAbs().maxCoeff(),
                                  h.bottomLeftCorner<3, 3>().cwiseAbs().maxCoeff());
    if (cross > 1e-12 * scale)
      throw UnreachableCoupling("synthesize_pulses: Htot couples the mI = 1 and mI = 0 manifolds "
                                "(|element| = " + std::to_string(cross) + "), which no channel drives");
    for (int j = 0; j < 6; ++j) out.d[k][j] = h(j, j).real();
  }
  const auto integral = detail::cumulative_trapezoid(times, out.d);

  for (const ChannelSpec& c : kChannels) {
    PulseChannel ch;
    ch.label = c.label;
    ch.omega_hz = levels.transition(c.i, c.j);
    for (std::size_t k = 0; k < htot.size(); ++k) {
      const cplx target = htot[k](c.i, c.j);
      const double arg = std::abs(target) > 0 ? std::arg(target) : 0.0;
      const double sign = c.form == CouplingForm::b ? 1.0 : -1.0;
      ch.amplitude_hz.push_back(std::abs(target) / std::numbers::pi);
      ch.phase_rad.push_back(sign * arg - detail::frame_phase(c, integral[k]));
    }
    detail::unwrap(ch.phase_rad);
    out.channels.push_back(std::move(ch));
  }
  return out;
}

/// Rotating-frame Hamiltonian implied by a schedule, evaluated from the matching
/// equations (no lab-frame simulation).
inline std::vector<Matrix6> reconstruct_rotating(const PulseSchedule& sched, const LevelStructure& levels) {
  const auto integral = detail::cumulative_trapezoid(sched.times, sched.d);
  std::vector<Matrix6> out(sched.times.size(), Matrix6::Zero());
  for (std::size_t k = 0; k < sched.times.size(); ++k) {
    for (int j = 0; j < 6; ++j) out[k](j, j) = sched.d[k][j];
    for (std::size_t n = 0; n < kChannels.size(); ++n) {
      const ChannelSpec& c = kChannels[n];
      const PulseChannel& ch = sched.channels.at(n);
      const double detuning = 2 * std::numbers::pi * (ch.omega_hz - levels.transition(c.i, c.j)) *
                              (sched.times[k] - sched.times[0]);
      const double theta = ch.phase_rad[k] + detuning + detail::frame_phase(c, integral[k]);
      const double sign = c.form == CouplingForm::b ? 1.0 : -1.0;
      const cplx element = std::numbers::pi * ch.amplitude_hz[k] * std::exp(cplx(0, sign * theta));
      out[k](c.i, c.j) = element;
      out[k](c.j, c.i) = std::conj(element);
    }
  }
  return out;
}

/// Largest entrywise deviation between reconstruction and target, relative to
/// the largest target entry.
inline double verify_rwa_roundtrip(const PulseSchedule& sched, const LevelStructure& levels,
                                   const std::vector<Matrix6>& target) {
  const auto rot = reconstruct_rotating(sched, levels);
  double dev = 0.0, scale = 1e-300;
  for (std::size_t k = 0; k < rot.size(); ++k) {
    dev = std::max(dev, (rot[k] - target.at(k)).cwiseAbs().maxCoeff());
    scale = std::max(scale, max_abs<6>(target[k]));
  }
  return dev / scale;
}

// ---------------------------------------------------------------------------
// Presets: Htot sampled from the dilation of a constant model Hamiltonian.

struct PulsePreset {
  std::vector<double> times;  // seconds
  std::vector<Matrix6> htot;
  double m0_scale = kDefaultMetricScale;
};

/// Samples Htot on [0, horizon / s] seconds every dt seconds. A non-positive
/// m0_scale selects 1.5 times the smallest admissible scale for the horizon.
inline PulsePreset sample_htot(const Matrix3& h, double horizon, double s = kDefaultTimeScale,
                               double dt = 1e-7, double m0_scale = 0.0) {
  if (!(dt > 0) || !(horizon > 0) || !(s > 0)) throw Error("sample_htot: horizon, s and dt must be positive");
  PulsePreset out;
  out.m0_scale = m0_scale > 0 ? m0_scale : 1.5 * required_metric_scale(h, horizon);
  const int n = std::max(1, static_cast<int>(std::llround(horizon / s / dt)));
  out.times = uniform_grid(0.0, n * dt, n);
  for (double tau : out.times) out.htot.push_back(make_frame(h, s * tau, out.m0_scale, s).Htot);
  return out;
}

// ---------------------------------------------------------------------------
// Waveform CSV

inline constexpr const char* kWaveformHeader = "channel,label,omega_hz,t_s,amplitude_hz,phase_rad";

inline std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_waveforms(std::ostream& os, const std::vector<PulseChannel>& channels,
                            const std::vector<double>& times) {
  os << kWaveformHeader << '\n';
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const PulseChannel& ch = channels[c];
    if (ch.amplitude_hz.size() != times.size() || ch.phase_rad.size() != times.size())
      throw Error("write_waveforms: channel " + ch.label + " has the wrong sample count");
    for (std::size_t k = 0; k < times.size(); ++k)
      os << c << ',' << ch.label << ',' << format_g12(ch.omega_hz) << ',' << format_g12(times[k])
         << ',' << format_g12(ch.amplitude_hz[k]) << ',' << format_g12(ch.phase_rad[k]) << '\n';
  }
}

inline void emit_waveforms(const std::vector<PulseChannel>& channels, const std::vector<double>& times,
                           const std::string& path, const std::string& comment = "") {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("emit_waveforms: cannot write " + path);
  if (!comment.empty()) os << "# " << comment << '\n';
  write_waveforms(os, channels, times);
  if (!os) throw Error("emit_waveforms: write failed for " + path);
}

struct WaveformTable {
  std::vector<PulseChannel> channels;
  std::vector<double> times;
};

inline WaveformTable read_waveforms(std::istream& is) {
  WaveformTable out;
  std::string line;
  bool header = false;
  std::map<int, std::size_t> slot;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kWaveformHeader) throw Error("read_waveforms: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string f[6];
    for (auto& field : f)
      if (!std::getline(ss, field, ',')) throw Error("read_waveforms: short row '" + line + "'");
    const int c = std::stoi(f[0]);
    if (!slot.count(c)) {
      slot[c] = out.channels.size();
      out.channels.push_back({f[1], std::stod(f[2]), {}, {}});
    }
    PulseChannel& ch = out.channels[slot[c]];
    if (slot[c] == 0) out.times.push_back(std::stod(f[3]));
    ch.amplitude_hz.push_back(std::stod(f[4]));
    ch.phase_rad.push_back(std::stod(f[5]));
  }
  if (!header) throw Error("read_waveforms: missing header");
  return out;
}

}  // namespace diracep
