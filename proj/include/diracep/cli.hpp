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

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "diracep/dilation.hpp"
#include "diracep/ep_atlas.hpp"
#include "diracep/errors.hpp"
#include "diracep/experiments.hpp"
#include "diracep/model.hpp"
#include "diracep/parallel.hpp"
#include "diracep/pulse_synth.hpp"
#include "diracep/readout.hpp"

namespace diracep::cli {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

/// Bad flag values or config contents; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small helpers

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::string num(double v) {
  if (v == 0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

template <int N>
json matrix_json(const Matrix<N>& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

/// "a:b:step" -> a, a + step, ... up to b.
inline std::vector<double> parse_range(const std::string& text) {
  double a, b, step;
  char c1, c2;
  std::istringstream is(text);
  if (!(is >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !is.eof() || !(step > 0) || b < a)
    throw UsageError("range '" + text + "' must read start:stop:step with step > 0 and stop >= start");
  const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9));
  std::vector<double> out;
  for (long long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

inline std::mt19937_64 task_rng(std::uint64_t seed, std::uint64_t task) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(task)};
  return std::mt19937_64(seq);
}

inline json record_json(const TomographyRecord& r) {
  return {{"a", r.setting.a}, {"b", r.setting.b}, {"c", r.setting.c}, {"d", r.setting.d},
          {"shots", r.shots}, {"p", {r.p[0], r.p[1], r.p[2]}}};
}

inline TomographyRecord record_from_json(const json& j) {
  TomographyRecord r;
  r.setting = {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>(), j.at("d").get<double>()};
  r.shots = j.at("shots").get<long long>();
  const auto p = j.at("p").get<std::vector<double>>();
  if (p.size() != 3) throw Error("tomography record: p must have three entries");
  const double sum = p[0] + p[1] + p[2];
  if (std::abs(sum - 1.0) > 1e-12) throw Error("tomography record: populations sum to " + num(sum) + ", not 1");
  r.p = {p[0], p[1], p[2]};
  return r;
}

// ---------------------------------------------------------------------------
// Parameters

enum class Kind { real, integer, text, flag };

struct Param {
  std::string name;
  Kind kind;
  json fallback;
  std::string help;
};

/// Config keys that never change the produced bytes, so they stay out of the hash.
inline bool is_plumbing(const std::string& key) { return key == "out" || key == "workers"; }

inline json convert(const Param& p, const std::string& raw) {
  try {
    std::size_t used = 0;
    switch (p.kind) {
      case Kind::real: {
        const double v = std::stod(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case Kind::integer: {
        const long long v = std::stoll(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case Kind::text: return raw;
      case Kind::flag: return raw != "false" && raw != "0";
    }
  } catch (const std::exception&) {
  }
  throw UsageError("--" + p.name + ": cannot read '" + raw + "'");
}

inline void check_type(const Param& p, const json& v) {
  const bool ok = (p.kind == Kind::real && (v.is_number() || v.is_null())) ||
                  (p.kind == Kind::integer && v.is_number_integer()) ||
                  (p.kind == Kind::text && v.is_string()) || (p.kind == Kind::flag && v.is_boolean());
  if (!ok) throw UsageError("config key '" + p.name + "' has the wrong type");
}

class Config {
 public:
  Config(std::string command, json values) : command_(std::move(command)), values_(std::move(values)) {}

  [[nodiscard]] double real(const std::string& k) const { return values_.at(k).get<double>(); }
  [[nodiscard]] bool has(const std::string& k) const { return !values_.at(k).is_null(); }
  [[nodiscard]] long long integer(const std::string& k) const { return values_.at(k).get<long long>(); }
  [[nodiscard]] std::string text(const std::string& k) const { return values_.at(k).get<std::string>(); }
  [[nodiscard]] bool flag(const std::string& k) const { return values_.at(k).get<bool>(); }
  [[nodiscard]] int workers() const {
    const long long w = values_.contains("workers") ? integer("workers") : 0;
    return w > 0 ? static_cast<int>(w) : default_workers();
  }

  [[nodiscard]] json hashed() const {
    json h = {{"command", command_}};
    for (const auto& [k, v] : values_.items())
      if (!is_plumbing(k)) h[k] = v;
    return h;
  }
  [[nodiscard]] std::string hash() const { return hex16(fnv1a(hashed().dump())); }
  [[nodiscard]] std::string comment() const {
    return std::string("diracep ") + kVersion + " config=" + hash();
  }
  [[nodiscard]] json meta() const {
    return {{"tool", "diracep"}, {"version", kVersion}, {"config", hash()}, {"command", command_},
            {"parameters", hashed()}};
  }

 private:
  std::string command_;
  json values_;
};

/// Destination of the main output: a file, or the caller's stream for "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error("cannot open output file " + path);
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw Error("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline void write_json(Sink& sink, const Config& cfg, json body) {
  json doc = {{"meta", cfg.meta()}};
  for (auto& [k, v] : body.items()) doc[k] = v;
  *sink << doc.dump(2) << '\n';
  sink.finish();
}

inline ModelParams model_point(const Config& cfg) {
  const std::string v = cfg.text("variant");
  if (v != "nearest" && v != "next_nearest") throw UsageError("--variant must be nearest or next_nearest");
  return {cfg.real("k1"), cfg.real("k2"), v == "nearest" ? Variant::nearest : Variant::next_nearest};
}

// ---------------------------------------------------------------------------
// Subcommands

template <int N>
void spectrum_rows(std::ostream& os, const std::vector<ModelParams>& path, int workers) {
  auto specs = parallel_map<Spectrum<N>>(
      path.size(), [&](std::size_t i) { return spectrum_at<N>(path[i]); }, workers);
  specs = track_spectra<N>(std::move(specs));
  os << "k1,k2";
  for (int n = 1; n <= N; ++n) os << ",re_E" << n << ",im_E" << n;
  os << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << num(path[i].k1) << ',' << num(path[i].k2);
    for (int n = 0; n < N; ++n) os << ',' << num(specs[i].values(n).real()) << ',' << num(specs[i].values(n).imag());
    os << '\n';
  }
}

inline int cmd_spectrum(const Config& cfg, std::ostream& out) {
  ModelParams base = model_point(cfg);
  std::vector<ModelParams> path;
  if (!cfg.text("k2-range").empty()) {
    for (double k2 : parse_range(cfg.text("k2-range"))) path.push_back({base.k1, k2, base.variant});
  } else {
    for (double k1 : parse_range(cfg.text("k1-range"))) path.push_back({k1, base.k2, base.variant});
  }
  Sink sink(cfg.text("out"), out);
  *sink << "# " << cfg.comment() << '\n';
  if (base.variant == Variant::nearest)
    spectrum_rows<3>(*sink, path, cfg.workers());
  else
    spectrum_rows<5>(*sink, path, cfg.workers());
  sink.finish();
  return 0;
}

inline Rect rect_of(const Config& cfg) {
  Rect r{cfg.real("k1-min"), cfg.real("k1-max"), cfg.real("k2-min"), cfg.real("k2-max"),
         static_cast<int>(cfg.integer("n1")), static_cast<int>(cfg.integer("n2"))};
  if (r.n1 < 2 || r.n2 < 2 || !(r.k1_max > r.k1_min) || !(r.k2_max > r.k2_min))
    throw UsageError("atlas grid must have at least 2x2 nodes over a non-empty rectangle");
  return r;
}

inline json record_json(const EPRecord& r) {
  return {{"k1", r.location.k1},
          {"k2", r.location.k2},
          {"kind", to_string(r.kind)},
          {"dispersion_exponent", r.dispersion_exponent},
          {"coalescence", r.coalescence},
          {"ring_real", r.ring_real},
          {"reality_transition", r.reality_transition}};
}

inline int cmd_atlas(const Config& cfg, std::ostream& out) {
  const Rect rect = rect_of(cfg);
  const int workers = cfg.workers();
  json body;
  body["rect"] = {{"k1", {rect.k1_min, rect.k1_max}}, {"k2", {rect.k2_min, rect.k2_max}}, {"n", {rect.n1, rect.n2}}};
  if (cfg.text("variant") == "next_nearest") {
    json eps = json::array();
    for (const auto& r : next_nearest_dirac_points(rect)) eps.push_back(record_json(r));
    body["eps"] = eps;
  } else if (cfg.text("variant") == "nearest") {
    const auto found = locate_eps(rect);
    // Zeros on exceptional lines are classified as one representative per line.
    std::vector<EPLocation> isolated;
    std::vector<Point2> seeds;
    for (const auto& e : found)
      if (e.isolated) isolated.push_back(e);
    const double step = cfg.real("trace-step");
    if (!(step > 0)) throw UsageError("--trace-step must be positive");
    std::vector<std::vector<Point2>> lines;
    for (const auto& e : found) {
      if (e.isolated) continue;
      bool covered = false;
      for (const auto& line : lines)
        for (const Point2& v : line)
          if (norm(v - e.at) < 2 * step) covered = true;
      if (covered) continue;
      const auto tr = trace_exceptional_line(e.at, step, 4000, rect);
      lines.push_back(tr.vertices);
      seeds.push_back(e.at);
    }
    std::vector<Point2> to_classify;
    for (const auto& e : isolated) to_classify.push_back(e.at);
    for (const auto& s : seeds) to_classify.push_back(s);
    const auto recs = parallel_map<EPRecord>(
        to_classify.size(), [&](std::size_t i) { return classify_ep(to_classify[i]); }, workers);
    json eps = json::array();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      json e = record_json(recs[i]);
      e["isolated"] = i < isolated.size();
      e["delta"] = disc::value(recs[i].location.k1, recs[i].location.k2);
      eps.push_back(e);
    }
    body["eps"] = eps;
    json polylines = json::array();
    for (const auto& line : lines) {
      json pl = json::array();
      for (const Point2& v : line) pl.push_back({v.k1, v.k2});
      polylines.push_back(pl);
    }
    body["lines"] = polylines;
    if (const std::string field = cfg.text("field"); !field.empty()) {
      const auto f = scan_discriminant(rect);
      Sink fs(field, out);
      *fs << "# " << cfg.comment() << "\nk1,k2,delta\n";
      for (int j = 0; j < rect.n2; ++j)
        for (int i = 0; i < rect.n1; ++i) *fs << num(rect.k1(i)) << ',' << num(rect.k2(j)) << ',' << num(f.at(i, j)) << '\n';
      fs.finish();
    }
  } else {
    throw UsageError("--variant must be nearest or next_nearest");
  }
  Sink sink(cfg.text("out"), out);
  write_json(sink, cfg, body);
  return 0;
}

inline int cmd_cone(const Config& cfg, std::ostream& out) {
  const long long count = cfg.integer("theta-count");
  const double dk = cfg.real("dk");
  if (count < 1 || !(dk > 0)) throw UsageError("--theta-count must be >= 1 and --dk > 0");
  Sink sink(cfg.text("out"), out);
  *sink << "# " << cfg.comment() << "\ntheta,fd_plus,fd_minus,slope_plus,slope_minus,max_rel_error\n";
  for (long long n = 0; n < count; ++n) {
    const double th = 2 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(count);
    const Point2 k = Point2{0, 1} + ConeDirection{th, dk}.offset();
    const auto e = eig<3>(build_hamiltonian(k.k1, k.k2)).values;
    std::array<double, 3> d{e(0).real() - 3, e(1).real() - 3, e(2).real() - 3};
    std::sort(d.begin(), d.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    const double hi = std::max(d[0], d[1]) / dk, lo = std::min(d[0], d[1]) / dk;
    const auto [sp, sm] = cone_expansion(th);
    // Relative to the larger slope: one slope vanishes at theta = pi/2 and 3pi/2.
    const double scale = std::max(std::abs(sp), std::abs(sm));
    const double rel = std::max(std::abs(hi - sp), std::abs(lo - sm)) / scale;
    *sink << num(th) << ',' << num(hi) << ',' << num(lo) << ',' << num(sp) << ',' << num(sm) << ',' << num(rel) << '\n';
  }
  sink.finish();
  return 0;
}

inline Vector3 parse_state(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("--psi0 must be three comma-separated reals");
    }
  }
  if (v.size() != 3) throw UsageError("--psi0 must be three comma-separated reals");
  const Vector3 psi(v[0], v[1], v[2]);
  if (psi.norm() == 0) throw UsageError("--psi0 must be non-zero");
  return psi.normalized();
}

inline int cmd_dilate(const Config& cfg, std::ostream& out) {
  const Matrix3 h = build_hamiltonian(cfg.real("k1"), cfg.real("k2"));
  const double t_max = cfg.real("t-max");
  const long long steps = cfg.integer("steps");
  if (!(t_max > 0) || steps < 1) throw UsageError("--t-max must be positive and --steps >= 1");
  double m0 = cfg.real("m0-scale");
  if (!(m0 > 0)) m0 = 1.5 * required_metric_scale(h, t_max);
  const Vector3 psi0 = parse_state(cfg.text("psi0"));
  const auto grid = uniform_grid(0.0, t_max, static_cast<int>(steps));
  const auto res = dilated_evolve(h, psi0, grid, m0, cfg.real("s"));
  Sink sink(cfg.text("out"), out);
  *sink << "# " << cfg.comment() << " m0_scale=" << num(m0) << " max_hermiticity=" << num(res.max_hermiticity)
        << " max_ancilla_error=" << num(res.max_ancilla_error) << '\n';
  *sink << "t,probability,infidelity,joint_norm_drift\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector3 direct = step_propagator<3>(h, grid[k]) * psi0;
    const Vector3& post = res.postselected.states[k];
    const double inf = 1 - std::norm(direct.dot(post)) / (direct.squaredNorm() * post.squaredNorm());
    *sink << num(grid[k]) << ',' << num(res.probability[k]) << ',' << num(inf) << ','
          << num(res.joint.norms[k] - 1.0) << '\n';
  }
  sink.finish();
  return 0;
}

inline int cmd_pulses(const Config& cfg, std::ostream& out) {
  const Matrix3 h = build_hamiltonian(cfg.real("k1"), cfg.real("k2"));
  const auto preset = sample_htot(h, cfg.real("horizon"), cfg.real("s"), cfg.real("dt"), cfg.real("m0-scale"));
  const LevelStructure levels = nv_levels();
  const PulseSchedule sched = synthesize_pulses(preset.htot, preset.times, levels);
  const double rel = verify_rwa_roundtrip(sched, levels, preset.htot);
  Sink sink(cfg.text("out"), out);
  *sink << "# " << cfg.comment() << " m0_scale=" << num(preset.m0_scale) << " roundtrip_rel_error=" << num(rel)
        << '\n';
  write_waveforms(*sink, sched.channels, sched.times);
  sink.finish();
  return 0;
}

inline std::array<double, 3> real_spectrum(const Matrix3& h) {
  const auto e = eig<3>(h).values;
  for (int i = 0; i < 3; ++i)
    if (std::abs(e(i).imag()) > 1e-9) throw Error("eigensolve: spectrum is not real at this point");
  return {e(0).real(), e(1).real(), e(2).real()};
}

inline int cmd_eigensolve(const Config& cfg, std::ostream& out) {
  const ModelParams p = at(cfg.real("k1"), cfg.real("k2"));
  const auto truth = real_spectrum(build_hamiltonian(p));
  const auto settings = default_eigen_settings();
  const long long shots = cfg.integer("shots");
  if (shots < 0) throw UsageError("--shots must be non-negative");
  std::array<TomographyRecord, 3> recs;
  std::array<double, 3> ratios{};
  for (int i = 0; i < 3; ++i) {
    auto rng = task_rng(static_cast<std::uint64_t>(cfg.integer("seed")), static_cast<std::uint64_t>(i));
    recs[i] = simulate_counts(analytic_eigenstate(p, truth[i]), settings[i], shots, rng);
    ratios[i] = record_ratio(recs[i]);
  }
  EigenSolveOptions o;
  o.sign_k1 = cfg.integer("sign-k1") < 0 ? -1 : 1;
  o.sign_k2 = cfg.integer("sign-k2") < 0 ? -1 : 1;
  o.residual_tol = shots > 0 ? ratio_noise_tolerance(recs) : cfg.real("residual-tol");
  const auto sol = solve_eigenvalues(ratios, settings, o);
  json records = json::array();
  for (const auto& r : recs) records.push_back(record_json(r));
  Sink sink(cfg.text("out"), out);
  write_json(sink, cfg,
             {{"truth", truth},
              {"recovered", sol.E},
              {"residual", sol.residual},
              {"residual_tolerance", o.residual_tol},
              {"jacobian_condition", sol.jacobian_cond},
              {"ratios", ratios},
              {"records", records}});
  return 0;
}

inline std::vector<TomographyRecord> read_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open records file " + path);
  std::vector<TomographyRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error("records file " + path + ": " + e.what());
    }
  }
  return out;
}

inline json density_json(const DensityMatrix& rho) { return matrix_json<3>(rho); }

inline int cmd_tomography(const Config& cfg, std::ostream& out) {
  const long long shots = cfg.integer("shots");
  if (shots < 0) throw UsageError("--shots must be non-negative");
  const auto seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  Sink sink(cfg.text("out"), out);
  if (const std::string in = cfg.text("records-in"); !in.empty()) {
    const auto res = mle_reconstruct(read_records(in));
    write_json(sink, cfg, {{"rho", density_json(res.rho)}, {"gradient_norm", res.gradient_norm}});
    return 0;
  }
  const Matrix3 h = build_hamiltonian(cfg.real("k1"), cfg.real("k2"));
  SteadyStateOptions so;
  so.horizon = cfg.real("horizon");
  const GFunction forms[3] = {{GForm::i_h}, default_inverse_shift(h), {GForm::minus_i_h}};
  const auto states = parallel_map<SteadyState>(
      3, [&](std::size_t i) { return steady_state_eigenstate(h, forms[i], random_state(seed + i), so); },
      cfg.workers());
  struct Fit {
    std::vector<TomographyRecord> records;
    MleResult mle;
  };
  const auto fits = parallel_map<Fit>(
      3,
      [&](std::size_t i) {
        auto rng = task_rng(seed, 100 + i);
        Fit f;
        for (const auto& s : default_tomography_settings())
          f.records.push_back(simulate_counts(states[i].state, s, shots, rng));
        f.mle = mle_reconstruct(f.records);
        return f;
      },
      cfg.workers());
  json st = json::array();
  for (int i = 0; i < 3; ++i)
    st.push_back({{"index", i + 1},
                  {"eigenvalue", complex_json(states[i].eigenvalue)},
                  {"residual", states[i].residual},
                  {"rho", density_json(fits[i].mle.rho)},
                  {"fidelity_to_pure", fidelity(fits[i].mle.rho, projector(states[i].state))}});
  json pairs = json::object(), pure = json::object();
  for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
    const std::string key = "F" + std::to_string(i + 1) + std::to_string(j + 1);
    pairs[key] = fidelity(fits[i].mle.rho, fits[j].mle.rho);
    pure[key] = fidelity(projector(states[i].state), projector(states[j].state));
  }
  if (const std::string rec_out = cfg.text("records-out"); !rec_out.empty()) {
    Sink rs(rec_out, out);
    *rs << "# " << cfg.comment() << '\n';
    for (const auto& f : fits)
      for (const auto& r : f.records) *rs << record_json(r).dump() << '\n';
    rs.finish();
  }
  write_json(sink, cfg, {{"states", st}, {"fidelity", pairs}, {"pure_fidelity", pure}});
  return 0;
}

inline Direction direction_of(const std::string& s) {
  if (s == "ccw") return Direction::ccw;
  if (s == "cw") return Direction::cw;
  throw UsageError("--direction must be ccw or cw");
}

inline json phase_json(const PhaseReport& r) {
  return {{"eigenindex", r.eigenindex},
          {"total", complex_json(r.total)},
          {"dynamical", complex_json(r.dynamical)},
          {"geometric", complex_json(r.geometric)},
          {"leakage", r.leakage}};
}

inline int cmd_geophase(const Config& cfg, std::ostream& out) {
  LoopSpec loop{{cfg.real("k1c"), cfg.real("k2c")}, cfg.real("R"), cfg.real("T"),
                direction_of(cfg.text("direction")), cfg.real("theta0")};
  PhaseOptions o;
  o.max_dt = cfg.real("dt");
  if (!(o.max_dt > 0)) throw UsageError("--dt must be positive");
  const auto v = parallel_map<PhaseReport>(
      3, [&](std::size_t i) { return geometric_phase(loop, static_cast<int>(i) + 1, o); }, cfg.workers());
  json phases = json::array();
  for (const auto& r : v) phases.push_back(phase_json(r));
  Sink sink(cfg.text("out"), out);
  write_json(sink, cfg, {{"phases", phases}});
  return 0;
}

inline json switch_json(const SwitchReport& r) {
  return {{"start_index", r.start_index}, {"end_index", r.end_index},     {"direction", to_string(r.direction)},
          {"overlap", r.overlap},         {"overlaps", r.overlaps},       {"efficiency", r.efficiency},
          {"convention", to_string(r.convention)}, {"duration", r.duration}};
}

inline int cmd_modeswitch(const Config& cfg, std::ostream& out) {
  const std::string name = cfg.text("preset");
  LoopPreset preset;
  if (name == "through_k2")
    preset = LoopPreset::through_k2;
  else if (name == "through_k1")
    preset = LoopPreset::through_k1;
  else
    throw UsageError("--preset must be through_k2 or through_k1");
  SwitchOptions o;
  const std::string conv = cfg.text("convention");
  if (conv == "physical")
    o.convention = TimeConvention::physical;
  else if (conv != "dimensionless")
    throw UsageError("--convention must be dimensionless or physical");
  o.max_dt = cfg.real("dt");
  if (!(o.max_dt > 0)) throw UsageError("--dt must be positive");
  const LoopSpec base = make_loop(preset, cfg.real("T"));
  const auto v = parallel_map<SwitchReport>(
      4,
      [&](std::size_t i) {
        LoopSpec l = base;
        const Direction want = i < 2 ? Direction::ccw : Direction::cw;
        if (l.direction != want) l = l.reversed();
        return mode_switch(l, static_cast<int>(i % 2) + 1, o);
      },
      cfg.workers());
  json reports = json::array();
  for (const auto& r : v) reports.push_back(switch_json(r));
  Sink sink(cfg.text("out"), out);
  write_json(sink, cfg, {{"preset", name}, {"reports", reports}});
  return 0;
}

// verify: property suites that print one line per check.
struct Check {
  std::string name;
  bool pass;
  std::string detail;
};

inline std::vector<Check> verify_dilation() {
  std::vector<Check> out;
  for (Point2 k : {Point2{0, 1}, Point2{0.3, 1}, Point2{0, 0.8}}) {
    const Matrix3 h = build_hamiltonian(k.k1, k.k2);
    const double m0 = 1.5 * required_metric_scale(h, 2.0);
    const Vector3 psi0 = Vector3(1, 0.5, -0.25).normalized();
    const auto grid = uniform_grid(0.0, 2.0, 400);
    const auto res = dilated_evolve(h, psi0, grid, m0);
    double inf = 0.0, drift = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
      const Vector3 direct = step_propagator<3>(h, grid[n]) * psi0;
      const Vector3& post = res.postselected.states[n];
      inf = std::max(inf, 1 - std::norm(direct.dot(post)) / (direct.squaredNorm() * post.squaredNorm()));
      drift = std::max(drift, std::abs(res.joint.norms[n] - 1.0));
    }
    const std::string at = "(" + num(k.k1) + "," + num(k.k2) + ")";
    out.push_back({"dilation.infidelity" + at, inf < 1e-10, num(inf)});
    out.push_back({"dilation.norm_drift" + at, drift < 1e-9, num(drift)});
    out.push_back({"dilation.hermiticity" + at, res.max_hermiticity < 1e-9, num(res.max_hermiticity)});
  }
  return out;
}

inline std::vector<Check> verify_spectrum() {
  double worst = 0.0;
  for (int n = 0; n <= 40; ++n) {
    const double k1 = -1 + 0.05 * n;
    const auto e = eig<3>(build_hamiltonian(k1, 1)).values;
    worst = std::max(worst, (e - line_spectrum(at(k1, 1))).cwiseAbs().maxCoeff());
  }
  for (int n = 0; n <= 22; ++n) {
    const double k2 = 0.3 + 0.05 * n;
    const auto e = eig<3>(build_hamiltonian(0, k2)).values;
    worst = std::max(worst, (e - line_spectrum(at(0, k2))).cwiseAbs().maxCoeff());
  }
  return {{"spectrum.lines", worst < 1e-9, num(worst)}};
}

inline std::vector<Check> verify_pulses() {
  std::vector<Check> out;
  const LevelStructure levels = nv_levels();
  for (Point2 k : {Point2{0, 1}, Point2{0, 1.3}}) {
    const auto preset = sample_htot(build_hamiltonian(k.k1, k.k2), 0.2);
    const auto sched = synthesize_pulses(preset.htot, preset.times, levels);
    const double rel = verify_rwa_roundtrip(sched, levels, preset.htot);
    out.push_back({"pulses.roundtrip(" + num(k.k1) + "," + num(k.k2) + ")", rel < 1e-9, num(rel)});
  }
  return out;
}

inline std::vector<Check> verify_readout() {
  const ModelParams p = at(0.3, 1);
  const auto truth = real_spectrum(build_hamiltonian(p));
  const auto settings = default_eigen_settings();
  std::array<double, 3> ratios{};
  for (int i = 0; i < 3; ++i) ratios[i] = population_ratio(analytic_eigenstate(p, truth[i]), settings[i]);
  const auto sol = solve_eigenvalues(ratios, settings);
  double err = 0.0;
  for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(sol.E[i] - truth[i]));
  return {{"readout.inversion", err < 1e-6, num(err)}};
}

inline int cmd_verify(const Config& cfg, std::ostream& out) {
  const std::string suite = cfg.text("suite");
  std::vector<Check> checks;
  auto add = [&](const std::vector<Check>& c) { checks.insert(checks.end(), c.begin(), c.end()); };
  bool known = false;
  if (suite == "spectrum" || suite == "all") add(verify_spectrum()), known = true;
  if (suite == "dilation" || suite == "all") add(verify_dilation()), known = true;
  if (suite == "pulses" || suite == "all") add(verify_pulses()), known = true;
  if (suite == "readout" || suite == "all") add(verify_readout()), known = true;
  if (!known) throw UsageError("--suite must be one of spectrum, dilation, pulses, readout, all");
  Sink sink(cfg.text("out"), out);
  *sink << "# " << cfg.comment() << '\n';
  bool all = true;
  for (const auto& c : checks) {
    *sink << (c.pass ? "PASS " : "FAIL ") << c.name << ' ' << c.detail << '\n';
    all = all && c.pass;
  }
  sink.finish();
  if (!all) throw Error("verify: suite " + suite + " has failing checks");
  return 0;
}

// ---------------------------------------------------------------------------
// Command table

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  int (*body)(const Config&, std::ostream&);
};

inline std::vector<Command> commands() {
  const Param out{"out", Kind::text, "-", "output path, - for stdout"};
  const Param workers{"workers", Kind::integer, 0, "worker threads (0: DIRACEP_WORKERS or hardware)"};
  const Param k1{"k1", Kind::real, 0.0, "model parameter k1"};
  const Param seed{"seed", Kind::integer, 1, "random seed"};
  auto k2 = [](double v) { return Param{"k2", Kind::real, v, "model parameter k2"}; };
  const Param variant{"variant", Kind::text, "nearest", "nearest or next_nearest"};
  return {
      {"spectrum",
       "tracked eigenvalues along a line (CSV)",
       {k1, k2(1.0), {"k1-range", Kind::text, "-1:1:0.05", "k1 sweep start:stop:step"},
        {"k2-range", Kind::text, "", "k2 sweep start:stop:step (takes precedence, k1 fixed)"}, variant, workers, out},
       cmd_spectrum},
      {"atlas",
       "locate, classify and trace degeneracies (JSON)",
       {{"k1-min", Kind::real, -2.0, ""}, {"k1-max", Kind::real, 2.0, ""}, {"k2-min", Kind::real, -2.0, ""},
        {"k2-max", Kind::real, 2.0, ""}, {"n1", Kind::integer, 81, "grid nodes along k1"},
        {"n2", Kind::integer, 81, "grid nodes along k2"}, {"trace-step", Kind::real, 0.01, "polyline step"},
        {"field", Kind::text, "", "optional CSV of the discriminant field"}, variant, workers, out},
       cmd_atlas},
      {"cone",
       "finite-difference cone slopes around (0, 1) (CSV)",
       {{"theta-count", Kind::integer, 16, "number of ray angles"}, {"dk", Kind::real, 1e-4, "ray length"}, out},
       cmd_cone},
      {"dilate",
       "dilated evolution vs direct propagation (CSV)",
       {k1, k2(1.0), {"t-max", Kind::real, 2.0, "model time"}, {"steps", Kind::integer, 400, "grid steps"},
        {"m0-scale", Kind::real, 0.0, "M(0) = scale * I; 0 picks one valid over t-max"},
        {"s", Kind::real, kDefaultTimeScale, "time scale"}, {"psi0", Kind::text, "1,0,0", "initial state"}, out},
       cmd_dilate},
      {"pulses",
       "control waveforms for the six channels (CSV)",
       {k1, k2(1.0), {"horizon", Kind::real, 2.0, "model time"}, {"s", Kind::real, kDefaultTimeScale, "time scale"},
        {"dt", Kind::real, 1e-7, "sample spacing in seconds"},
        {"m0-scale", Kind::real, 0.0, "M(0) = scale * I; 0 picks one valid over the horizon"}, out},
       cmd_pulses},
      {"eigensolve",
       "eigenvalues from population ratios (JSON)",
       {k1, k2(0.8), {"shots", Kind::integer, 0, "shots per setting, 0 = exact"}, seed,
        {"sign-k1", Kind::integer, 1, "sign branch of k1"}, {"sign-k2", Kind::integer, 1, "sign branch of k2"},
        {"residual-tol", Kind::real, 1e-6, "noiseless residual tolerance"}, out},
       cmd_eigensolve},
      {"tomography",
       "steady-state eigenstates, MLE reconstruction and fidelities (JSON)",
       {k1, k2(1.0), {"shots", Kind::integer, 100000, "shots per setting, 0 = exact"}, seed,
        {"horizon", Kind::real, 1e9, "steady-state horizon"},
        {"records-out", Kind::text, "", "write tomography records (JSON lines)"},
        {"records-in", Kind::text, "", "reconstruct one state from records (JSON lines)"}, workers, out},
       cmd_tomography},
      {"geophase",
       "complex geometric phases around a circular loop (JSON)",
       {{"k1c", Kind::real, 0.0, "loop centre k1"}, {"k2c", Kind::real, 1.0, "loop centre k2"},
        {"R", Kind::real, 0.2, "radius"}, {"T", Kind::real, 5000.0, "duration"},
        {"direction", Kind::text, "cw", "ccw or cw"}, {"theta0", Kind::real, 0.0, "start angle"},
        {"dt", Kind::real, 0.5, "largest time step"}, workers, out},
       cmd_geophase},
      {"modeswitch",
       "mode switching through the Dirac point (JSON)",
       {{"preset", Kind::text, "through_k2", "through_k2 or through_k1"}, {"T", Kind::real, 5e4, "duration"},
        {"convention", Kind::text, "dimensionless", "dimensionless or physical"},
        {"dt", Kind::real, 1.0, "largest time step"}, workers, out},
       cmd_modeswitch},
      {"verify",
       "self-test suites",
       {{"suite", Kind::text, "all", "spectrum, dilation, pulses, readout or all"}, out},
       cmd_verify},
  };
}

inline json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config file " + path);
  try {
    json j = json::parse(is);
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

/// Exit codes: 0 success, 1 domain error, 2 usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"diracep: numerical laboratory for Dirac exceptional points", "diracep"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  const auto table = commands();
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_path;
  std::map<std::string, std::map<std::string, CLI::Option*>> given;
  std::vector<CLI::App*> subs;
  for (const auto& c : table) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path[c.name], "JSON file with parameter values");
    for (const auto& p : c.params) {
      std::string help = p.help;
      if (!p.fallback.is_null()) help += (help.empty() ? "" : " ") + std::string("[") + p.fallback.dump() + "]";
      given[c.name][p.name] = sub->add_option("--" + p.name, raw[c.name][p.name], help);
    }
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) {
      err << app.help();
      return 2;
    }
    return 0;
  }

  for (std::size_t ci = 0; ci < table.size(); ++ci) {
    if (!subs[ci]->parsed()) continue;
    const Command& c = table[ci];
    try {
      json values = json::object();
      for (const auto& p : c.params) values[p.name] = p.fallback;
      if (!config_path[c.name].empty()) {
        const json file = load_config_file(config_path[c.name]);
        for (const auto& [k, v] : file.items()) {
          const auto it = std::find_if(c.params.begin(), c.params.end(), [&](const Param& p) { return p.name == k; });
          if (it == c.params.end()) throw UsageError("config key '" + k + "' is not a parameter of " + c.name);
          check_type(*it, v);
          values[k] = v;
        }
      }
      for (const auto& p : c.params)
        if (given[c.name][p.name]->count() > 0) values[p.name] = convert(p, raw[c.name][p.name]);
      return c.body(Config(c.name, values), out);
    } catch (const UsageError& e) {
      err << "usage error: " << e.what() << '\n' << subs[ci]->help();
      return 2;
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  err << app.help();
  return 2;
}

}  // namespace diracep::cli
