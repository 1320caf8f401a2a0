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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "diracep/cli.hpp"

namespace {

namespace fs = std::filesystem;
using diracep::cli::run;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "diracep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "diracep_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = call({"spectrum", "--no-such-flag"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingOrUnknownSubcommand) {
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
}

TEST(Cli, BadValueIsUsageError) {
  EXPECT_EQ(call({"spectrum", "--k2", "abc"}).code, 2);
  EXPECT_EQ(call({"spectrum", "--k1-range", "1:0:0.1"}).code, 2);
  EXPECT_EQ(call({"modeswitch", "--preset", "sideways"}).code, 2);
}

TEST(Cli, DomainErrorExitsOne) {
  const auto r = call({"eigensolve", "--k1", "0", "--k2", "2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("not real"), std::string::npos);
}

TEST(Cli, VerifyDilationSuite) {
  const auto r = call({"verify", "--suite", "dilation"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
  EXPECT_NE(r.out.find("PASS dilation.infidelity(0,1)"), std::string::npos);
}

TEST(Cli, SpectrumLineData) {
  const auto r = call({"spectrum", "--k2", "1", "--k1-range=-1:1:0.05"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("# diracep ", 0), 0u);
  EXPECT_NE(line.find("config="), std::string::npos);
  std::getline(is, line);
  EXPECT_EQ(line, "k1,k2,re_E1,im_E1,re_E2,im_E2,re_E3,im_E3");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 41);
}

TEST(Cli, ConfigFileAndOverride) {
  const fs::path cfg = scratch("config.json");
  std::ofstream(cfg) << R"({"k2": 0.9, "k1-range": "0:0.2:0.1"})";
  const auto from_file = call({"spectrum", "--config", cfg.string()});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_NE(from_file.out.find("\n0.2,0.9,"), std::string::npos);
  const auto overridden = call({"spectrum", "--config", cfg.string(), "--k2", "0.5"});
  ASSERT_EQ(overridden.code, 0);
  EXPECT_NE(overridden.out.find("\n0.2,0.5,"), std::string::npos);
  std::ofstream(cfg) << R"({"k3": 1})";
  EXPECT_EQ(call({"spectrum", "--config", cfg.string()}).code, 2);
}

TEST(Cli, HashIgnoresOutputPath) {
  const auto a = call({"cone", "--theta-count", "4", "--out", scratch("cone_a.csv").string()});
  const auto b = call({"cone", "--theta-count", "4", "--out", scratch("cone_b.csv").string()});
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  EXPECT_EQ(slurp(scratch("cone_a.csv")), slurp(scratch("cone_b.csv")));
  const auto c = call({"cone", "--theta-count", "5"});
  EXPECT_NE(c.out.substr(0, c.out.find('\n')), slurp(scratch("cone_a.csv")).substr(0, c.out.find('\n')));
}

TEST(Cli, JsonReportsCarryMeta) {
  const auto r = call({"eigensolve", "--k1", "0.3", "--k2", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["meta"]["tool"], "diracep");
  EXPECT_NEAR(j["recovered"][0].get<double>(), 3.6, 1e-6);
}

TEST(Cli, SeededRunsAreByteIdentical) {
  const std::vector<std::vector<std::string>> runs = {
      {"eigensolve", "--shots", "1000", "--seed", "5"},
      {"tomography", "--shots", "2000", "--seed", "5", "--k1", "0.3", "--horizon", "200"},
      {"pulses", "--horizon", "0.1"},
      {"atlas", "--n1", "21", "--n2", "21"},
  };
  for (const auto& args : runs) {
    auto first = args, second = args;
    first.insert(first.end(), {"--out", scratch("first").string()});
    second.insert(second.end(), {"--out", scratch("second").string()});
    ASSERT_EQ(call(first).code, 0) << args[0];
    ASSERT_EQ(call(second).code, 0) << args[0];
    EXPECT_EQ(slurp(scratch("first")), slurp(scratch("second"))) << args[0];
  }
}

TEST(Cli, RecordsRoundTrip) {
  const fs::path rec = scratch("records.jsonl");
  ASSERT_EQ(call({"tomography", "--shots", "0", "--k1", "0.3", "--horizon", "200", "--records-out", rec.string()}).code,
            0);
  // All three eigenstates share one file, so the fit is their equal mixture.
  const auto r = call({"tomography", "--records-in", rec.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rho = nlohmann::json::parse(r.out)["rho"];
  double trace = 0.0;
  for (int i = 0; i < 3; ++i) trace += rho[i][i][0].get<double>();
  EXPECT_NEAR(trace, 1.0, 1e-10);

  std::ofstream(rec) << R"({"a":0,"b":0,"c":0,"d":0,"shots":10,"p":[0.5,0.2,0.2]})" << "\n";
  const auto bad = call({"tomography", "--records-in", rec.string()});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("sum"), std::string::npos);
}

}  // namespace
