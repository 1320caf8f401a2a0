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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diracep {

/// Base for all domain failures. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

/// Negative eigenvalue where a positive semidefinite operator was required.
class MetricViolation : public Error {
 public:
  MetricViolation(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  [[nodiscard]] double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class DilationWindowExceeded : public Error {
 public:
  DilationWindowExceeded(const std::string& what, double t) : Error(what), t_(t) {}
  /// Earliest model time at which M - I lost positivity.
  [[nodiscard]] double time() const { return t_; }

 private:
  double t_;
};

class StepToleranceExceeded : public Error {
 public:
  StepToleranceExceeded(const std::string& what, double t0, double t1)
      : Error(what), t0_(t0), t1_(t1) {}
  [[nodiscard]] std::pair<double, double> interval() const { return {t0_, t1_}; }

 private:
  double t0_, t1_;
};

class UnreachableCoupling : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

class IncompleteSettings : public Error {
 public:
  IncompleteSettings(const std::string& what, int missing) : Error(what), missing_(missing) {}
  [[nodiscard]] int unconstrained_directions() const { return missing_; }

 private:
  int missing_;
};

/// Raised when a steady state is not reached; carries the best iterate.
template <class State>
class UnresolvedSteadyState : public Error {
 public:
  UnresolvedSteadyState(const std::string& what, State best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual) {}
  [[nodiscard]] const State& best() const { return best_; }
  [[nodiscard]] double residual() const { return residual_; }

 private:
  State best_;
  double residual_;
};

}  // namespace diracep
