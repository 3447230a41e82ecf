// Copyright 2026 The partape Authors. All Rights Reserved.
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

#include <vector>

#include "partape/adjoint/driver.hpp"
#include "partape/fvm/solver.hpp"

namespace partape::adjoint {

// The finite-volume solver as a fixed-point problem. Parameters are ordered
// source first, then x and y of every point.
class FvmProblem : public Problem {
 public:
  FvmProblem(fvm::FvmSolver& solver, std::vector<ActiveScalar> state)
      : solver_(solver), state_(std::move(state)) {}

  std::vector<ActiveScalar>& state() override { return state_; }

  std::vector<ActiveScalar> step(const std::vector<ActiveScalar>& u) override {
    return solver_.step(u);
  }

  ActiveScalar objective(const std::vector<ActiveScalar>& u) override {
    return solver_.objective(u);
  }

  std::vector<ActiveScalar*> parameters() override {
    std::vector<ActiveScalar*> p;
    p.reserve(1 + 2 * solver_.size());
    p.push_back(&solver_.source());
    for (auto& x : solver_.coordinates()) {
      p.push_back(&x[0]);
      p.push_back(&x[1]);
    }
    return p;
  }

  static std::size_t coordinate_index(std::size_t point, int dim) {
    return 1 + 2 * point + static_cast<std::size_t>(dim);
  }

 private:
  fvm::FvmSolver& solver_;
  std::vector<ActiveScalar> state_;
};

}  // namespace partape::adjoint
