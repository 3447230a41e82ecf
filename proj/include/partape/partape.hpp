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

#include "partape/ad.hpp"
#include "partape/adjoint/driver.hpp"
#include "partape/adjoint/fvm_problem.hpp"
#include "partape/bench/config.hpp"
#include "partape/bench/run.hpp"
#include "partape/bench/timers.hpp"
#include "partape/fvm/config.hpp"
#include "partape/fvm/solver.hpp"
#include "partape/linsolve/external_solve.hpp"
#include "partape/linsolve/gmres.hpp"
#include "partape/linsolve/sparse_matrix.hpp"
#include "partape/mesh/coloring.hpp"
#include "partape/mesh/mesh.hpp"
#include "partape/mesh/metrics.hpp"
