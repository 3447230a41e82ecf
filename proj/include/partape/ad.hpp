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

#include "partape/ad/active_scalar.hpp"
#include "partape/ad/api.hpp"
#include "partape/ad/evaluate.hpp"
#include "partape/ad/identifiers.hpp"
#include "partape/ad/preacc.hpp"
#include "partape/ad/runtime.hpp"
#include "partape/ad/tape.hpp"
#include "partape/parallel/parallel.hpp"
#include "partape/parallel/team.hpp"
