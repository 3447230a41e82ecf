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

// Records a small parallel computation, preaccumulates one subexpression and
// evaluates the tape in parallel.

#include <cmath>
#include <cstdio>
#include <vector>

#include "partape/ad.hpp"

using namespace partape;

int main() {
  configure(Scheme::Linear);
  const int threads = 2;
  std::vector<ActiveScalar> x = {0.5, 1.5, -0.25, 2.0};
  std::vector<ActiveScalar> y(x.size());
  ActiveScalar f;

  start_recording();
  for (auto& v : x) register_input(v);
  const TapeSetPosition begin = get_position();

  parallel_region(threads, [&](const Team& team) {
    worksharing_for(team, x.size(), [&](std::size_t i) {
      // sin(x_i) * exp(x_i / 2) collapses to one statement with one argument.
      auto session = preacc_start({x[i]});
      ActiveScalar t = sin(x[i]) * exp(x[i] / 2.0);
      preacc_finish(session, {t});
      y[i] = t * t;
    });
    master_section(team, [&] {
      ActiveScalar s = 0.0;
      for (const auto& v : y) s += v;
      f = s;
    });
  });
  register_output(f);
  const TapeSetPosition end = get_position();
  stop_recording();

  const TapeStats st = tape_stats();
  std::printf("statements %zu, arguments %zu, bytes %zu\n", st.statements, st.arg_entries,
              st.bytes);

  resize_adjoints();
  {
    UseAdjoints use;
    set_derivative(f.identifier(), 1.0);
  }
  parallel_evaluate(begin, end);
  UseAdjoints use;
  std::printf("f = %.12f\n", f.value());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i].value();
    const double t = std::sin(xi) * std::exp(xi / 2.0);
    const double dt = (std::cos(xi) + 0.5 * std::sin(xi)) * std::exp(xi / 2.0);
    std::printf("df/dx%zu = % .12f  (analytic % .12f)\n", i, get_derivative(x[i].identifier()),
                2.0 * t * dt);
  }
  return 0;
}
