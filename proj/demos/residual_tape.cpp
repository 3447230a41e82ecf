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

// Tape size of one residual evaluation for each identifier scheme and
// preaccumulation mode.
//
//   residual_tape [NX NY]

#include <cstdio>
#include <cstdlib>

#include "partape/bench/run.hpp"

using namespace partape;

int main(int argc, char** argv) {
  bench::BenchConfig c;
  if (argc == 3) {
    c.nx = std::atoi(argv[1]);
    c.ny = std::atoi(argv[2]);
  }
  std::printf("%-8s %-8s %12s %12s %12s\n", "scheme", "preacc", "statements", "arguments",
              "bytes");
  for (Scheme s : {Scheme::Linear, Scheme::Reuse}) {
    for (PreaccMode p : {PreaccMode::On, PreaccMode::Hybrid, PreaccMode::Off}) {
      c.scheme = s;
      c.preacc = p;
      const TapeStats st = bench::residual_tape_stats(c);
      std::printf("%-8s %-8s %12zu %12zu %12zu\n", to_string(s), to_string(p), st.statements,
                  st.arg_entries, st.bytes);
    }
  }
  return 0;
}
