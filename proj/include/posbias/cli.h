// Copyright 2026 The posbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Batch command-line interface: detect, simulate, rank, paths and
// equivalence.

#ifndef POSBIAS_CLI_H_
#define POSBIAS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace posbias {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // bad arguments or unparsable input
inline constexpr int kExitDimension = 2;  // |E| < 2|U| + |V|
inline constexpr int kExitNumerical = 3;  // solver failure
inline constexpr int kExitCheckFailed = 4;  // equivalence check failed

// Runs one command. `args` excludes the program name, e.g.
// {"detect", "--input", "data.csv"}.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace posbias

#endif  // POSBIAS_CLI_H_
