// Copyright 2026 The PIM Toolkit Authors
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

#ifndef PIM_CLI_HPP_
#define PIM_CLI_HPP_

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace pim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitCheckpoint = 2;  // unreadable or corrupt checkpoint

// Runs one `pim` command. `args` excludes the program name. Usage errors
// return CLI11's exit codes; --help returns 0.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// One score per non-blank, non-'#' line; the last whitespace-separated token
// of each line is the value, so "name value" lines work too.
std::vector<double> read_score_file(const std::filesystem::path& path);

}  // namespace pim::cli

#endif  // PIM_CLI_HPP_
