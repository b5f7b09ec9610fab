// Copyright 2026 The Gradeline Authors.
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

#ifndef GRADELINE_CLI_HPP_
#define GRADELINE_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace gradeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInfrastructure = 2;
inline constexpr int kExitUsage = 64;

// Runs the command line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Exit code for the exception currently being handled.
int exit_code_for_current_exception(std::ostream& err);

}  // namespace gradeline

#endif  // GRADELINE_CLI_HPP_
