/*
 * Copyright 2026 The GEL Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEL_CLI_H_
#define GEL_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace gel {

// Process exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitIo = 3,
  kExitValidation = 4,
  kExitTolerance = 5,
};

// Runs the command line `args` (program name excluded), writing the human
// report to `out` and diagnostics to `err`. Returns an ExitCode.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gel

#endif  // GEL_CLI_H_
