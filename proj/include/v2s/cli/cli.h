// Copyright (c) 2026 The v2s Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef V2S_CLI_CLI_H_
#define V2S_CLI_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace v2s {

// Entry point of the `v2s` tool. `args` excludes the program name. Returns
// the process exit code: 0 ok, 1 validation/config, 2 training, 3 numerical.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace v2s

#endif  // V2S_CLI_CLI_H_
