// Copyright 2026 The Bucketfeed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bucketfeed {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Environment variable naming the directory searched for relative config and
/// scenario paths that do not exist as given.
inline constexpr const char* kConfigDirEnv = "BUCKETFEED_CONFIG_DIR";

/// Runs one command line (without the program name) and returns its exit
/// code: kExitOk, kExitRuntime for a failed run or kExitConfig for a bad
/// config or command line.
///
/// Subcommands: run, sweep, cost, reconcile and calibrate. Every subcommand
/// that simulates echoes its effective config, which can be fed back through
/// --config to reproduce the output.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bucketfeed
