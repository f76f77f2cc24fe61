/*
 Copyright 2026 The msslab Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#ifndef MSSLAB_CLI_HPP
#define MSSLAB_CLI_HPP

#include "msslab/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace msslab::cli {

/// Process exit codes. Anything >= 64 follows the sysexits convention.
enum ExitCode : int {
    kExitOk = 0,          ///< success; analyze: MSS; compare: agreement
    kExitNotMss = 3,      ///< analyze: not mean-square stable
    kExitDisagree = 4,    ///< compare: simulations disagree
    kExitUsage = 64,      ///< bad command line or MSSLAB_THREADS
    kExitDataError = 65,  ///< config parse or schema error, invalid problem data
    kExitNoInput = 66,    ///< config file missing or unreadable
    kExitSoftware = 70,   ///< numerical failure during the computation
    kExitCantCreate = 73, ///< output file cannot be written
};

/// Maps a library error to its exit code.
int exit_code_for(const Error& error);

/// Shortest decimal that round-trips to the same double ("nan", "inf" and
/// "-inf" for non-finite values).
std::string format_double(double value);

/// Thread cap from MSSLAB_THREADS: unset or "0" means automatic. Throws
/// InvalidArgument for anything but a non-negative integer.
unsigned threads_from_env();

/// Reads the config file, applies the overrides, then validates.
ProblemConfig load_with_overrides(const std::filesystem::path& path,
                                  const ConfigOverrides& overrides);

/// Report documents; see schemas/report.schema.json.
nlohmann::json analyze_report(const ProblemConfig& config);
nlohmann::json compare_report(const ProblemConfig& config, unsigned threads);

/// CSV bodies, header line included.
std::string simulate_csv(const ProblemConfig& config, unsigned threads);
std::string trajectory_csv(const ProblemConfig& config);

/// Command entry points. Reports go to `out`, diagnostics to `err`; the
/// return value is the process exit code. No exception escapes.
int run_analyze(const std::filesystem::path& config_path, const ConfigOverrides& overrides,
                std::ostream& out, std::ostream& err);
int run_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
                 const ConfigOverrides& overrides, std::ostream& err);
int run_trajectory(const std::filesystem::path& config_path,
                   const std::filesystem::path& out_path, const ConfigOverrides& overrides,
                   std::ostream& err);
int run_compare(const std::filesystem::path& config_path, const ConfigOverrides& overrides,
                std::ostream& out, std::ostream& err);

} // namespace msslab::cli

#endif // MSSLAB_CLI_HPP
