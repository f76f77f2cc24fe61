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
#include "msslab/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

struct OverrideFlags {
    std::string interpretation;
    std::string scheme;
    msslab::ConfigOverrides values;
};

void add_analysis_flags(CLI::App* cmd, OverrideFlags& flags)
{
    cmd->add_option("--interpretation", flags.interpretation, "ito or stratonovich")
        ->check(CLI::IsMember({"ito", "stratonovich"}));
    cmd->add_option("--power-tol", flags.values.power_tol, "power iteration tolerance");
    cmd->add_option("--power-max-iter", flags.values.power_max_iter,
                    "power iteration step limit");
    cmd->add_option("--quad-T", flags.values.quad_T, "quadrature horizon");
    cmd->add_option("--quad-dt", flags.values.quad_dt, "quadrature step");
}

void add_simulation_flags(CLI::App* cmd, OverrideFlags& flags)
{
    cmd->add_option("--dt", flags.values.dt, "time step");
    cmd->add_option("--T", flags.values.T, "horizon");
    cmd->add_option("--n-paths", flags.values.n_paths, "number of sample paths");
    cmd->add_option("--seed", flags.values.seed, "random seed");
    cmd->add_option("--scheme", flags.scheme, "state_space or convolution_sum")
        ->check(CLI::IsMember({"state_space", "convolution_sum"}));
}

msslab::ConfigOverrides resolve(const OverrideFlags& flags)
{
    msslab::ConfigOverrides out = flags.values;
    if (!flags.interpretation.empty()) {
        out.interpretation = msslab::parse_interpretation(flags.interpretation);
    }
    if (!flags.scheme.empty()) {
        out.scheme = msslab::parse_scheme(flags.scheme);
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Mean-square stability analysis of LTI systems with multiplicative noise"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    OverrideFlags flags;

    auto* analyze = app.add_subcommand("analyze", "stability verdict and steady state (JSON)");
    analyze->add_option("config", config_path, "problem config")->required();
    add_analysis_flags(analyze, flags);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble variance (CSV)");
    simulate->add_option("config", config_path, "problem config")->required();
    simulate->add_option("--out", out_path, "output CSV")->required();
    add_analysis_flags(simulate, flags);
    add_simulation_flags(simulate, flags);

    auto* trajectory = app.add_subcommand("trajectory", "covariance trajectory (CSV)");
    trajectory->add_option("config", config_path, "problem config")->required();
    trajectory->add_option("--out", out_path, "output CSV")->required();
    add_analysis_flags(trajectory, flags);
    add_simulation_flags(trajectory, flags);

    auto* compare = app.add_subcommand("compare", "Ito vs Stratonovich side by side (JSON)");
    compare->add_option("config", config_path, "problem config")->required();
    add_analysis_flags(compare, flags);
    add_simulation_flags(compare, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : msslab::cli::kExitUsage;
    }

    const msslab::ConfigOverrides overrides = resolve(flags);
    if (analyze->parsed()) {
        return msslab::cli::run_analyze(config_path, overrides, std::cout, std::cerr);
    }
    if (simulate->parsed()) {
        return msslab::cli::run_simulate(config_path, out_path, overrides, std::cerr);
    }
    if (trajectory->parsed()) {
        return msslab::cli::run_trajectory(config_path, out_path, overrides, std::cerr);
    }
    return msslab::cli::run_compare(config_path, overrides, std::cout, std::cerr);
}
