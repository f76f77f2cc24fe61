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

#include "msslab/analysis.hpp"
#include "msslab/linalg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace msslab::cli {

using nlohmann::json;

namespace {

constexpr int kReportVersion = 1;
constexpr std::size_t kMaxCsvRows = 2000;

json number_or_null(double value)
{
    return std::isfinite(value) ? json(value) : json(nullptr);
}

json cov_json(const Matrix& m)
{
    return matrix_to_json(m);
}

// Dense radius of the same operator the power iteration ran on, or null when
// no dense form is available (unstable block, too large).
json dense_rho(const MssVerdict& verdict, const NoiseSpec& noise,
               const AnalysisOptions& options)
{
    if (!verdict.h2_finite) {
        return nullptr;
    }
    try {
        if (verdict.forward_block.has_realization()) {
            return number_or_null(spectral_radius_dense(lgo_matrix_kronecker(
                verdict.forward_block, noise.gamma_cov(), Interpretation::Ito)));
        }
        const LoopGainOperator op = make_lgo(verdict.forward_block, noise.gamma_cov(),
                                             Interpretation::Ito, Backend::Quadrature,
                                             options.quadrature);
        const Index n = op.dim();
        if (n * n > 256) {
            return nullptr;
        }
        Matrix k(n * n, n * n);
        for (Index j = 0; j < n * n; ++j) {
            Matrix basis = Matrix::Zero(n, n);
            basis(j % n, j / n) = 1.0;
            k.col(j) = linalg::vec(op.apply(basis));
        }
        return number_or_null(spectral_radius_dense(k));
    } catch (const Error&) {
        return nullptr;
    }
}

json verdict_json(const MssVerdict& verdict, const NoiseSpec& noise,
                  const AnalysisOptions& options)
{
    json out;
    out["interpretation"] = std::string(to_string(verdict.interpretation));
    out["mss"] = verdict.mss;
    out["h2_finite"] = verdict.h2_finite;
    out["h2_squared"] = number_or_null(verdict.h2_squared);
    out["rho"] = number_or_null(verdict.rho);
    out["rho_power"] = number_or_null(verdict.rho);
    out["rho_dense"] = dense_rho(verdict, noise, options);
    out["rho_backend"] = std::string(to_string(verdict.rho_backend));
    out["rho_truncated"] = verdict.rho_truncated;
    out["rho_from_dense_fallback"] = verdict.rho_from_dense_fallback;
    out["power_converged"] = verdict.power_converged;
    out["power_iterations"] = verdict.power_iterations;
    out["worst_case_cov"] = verdict.worst_case_cov.size() > 0
                                ? cov_json(verdict.worst_case_cov)
                                : json(nullptr);

    json warnings = json::array();
    if (verdict.rho_truncated) {
        warnings.push_back("forward block has infinite H2 norm; rho is from a finite-horizon "
                           "truncation");
    }
    if (!verdict.power_converged && !verdict.rho_from_dense_fallback) {
        warnings.push_back("power iteration did not converge");
    }
    out["warnings"] = std::move(warnings);

    if (verdict.steady_state) {
        out["steady_state"] = {
            {"input_cov", cov_json(verdict.steady_state->input_cov)},
            {"feedback_cov", cov_json(verdict.steady_state->feedback_cov)},
            {"output_cov", cov_json(verdict.steady_state->output_cov)},
        };
    } else {
        out["steady_state"] = nullptr;
    }
    return out;
}

json equivalent_system_json(const ProblemConfig& config, const MssVerdict& verdict)
{
    if (!verdict.forward_block.has_realization()) {
        return nullptr;
    }
    json out = {
        {"A", matrix_to_json(verdict.forward_block.a())},
        {"B", matrix_to_json(verdict.forward_block.b())},
        {"C", matrix_to_json(verdict.forward_block.c())},
    };
    out["G"] = config.interpretation == Interpretation::Stratonovich
                   ? matrix_to_json(stratonovich_correction_gain(config.system,
                                                                 config.noise.gamma_cov()))
                   : json(nullptr);
    return out;
}

// Same downsampling as the simulation ensemble: a fixed stride plus the last step.
std::vector<std::size_t> csv_rows(std::size_t steps)
{
    const std::size_t stride = std::max<std::size_t>(1, (steps + kMaxCsvRows - 3) /
                                                            (kMaxCsvRows - 2));
    std::vector<std::size_t> rows;
    for (std::size_t k = 0; k <= steps; k += stride) {
        rows.push_back(k);
    }
    if (rows.back() != steps) {
        rows.push_back(steps);
    }
    return rows;
}

SimulationConfig simulation_or_default(const ProblemConfig& config)
{
    SimulationConfig sim = config.simulation.value_or(SimulationConfig{});
    sim.interpretation = config.interpretation;
    return sim;
}

struct SimulationColumn {
    std::string label;
    std::string interpretation;
    SimulationEnsemble ensemble;
    double predicted = 0.0;
};

// Mean-square growth over the last third of the horizon, judged against the
// sampling error of the two estimates.
bool variance_growing(const SimulationEnsemble& e)
{
    if (e.times.size() < 3) {
        return false;
    }
    const double t_end = e.times.back();
    const auto it = std::lower_bound(e.times.begin(), e.times.end(), t_end * 2.0 / 3.0);
    const std::size_t r0 = static_cast<std::size_t>(it - e.times.begin());
    const std::size_t r1 = e.times.size() - 1;
    if (r0 >= r1) {
        return false;
    }
    const double se = std::hypot(e.stderr_y[r0], e.stderr_y[r1]);
    if (!std::isfinite(se) || !std::isfinite(e.var_y[r1])) {
        return e.n_diverged.back() > 0;
    }
    return e.var_y[r1] - e.var_y[r0] > 3.0 * se;
}

json simulation_json(const SimulationColumn& column)
{
    const SimulationEnsemble& e = column.ensemble;
    const bool growing = variance_growing(e);
    return {
        {"description", column.label},
        {"interpretation", column.interpretation},
        {"T", e.times.back()},
        {"var_y", number_or_null(e.var_y.back())},
        {"stderr_y", number_or_null(e.stderr_y.back())},
        {"var_y_predicted", number_or_null(column.predicted)},
        {"n_paths", e.n_paths},
        {"n_alive", e.n_alive.back()},
        {"n_diverged", e.n_diverged.back()},
        {"variance_growing", growing},
        {"diverged", e.n_diverged.back() > 0 || growing},
    };
}

double final_output_trace(const ProblemConfig& config, Interpretation interpretation,
                          const SimulationConfig& sim)
{
    const CovarianceTrajectory traj = covariance_trajectory(config.system, config.noise,
                                                            interpretation, sim.horizon, sim.dt);
    return traj.output_cov.back().trace();
}

std::string csv_line(std::initializer_list<std::string> fields)
{
    std::string line;
    for (const std::string& f : fields) {
        if (!line.empty()) {
            line += ',';
        }
        line += f;
    }
    line += '\n';
    return line;
}

void write_file(const std::filesystem::path& path, const std::string& body)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open output file " + path.string());
    }
    out << body;
    out.flush();
    if (!out) {
        throw Error(ErrorCode::IoError, "failed writing " + path.string());
    }
}

// Runs `body`, translating every failure into a diagnostic and an exit code.
template <typename Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "msslab: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        err << "msslab: internal error: " << e.what() << '\n';
        return kExitSoftware;
    }
}

// Output-side failures are reported separately from a missing config file.
int write_or_fail(const std::filesystem::path& path, const std::string& body, std::ostream& err)
{
    try {
        write_file(path, body);
    } catch (const Error& e) {
        err << "msslab: " << e.what() << '\n';
        return kExitCantCreate;
    }
    return kExitOk;
}

bool env_threads(std::ostream& err, unsigned& threads)
{
    try {
        threads = threads_from_env();
    } catch (const Error& e) {
        err << "msslab: " << e.what() << '\n';
        return false;
    }
    return true;
}

} // namespace

int exit_code_for(const Error& error)
{
    switch (error.code()) {
    case ErrorCode::IoError:
        return kExitNoInput;
    case ErrorCode::ConfigParse:
    case ErrorCode::SchemaViolation:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFinite:
    case ErrorCode::OffGrid:
    case ErrorCode::TooFewSamples:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NotPsd:
    case ErrorCode::NonPositiveDt:
    case ErrorCode::BadQuadrature:
    case ErrorCode::StratonovichNeedsRealization:
    case ErrorCode::NeedsRealization:
    case ErrorCode::UnsupportedScheme:
    case ErrorCode::BadGrid:
    case ErrorCode::InvalidArgument:
        return kExitDataError;
    case ErrorCode::NotHurwitz:
    case ErrorCode::SingularSystem:
    case ErrorCode::NoConvergence:
    case ErrorCode::SingularKroneckerSum:
    case ErrorCode::NotMss:
    case ErrorCode::SingularFixedPoint:
    case ErrorCode::MidpointNoConvergence:
    case ErrorCode::InsufficientPaths:
        return kExitSoftware;
    }
    return kExitSoftware;
}

std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (std::isinf(value)) {
        return value > 0 ? "inf" : "-inf";
    }
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

unsigned threads_from_env()
{
    const char* raw = std::getenv("MSSLAB_THREADS");
    if (raw == nullptr || *raw == '\0') {
        return 0;
    }
    const std::string_view text(raw);
    unsigned value = 0;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    "MSSLAB_THREADS must be a non-negative integer, got \"" + std::string(text) +
                        "\"");
    }
    return value;
}

ProblemConfig load_with_overrides(const std::filesystem::path& path,
                                  const ConfigOverrides& overrides)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open config file " + path.string());
    }
    json document;
    try {
        document = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigParse, path.string() + ": " + e.what());
    }
    apply_overrides(document, overrides);
    return parse_config(document);
}

json analyze_report(const ProblemConfig& config)
{
    const MssVerdict verdict =
        analyze(config.system, config.noise, config.interpretation, config.analysis);
    json report;
    report["report_version"] = kReportVersion;
    report["command"] = "analyze";
    report["verdict"] = verdict_json(verdict, config.noise, config.analysis);
    report["equivalent_system"] = equivalent_system_json(config, verdict);
    return report;
}

json compare_report(const ProblemConfig& config, unsigned threads)
{
    if (!config.system.has_realization()) {
        throw Error(ErrorCode::SchemaViolation,
                    "system: compare needs a state-space system (A, B, C)");
    }
    const MssVerdict ito = analyze(config.system, config.noise, Interpretation::Ito,
                                   config.analysis);
    const MssVerdict strat = analyze(config.system, config.noise, Interpretation::Stratonovich,
                                     config.analysis);

    SimulationConfig sim = simulation_or_default(config);
    sim.threads = threads;

    SimulationColumn ito_of_h;
    ito_of_h.label = "Ito simulation of the equivalent system (A_S, B, C)";
    ito_of_h.interpretation = "ito";
    {
        SimulationConfig c = sim;
        c.interpretation = Interpretation::Ito;
        const LtiSystem h = equivalent_ito_system(config.system, config.noise.gamma_cov());
        ito_of_h.ensemble = run_ensemble(h, config.noise, c);
    }
    SimulationColumn strat_of_m;
    strat_of_m.label = "Stratonovich simulation of the original system (A, B, C)";
    strat_of_m.interpretation = "stratonovich";
    {
        SimulationConfig c = sim;
        c.interpretation = Interpretation::Stratonovich;
        c.scheme = Scheme::StateSpaceStep;
        strat_of_m.ensemble = run_ensemble(config.system, config.noise, c);
    }
    const double predicted = final_output_trace(config, Interpretation::Stratonovich, sim);
    ito_of_h.predicted = predicted;
    strat_of_m.predicted = predicted;

    const SimulationEnsemble& a = ito_of_h.ensemble;
    const SimulationEnsemble& b = strat_of_m.ensemble;
    const double difference = std::abs(a.var_y.back() - b.var_y.back());
    const double tolerance = 3.0 * std::hypot(a.stderr_y.back(), b.stderr_y.back());
    const bool pass = std::isfinite(difference) && std::isfinite(tolerance) &&
                      difference <= tolerance;

    json report;
    report["report_version"] = kReportVersion;
    report["command"] = "compare";
    report["analysis"] = {
        {"ito", verdict_json(ito, config.noise, config.analysis)},
        {"stratonovich", verdict_json(strat, config.noise, config.analysis)},
    };
    report["simulation"] = {
        {"ito_of_equivalent", simulation_json(ito_of_h)},
        {"stratonovich_of_original", simulation_json(strat_of_m)},
    };
    report["simulation_settings"] = {
        {"dt", sim.dt},
        {"T", sim.horizon},
        {"n_paths", sim.n_paths},
        {"seed", sim.seed},
    };
    report["agreement"] = {
        {"pass", pass},
        {"difference", number_or_null(difference)},
        {"tolerance", number_or_null(tolerance)},
    };
    return report;
}

std::string simulate_csv(const ProblemConfig& config, unsigned threads)
{
    if (!config.simulation) {
        throw Error(ErrorCode::SchemaViolation, "simulation: required by the simulate command");
    }
    SimulationConfig sim = *config.simulation;
    sim.interpretation = config.interpretation;
    sim.threads = threads;
    sim.record_every = 0;
    const SimulationEnsemble ensemble = run_ensemble(config.system, config.noise, sim);
    const CovarianceTrajectory traj = covariance_trajectory(
        config.system, config.noise, config.interpretation, sim.horizon, sim.dt);

    std::string body = "t,var_y_empirical,stderr_y,var_y_predicted,n_diverged\n";
    for (std::size_t r = 0; r < ensemble.times.size(); ++r) {
        const auto k = static_cast<std::size_t>(std::llround(ensemble.times[r] / sim.dt));
        const double predicted = k < traj.output_cov.size()
                                     ? traj.output_cov[k].trace()
                                     : std::numeric_limits<double>::quiet_NaN();
        body += csv_line({format_double(ensemble.times[r]), format_double(ensemble.var_y[r]),
                          format_double(ensemble.stderr_y[r]), format_double(predicted),
                          std::to_string(ensemble.n_diverged[r])});
    }
    return body;
}

std::string trajectory_csv(const ProblemConfig& config)
{
    const SimulationConfig sim = simulation_or_default(config);
    const CovarianceTrajectory traj = covariance_trajectory(
        config.system, config.noise, config.interpretation, sim.horizon, sim.dt);

    std::string body = "t,trace_U,trace_R,trace_Y\n";
    for (const std::size_t k : csv_rows(traj.times.size() - 1)) {
        body += csv_line({format_double(traj.times[k]), format_double(traj.input_cov[k].trace()),
                          format_double(traj.feedback_cov[k].trace()),
                          format_double(traj.output_cov[k].trace())});
    }
    return body;
}

int run_analyze(const std::filesystem::path& config_path, const ConfigOverrides& overrides,
                std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const ProblemConfig config = load_with_overrides(config_path, overrides);
        const json report = analyze_report(config);
        out << report.dump(2) << '\n';
        return report["verdict"]["mss"].get<bool>() ? kExitOk : kExitNotMss;
    });
}

int run_simulate(const std::filesystem::path& config_path, const std::filesystem::path& out_path,
                 const ConfigOverrides& overrides, std::ostream& err)
{
    unsigned threads = 0;
    if (!env_threads(err, threads)) {
        return kExitUsage;
    }
    return guarded(err, [&] {
        const ProblemConfig config = load_with_overrides(config_path, overrides);
        return write_or_fail(out_path, simulate_csv(config, threads), err);
    });
}

int run_trajectory(const std::filesystem::path& config_path,
                   const std::filesystem::path& out_path, const ConfigOverrides& overrides,
                   std::ostream& err)
{
    return guarded(err, [&] {
        const ProblemConfig config = load_with_overrides(config_path, overrides);
        return write_or_fail(out_path, trajectory_csv(config), err);
    });
}

int run_compare(const std::filesystem::path& config_path, const ConfigOverrides& overrides,
                std::ostream& out, std::ostream& err)
{
    unsigned threads = 0;
    if (!env_threads(err, threads)) {
        return kExitUsage;
    }
    return guarded(err, [&] {
        const ProblemConfig config = load_with_overrides(config_path, overrides);
        const json report = compare_report(config, threads);
        out << report.dump(2) << '\n';
        return report["agreement"]["pass"].get<bool>() ? kExitOk : kExitDisagree;
    });
}

} // namespace msslab::cli
