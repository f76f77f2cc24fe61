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
#include "msslab/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

namespace msslab {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& path, const std::string& message)
{
    throw Error(ErrorCode::SchemaViolation, path + ": " + message);
}

std::string join(const std::string& parent, const std::string& key)
{
    return parent.empty() ? key : parent + "." + key;
}

void require_object(const json& node, const std::string& path,
                    std::initializer_list<const char*> allowed)
{
    if (!node.is_object()) {
        violation(path.empty() ? "(root)" : path, "expected an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& item : node.items()) {
        if (keys.count(item.key()) == 0) {
            violation(join(path, item.key()), "unknown field");
        }
    }
}

const json& require_field(const json& node, const std::string& path, const char* key)
{
    if (!node.contains(key)) {
        violation(join(path, key), "required field is missing");
    }
    return node.at(key);
}

double number(const json& node, const std::string& path)
{
    if (!node.is_number()) {
        violation(path, "expected a number");
    }
    const double value = node.get<double>();
    if (!std::isfinite(value)) {
        violation(path, "must be finite");
    }
    return value;
}

double positive(const json& node, const std::string& path)
{
    const double value = number(node, path);
    if (!(value > 0.0)) {
        violation(path, "must be > 0");
    }
    return value;
}

std::uint64_t non_negative_integer(const json& node, const std::string& path)
{
    if (node.is_number_unsigned()) {
        return node.get<std::uint64_t>();
    }
    if (node.is_number_integer() && node.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(node.get<std::int64_t>());
    }
    violation(path, "expected a non-negative integer");
}

Matrix matrix(const json& node, const std::string& path)
{
    if (!node.is_array() || node.empty()) {
        violation(path, "expected a non-empty array of rows");
    }
    const std::size_t rows = node.size();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::string row_path = path + "[" + std::to_string(i) + "]";
        if (!node[i].is_array() || node[i].empty()) {
            violation(row_path, "expected a non-empty array of numbers");
        }
        if (i == 0) {
            cols = node[i].size();
        } else if (node[i].size() != cols) {
            violation(row_path, "row has " + std::to_string(node[i].size()) +
                                    " entries, expected " + std::to_string(cols));
        }
    }
    Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            out(static_cast<Index>(i), static_cast<Index>(j)) =
                number(node[i][j], path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]");
        }
    }
    return out;
}

std::string shape(const Matrix& m)
{
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

LtiSystem parse_system(const json& node)
{
    const std::string path = "system";
    require_object(node, path, {"A", "B", "C", "impulse_samples"});
    const bool state_space = node.contains("A") || node.contains("B") || node.contains("C");
    const bool sampled = node.contains("impulse_samples");
    if (state_space == sampled) {
        violation(path, "exactly one of {A, B, C} or impulse_samples must be given");
    }

    if (sampled) {
        const std::string sp = "system.impulse_samples";
        const json& samples = node.at("impulse_samples");
        require_object(samples, sp, {"dt", "values"});
        const double dt = positive(require_field(samples, sp, "dt"), sp + ".dt");
        const json& values = require_field(samples, sp, "values");
        if (!values.is_array() || values.size() < 2) {
            violation(sp + ".values", "expected an array of at least two matrices");
        }
        std::vector<Matrix> out;
        for (std::size_t k = 0; k < values.size(); ++k) {
            out.push_back(matrix(values[k], sp + ".values[" + std::to_string(k) + "]"));
            if (out.back().rows() != out.front().rows() || out.back().cols() != out.front().cols()) {
                violation(sp + ".values[" + std::to_string(k) + "]",
                          "shape " + shape(out.back()) + " differs from " + shape(out.front()));
            }
        }
        return LtiSystem::sampled(dt, std::move(out));
    }

    Matrix a = matrix(require_field(node, path, "A"), "system.A");
    Matrix b = matrix(require_field(node, path, "B"), "system.B");
    Matrix c = matrix(require_field(node, path, "C"), "system.C");
    if (a.rows() != a.cols()) {
        violation("system.A", "must be square, got " + shape(a));
    }
    if (b.rows() != a.rows()) {
        violation("system.B", "has " + std::to_string(b.rows()) + " rows, A has " +
                                  std::to_string(a.rows()));
    }
    if (c.cols() != a.cols()) {
        violation("system.C", "has " + std::to_string(c.cols()) + " columns, A has " +
                                  std::to_string(a.cols()));
    }
    return LtiSystem::state_space(std::move(a), std::move(b), std::move(c));
}

AnalysisOptions parse_analysis(const json& node)
{
    const std::string path = "analysis";
    require_object(node, path, {"power_tol", "power_max_iter", "quad_T", "quad_dt"});
    AnalysisOptions options;
    if (node.contains("power_tol")) {
        options.power_tol = positive(node.at("power_tol"), "analysis.power_tol");
    }
    if (node.contains("power_max_iter")) {
        const auto iters = non_negative_integer(node.at("power_max_iter"), "analysis.power_max_iter");
        if (iters < 1 || iters > 100000000) {
            violation("analysis.power_max_iter", "must be in [1, 1e8]");
        }
        options.power_max_iter = static_cast<int>(iters);
    }
    if (node.contains("quad_T") != node.contains("quad_dt")) {
        violation(node.contains("quad_T") ? "analysis.quad_dt" : "analysis.quad_T",
                  "quad_T and quad_dt must be given together");
    }
    if (node.contains("quad_T")) {
        const double horizon = positive(node.at("quad_T"), "analysis.quad_T");
        const double step = positive(node.at("quad_dt"), "analysis.quad_dt");
        if (!(step < horizon)) {
            violation("analysis.quad_dt", "must be smaller than quad_T");
        }
        options.quadrature = QuadratureOptions{horizon, step};
    }
    return options;
}

SimulationConfig parse_simulation(const json& node, Interpretation interpretation)
{
    const std::string path = "simulation";
    require_object(node, path, {"dt", "T", "n_paths", "seed", "scheme"});
    SimulationConfig config;
    config.interpretation = interpretation;
    config.dt = positive(require_field(node, path, "dt"), "simulation.dt");
    config.horizon = positive(require_field(node, path, "T"), "simulation.T");
    if (!(config.horizon >= config.dt)) {
        violation("simulation.T", "must be at least simulation.dt");
    }
    const auto n_paths = non_negative_integer(require_field(node, path, "n_paths"),
                                              "simulation.n_paths");
    if (n_paths < 1) {
        violation("simulation.n_paths", "must be >= 1");
    }
    config.n_paths = static_cast<std::size_t>(n_paths);
    if (node.contains("seed")) {
        config.seed = non_negative_integer(node.at("seed"), "simulation.seed");
    }
    if (node.contains("scheme")) {
        const json& scheme = node.at("scheme");
        if (!scheme.is_string()) {
            violation("simulation.scheme", "expected a string");
        }
        try {
            config.scheme = parse_scheme(scheme.get<std::string>());
        } catch (const Error& e) {
            violation("simulation.scheme", e.what());
        }
    }
    return config;
}

} // namespace

Interpretation parse_interpretation(std::string_view text)
{
    if (text == "ito") {
        return Interpretation::Ito;
    }
    if (text == "stratonovich") {
        return Interpretation::Stratonovich;
    }
    throw Error(ErrorCode::InvalidArgument,
                "interpretation must be \"ito\" or \"stratonovich\", got \"" + std::string(text) +
                    "\"");
}

Scheme parse_scheme(std::string_view text)
{
    if (text == "state_space") {
        return Scheme::StateSpaceStep;
    }
    if (text == "convolution_sum") {
        return Scheme::ConvolutionSum;
    }
    throw Error(ErrorCode::InvalidArgument,
                "scheme must be \"state_space\" or \"convolution_sum\", got \"" +
                    std::string(text) + "\"");
}

std::string_view to_string(Scheme scheme)
{
    return scheme == Scheme::StateSpaceStep ? "state_space" : "convolution_sum";
}

std::string_view to_string(Backend backend)
{
    return backend == Backend::Lyapunov ? "lyapunov" : "quadrature";
}

json matrix_to_json(const Matrix& m)
{
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) {
            row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ProblemConfig parse_config(const json& document)
{
    require_object(document, "",
                   {"system", "gamma_cov", "w_cov", "interpretation", "analysis", "simulation"});

    ProblemConfig config;
    config.system = parse_system(require_field(document, "", "system"));

    const Matrix gamma = matrix(require_field(document, "", "gamma_cov"), "gamma_cov");
    const Matrix w = matrix(require_field(document, "", "w_cov"), "w_cov");
    const Index n = config.system.n_inputs();
    if (gamma.rows() != gamma.cols()) {
        violation("gamma_cov", "must be square, got " + shape(gamma));
    }
    if (w.rows() != w.cols()) {
        violation("w_cov", "must be square, got " + shape(w));
    }
    if (config.system.n_outputs() != n) {
        violation("system", "feedback needs as many outputs as inputs, got " +
                                std::to_string(config.system.n_outputs()) + " outputs and " +
                                std::to_string(n) + " inputs");
    }
    if (gamma.rows() != n) {
        violation("gamma_cov", "must be " + std::to_string(n) + "x" + std::to_string(n) +
                                   " to match the system inputs, got " + shape(gamma));
    }
    if (w.rows() != n) {
        violation("w_cov", "must be " + std::to_string(n) + "x" + std::to_string(n) +
                               " to match the system inputs, got " + shape(w));
    }
    try {
        config.noise = validate_noise(gamma, w);
    } catch (const Error& e) {
        const std::string message = e.what();
        violation(message.find("w_cov") != std::string::npos ? "w_cov" : "gamma_cov", message);
    }

    if (document.contains("interpretation")) {
        const json& interp = document.at("interpretation");
        if (!interp.is_string()) {
            violation("interpretation", "expected a string");
        }
        try {
            config.interpretation = parse_interpretation(interp.get<std::string>());
        } catch (const Error& e) {
            violation("interpretation", e.what());
        }
    }
    if (config.interpretation == Interpretation::Stratonovich && !config.system.has_realization()) {
        violation("interpretation", "stratonovich needs a state-space system (A, B, C)");
    }
    if (document.contains("analysis")) {
        config.analysis = parse_analysis(document.at("analysis"));
    }
    if (document.contains("simulation")) {
        config.simulation = parse_simulation(document.at("simulation"), config.interpretation);
    }
    return config;
}

ProblemConfig load_config(const std::filesystem::path& path)
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
    return parse_config(document);
}

void apply_overrides(json& document, const ConfigOverrides& o)
{
    if (!document.is_object()) {
        return;
    }
    auto section = [&](const char* key) -> json& {
        if (!document.contains(key)) {
            document[key] = json::object();
        }
        return document[key];
    };
    if (o.interpretation) {
        document["interpretation"] = std::string(to_string(*o.interpretation));
    }
    if (o.power_tol) {
        section("analysis")["power_tol"] = *o.power_tol;
    }
    if (o.power_max_iter) {
        section("analysis")["power_max_iter"] = *o.power_max_iter;
    }
    if (o.quad_T) {
        section("analysis")["quad_T"] = *o.quad_T;
    }
    if (o.quad_dt) {
        section("analysis")["quad_dt"] = *o.quad_dt;
    }
    if (o.dt) {
        section("simulation")["dt"] = *o.dt;
    }
    if (o.T) {
        section("simulation")["T"] = *o.T;
    }
    if (o.n_paths) {
        section("simulation")["n_paths"] = *o.n_paths;
    }
    if (o.seed) {
        section("simulation")["seed"] = *o.seed;
    }
    if (o.scheme) {
        section("simulation")["scheme"] = std::string(to_string(*o.scheme));
    }
}

} // namespace msslab
