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
#ifndef MSSLAB_CONFIG_HPP
#define MSSLAB_CONFIG_HPP

#include "msslab/analysis.hpp"
#include "msslab/noise.hpp"
#include "msslab/simulate.hpp"
#include "msslab/system.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace msslab {

/// A problem file: see schemas/problem_config.schema.json.
struct ProblemConfig {
    LtiSystem system;
    NoiseSpec noise;
    Interpretation interpretation = Interpretation::Ito;
    AnalysisOptions analysis;
    std::optional<SimulationConfig> simulation;
};

/// Validates the document against the config schema. Failures throw
/// SchemaViolation with the offending field path first, e.g. "system.A: ...".
ProblemConfig parse_config(const nlohmann::json& document);

/// Reads and parses a file. IoError if unreadable, ConfigParse on bad JSON.
ProblemConfig load_config(const std::filesystem::path& path);

/// Command-line overrides; each mirrors a config field and wins over it.
struct ConfigOverrides {
    std::optional<Interpretation> interpretation;
    std::optional<double> power_tol;
    std::optional<int> power_max_iter;
    std::optional<double> quad_T;
    std::optional<double> quad_dt;
    std::optional<double> dt;
    std::optional<double> T;
    std::optional<std::size_t> n_paths;
    std::optional<std::uint64_t> seed;
    std::optional<Scheme> scheme;
};

/// Applies overrides to the raw document before validation, so overridden
/// values go through the same schema checks as file values.
void apply_overrides(nlohmann::json& document, const ConfigOverrides& overrides);

Interpretation parse_interpretation(std::string_view text);
Scheme parse_scheme(std::string_view text);
std::string_view to_string(Scheme scheme);
std::string_view to_string(Backend backend);

nlohmann::json matrix_to_json(const Matrix& m);

} // namespace msslab

#endif // MSSLAB_CONFIG_HPP
