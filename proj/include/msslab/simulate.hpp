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
#ifndef MSSLAB_SIMULATE_HPP
#define MSSLAB_SIMULATE_HPP

#include "msslab/common.hpp"
#include "msslab/noise.hpp"
#include "msslab/system.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace msslab {

enum class Scheme {
    StateSpaceStep, ///< x_{k+1} = x_k + A x_k dt + B du_k, O(N) per path
    ConvolutionSum, ///< y_N = sum_{k<N} M(t_N - t_k) du_k, O(N^2) per path
};

struct SimulationConfig {
    double dt = 1e-3;
    double horizon = 10.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    Interpretation interpretation = Interpretation::Ito;
    Scheme scheme = Scheme::StateSpaceStep;

    /// Ensemble statistics are kept every `record_every` steps (plus the final
    /// step). 0 picks the smallest stride giving at most 2000 rows.
    std::size_t record_every = 0;
    /// Worker threads for run_ensemble; 0 means hardware concurrency.
    unsigned threads = 0;
    /// Number of trailing increments per path kept for the independence
    /// diagnostics; 0 disables them.
    std::size_t increment_window = 0;
};

/// Throws InvalidArgument unless dt > 0, T >= dt and n_paths >= 1.
void validate(const SimulationConfig& config);

/// Number of steps N on t_k = k dt with N dt <= T.
std::size_t step_count(const SimulationConfig& config);

/// Pre-drawn Wiener increments for one path, step k covering [t_k, t_{k+1}].
struct NoisePath {
    double dt = 0.0;
    std::vector<Vector> gamma;
    std::vector<Vector> w;

    std::size_t steps() const { return gamma.size(); }
};

NoisePath draw_noise_path(const NoiseSpec& noise, double dt, std::size_t steps, Rng& rng);

/// Sums groups of `factor` consecutive increments: the same Brownian path on a
/// grid `factor` times coarser.
NoisePath coarsen(const NoisePath& fine, std::size_t factor);

/// One simulated path: y_k for k = 0..N, increments du_k and dr_k for
/// k = 0..N-1. A diverged path is truncated at the step where it overflowed.
struct PathRecord {
    double dt = 0.0;
    std::vector<Vector> y;
    std::vector<Vector> u_increments;
    std::vector<Vector> r_increments;
    bool diverged = false;
};

/// Overflow threshold on the state (or output) infinity norm.
inline constexpr double kDivergenceThreshold = 1e150;

/// Left-point (Ito) closed loop: dr_k = dGamma_k y_k, du_k = dw_k + dr_k.
PathRecord simulate_path_ito(const LtiSystem& system, const NoisePath& noise, Scheme scheme);
PathRecord simulate_path_ito(const LtiSystem& system, const NoiseSpec& noise,
                             const SimulationConfig& config, Rng& rng);

/// Midpoint (Stratonovich) closed loop: dr_k = dGamma_k (y_k + y_{k+1}) / 2,
/// resolved per step by fixed-point iteration (relative tol 1e-10, at most 50
/// sweeps; MidpointNoConvergence otherwise). State-space scheme only.
PathRecord simulate_path_stratonovich(const LtiSystem& system, const NoisePath& noise);
PathRecord simulate_path_stratonovich(const LtiSystem& system, const NoiseSpec& noise,
                                      const SimulationConfig& config, Rng& rng);

/// Running quadratic variation <y>(t_k) = sum_{j<k} |y_{j+1} - y_j|^2.
std::vector<double> quadratic_variation(std::span<const Vector> path, double dt);

struct IndependenceReport {
    double max_abs_corr = 0.0;
    /// Largest |correlation| per lag, index 0 is lag 1.
    std::vector<double> per_lag_max;
    std::size_t n_paths = 0;
    /// 5 / sqrt(n_paths): the acceptance bound under the independence null.
    double bound = 0.0;
};

/**
 * Cross-path rank (Spearman) correlation of increments at (s, s + lag) for
 * lag = 1..max_lag, over every start s in the window and every component
 * pair. Closed-loop increments are heavy tailed, which inflates the sampling
 * spread of the moment-based estimator well past 1/sqrt(n); ranks keep it
 * near that value. Windows that are incomplete or non-finite (diverged paths)
 * are skipped. Throws InsufficientPaths below 100 usable paths.
 */
IndependenceReport increment_independence_test(const std::vector<std::vector<Vector>>& windows,
                                               std::size_t max_lag);

struct SimulationEnsemble {
    std::vector<double> times;
    std::vector<double> var_y;            ///< mean |y|^2 over live paths
    std::vector<double> stderr_y;         ///< NaN when fewer than 2 live paths
    std::vector<double> var_u_increments; ///< mean |du|^2 / dt of the step ending at t
    std::vector<double> qv_y;             ///< mean running quadratic variation of y
    std::vector<std::size_t> n_alive;
    std::vector<std::size_t> n_diverged;
    std::size_t n_paths = 0;

    /// Trailing increment windows (config.increment_window > 0), per path.
    std::vector<std::vector<Vector>> r_windows;
    std::vector<std::vector<Vector>> u_windows;
    std::optional<IndependenceReport> r_independence;
    std::optional<IndependenceReport> u_independence;
};

/**
 * n_paths independent paths with per-path streams Rng::for_path(seed, i).
 * Paths are reduced in fixed-size blocks combined in block order, so the
 * result is bit-identical for any thread count. Diverged paths drop out of
 * the statistics from the step they overflow and are counted in n_diverged.
 */
SimulationEnsemble run_ensemble(const LtiSystem& system, const NoiseSpec& noise,
                                const SimulationConfig& config);

/// Where the kernel of the open-loop stochastic convolution is evaluated on
/// each step: left end t_k or midpoint (t_k + t_{k+1}) / 2.
enum class ConvolutionNode { Left, Midpoint };

struct VarianceEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// E|y(T)|^2 of y(T) = sum_k M(T - tbar_k) dw_k over the ensemble (no
/// multiplicative feedback).
VarianceEstimate open_loop_output_variance(const LtiSystem& system, const NoiseSpec& noise,
                                           const SimulationConfig& config,
                                           ConvolutionNode node);

} // namespace msslab

#endif // MSSLAB_SIMULATE_HPP
