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
// Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances and runtime limits are pinned below.

#include "msslab/analysis.hpp"
#include "msslab/linalg.hpp"
#include "msslab/loop_gain.hpp"
#include "msslab/simulate.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using namespace msslab;
using msslab::testing::min_eig;
using msslab::testing::random_psd;
using msslab::testing::random_stable_system;
using msslab::testing::uniform;

namespace {

// Pinned tolerances.
constexpr double kItoRhoTol = 1e-10;
constexpr double kStratRhoTol = 1e-9;
constexpr double kPowerVsDenseTol = 1e-8;
constexpr double kQuadratureRelTol = 1e-5;
constexpr double kSigmaBand = 3.0;
constexpr double kDeltaRhoTol = 1e-12;
constexpr double kHalvingRatioMax = 0.65;
constexpr double kHalvingRatioMin = 0.35;
constexpr double kGrowthFactorPerUnitTime = 2.0;
constexpr double kEpsRelative = 1e-10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Checks {
    bool ok = true;
    std::ostringstream detail;

    void require(bool condition, const std::string& what)
    {
        if (!condition) {
            if (ok) {
                detail << "failed: ";
            } else {
                detail << "; ";
            }
            detail << what;
            ok = false;
        }
    }
};

Matrix m1(double v)
{
    return Matrix::Constant(1, 1, v);
}

// 1 / (s + 1): the scalar plant with a = 1.
LtiSystem scalar_plant()
{
    return make_state_space(m1(-1.0), m1(1.0), m1(1.0));
}

LtiSystem second_order_cb0()
{
    Matrix a(2, 2);
    a << 0, 1, -2, -3;
    Matrix b(2, 1);
    b << 0, 1;
    Matrix c(1, 2);
    c << 1, 0;
    return make_state_space(a, b, c);
}

NoiseSpec scalar_noise(double sigma2, double w = 1.0)
{
    return validate_noise(m1(sigma2), m1(w));
}

SimulationConfig sim_config(double dt, double horizon, std::size_t paths, std::uint64_t seed)
{
    SimulationConfig c;
    c.dt = dt;
    c.horizon = horizon;
    c.n_paths = paths;
    c.seed = seed;
    return c;
}

std::string fmt(const char* pattern, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool psd_within(const Matrix& m, double scale)
{
    return min_eig(m) >= -kEpsRelative * std::max(scale, 1.0);
}

Outcome ito_threshold()
{
    Checks c;
    double worst = 0.0;
    for (double s2 : {0.5, 1.0, 1.9, 2.1}) {
        const MssVerdict v = analyze(scalar_plant(), scalar_noise(s2), Interpretation::Ito);
        worst = std::max(worst, std::abs(v.rho - s2 / 2.0));
        c.require(std::abs(v.rho - s2 / 2.0) <= kItoRhoTol, fmt("rho(%g)=%.17g", s2, v.rho));
        c.require(v.mss == (s2 < 2.0), fmt("verdict at sigma2=%g", s2));
    }
    c.detail << (c.ok ? "" : " | ") << fmt("max |rho - sigma2/2| = %.2e", worst);
    return {c.ok, c.detail.str()};
}

Outcome stratonovich_threshold()
{
    Checks c;
    double worst = 0.0;
    for (double s2 : {0.5, 0.9}) {
        const MssVerdict v =
            analyze(scalar_plant(), scalar_noise(s2), Interpretation::Stratonovich);
        const double expected = s2 / (2.0 - s2);
        worst = std::max(worst, std::abs(v.rho - expected));
        c.require(std::abs(v.rho - expected) <= kStratRhoTol, fmt("rho(%g)=%.17g", s2, v.rho));
        c.require(v.mss, fmt("MSS at sigma2=%g", s2));
    }
    const MssVerdict at_one = analyze(scalar_plant(), scalar_noise(1.0), Interpretation::Stratonovich);
    c.require(!at_one.mss, "sigma2=1 must not be MSS");
    const MssVerdict at_three =
        analyze(scalar_plant(), scalar_noise(3.0), Interpretation::Stratonovich);
    c.require(!at_three.mss && !at_three.h2_finite, "sigma2=3 must have infinite H2");
    c.detail << (c.ok ? "" : " | ")
             << fmt("max err %.2e; rho(1)=%.12g; sigma2=3 h2_finite=%d", worst, at_one.rho,
                    static_cast<int>(at_three.h2_finite));
    return {c.ok, c.detail.str()};
}

Outcome oracle_equivalence()
{
    Checks c;
    std::mt19937_64 rng(20260101);
    double worst_rho = 0.0;
    double worst_quad = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Index n_states = 1 + trial % 4;
        const Index n_gains = 1 + (trial / 4) % 4;
        const LtiSystem s = random_stable_system(rng, n_states, n_gains);
        const Matrix gamma = random_psd(rng, n_gains);

        const LoopGainOperator lyap = make_lgo(s, gamma, Interpretation::Ito, Backend::Lyapunov);
        const double power = spectral_radius_power(lyap).rho;
        const double dense =
            spectral_radius_dense(lgo_matrix_kronecker(s, gamma, Interpretation::Ito));
        const double rho_err = std::abs(power - dense) / std::max(1.0, dense);
        worst_rho = std::max(worst_rho, rho_err);
        c.require(rho_err <= kPowerVsDenseTol, fmt("trial %d: power %.12g dense %.12g", trial,
                                                   power, dense));

        const Matrix x = random_psd(rng, n_gains);
        const Matrix lx = lyap.apply(x);
        const Matrix lq = make_lgo(s, gamma, Interpretation::Ito, Backend::Quadrature).apply(x);
        const double quad_err = (lq - lx).norm() / std::max(lx.norm(), 1e-300);
        worst_quad = std::max(worst_quad, quad_err);
        c.require(quad_err <= kQuadratureRelTol, fmt("trial %d: quadrature rel err %.2e", trial,
                                                     quad_err));
    }
    c.detail << (c.ok ? "" : " | ")
             << fmt("worst power/dense %.2e, worst Lyapunov/quadrature %.2e", worst_rho,
                    worst_quad);
    return {c.ok, c.detail.str()};
}

Outcome conversion_by_simulation()
{
    Checks c;
    const LtiSystem plant = scalar_plant();
    const NoiseSpec noise = scalar_noise(0.5);
    SimulationConfig config = sim_config(1e-3, 20.0, 10000, 404);

    config.interpretation = Interpretation::Stratonovich;
    const SimulationEnsemble strat = run_ensemble(plant, noise, config);
    config.interpretation = Interpretation::Ito;
    const SimulationEnsemble ito =
        run_ensemble(equivalent_ito_system(plant, noise.gamma_cov()), noise, config);

    const double y_bar =
        steady_state_covariances(plant, noise, Interpretation::Stratonovich).output_cov(0, 0);
    const double vs = strat.var_y.back();
    const double vi = ito.var_y.back();
    const double ss = strat.stderr_y.back();
    const double si = ito.stderr_y.back();
    c.require(std::abs(vs - vi) <= kSigmaBand * std::hypot(ss, si), "Stratonovich vs Ito of H");
    c.require(std::abs(vs - y_bar) <= kSigmaBand * ss + 5 * config.dt, "Stratonovich vs Y_bar");
    c.require(std::abs(vi - y_bar) <= kSigmaBand * si + 5 * config.dt, "Ito of H vs Y_bar");
    c.detail << (c.ok ? "" : " | ")
             << fmt("var_y(T): strat %.5f +- %.5f, ito(H) %.5f +- %.5f, Y_bar %.6f", vs, ss, vi,
                    si, y_bar);
    return {c.ok, c.detail.str()};
}

double path_sup_difference(const PathRecord& a, const PathRecord& b)
{
    double out = 0.0;
    for (std::size_t k = 0; k < a.y.size() && k < b.y.size(); ++k) {
        out = std::max(out, (a.y[k] - b.y[k]).cwiseAbs().maxCoeff());
    }
    return out;
}

Outcome relative_degree_two()
{
    Checks c;
    const LtiSystem plant = second_order_cb0();
    const NoiseSpec noise = scalar_noise(0.8);
    const MssVerdict ito = analyze(plant, noise, Interpretation::Ito);
    const MssVerdict strat = analyze(plant, noise, Interpretation::Stratonovich);
    const double delta = std::abs(ito.rho - strat.rho);
    c.require(delta <= kDeltaRhoTol, fmt("|delta rho| = %.2e", delta));
    c.require(ito.mss == strat.mss, "verdicts differ");

    // Same Brownian path at dt = 4e-3, 2e-3, 1e-3, averaged over a few paths.
    const double fine_dt = 1e-3;
    const std::size_t fine_steps = 8000;
    std::vector<double> diffs;
    for (std::size_t factor : {4, 2, 1}) {
        double total = 0.0;
        for (std::uint64_t path = 0; path < 16; ++path) {
            Rng rng = Rng::for_path(555, path);
            const NoisePath fine = draw_noise_path(noise, fine_dt, fine_steps, rng);
            const NoisePath grid = coarsen(fine, factor);
            total += path_sup_difference(simulate_path_ito(plant, grid, Scheme::StateSpaceStep),
                                         simulate_path_stratonovich(plant, grid));
        }
        diffs.push_back(total / 16.0);
    }
    std::ostringstream ratios;
    for (std::size_t i = 1; i < diffs.size(); ++i) {
        const double r = diffs[i] / diffs[i - 1];
        ratios << (i > 1 ? ", " : "") << fmt("%.3f", r);
        c.require(r >= kHalvingRatioMin && r <= kHalvingRatioMax, fmt("halving ratio %.3f", r));
    }
    c.detail << (c.ok ? "" : " | ")
             << fmt("|delta rho| %.1e; sup|y_ito - y_strat| = %.3e, %.3e, %.3e; ratios ", delta,
                    diffs[0], diffs[1], diffs[2])
             << ratios.str();
    return {c.ok, c.detail.str()};
}

Outcome divergence_above_threshold()
{
    Checks c;
    const LtiSystem plant = scalar_plant();
    const NoiseSpec noise = scalar_noise(2.5);
    const MssVerdict v = analyze(plant, noise, Interpretation::Ito);
    c.require(!v.mss && std::abs(v.rho - 1.25) <= kItoRhoTol, fmt("rho %.12g", v.rho));

    const double horizon = 10.0;
    const double dt = 1e-3;
    const CovarianceTrajectory traj =
        covariance_trajectory(plant, noise, Interpretation::Ito, horizon, dt);
    bool traj_monotone = true;
    for (std::size_t k = 1; k < traj.output_cov.size(); ++k) {
        traj_monotone = traj_monotone && traj.output_cov[k](0, 0) >= traj.output_cov[k - 1](0, 0);
    }
    c.require(traj_monotone, "trajectory not monotone");
    const std::size_t per_unit = static_cast<std::size_t>(std::llround(1.0 / dt));
    const std::size_t last = traj.output_cov.size() - 1;
    const double factor = traj.output_cov[last](0, 0) / traj.output_cov[last - per_unit](0, 0);
    c.require(factor >= kGrowthFactorPerUnitTime,
              fmt("trajectory factor over [T-1, T] is %.4f < %.1f", factor,
                  kGrowthFactorPerUnitTime));

    SimulationConfig config = sim_config(dt, horizon, 4000, 606);
    config.record_every = per_unit;
    const SimulationEnsemble e = run_ensemble(plant, noise, config);
    std::ostringstream series;
    bool ensemble_monotone = true;
    for (std::size_t i = 0; i < e.var_y.size(); ++i) {
        series << (i ? " " : "") << fmt("%.3g", e.var_y[i]);
        if (i > 0 && e.var_y[i] < e.var_y[i - 1]) {
            ensemble_monotone = false;
        }
    }
    c.require(ensemble_monotone, "ensemble var_y not monotone");
    c.detail << (c.ok ? "" : " | ")
             << fmt("rho %.4f; trajectory monotone=%d, factor over last unit %.4f; ", v.rho,
                    static_cast<int>(traj_monotone), factor)
             << "ensemble var_y at t=0..10: " << series.str();
    return {c.ok, c.detail.str()};
}

Outcome structural_properties()
{
    Checks c;
    std::mt19937_64 rng(777);
    int fail_psd = 0;
    int fail_lin = 0;
    int fail_mono = 0;
    int fail_trunc = 0;
    int fail_perron = 0;
    int fail_traj = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        const Index n = 1 + trial % 4;
        const Index n_states = 1 + (trial / 4) % 4;
        const LtiSystem s = random_stable_system(rng, n_states, n);
        const Matrix gamma = random_psd(rng, n, 1 + static_cast<Index>(trial % n));
        const LoopGainOperator op = make_lgo(s, gamma, Interpretation::Ito, Backend::Lyapunov);

        const Matrix x = random_psd(rng, n, 1 + static_cast<Index>((trial / 3) % n));
        const Matrix y = x + random_psd(rng, n, 1);
        const Matrix lx = op.apply(x);
        const Matrix ly = op.apply(y);
        const double scale = std::max(1.0, ly.norm());

        fail_psd += !psd_within(lx, lx.norm());
        fail_mono += !psd_within(ly - lx, scale);

        const double alpha = uniform(rng, -2, 2);
        const double beta = uniform(rng, -2, 2);
        const Matrix lin = op.apply(alpha * x + beta * y) - (alpha * lx + beta * ly);
        fail_lin += !(lin.norm() <= kEpsRelative * 4.0 * scale);

        const double step = 0.02;
        // Horizons on one step grid, so the shorter rule is a prefix of the longer.
        const int k1 = std::uniform_int_distribution<int>(10, 200)(rng);
        const int k2 = k1 + std::uniform_int_distribution<int>(5, 200)(rng);
        const double t1 = k1 * step;
        const double t2 = k2 * step;
        const Matrix short_horizon = make_lgo(s, gamma, Interpretation::Ito, Backend::Quadrature,
                                              QuadratureOptions{t1, step})
                                         .apply(x);
        const Matrix long_horizon = make_lgo(s, gamma, Interpretation::Ito, Backend::Quadrature,
                                             QuadratureOptions{t2, step})
                                        .apply(x);
        fail_trunc += !psd_within(long_horizon - short_horizon, long_horizon.norm());

        const SpectralResult perron = spectral_radius_power(op);
        fail_perron += !psd_within(perron.eigen_matrix, perron.eigen_matrix.norm());

        const NoiseSpec noise = validate_noise(gamma, random_psd(rng, n));
        const CovarianceTrajectory traj =
            covariance_trajectory(s, noise, Interpretation::Ito, 2.0, 0.02);
        bool monotone = true;
        for (std::size_t k = 1; k < traj.output_cov.size(); ++k) {
            monotone = monotone && psd_within(traj.output_cov[k] - traj.output_cov[k - 1],
                                              traj.output_cov[k].norm());
        }
        fail_traj += !monotone;
    }
    c.require(fail_psd == 0, fmt("PSD preservation %d", fail_psd));
    c.require(fail_lin == 0, fmt("linearity %d", fail_lin));
    c.require(fail_mono == 0, fmt("monotonicity %d", fail_mono));
    c.require(fail_trunc == 0, fmt("truncation monotonicity %d", fail_trunc));
    c.require(fail_perron == 0, fmt("Perron PSD %d", fail_perron));
    c.require(fail_traj == 0, fmt("trajectory monotonicity %d", fail_traj));
    c.detail << (c.ok ? "" : " | ") << fmt("%d trials x 6 properties", trials);
    return {c.ok, c.detail.str()};
}

Outcome increment_independence()
{
    Checks c;
    SimulationConfig config = sim_config(1e-2, 5.0, 10000, 808);
    config.increment_window = 12;
    const SimulationEnsemble e = run_ensemble(scalar_plant(), scalar_noise(1.0), config);
    if (!e.r_independence) {
        return {false, "no independence report"};
    }
    const IndependenceReport& r = *e.r_independence;
    c.require(r.per_lag_max.size() == 10, "expected lags 1..10");
    c.require(r.max_abs_corr <= r.bound,
              fmt("max |corr| %.4f > %.4f", r.max_abs_corr, r.bound));
    c.detail << (c.ok ? "" : " | ")
             << fmt("max |rank corr| over lags 1..10 = %.4f, bound 5/sqrt(%zu) = %.4f",
                    r.max_abs_corr, r.n_paths, r.bound);
    return {c.ok, c.detail.str()};
}

Outcome open_loop_interpretation()
{
    Checks c;
    const SimulationConfig config = sim_config(1e-2, 5.0, 10000, 909);
    const VarianceEstimate left =
        open_loop_output_variance(scalar_plant(), scalar_noise(0.0), config, ConvolutionNode::Left);
    const VarianceEstimate mid = open_loop_output_variance(scalar_plant(), scalar_noise(0.0),
                                                           config, ConvolutionNode::Midpoint);
    const double band = kSigmaBand * std::hypot(left.standard_error, mid.standard_error);
    c.require(std::abs(left.mean - mid.mean) <= band, "left vs midpoint");
    c.detail << (c.ok ? "" : " | ")
             << fmt("left %.5f +- %.5f, midpoint %.5f +- %.5f", left.mean, left.standard_error,
                    mid.mean, mid.standard_error);
    return {c.ok, c.detail.str()};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit_s; // 0: none
    std::function<Outcome()> run;
};

} // namespace

int main()
{
    const Criterion criteria[] = {
        {1, "scalar Ito threshold", 1.0, ito_threshold},
        {2, "scalar Stratonovich threshold", 1.0, stratonovich_threshold},
        {3, "power vs dense and Lyapunov vs quadrature", 30.0, oracle_equivalence},
        {4, "Stratonovich of M matches Ito of H by simulation", 120.0, conversion_by_simulation},
        {5, "CB = 0: identical verdicts and converging paths", 0.0, relative_degree_two},
        {6, "divergence above threshold", 0.0, divergence_above_threshold},
        {7, "structural properties", 60.0, structural_properties},
        {8, "increment independence", 0.0, increment_independence},
        {9, "open-loop left point vs midpoint", 0.0, open_loop_interpretation},
    };

    int failures = 0;
    for (const Criterion& cr : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = cr.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double elapsed = seconds_since(start);
        if (cr.time_limit_s > 0.0 && elapsed > cr.time_limit_s) {
            out.pass = false;
            out.detail += fmt(" | runtime %.1f s over the %.0f s limit", elapsed, cr.time_limit_s);
        }
        failures += !out.pass;
        std::printf("%s  [%d] %s (%.2f s): %s\n", out.pass ? "PASS" : "FAIL", cr.id, cr.name,
                    elapsed, out.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
                std::size(criteria));
    return failures == 0 ? 0 : 1;
}
