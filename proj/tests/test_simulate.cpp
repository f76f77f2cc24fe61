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
#include "msslab/analysis.hpp"
#include "msslab/simulate.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace msslab;
using msslab::testing::max_abs;

namespace {

Matrix scalar_m(double v)
{
    return Matrix::Constant(1, 1, v);
}

LtiSystem scalar(double a)
{
    return make_state_space(scalar_m(a), scalar_m(1), scalar_m(1));
}

NoiseSpec scalar_noise(double sigma2, double w = 1.0)
{
    return validate_noise(scalar_m(sigma2), scalar_m(w));
}

LtiSystem second_order()
{
    Matrix a(2, 2);
    a << 0, 1, -2, -3;
    Matrix b(2, 1);
    b << 0, 1;
    Matrix c(1, 2);
    c << 1, 0;
    return make_state_space(a, b, c);
}

SimulationConfig make_config(double dt, double horizon, std::size_t n_paths, std::uint64_t seed,
                             Interpretation interp = Interpretation::Ito)
{
    SimulationConfig c;
    c.dt = dt;
    c.horizon = horizon;
    c.n_paths = n_paths;
    c.seed = seed;
    c.interpretation = interp;
    c.threads = 1;
    return c;
}

double sup_difference(const PathRecord& a, const PathRecord& b, std::size_t stride_a,
                      std::size_t stride_b)
{
    double out = 0.0;
    for (std::size_t k = 0; k * stride_a < a.y.size() && k * stride_b < b.y.size(); ++k) {
        out = std::max(out, (a.y[k * stride_a] - b.y[k * stride_b]).cwiseAbs().maxCoeff());
    }
    return out;
}

// E y_k^2 of the Euler-Maruyama recursion x+ = (1 + a dt) x + (dw + dg x) for
// the scalar loop, computed exactly.
double euler_second_moment(double a, double sigma2, double w, double dt, std::size_t steps)
{
    double m = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        m = ((1 + a * dt) * (1 + a * dt) + sigma2 * dt) * m + w * dt;
    }
    return m;
}

} // namespace

TEST_CASE("single paths")
{
    Rng rng = Rng::for_path(1, 0);
    const SimulationConfig config = make_config(1e-2, 5.0, 1, 1);

    SUBCASE("no noise gives the zero path")
    {
        const PathRecord p = simulate_path_ito(scalar(-1), scalar_noise(0.0, 0.0), config, rng);
        REQUIRE(p.y.size() == 501);
        for (const Vector& y : p.y) {
            CHECK(y(0) == 0.0);
        }
    }

    SUBCASE("same stream, same path")
    {
        Rng a = Rng::for_path(5, 9);
        Rng b = Rng::for_path(5, 9);
        const PathRecord p = simulate_path_ito(scalar(-1), scalar_noise(1.0), config, a);
        const PathRecord q = simulate_path_ito(scalar(-1), scalar_noise(1.0), config, b);
        REQUIRE(p.y.size() == q.y.size());
        for (std::size_t k = 0; k < p.y.size(); ++k) {
            CHECK(p.y[k](0) == q.y[k](0));
        }
    }

    SUBCASE("without multiplicative noise the two calculi give the same path")
    {
        std::mt19937_64 g(3);
        const LtiSystem s = msslab::testing::random_stable_system(g, 3, 2);
        const NoiseSpec noise = validate_noise(Matrix::Zero(2, 2), Matrix::Identity(2, 2));
        Rng a = Rng::for_path(7, 1);
        Rng b = Rng::for_path(7, 1);
        const PathRecord ito = simulate_path_ito(s, noise, config, a);
        const PathRecord strat = simulate_path_stratonovich(s, noise, config, b);
        CHECK(sup_difference(ito, strat, 1, 1) == 0.0);
    }

    SUBCASE("increments")
    {
        Rng a = Rng::for_path(2, 2);
        const PathRecord p = simulate_path_ito(scalar(-1), scalar_noise(0.7), config, a);
        REQUIRE(p.u_increments.size() == 500);
        REQUIRE(p.r_increments.size() == 500);
        CHECK_FALSE(p.diverged);
    }

    SUBCASE("Stratonovich needs a realization and the step scheme")
    {
        std::vector<Matrix> values(10, scalar_m(1.0));
        const LtiSystem sampled = LtiSystem::sampled(0.01, values);
        Rng a = Rng::for_path(2, 2);
        CHECK_THROWS_AS(simulate_path_stratonovich(sampled, scalar_noise(1.0), config, a), Error);
        SimulationConfig conv = config;
        conv.scheme = Scheme::StateSpaceStep;
        CHECK_THROWS_AS(simulate_path_ito(sampled, scalar_noise(1.0), conv, a), Error);
    }
}

TEST_CASE("dt refinement on one Brownian path")
{
    const double fine_dt = 2.5e-4;
    const std::size_t fine_steps = 16000;
    std::vector<double> strat_vs_ito;
    std::vector<double> scheme_gap;
    for (std::size_t factor : {16, 8, 4}) {
        double diff_strat = 0.0;
        double diff_scheme = 0.0;
        for (std::uint64_t path = 0; path < 8; ++path) {
            Rng rng = Rng::for_path(123, path);
            const NoisePath fine = draw_noise_path(scalar_noise(0.8), fine_dt, fine_steps, rng);
            const NoisePath coarse = coarsen(fine, factor);
            const PathRecord ito = simulate_path_ito(second_order(), coarse, Scheme::StateSpaceStep);
            const PathRecord strat = simulate_path_stratonovich(second_order(), coarse);
            diff_strat += sup_difference(ito, strat, 1, 1);

            const PathRecord conv = simulate_path_ito(scalar(-1), coarse, Scheme::ConvolutionSum);
            const PathRecord step = simulate_path_ito(scalar(-1), coarse, Scheme::StateSpaceStep);
            diff_scheme += sup_difference(conv, step, 1, 1);
        }
        strat_vs_ito.push_back(diff_strat);
        scheme_gap.push_back(diff_scheme);
    }
    for (std::size_t i = 1; i < strat_vs_ito.size(); ++i) {
        CHECK(strat_vs_ito[i] / strat_vs_ito[i - 1] < 0.7);
        CHECK(scheme_gap[i] / scheme_gap[i - 1] < 0.7);
    }
}

TEST_CASE("coarsening sums increments")
{
    Rng rng = Rng::for_path(4, 4);
    const NoisePath fine = draw_noise_path(scalar_noise(1.0), 0.01, 12, rng);
    const NoisePath coarse = coarsen(fine, 3);
    REQUIRE(coarse.steps() == 4);
    CHECK(coarse.dt == doctest::Approx(0.03));
    CHECK(coarse.w[1](0) == doctest::Approx(fine.w[3](0) + fine.w[4](0) + fine.w[5](0)));
    CHECK_THROWS_AS(coarsen(fine, 5), Error);
}

TEST_CASE("ensembles")
{
    SUBCASE("bit-identical for any thread count")
    {
        SimulationConfig c = make_config(1e-2, 3.0, 300, 17);
        const SimulationEnsemble one = run_ensemble(scalar(-1), scalar_noise(1.0), c);
        c.threads = 3;
        const SimulationEnsemble three = run_ensemble(scalar(-1), scalar_noise(1.0), c);
        CHECK(one.var_y == three.var_y);
        CHECK(one.stderr_y == three.stderr_y);
        CHECK(one.times == three.times);
    }

    SUBCASE("a single path has an undefined standard error")
    {
        const SimulationEnsemble e =
            run_ensemble(scalar(-1), scalar_noise(1.0), make_config(1e-2, 1.0, 1, 3));
        CHECK(std::isnan(e.stderr_y.back()));
        CHECK(std::isfinite(e.var_y.back()));
        CHECK(e.n_paths == 1);
    }

    SUBCASE("open loop variance")
    {
        const SimulationEnsemble e =
            run_ensemble(scalar(-1), scalar_noise(0.0), make_config(1e-3, 6.0, 4000, 21));
        const double dt = 1e-3;
        CHECK(std::abs(e.var_y.back() - 0.5) <= 3 * e.stderr_y.back() + dt);
        CHECK(e.n_diverged.back() == 0);
        CHECK(e.times.size() <= 2000);
    }

    SUBCASE("Euler second moment matches the exact discrete recursion")
    {
        // The recursion differs from the continuous second moment
        // E y(T)^2 = 1 - e^{-T} by O(dt).
        const double exact = 1.0 - std::exp(-8.0);
        std::vector<double> bias;
        for (double dt : {4e-3, 2e-3, 1e-3}) {
            const std::size_t steps = static_cast<std::size_t>(std::lround(8.0 / dt));
            const double discrete = euler_second_moment(-1.0, 1.0, 1.0, dt, steps);
            bias.push_back(discrete - exact);
            const SimulationEnsemble e =
                run_ensemble(scalar(-1), scalar_noise(1.0), make_config(dt, 8.0, 2000, 33));
            CHECK(std::abs(e.var_y.back() - discrete) <= 3 * e.stderr_y.back());
        }
        CHECK(bias[1] / bias[0] == doctest::Approx(0.5).epsilon(0.05));
        CHECK(bias[2] / bias[1] == doctest::Approx(0.5).epsilon(0.05));
    }

    SUBCASE("Stratonovich of M and Ito of its conversion agree in variance")
    {
        const NoiseSpec noise = scalar_noise(0.5);
        const SimulationConfig c = make_config(1e-3, 8.0, 1500, 44);
        const SimulationEnsemble ito = run_ensemble(
            equivalent_ito_system(scalar(-1), noise.gamma_cov()), noise, c);
        SimulationConfig cs = c;
        cs.interpretation = Interpretation::Stratonovich;
        const SimulationEnsemble strat = run_ensemble(scalar(-1), noise, cs);
        const double combined = std::hypot(ito.stderr_y.back(), strat.stderr_y.back());
        CHECK(std::abs(ito.var_y.back() - strat.var_y.back()) <= 3 * combined);
        const SteadyState st = steady_state_covariances(scalar(-1), noise,
                                                        Interpretation::Stratonovich);
        CHECK(std::abs(strat.var_y.back() - st.output_cov(0, 0)) <=
              3 * strat.stderr_y.back() + 5 * c.dt);
    }

    SUBCASE("overflowing paths are counted and excluded")
    {
        const SimulationEnsemble e =
            run_ensemble(scalar(20.0), scalar_noise(1.0), make_config(1e-2, 40.0, 20, 1));
        CHECK(e.n_diverged.back() == 20);
        CHECK(e.n_alive.back() == 0);
        CHECK(e.n_diverged.front() == 0);
    }

    SUBCASE("invalid configurations")
    {
        CHECK_THROWS_AS(run_ensemble(scalar(-1), scalar_noise(1.0), make_config(0.0, 1.0, 5, 1)),
                        Error);
        CHECK_THROWS_AS(run_ensemble(scalar(-1), scalar_noise(1.0), make_config(0.1, 1.0, 0, 1)),
                        Error);
    }
}

TEST_CASE("quadratic variation")
{
    std::vector<Vector> constant(100, Vector::Constant(2, 3.0));
    CHECK(quadratic_variation(constant, 0.01).back() == 0.0);

    std::vector<Vector> ramp;
    const double dt = 1e-3;
    for (int k = 0; k <= 2000; ++k) {
        ramp.push_back(Vector::Constant(1, k * dt));
    }
    CHECK(quadratic_variation(ramp, dt).back() == doctest::Approx(2.0 * dt).epsilon(1e-9));

    // Brownian paths: <w>(1) = 1.
    const NoiseSpec noise = scalar_noise(0.0, 1.0);
    const std::size_t n_paths = 1000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = Rng::for_path(55, p);
        const NoisePath np = draw_noise_path(noise, 1e-4, 10000, rng);
        std::vector<Vector> w(1, Vector::Zero(1));
        for (const Vector& inc : np.w) {
            w.push_back(w.back() + inc);
        }
        const double qv = quadratic_variation(w, 1e-4).back();
        sum += qv;
        sum_sq += qv * qv;
    }
    const double mean = sum / n_paths;
    const double se = std::sqrt((sum_sq / n_paths - mean * mean) / (n_paths - 1));
    CHECK(std::abs(mean - 1.0) <= 3 * se);
}

TEST_CASE("increment independence")
{
    SUBCASE("closed loop feedback increments")
    {
        SimulationConfig c = make_config(1e-2, 5.0, 2500, 8);
        c.increment_window = 12;
        const SimulationEnsemble e = run_ensemble(scalar(-1), scalar_noise(1.0), c);
        REQUIRE(e.r_independence.has_value());
        CHECK(e.r_independence->per_lag_max.size() == 10);
        CHECK(e.r_independence->bound == doctest::Approx(0.1));
        CHECK(e.r_independence->max_abs_corr <= e.r_independence->bound);
    }
    SUBCASE("additive increments of the open loop")
    {
        SimulationConfig c = make_config(1e-2, 5.0, 2500, 9);
        c.increment_window = 12;
        const SimulationEnsemble e = run_ensemble(scalar(-1), scalar_noise(0.0), c);
        REQUIRE(e.u_independence.has_value());
        CHECK(e.u_independence->max_abs_corr <= e.u_independence->bound);
    }
    SUBCASE("too few paths")
    {
        std::vector<std::vector<Vector>> windows(50, std::vector<Vector>(5, Vector::Ones(1)));
        CHECK_THROWS_AS(increment_independence_test(windows, 2), Error);
    }
    SUBCASE("correlated increments are caught")
    {
        std::mt19937_64 g(1);
        std::normal_distribution<double> normal;
        std::vector<std::vector<Vector>> windows(2000);
        for (auto& w : windows) {
            const double shared = normal(g);
            for (int s = 0; s < 4; ++s) {
                w.push_back(Vector::Constant(1, shared + 0.5 * normal(g)));
            }
        }
        const IndependenceReport r = increment_independence_test(windows, 2);
        CHECK(r.max_abs_corr > r.bound);
    }
}

TEST_CASE("open-loop convolution: left point and midpoint")
{
    const SimulationConfig c = make_config(1e-2, 5.0, 4000, 12);
    const VarianceEstimate left =
        open_loop_output_variance(scalar(-1), scalar_noise(0.0), c, ConvolutionNode::Left);
    const VarianceEstimate mid =
        open_loop_output_variance(scalar(-1), scalar_noise(0.0), c, ConvolutionNode::Midpoint);
    CHECK(std::abs(left.mean - mid.mean) <=
          3 * std::hypot(left.standard_error, mid.standard_error));
    CHECK(std::abs(mid.mean - 0.5) <= 3 * mid.standard_error + c.dt);
}
