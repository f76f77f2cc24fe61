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
#include "msslab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace msslab {

void validate(const SimulationConfig& config)
{
    if (!(config.dt > 0.0) || !std::isfinite(config.dt)) {
        throw Error(ErrorCode::InvalidArgument, "simulation dt must be positive and finite");
    }
    if (!std::isfinite(config.horizon) || !(config.horizon >= config.dt)) {
        throw Error(ErrorCode::InvalidArgument, "simulation horizon must satisfy T >= dt");
    }
    if (config.n_paths < 1) {
        throw Error(ErrorCode::InvalidArgument, "n_paths must be at least 1");
    }
}

std::size_t step_count(const SimulationConfig& config)
{
    validate(config);
    return static_cast<std::size_t>(std::floor(config.horizon / config.dt + 1e-9));
}

NoisePath draw_noise_path(const NoiseSpec& noise, double dt, std::size_t steps, Rng& rng)
{
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::NonPositiveDt, "dt must be positive");
    }
    NoisePath path;
    path.dt = dt;
    path.gamma.resize(steps);
    path.w.resize(steps);
    const double sqrt_dt = std::sqrt(dt);
    Vector scratch;
    for (std::size_t k = 0; k < steps; ++k) {
        sample_increments_into(noise, sqrt_dt, rng, scratch, path.gamma[k], path.w[k]);
    }
    return path;
}

NoisePath coarsen(const NoisePath& fine, std::size_t factor)
{
    if (factor == 0 || fine.steps() % factor != 0) {
        throw Error(ErrorCode::InvalidArgument, "coarsening factor must divide the step count");
    }
    NoisePath coarse;
    coarse.dt = fine.dt * static_cast<double>(factor);
    const std::size_t steps = fine.steps() / factor;
    coarse.gamma.reserve(steps);
    coarse.w.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        Vector g = fine.gamma[k * factor];
        Vector w = fine.w[k * factor];
        for (std::size_t j = 1; j < factor; ++j) {
            g += fine.gamma[k * factor + j];
            w += fine.w[k * factor + j];
        }
        coarse.gamma.push_back(std::move(g));
        coarse.w.push_back(std::move(w));
    }
    return coarse;
}

namespace {

bool overflowed(const double* v, Index n)
{
    for (Index i = 0; i < n; ++i) {
        // Also true for NaN.
        if (!(std::abs(v[i]) <= kDivergenceThreshold)) {
            return true;
        }
    }
    return false;
}

bool overflowed(const Vector& v)
{
    return overflowed(v.data(), v.size());
}

// out += m x. The loop matrices are tiny, where plain loops beat the general
// product kernels by a wide margin.
void mul_add(const Matrix& m, const double* x, double* out)
{
    const Index rows = m.rows();
    const double* column = m.data();
    for (Index j = 0; j < m.cols(); ++j, column += rows) {
        const double xj = x[j];
        for (Index i = 0; i < rows; ++i) {
            out[i] += column[i] * xj;
        }
    }
}

// out = m x. Written without a zeroing pass, which the compiler would turn
// into a memset call per product.
void mul(const Matrix& m, const double* x, double* out)
{
    const Index rows = m.rows();
    const double* column = m.data();
    if (m.cols() == 0) {
        std::fill(out, out + rows, 0.0);
        return;
    }
    const double x0 = x[0];
    for (Index i = 0; i < rows; ++i) {
        out[i] = column[i] * x0;
    }
    for (Index j = 1; j < m.cols(); ++j) {
        column += rows;
        const double xj = x[j];
        for (Index i = 0; i < rows; ++i) {
            out[i] += column[i] * xj;
        }
    }
}

void check_loop_shapes(const LtiSystem& system, const NoiseSpec& noise)
{
    if (system.n_inputs() != system.n_outputs() || system.n_inputs() != noise.n_gains()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "closed loop needs n_inputs = n_outputs = n_gains");
    }
    if (noise.n_disturbances() != system.n_inputs()) {
        throw Error(ErrorCode::DimensionMismatch, "w_cov dimension must equal n_inputs");
    }
}

// One closed-loop path advanced step by step. y() is y_k before step k and
// y_{k+1} after it; du() and dr() hold the increments of the last step.
class PathEngine {
public:
    virtual ~PathEngine() = default;
    virtual void reset() = 0;
    /// False once the path overflows; the engine must not be stepped again.
    virtual bool step(const Vector& dgamma, const Vector& dw) = 0;

    const Vector& y() const { return y_; }
    const Vector& du() const { return du_; }
    const Vector& dr() const { return dr_; }

protected:
    Vector y_;
    Vector du_;
    Vector dr_;
};

class ItoStateSpaceEngine final : public PathEngine {
public:
    ItoStateSpaceEngine(const LtiSystem& system, double dt)
        : step_matrix_(Matrix::Identity(system.n_states(), system.n_states()) + system.a() * dt),
          b_(system.b()), c_(system.c())
    {
        reset();
    }

    void reset() override
    {
        x_ = Vector::Zero(step_matrix_.rows());
        next_.resize(x_.size());
        y_ = Vector::Zero(c_.rows());
        du_ = Vector::Zero(b_.cols());
        dr_ = Vector::Zero(b_.cols());
    }

    bool step(const Vector& dgamma, const Vector& dw) override
    {
        for (Index i = 0; i < du_.size(); ++i) {
            dr_[i] = dgamma[i] * y_[i];
            du_[i] = dw[i] + dr_[i];
        }
        mul(step_matrix_, x_.data(), next_.data());
        mul_add(b_, du_.data(), next_.data());
        x_.swap(next_);
        mul(c_, x_.data(), y_.data());
        return !overflowed(x_);
    }

private:
    Matrix step_matrix_;
    Matrix b_;
    Matrix c_;
    Vector x_;
    Vector next_;
};

class StratonovichStateSpaceEngine final : public PathEngine {
public:
    static constexpr int kMaxSweeps = 50;
    static constexpr double kRelTol = 1e-10;

    StratonovichStateSpaceEngine(const LtiSystem& system, double dt)
        : step_matrix_(Matrix::Identity(system.n_states(), system.n_states()) + system.a() * dt),
          b_(system.b()), c_(system.c()), cb_(system.c() * system.b())
    {
        reset();
    }

    void reset() override
    {
        x_ = Vector::Zero(step_matrix_.rows());
        base_.resize(x_.size());
        y_ = Vector::Zero(c_.rows());
        y_base_.resize(c_.rows());
        y_next_.resize(c_.rows());
        du_ = Vector::Zero(b_.cols());
        dr_ = Vector::Zero(b_.cols());
    }

    bool step(const Vector& dgamma, const Vector& dw) override
    {
        const Index n_in = dr_.size();

        // Everything in x_{k+1} except the feedback increment, so that
        // y_{k+1} = C base + (C B) dr.
        mul(step_matrix_, x_.data(), base_.data());
        mul_add(b_, dw.data(), base_.data());
        mul(c_, base_.data(), y_base_.data());

        // Start from the predictor dr = dgamma (y_k + C base) / 2.
        for (Index i = 0; i < n_in; ++i) {
            dr_[i] = 0.5 * dgamma[i] * (y_[i] + y_base_[i]);
        }
        bool converged = false;
        for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
            mul(cb_, dr_.data(), y_next_.data());
            double change = 0.0;
            double size = 0.0;
            bool finite = true;
            for (Index i = 0; i < n_in; ++i) {
                const double candidate = 0.5 * dgamma[i] * (y_[i] + y_base_[i] + y_next_[i]);
                const double d = candidate - dr_[i];
                change += d * d;
                size += candidate * candidate;
                finite = finite && std::isfinite(candidate);
                dr_[i] = candidate;
            }
            if (!finite) {
                break;
            }
            if (change <= kRelTol * kRelTol * size) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            if (!dr_.allFinite() || overflowed(x_)) {
                return false;
            }
            throw Error(ErrorCode::MidpointNoConvergence,
                        "midpoint fixed point did not converge in 50 sweeps; reduce dt");
        }
        for (Index i = 0; i < n_in; ++i) {
            du_[i] = dw[i] + dr_[i];
        }
        x_.swap(base_);
        mul_add(b_, dr_.data(), x_.data());
        mul(c_, x_.data(), y_.data());
        return !overflowed(x_);
    }

private:
    Matrix step_matrix_;
    Matrix b_;
    Matrix c_;
    Matrix cb_;
    Vector x_;
    Vector base_;
    Vector y_base_;
    Vector y_next_;
};

class ItoConvolutionEngine final : public PathEngine {
public:
    ItoConvolutionEngine(const LtiSystem& system, double dt, std::size_t steps)
        : kernel_(impulse_response_grid(system, dt, steps))
    {
        history_.reserve(steps);
        reset();
    }

    void reset() override
    {
        history_.clear();
        y_ = Vector::Zero(kernel_.front().rows());
        du_ = Vector::Zero(kernel_.front().cols());
        dr_ = Vector::Zero(kernel_.front().cols());
    }

    bool step(const Vector& dgamma, const Vector& dw) override
    {
        dr_ = dgamma.cwiseProduct(y_);
        du_ = dw + dr_;
        history_.push_back(du_);
        const std::size_t k = history_.size();
        y_.setZero();
        for (std::size_t j = 0; j < k; ++j) {
            y_.noalias() += kernel_[k - j] * history_[j];
        }
        return !overflowed(y_);
    }

private:
    std::vector<Matrix> kernel_;
    std::vector<Vector> history_;
};

std::unique_ptr<PathEngine> make_engine(const LtiSystem& system, Interpretation interpretation,
                                        Scheme scheme, double dt, std::size_t steps)
{
    if (interpretation == Interpretation::Stratonovich) {
        if (scheme != Scheme::StateSpaceStep) {
            throw Error(ErrorCode::UnsupportedScheme,
                        "Stratonovich simulation needs the state-space step scheme");
        }
        if (!system.has_realization()) {
            throw Error(ErrorCode::StratonovichNeedsRealization,
                        "Stratonovich simulation needs a state-space realization");
        }
        return std::make_unique<StratonovichStateSpaceEngine>(system, dt);
    }
    if (scheme == Scheme::StateSpaceStep) {
        if (!system.has_realization()) {
            throw Error(ErrorCode::NeedsRealization,
                        "state-space step scheme needs a realization; use convolution_sum");
        }
        return std::make_unique<ItoStateSpaceEngine>(system, dt);
    }
    return std::make_unique<ItoConvolutionEngine>(system, dt, steps);
}

PathRecord run_path(PathEngine& engine, const NoisePath& noise)
{
    PathRecord record;
    record.dt = noise.dt;
    record.y.reserve(noise.steps() + 1);
    record.u_increments.reserve(noise.steps());
    record.r_increments.reserve(noise.steps());
    engine.reset();
    record.y.push_back(engine.y());
    for (std::size_t k = 0; k < noise.steps(); ++k) {
        const bool alive = engine.step(noise.gamma[k], noise.w[k]);
        record.u_increments.push_back(engine.du());
        record.r_increments.push_back(engine.dr());
        record.y.push_back(engine.y());
        if (!alive) {
            record.diverged = true;
            break;
        }
    }
    return record;
}

} // namespace

PathRecord simulate_path_ito(const LtiSystem& system, const NoisePath& noise, Scheme scheme)
{
    auto engine = make_engine(system, Interpretation::Ito, scheme, noise.dt, noise.steps());
    return run_path(*engine, noise);
}

PathRecord simulate_path_ito(const LtiSystem& system, const NoiseSpec& noise,
                             const SimulationConfig& config, Rng& rng)
{
    check_loop_shapes(system, noise);
    const NoisePath path = draw_noise_path(noise, config.dt, step_count(config), rng);
    return simulate_path_ito(system, path, config.scheme);
}

PathRecord simulate_path_stratonovich(const LtiSystem& system, const NoisePath& noise)
{
    auto engine = make_engine(system, Interpretation::Stratonovich, Scheme::StateSpaceStep,
                              noise.dt, noise.steps());
    return run_path(*engine, noise);
}

PathRecord simulate_path_stratonovich(const LtiSystem& system, const NoiseSpec& noise,
                                      const SimulationConfig& config, Rng& rng)
{
    check_loop_shapes(system, noise);
    if (config.scheme != Scheme::StateSpaceStep) {
        throw Error(ErrorCode::UnsupportedScheme,
                    "Stratonovich simulation needs the state-space step scheme");
    }
    const NoisePath path = draw_noise_path(noise, config.dt, step_count(config), rng);
    return simulate_path_stratonovich(system, path);
}

std::vector<double> quadratic_variation(std::span<const Vector> path, double dt)
{
    if (!(dt > 0.0)) {
        throw Error(ErrorCode::NonPositiveDt, "dt must be positive");
    }
    std::vector<double> qv;
    qv.reserve(path.size());
    double running = 0.0;
    if (!path.empty()) {
        qv.push_back(0.0);
    }
    for (std::size_t k = 1; k < path.size(); ++k) {
        running += (path[k] - path[k - 1]).squaredNorm();
        qv.push_back(running);
    }
    return qv;
}

IndependenceReport increment_independence_test(const std::vector<std::vector<Vector>>& windows,
                                               std::size_t max_lag)
{
    std::size_t length = 0;
    for (const auto& w : windows) {
        length = std::max(length, w.size());
    }
    std::vector<const std::vector<Vector>*> usable;
    for (const auto& w : windows) {
        if (w.size() != length || length == 0) {
            continue;
        }
        const bool finite =
            std::all_of(w.begin(), w.end(), [](const Vector& v) { return v.allFinite(); });
        if (finite) {
            usable.push_back(&w);
        }
    }
    if (usable.size() < 100) {
        throw Error(ErrorCode::InsufficientPaths,
                    "independence test needs at least 100 complete paths, got " +
                        std::to_string(usable.size()));
    }
    if (max_lag < 1 || max_lag >= length) {
        throw Error(ErrorCode::InvalidArgument, "max_lag must be in [1, window length)");
    }

    const Index dim = usable.front()->front().size();
    const std::size_t n = usable.size();
    IndependenceReport report;
    report.n_paths = n;
    report.bound = 5.0 / std::sqrt(static_cast<double>(n));
    report.per_lag_max.assign(max_lag, 0.0);

    // Centred cross-path ranks per (step, component), ties averaged.
    std::vector<std::vector<double>> ranks(length * static_cast<std::size_t>(dim));
    std::vector<std::size_t> order(n);
    for (std::size_t s = 0; s < length; ++s) {
        for (Index i = 0; i < dim; ++i) {
            auto value = [&](std::size_t p) { return (*usable[p])[s](i); };
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
            std::vector<double>& r = ranks[s * static_cast<std::size_t>(dim) + i];
            r.assign(n, 0.0);
            const double centre = 0.5 * static_cast<double>(n - 1);
            for (std::size_t lo = 0; lo < n;) {
                std::size_t hi = lo + 1;
                while (hi < n && value(order[hi]) == value(order[lo])) {
                    ++hi;
                }
                const double average = 0.5 * static_cast<double>(lo + hi - 1) - centre;
                for (std::size_t k = lo; k < hi; ++k) {
                    r[order[k]] = average;
                }
                lo = hi;
            }
        }
    }

    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        for (std::size_t s = 0; s + lag < length; ++s) {
            for (Index i = 0; i < dim; ++i) {
                for (Index j = 0; j < dim; ++j) {
                    const std::vector<double>& a = ranks[s * static_cast<std::size_t>(dim) + i];
                    const std::vector<double>& b =
                        ranks[(s + lag) * static_cast<std::size_t>(dim) + j];
                    double cross = 0.0;
                    double first = 0.0;
                    double second = 0.0;
                    for (std::size_t p = 0; p < n; ++p) {
                        cross += a[p] * b[p];
                        first += a[p] * a[p];
                        second += b[p] * b[p];
                    }
                    if (first == 0.0 || second == 0.0) {
                        continue;
                    }
                    const double corr = std::abs(cross) / std::sqrt(first * second);
                    report.per_lag_max[lag - 1] = std::max(report.per_lag_max[lag - 1], corr);
                }
            }
        }
    }
    report.max_abs_corr = *std::max_element(report.per_lag_max.begin(), report.per_lag_max.end());
    return report;
}

namespace {

constexpr std::size_t kBlockPaths = 64;

struct BlockStats {
    std::vector<double> sum_q;
    std::vector<double> sum_q2;
    std::vector<double> sum_u;
    std::vector<double> sum_qv;
    std::vector<std::size_t> alive;
    std::vector<std::size_t> diverged;

    explicit BlockStats(std::size_t rows)
        : sum_q(rows, 0.0), sum_q2(rows, 0.0), sum_u(rows, 0.0), sum_qv(rows, 0.0),
          alive(rows, 0), diverged(rows, 0)
    {
    }
};

std::vector<std::size_t> recorded_steps(std::size_t steps, std::size_t record_every)
{
    std::size_t stride = record_every;
    if (stride == 0) {
        stride = std::max<std::size_t>(1, (steps + 1997) / 1998);
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k <= steps; k += stride) {
        out.push_back(k);
    }
    if (out.back() != steps) {
        out.push_back(steps);
    }
    return out;
}

unsigned resolve_threads(unsigned requested)
{
    if (requested == 0) {
        requested = std::max(1U, std::thread::hardware_concurrency());
    }
    return requested;
}

} // namespace

SimulationEnsemble run_ensemble(const LtiSystem& system, const NoiseSpec& noise,
                                const SimulationConfig& config)
{
    check_loop_shapes(system, noise);
    const std::size_t steps = step_count(config);
    const std::vector<std::size_t> rows = recorded_steps(steps, config.record_every);
    const std::size_t window = std::min(config.increment_window, steps);
    const double dt = config.dt;
    const double sqrt_dt = std::sqrt(dt);

    // Fail fast on unsupported combinations before spawning workers.
    make_engine(system, config.interpretation, config.scheme, dt, std::min<std::size_t>(steps, 1));

    SimulationEnsemble ensemble;
    ensemble.n_paths = config.n_paths;
    if (window > 0) {
        ensemble.r_windows.resize(config.n_paths);
        ensemble.u_windows.resize(config.n_paths);
    }

    const std::size_t n_blocks = (config.n_paths + kBlockPaths - 1) / kBlockPaths;
    std::vector<BlockStats> blocks;
    blocks.reserve(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        blocks.emplace_back(rows.size());
    }

    std::atomic<std::size_t> next_block{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        try {
            auto engine = make_engine(system, config.interpretation, config.scheme, dt, steps);
            Vector scratch;
            Vector dgamma;
            Vector dw;
            const Index n_out = system.n_outputs();
            Vector previous_y(n_out);
            for (;;) {
                const std::size_t b = next_block.fetch_add(1);
                if (b >= n_blocks) {
                    break;
                }
                BlockStats& stats = blocks[b];
                const std::size_t first = b * kBlockPaths;
                const std::size_t last = std::min(config.n_paths, first + kBlockPaths);
                for (std::size_t path = first; path < last; ++path) {
                    Rng rng = Rng::for_path(config.seed, path);
                    engine->reset();
                    double qv = 0.0;
                    double u_rate = 0.0;
                    std::size_t row = 0;
                    auto record = [&](std::size_t k) {
                        while (row < rows.size() && rows[row] == k) {
                            const double q = engine->y().squaredNorm();
                            stats.sum_q[row] += q;
                            stats.sum_q2[row] += q * q;
                            stats.sum_u[row] += u_rate;
                            stats.sum_qv[row] += qv;
                            stats.alive[row] += 1;
                            ++row;
                        }
                    };
                    record(0);
                    for (std::size_t k = 0; k < steps; ++k) {
                        sample_increments_into(noise, sqrt_dt, rng, scratch, dgamma, dw);
                        std::copy(engine->y().data(), engine->y().data() + n_out,
                                  previous_y.data());
                        if (!engine->step(dgamma, dw)) {
                            for (; row < rows.size(); ++row) {
                                stats.diverged[row] += 1;
                            }
                            break;
                        }
                        for (Index i = 0; i < n_out; ++i) {
                            const double d = engine->y()[i] - previous_y[i];
                            qv += d * d;
                        }
                        double du2 = 0.0;
                        for (Index i = 0; i < n_out; ++i) {
                            du2 += engine->du()[i] * engine->du()[i];
                        }
                        u_rate = du2 / dt;
                        if (window > 0 && k + window >= steps) {
                            ensemble.r_windows[path].push_back(engine->dr());
                            ensemble.u_windows[path].push_back(engine->du());
                        }
                        record(k + 1);
                    }
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) {
                failure = std::current_exception();
            }
            next_block.store(n_blocks);
        }
    };

    const unsigned n_threads =
        std::min<unsigned>(resolve_threads(config.threads), static_cast<unsigned>(n_blocks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    const std::size_t n_rows = rows.size();
    std::vector<double> sum_q(n_rows, 0.0);
    std::vector<double> sum_q2(n_rows, 0.0);
    std::vector<double> sum_u(n_rows, 0.0);
    std::vector<double> sum_qv(n_rows, 0.0);
    ensemble.n_alive.assign(n_rows, 0);
    ensemble.n_diverged.assign(n_rows, 0);
    for (const BlockStats& stats : blocks) {
        for (std::size_t r = 0; r < n_rows; ++r) {
            sum_q[r] += stats.sum_q[r];
            sum_q2[r] += stats.sum_q2[r];
            sum_u[r] += stats.sum_u[r];
            sum_qv[r] += stats.sum_qv[r];
            ensemble.n_alive[r] += stats.alive[r];
            ensemble.n_diverged[r] += stats.diverged[r];
        }
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t r = 0; r < n_rows; ++r) {
        ensemble.times.push_back(static_cast<double>(rows[r]) * dt);
        const auto alive = static_cast<double>(ensemble.n_alive[r]);
        if (ensemble.n_alive[r] == 0) {
            ensemble.var_y.push_back(nan);
            ensemble.stderr_y.push_back(nan);
            ensemble.var_u_increments.push_back(nan);
            ensemble.qv_y.push_back(nan);
            continue;
        }
        const double mean = sum_q[r] / alive;
        ensemble.var_y.push_back(mean);
        ensemble.var_u_increments.push_back(sum_u[r] / alive);
        ensemble.qv_y.push_back(sum_qv[r] / alive);
        if (ensemble.n_alive[r] < 2) {
            ensemble.stderr_y.push_back(nan);
        } else {
            const double variance =
                std::max(0.0, (sum_q2[r] - alive * mean * mean) / (alive - 1.0));
            ensemble.stderr_y.push_back(std::sqrt(variance / alive));
        }
    }

    if (window >= 2) {
        const std::size_t max_lag = std::min<std::size_t>(10, window - 1);
        try {
            ensemble.r_independence = increment_independence_test(ensemble.r_windows, max_lag);
            ensemble.u_independence = increment_independence_test(ensemble.u_windows, max_lag);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InsufficientPaths) {
                throw;
            }
        }
    }
    return ensemble;
}

VarianceEstimate open_loop_output_variance(const LtiSystem& system, const NoiseSpec& noise,
                                           const SimulationConfig& config, ConvolutionNode node)
{
    if (noise.n_disturbances() != system.n_inputs()) {
        throw Error(ErrorCode::DimensionMismatch, "w_cov dimension must equal n_inputs");
    }
    const std::size_t steps = step_count(config);
    const double dt = config.dt;
    // Half-step grid: M(j dt) sits at 2j, M((j - 1/2) dt) at 2j - 1.
    const std::vector<Matrix> half_grid = impulse_response_grid(system, 0.5 * dt, 2 * steps);

    const double sqrt_dt = std::sqrt(dt);
    Vector scratch;
    Vector dgamma;
    Vector dw;
    Vector y(system.n_outputs());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t path = 0; path < config.n_paths; ++path) {
        Rng rng = Rng::for_path(config.seed, path);
        y.setZero();
        for (std::size_t k = 0; k < steps; ++k) {
            sample_increments_into(noise, sqrt_dt, rng, scratch, dgamma, dw);
            const std::size_t lag = steps - k;
            const std::size_t index = node == ConvolutionNode::Left ? 2 * lag : 2 * lag - 1;
            y.noalias() += half_grid[index] * dw;
        }
        const double q = y.squaredNorm();
        sum += q;
        sum_sq += q * q;
    }
    const auto n = static_cast<double>(config.n_paths);
    VarianceEstimate estimate;
    estimate.mean = sum / n;
    estimate.standard_error =
        config.n_paths < 2
            ? std::numeric_limits<double>::quiet_NaN()
            : std::sqrt(std::max(0.0, (sum_sq - n * estimate.mean * estimate.mean) / (n - 1.0)) /
                        n);
    return estimate;
}

} // namespace msslab
