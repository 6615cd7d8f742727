#pragma once

// Monte Carlo sampling of the controlled Volterra model.
//
// Paths are independent and addressed by index in the counter-based
// generator, so results do not depend on the thread count. Per-path values
// land in fixed slots and are reduced with pairwise sums in path order.

#include "volterra/contract.hpp"
#include "volterra/model.hpp"
#include "volterra/parallel.hpp"
#include "volterra/philox.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/summation.hpp"
#include "volterra/types.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <thread>
#include <vector>

namespace volterra {

enum class Scheme { terminal_exact, euler_path };

struct SimulationConfig {
    std::size_t n_paths = 10000;
    std::size_t n_steps = 256;
    std::uint64_t seed = 20240601;
    Scheme scheme = Scheme::terminal_exact;
    unsigned threads = 0; ///< 0 = hardware concurrency

    void validate() const
    {
        require(n_paths >= 1, "simulation.n_paths must be >= 1");
        require(n_steps >= 1, "simulation.n_steps must be >= 1");
    }
};

/// Mean and standard error (sample sd / sqrt(n)) of one statistic.
struct Estimate {
    double mean = 0.0;
    double se = 0.0;

    /// |mean - target| <= n_sigma se, plus rounding slack for the reduction.
    bool within(double target, double n_sigma = 3.0) const
    {
        return std::abs(mean - target) <= n_sigma * se + 1e-12 * std::abs(target);
    }
};

inline Estimate estimate(const std::vector<double>& xs)
{
    const SampleStats s = sample_stats(xs);
    return {s.mean, s.stderr_mean};
}

/// Sample variance with the standard error of the plug-in estimator
/// (mean of (x - xbar)^2, rescaled to the unbiased variance).
inline Estimate variance_estimate(const std::vector<double>& xs)
{
    require(xs.size() >= 2, "variance needs at least two samples");
    const double m = sample_stats(xs).mean;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - m) * (xs[i] - m);
    const SampleStats s = sample_stats(sq);
    const double n = static_cast<double>(xs.size());
    return {s.mean * n / (n - 1.0), s.stderr_mean * n / (n - 1.0)};
}

namespace detail {

inline unsigned thread_count(const SimulationConfig& cfg) { return resolve_threads(cfg.threads); }

/// Cell averages over a uniform grid, computed with the model's quadrature
/// (graded at the singular ends). Stepping with the averages is the exact
/// Ito integral of the step-function projection of each integrand, which
/// keeps singular kernels at s = 0 finite and, because beta* = Q^{-1} A K is
/// linear in K, keeps the discrete M^{beta*} an exact martingale.
class CellAverages {
public:
    CellAverages(const AgencyModel& model, const std::vector<const EffortPolicy*>& policies, std::size_t n)
        : n_(n), dt_(model.T / static_cast<double>(n))
    {
        const QuadratureRule rule = model.quadrature.for_kernel(model.kernel);
        std::vector<double> cuts;
        for (const auto* p : policies) cuts.insert(cuts.end(), p->breakpoints().begin(), p->breakpoints().end());
        std::sort(cuts.begin(), cuts.end());
        const auto d = static_cast<Eigen::Index>(model.dim());
        kernel_.assign(n, Vector::Zero(d));
        policy_.assign(policies.size(), std::vector<Vector>(n, Vector::Zero(d)));
        const int end_panels = std::max(1, rule.panels / 4);
        for (std::size_t i = 0; i < n; ++i) {
            const double lo = model.T * static_cast<double>(i) / static_cast<double>(n);
            const double hi = i + 1 == n ? model.T : model.T * static_cast<double>(i + 1) / static_cast<double>(n);
            const bool first = i == 0, last = i + 1 == n;
            const NodeSet nodes = make_nodes(lo, hi, first || last ? end_panels : 1, rule.order,
                                             first ? 2.0 * rule.left_exponent.value_or(0.0) : 0.0,
                                             last ? 2.0 * rule.right_exponent.value_or(0.0) : 0.0, cuts);
            const double len = hi - lo;
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                const double s = nodes.nodes[j], gap = (model.T - hi) + nodes.gaps[j];
                const double w = nodes.weights[j] / len;
                kernel_[i] += w * model.kernel.at(model.T, s, gap);
                for (std::size_t p = 0; p < policies.size(); ++p) policy_[p][i] += w * policies[p]->at(s, gap);
            }
            if (!kernel_[i].allFinite()) {
                std::ostringstream os;
                os << "non-finite kernel average on cell [" << lo << ", " << hi << "]";
                throw NumericalError(os.str());
            }
        }
    }

    std::size_t steps() const { return n_; }
    double dt() const { return dt_; }
    const Vector& kernel(std::size_t i) const { return kernel_[i]; }
    const Vector& policy(std::size_t p, std::size_t i) const { return policy_[p][i]; }

private:
    std::size_t n_;
    double dt_;
    std::vector<Vector> kernel_;
    std::vector<std::vector<Vector>> policy_;
};

/// Brownian increments of one path. Normals are consumed in order
/// (step i, component c) -> index i d + c, two per Philox block; step()
/// must be called for i = 0, 1, 2, ...
class IncrementSource {
public:
    IncrementSource(const NormalStream& normals, std::uint64_t path, std::size_t dim, double dt)
        : normals_(normals), path_(path), sqrt_dt_(std::sqrt(dt)), z_(static_cast<Eigen::Index>(dim))
    {
    }

    const Vector& step(std::size_t)
    {
        for (Eigen::Index c = 0; c < z_.size(); ++c) z_(c) = sqrt_dt_ * next();
        return z_;
    }

private:
    const NormalStream& normals_;
    std::uint64_t path_;
    double sqrt_dt_;
    Vector z_;
    std::uint64_t index_ = 0;
    std::array<double, 2> pair_{};

    double next()
    {
        if (index_ % 2 == 0) pair_ = normals_.pair(path_, index_ / 2);
        return pair_[index_++ % 2];
    }
};

/// Per-step drift increments of g and Y under P^beta.
struct StepDrifts {
    std::vector<double> x; ///< <K, Gamma^{-1} beta> dt
    std::vector<double> y; ///< <beta, D beta> dt / 2
};

inline StepDrifts step_drifts(const AgencyModel& model, const CellAverages& cells)
{
    const Matrix Gi = model.Gamma_inv();
    const Matrix D = model.D();
    StepDrifts out;
    for (std::size_t i = 0; i < cells.steps(); ++i) {
        const Vector& b = cells.policy(0, i);
        out.x.push_back(cells.kernel(i).dot(Gi * b) * cells.dt());
        out.y.push_back(0.5 * b.dot(D * b) * cells.dt());
    }
    return out;
}

inline std::vector<std::size_t> checkpoint_steps(const std::vector<double>& times, double T, std::size_t n)
{
    std::vector<std::size_t> out;
    for (double t : times) {
        require(std::isfinite(t) && t >= 0.0 && t <= T * (1.0 + 1e-12), "checkpoint times must lie in [0, T]");
        out.push_back(static_cast<std::size_t>(std::lround(t / T * static_cast<double>(n))));
    }
    return out;
}

} // namespace detail

/// Samples of (X_T, Y_T) under P^beta with Y the contract value process.
struct TerminalSamples {
    std::vector<double> x;
    std::vector<double> y;

    /// -exp(-gamma_P (X_T - Y_T)) per path.
    std::vector<double> principal_utility(double gamma_P) const
    {
        std::vector<double> u(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) u[i] = -std::exp(-gamma_P * (x[i] - y[i]));
        return u;
    }
};

/// Means and covariance of (int <K_T, dB>, int <beta, dB>) and the drifts.
struct TerminalMoments {
    double mean_x = 0.0, mean_y = 0.0;
    double var_x = 0.0, cov = 0.0, var_y = 0.0;
};

inline TerminalMoments terminal_moments(const AgencyModel& model, const EffortPolicy& beta, double y)
{
    const NodeSet nodes = model.nodes(beta.breakpoints());
    const Matrix Gi = model.Gamma_inv();
    const Matrix D = model.D();
    CompensatedSum mx, my, vxx, vxy, vyy;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double s = nodes.nodes[i], g = nodes.gaps[i], w = nodes.weights[i];
        const Vector k = model.kernel.at(model.T, s, g);
        const Vector b = beta.at(s, g);
        mx.add(w * k.dot(Gi * b));
        my.add(w * 0.5 * b.dot(D * b));
        vxx.add(w * k.squaredNorm());
        vxy.add(w * k.dot(b));
        vyy.add(w * b.squaredNorm());
    }
    TerminalMoments out{model.g0_T() + mx.value(), y + my.value(), vxx.value(), vxy.value(), vyy.value()};
    if (!(std::isfinite(out.mean_x) && std::isfinite(out.mean_y) && std::isfinite(out.var_x) &&
          std::isfinite(out.cov) && std::isfinite(out.var_y)))
        throw NumericalError("non-finite terminal moments");
    return out;
}

namespace detail {

// Lower Cholesky factor of [[a, c], [c, b]], tolerating a negative Schur
// complement down to -1e-12 (relative) and clamping it to zero.
inline std::array<double, 3> chol2(double a, double c, double b)
{
    constexpr double jitter = 1e-12;
    const double scale = std::max({1.0, a, b});
    if (a <= jitter * scale) {
        if (a < -jitter * scale || std::abs(c) > jitter * scale || b < -jitter * scale)
            throw NumericalError("terminal covariance is not positive semidefinite");
        return {0.0, 0.0, std::sqrt(std::max(b, 0.0))};
    }
    const double l11 = std::sqrt(a), l21 = c / l11, schur = b - l21 * l21;
    if (schur < -jitter * scale) {
        std::ostringstream os;
        os << "terminal covariance is not positive semidefinite (Schur complement " << schur << ")";
        throw NumericalError(os.str());
    }
    return {l11, l21, std::sqrt(std::max(schur, 0.0))};
}

} // namespace detail

/// (X_T, Y_T) with X_T = g0(T) + int <K, Gamma^{-1} beta> ds + int <K, dB^beta>
/// and Y_T = y + (1/2) int <beta, D beta> ds + int <beta, dB^beta>.
inline TerminalSamples sample_terminal(const AgencyModel& model, const EffortPolicy& beta, double y,
                                       const SimulationConfig& cfg)
{
    model.validate();
    cfg.validate();
    require(beta.dim() == model.dim(), "effort dimension must match the model");
    TerminalSamples out;
    out.x.resize(cfg.n_paths);
    out.y.resize(cfg.n_paths);
    const NormalStream normals(cfg.seed);

    if (cfg.scheme == Scheme::terminal_exact) {
        const TerminalMoments mo = terminal_moments(model, beta, y);
        const auto [l11, l21, l22] = detail::chol2(mo.var_x, mo.cov, mo.var_y);
        detail::parallel_for(cfg.n_paths, detail::thread_count(cfg), [&](std::size_t p) {
            const auto z = normals.pair(p, 0);
            out.x[p] = mo.mean_x + l11 * z[0];
            out.y[p] = mo.mean_y + l21 * z[0] + l22 * z[1];
        });
        return out;
    }

    const detail::CellAverages cells(model, {&beta}, cfg.n_steps);
    const detail::StepDrifts drift = detail::step_drifts(model, cells);
    const double dt = cells.dt();
    const double g0T = model.g0_T();
    detail::parallel_for(cfg.n_paths, detail::thread_count(cfg), [&](std::size_t p) {
        detail::IncrementSource inc(normals, p, model.dim(), dt);
        double gx = g0T, yy = y;
        for (std::size_t i = 0; i < cfg.n_steps; ++i) {
            const Vector& dB = inc.step(i);
            gx += drift.x[i] + cells.kernel(i).dot(dB);
            yy += drift.y[i] + cells.policy(0, i).dot(dB);
        }
        out.x[p] = gx;
        out.y[p] = yy;
    });
    return out;
}

/// Full paths on the Euler grid.
struct PathBundle {
    std::vector<double> times;   ///< n_steps + 1 grid points
    Matrix forward_output;       ///< g_t^beta(T), n_paths x (n_steps + 1)
    Matrix y_process;            ///< Y_t^{y,beta}
    Matrix m_process;            ///< M_t^beta
    std::vector<double> terminal_x; ///< X_T assembled separately from drift and noise sums
    std::vector<double> phi;     ///< phi_t on the grid
};

namespace detail {

/// phi on the grid from the cell averages; the discrete analogue of
/// (gamma_P/2) int_t^T <K, (lead I - A Q^{-1} A) K> ds.
inline std::vector<double> grid_phi(const AgencyModel& model, const CellAverages& cells, PhiVariant variant)
{
    const Matrix A = model.A();
    const double lead = variant == PhiVariant::adopted ? model.gamma_P : model.gamma_P * model.gamma_P;
    const Matrix W = lead * model.identity() - A * model.Q().llt().solve(A);
    const std::size_t n = cells.steps();
    std::vector<double> phi(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;)
        phi[i] = phi[i + 1] + 0.5 * model.gamma_P * cells.kernel(i).dot(W * cells.kernel(i)) * cells.dt();
    return phi;
}

inline double m_value(double gamma_P, double g, double y, double phi, std::size_t path)
{
    const double v = std::exp(-gamma_P * (g - y) + phi);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "M overflowed on path " << path << " (exponent " << (-gamma_P * (g - y) + phi)
           << "); rescale the risk aversions";
        throw NumericalError(os.str());
    }
    return v;
}

} // namespace detail

/// Euler-path simulation keeping every grid value. Memory is
/// 3 n_paths (n_steps + 1) doubles.
inline PathBundle simulate_paths(const AgencyModel& model, const EffortPolicy& beta, double y,
                                 const SimulationConfig& cfg, PhiVariant variant = PhiVariant::adopted)
{
    model.validate();
    cfg.validate();
    require(beta.dim() == model.dim(), "effort dimension must match the model");
    const std::size_t n = cfg.n_steps;
    const detail::CellAverages cells(model, {&beta}, n);
    const detail::StepDrifts drift_of = detail::step_drifts(model, cells);
    const double dt = cells.dt();
    PathBundle out;
    out.phi = detail::grid_phi(model, cells, variant);
    out.times.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.times[i] = model.T * static_cast<double>(i) / static_cast<double>(n);
    const auto rows = static_cast<Eigen::Index>(cfg.n_paths), cols = static_cast<Eigen::Index>(n + 1);
    out.forward_output.resize(rows, cols);
    out.y_process.resize(rows, cols);
    out.m_process.resize(rows, cols);
    out.terminal_x.resize(cfg.n_paths);
    const NormalStream normals(cfg.seed);
    const double g0T = model.g0_T();
    detail::parallel_for(cfg.n_paths, detail::thread_count(cfg), [&](std::size_t p) {
        const auto r = static_cast<Eigen::Index>(p);
        detail::IncrementSource inc(normals, p, model.dim(), dt);
        double g = g0T, yy = y;
        CompensatedSum drift, noise;
        out.forward_output(r, 0) = g;
        out.y_process(r, 0) = yy;
        out.m_process(r, 0) = detail::m_value(model.gamma_P, g, yy, out.phi[0], p);
        for (std::size_t i = 0; i < n; ++i) {
            const Vector& dB = inc.step(i);
            const double dx = drift_of.x[i], dn = cells.kernel(i).dot(dB);
            g += dx + dn;
            drift.add(dx);
            noise.add(dn);
            yy += drift_of.y[i] + cells.policy(0, i).dot(dB);
            const auto c = static_cast<Eigen::Index>(i + 1);
            out.forward_output(r, c) = g;
            out.y_process(r, c) = yy;
            out.m_process(r, c) = detail::m_value(model.gamma_P, g, yy, out.phi[i + 1], p);
        }
        out.terminal_x[p] = g0T + drift.value() + noise.value();
    });
    return out;
}

struct CheckpointStat {
    double t = 0.0;
    Estimate value;
};

/// Sample means of a process at checkpoints, with its exact initial value.
struct MartingaleReport {
    double initial = 0.0;
    std::vector<CheckpointStat> points;
    Estimate drift; ///< (E[Z_T] - Z_0) / T

    bool flat(double n_sigma = 3.0) const
    {
        return std::all_of(points.begin(), points.end(),
                           [&](const CheckpointStat& c) { return c.value.within(initial, n_sigma); });
    }
    int drift_sign() const { return drift.mean > 0.0 ? 1 : (drift.mean < 0.0 ? -1 : 0); }
};

namespace detail {

inline MartingaleReport summarize(double initial, double T, const std::vector<double>& times,
                                  const std::vector<std::vector<double>>& at_checkpoints,
                                  const std::vector<double>& terminal)
{
    MartingaleReport rep;
    rep.initial = initial;
    for (std::size_t c = 0; c < times.size(); ++c) rep.points.push_back({times[c], estimate(at_checkpoints[c])});
    std::vector<double> d(terminal.size());
    for (std::size_t p = 0; p < terminal.size(); ++p) d[p] = (terminal[p] - initial) / T;
    rep.drift = estimate(d);
    return rep;
}

} // namespace detail

/// M_t^beta = exp(-gamma_P (g_t^beta(T) - Y_t) + phi_t) on the Euler grid.
/// Flat in mean for beta = beta*, a submartingale otherwise.
inline MartingaleReport martingale_diagnostic(const AgencyModel& model, const EffortPolicy& beta, double y,
                                              const SimulationConfig& cfg, const std::vector<double>& checkpoints,
                                              PhiVariant variant = PhiVariant::adopted)
{
    model.validate();
    cfg.validate();
    require(cfg.scheme == Scheme::euler_path, "martingale_diagnostic needs the euler-path scheme");
    require(beta.dim() == model.dim(), "effort dimension must match the model");
    const std::size_t n = cfg.n_steps;
    const auto steps = detail::checkpoint_steps(checkpoints, model.T, n);
    const detail::CellAverages cells(model, {&beta}, n);
    const std::vector<double> phi = detail::grid_phi(model, cells, variant);
    const detail::StepDrifts drift = detail::step_drifts(model, cells);
    const double dt = cells.dt();
    const NormalStream normals(cfg.seed);
    const double g0T = model.g0_T();

    std::vector<std::vector<double>> at(steps.size(), std::vector<double>(cfg.n_paths));
    std::vector<double> terminal(cfg.n_paths);
    detail::parallel_for(cfg.n_paths, detail::thread_count(cfg), [&](std::size_t p) {
        detail::IncrementSource inc(normals, p, model.dim(), dt);
        double g = g0T, yy = y;
        auto record = [&](std::size_t step) {
            const double m = detail::m_value(model.gamma_P, g, yy, phi[step], p);
            for (std::size_t c = 0; c < steps.size(); ++c)
                if (steps[c] == step) at[c][p] = m;
            if (step == n) terminal[p] = m;
        };
        record(0);
        for (std::size_t i = 0; i < n; ++i) {
            const Vector& dB = inc.step(i);
            g += drift.x[i] + cells.kernel(i).dot(dB);
            yy += drift.y[i] + cells.policy(0, i).dot(dB);
            record(i + 1);
        }
    });
    std::vector<double> snapped;
    for (auto s : steps) snapped.push_back(model.T * static_cast<double>(s) / static_cast<double>(n));
    return detail::summarize(detail::m_value(model.gamma_P, g0T, y, phi[0], 0), model.T, snapped, at, terminal);
}

/// Agent side: R_t = -exp(-gamma_A (Y_t - int_0^t k(a) ds)) under P^a, where
/// dY = [<beta, D beta>/2 + <beta, a - Gamma^{-1} beta>] dt + <beta, dB^a>.
/// Flat in mean for a = Gamma^{-1} beta; its mean decreases for other a.
inline MartingaleReport agent_diagnostic(const AgencyModel& model, const EffortPolicy& beta, const EffortPolicy& a,
                                         double y, const SimulationConfig& cfg,
                                         const std::vector<double>& checkpoints)
{
    model.validate();
    cfg.validate();
    require(cfg.scheme == Scheme::euler_path, "agent_diagnostic needs the euler-path scheme");
    require(beta.dim() == model.dim() && a.dim() == model.dim(), "effort dimension must match the model");
    const std::size_t n = cfg.n_steps;
    const auto steps = detail::checkpoint_steps(checkpoints, model.T, n);
    const detail::CellAverages cells(model, {&beta, &a}, n);
    const Matrix Gi = model.Gamma_inv();
    const Matrix D = model.D();
    const double dt = cells.dt();
    std::vector<double> drift(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector& b = cells.policy(0, i);
        const Vector& e = cells.policy(1, i);
        drift[i] = (0.5 * b.dot(D * b) + b.dot(e - Gi * b) - 0.5 * e.dot(model.Gamma * e)) * dt;
    }
    const NormalStream normals(cfg.seed);
    auto r_value = [&](double w, std::size_t p) {
        const double v = -std::exp(-model.gamma_A * w);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "agent utility overflowed on path " << p;
            throw NumericalError(os.str());
        }
        return v;
    };
    std::vector<std::vector<double>> at(steps.size(), std::vector<double>(cfg.n_paths));
    std::vector<double> terminal(cfg.n_paths);
    detail::parallel_for(cfg.n_paths, detail::thread_count(cfg), [&](std::size_t p) {
        detail::IncrementSource inc(normals, p, model.dim(), dt);
        double w = y; // Y_t - int_0^t k(a)
        auto record = [&](std::size_t step) {
            const double r = r_value(w, p);
            for (std::size_t c = 0; c < steps.size(); ++c)
                if (steps[c] == step) at[c][p] = r;
            if (step == n) terminal[p] = r;
        };
        record(0);
        for (std::size_t i = 0; i < n; ++i) {
            w += drift[i] + cells.policy(0, i).dot(inc.step(i));
            record(i + 1);
        }
    });
    std::vector<double> snapped;
    for (auto s : steps) snapped.push_back(model.T * static_cast<double>(s) / static_cast<double>(n));
    return detail::summarize(r_value(y, 0), model.T, snapped, at, terminal);
}

/// Gaussian output paths X_{t_j} = g0(t_j) + int_0^{t_j} <K(t_j, r), dB_r> on
/// t_j = j T / n_steps, j = 0..n_steps, drawn from the exact covariance.
struct OutputPaths {
    std::vector<double> times;
    Matrix paths; ///< n_paths x (n_steps + 1)
    double jitter = 0.0;
};

inline Matrix output_covariance(const VolterraKernel& k, const std::vector<double>& times,
                                const QuadratureRule& rule, unsigned threads)
{
    const auto n = static_cast<Eigen::Index>(times.size());
    Matrix C(n, n);
    detail::parallel_for(times.size(), threads, [&](std::size_t i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double c = kernel_covariance(k, times[i], times[j], rule);
            C(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
        }
    }, 1);
    return C.selfadjointView<Eigen::Lower>();
}

inline OutputPaths sample_output_path(const AgencyModel& model, const SimulationConfig& cfg)
{
    model.validate();
    cfg.validate();
    const std::size_t n = cfg.n_steps;
    OutputPaths out;
    out.times.resize(n + 1);
    for (std::size_t j = 0; j <= n; ++j) out.times[j] = model.T * static_cast<double>(j) / static_cast<double>(n);
    const std::vector<double> inner(out.times.begin() + 1, out.times.end());
    const unsigned threads = detail::thread_count(cfg);
    const Matrix C = output_covariance(model.kernel, inner, model.quadrature, threads);
    const double scale = std::max(C.diagonal().maxCoeff(), 1e-300);

    Eigen::LLT<Matrix> llt;
    bool ok = false;
    for (double j : {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10}) {
        llt.compute(C + (j * scale) * Matrix::Identity(C.rows(), C.cols()));
        if (llt.info() == Eigen::Success) {
            out.jitter = j * scale;
            ok = true;
            break;
        }
    }
    if (!ok) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(C, Eigen::EigenvaluesOnly);
        std::ostringstream os;
        os << "output covariance factorization failed after jitter 1e-10: eigenvalues in ["
           << eig.eigenvalues().minCoeff() << ", " << eig.eigenvalues().maxCoeff() << "]";
        throw NumericalError(os.str());
    }
    const Matrix L = llt.matrixL();
    std::vector<double> g0(n + 1);
    for (std::size_t j = 0; j <= n; ++j) g0[j] = model.g0_at(out.times[j]);
    out.paths.resize(static_cast<Eigen::Index>(cfg.n_paths), static_cast<Eigen::Index>(n + 1));
    const NormalStream normals(cfg.seed);
    detail::parallel_for(cfg.n_paths, threads, [&](std::size_t p) {
        Vector z(static_cast<Eigen::Index>(n));
        normals.fill(p, 0, n, z.data());
        const Vector x = L * z;
        const auto r = static_cast<Eigen::Index>(p);
        out.paths(r, 0) = g0[0];
        for (std::size_t j = 1; j <= n; ++j) out.paths(r, static_cast<Eigen::Index>(j)) = g0[j] + x(static_cast<Eigen::Index>(j - 1));
    });
    return out;
}

} // namespace volterra
