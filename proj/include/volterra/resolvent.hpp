#pragma once

#include "volterra/kernel.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace volterra {

/// Finite measure on [0, T] with d x d matrix weights: point masses plus an
/// optional density.
struct ConvolutionMeasure {
    struct Atom {
        double t;
        Matrix a;
    };

    std::size_t dim = 1;
    std::vector<Atom> atoms;
    std::function<Matrix(double)> density; ///< empty when absent

    void validate(double T) const
    {
        require(dim >= 1, "measure dimension must be >= 1");
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            const auto& at = atoms[i];
            require(at.t >= 0.0 && at.t <= T, "measure atoms must lie in [0, T]");
            require(at.a.rows() == static_cast<Eigen::Index>(dim) &&
                        at.a.cols() == static_cast<Eigen::Index>(dim),
                    "measure atom weights must be d x d");
            require(at.a.allFinite(), "measure atom weights must be finite");
            if (i > 0) require(at.t > atoms[i - 1].t, "measure atoms must be sorted by location");
        }
    }

    /// Smallest spacing between consecutive atoms, counting the origin as a
    /// location; +inf when there is nothing to resolve.
    double min_atom_gap() const
    {
        double gap = std::numeric_limits<double>::infinity();
        double prev = 0.0;
        for (const auto& at : atoms) {
            if (at.t > prev) gap = std::min(gap, at.t - prev);
            prev = at.t;
        }
        return gap;
    }

    static ConvolutionMeasure zero(std::size_t dim) { return {dim, {}, {}}; }

    static ConvolutionMeasure dirac(double t, const Matrix& a)
    {
        return {static_cast<std::size_t>(a.rows()), {{t, a}}, {}};
    }

    static ConvolutionMeasure dirac(double t, double a) { return dirac(t, Matrix::Constant(1, 1, a)); }
};

/// Differential resolvent R' = mu * R, R(0) = I, on a uniform grid.
class Resolvent {
public:
    Resolvent(double horizon, std::vector<Matrix> values)
        : horizon_(horizon), values_(std::move(values))
    {
        require(values_.size() >= 2, "resolvent needs at least two grid values");
        step_ = horizon_ / static_cast<double>(values_.size() - 1);
    }

    double horizon() const { return horizon_; }
    double step() const { return step_; }
    std::size_t steps() const { return values_.size() - 1; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.front().rows()); }
    const std::vector<Matrix>& values() const { return values_; }
    double grid_time(std::size_t i) const { return static_cast<double>(i) * step_; }

    /// Linear interpolation between grid values; zero for t < 0.
    Matrix operator()(double t) const
    {
        const auto d = static_cast<Eigen::Index>(dim());
        if (t < 0.0) return Matrix::Zero(d, d);
        require(t <= horizon_ * (1.0 + 1e-12), "resolvent evaluated beyond its horizon");
        const double x = std::min(t / step_, static_cast<double>(steps()));
        const auto i = std::min(static_cast<std::size_t>(x), steps() - 1);
        const double f = x - static_cast<double>(i);
        return (1.0 - f) * values_[i] + f * values_[i + 1];
    }

private:
    double horizon_;
    double step_;
    std::vector<Matrix> values_;
};

/// dX_t = (h(t) + (mu * X)(t)) dt + sigma dB_t, X_0 = x0.
struct IntegroModel {
    Vector x0;
    Path h; ///< empty means h = 0
    Matrix sigma;
    ConvolutionMeasure mu;

    std::size_t dim() const { return static_cast<std::size_t>(x0.size()); }

    void validate(double T) const
    {
        require(x0.size() >= 1, "integro model needs a state of dimension >= 1");
        require(sigma.rows() == x0.size(), "sigma must have one row per state component");
        require(sigma.cols() >= 1, "sigma needs at least one noise column");
        require(mu.dim == dim(), "measure dimension must match the state dimension");
        mu.validate(T);
    }
};

/// Implicit trapezoidal stepping of R' = mu * R, R(0) = I. Over a step
/// [tau_i, tau_{i+1}] the origin atom and the density enter through the
/// trapezoidal rule (implicitly), while each delayed atom a_k contributes
/// a_k int R(s - t_k) ds integrated exactly over the piecewise linear past.
/// The exact integral matters because R(. - t_k) jumps from 0 to I at t_k.
inline Resolvent solve_resolvent(const ConvolutionMeasure& mu, double T, std::size_t n)
{
    require(T > 0.0, "resolvent horizon must be positive");
    require(n >= 2, "resolvent needs at least 2 steps");
    mu.validate(T);
    const double dt = T / static_cast<double>(n);
    if (dt > mu.min_atom_gap() * (1.0 + 1e-12))
        throw ValidationError("resolvent step exceeds the smallest atom spacing; increase n");

    const auto d = static_cast<Eigen::Index>(mu.dim);
    const Matrix I = Matrix::Identity(d, d);
    std::vector<Matrix> R;
    R.reserve(n + 1);
    R.push_back(I);

    Matrix a0 = Matrix::Zero(d, d);
    std::vector<const ConvolutionMeasure::Atom*> delayed;
    for (const auto& at : mu.atoms) {
        if (at.t == 0.0)
            a0 += at.a;
        else
            delayed.push_back(&at);
    }

    std::vector<Matrix> rho;
    if (mu.density) {
        rho.reserve(n + 1);
        for (std::size_t j = 0; j <= n; ++j) {
            Matrix m = mu.density(static_cast<double>(j) * dt);
            require(m.rows() == d && m.cols() == d && m.allFinite(),
                    "measure density must return finite d x d matrices");
            rho.push_back(std::move(m));
        }
    }

    // int_l^r R(u) du for the linear interpolant of the values computed so
    // far, with R = 0 for u < 0.
    auto integral = [&](double l, double r) -> Matrix {
        Matrix acc = Matrix::Zero(d, d);
        l = std::max(l, 0.0);
        if (r <= l) return acc;
        auto j = static_cast<std::size_t>(std::floor(l / dt));
        while (l < r) {
            const double cell_end = std::min(r, static_cast<double>(j + 1) * dt);
            if (cell_end > l) {
                const double f = 0.5 * (l + cell_end) / dt - static_cast<double>(j);
                const std::size_t k = std::min(j + 1, R.size() - 1);
                acc.noalias() += (cell_end - l) * ((1.0 - f) * R[std::min(j, R.size() - 1)] + f * R[k]);
            }
            l = cell_end;
            ++j;
        }
        return acc;
    };

    // Density convolution at tau_i without its j = 0 term.
    auto density_tail = [&](std::size_t i) -> Matrix {
        Matrix c = Matrix::Zero(d, d);
        for (std::size_t j = 1; j <= i; ++j) c.noalias() += (j == i ? 0.5 * dt : dt) * rho[j] * R[i - j];
        return c;
    };

    const Matrix implicit = a0 + (rho.empty() ? Matrix::Zero(d, d) : Matrix(0.5 * dt * rho[0]));
    const auto lu = (I - 0.5 * dt * implicit).partialPivLu();
    Matrix smooth_prev = a0; // origin atom plus density at t = 0 (empty integral)
    for (std::size_t i = 0; i < n; ++i) {
        const double t0 = static_cast<double>(i) * dt, t1 = t0 + dt;
        Matrix jump = Matrix::Zero(d, d);
        // Delayed lags t - t_k <= t0 because dt <= t_k: only known values are read.
        for (const auto* at : delayed) jump.noalias() += at->a * integral(t0 - at->t, t1 - at->t);
        const Matrix known = rho.empty() ? Matrix::Zero(d, d) : density_tail(i + 1);
        Matrix next = lu.solve(R[i] + jump + 0.5 * dt * (smooth_prev + known));
        if (!next.allFinite()) throw NumericalError("resolvent stepping produced non-finite values");
        smooth_prev = implicit * next + known;
        R.push_back(std::move(next));
    }
    return Resolvent(T, std::move(R));
}

/// Scalar-output kernel K(t,s) = w^T R(t-s) sigma; w defaults to e_1.
inline VolterraKernel induced_kernel(const IntegroModel& model, std::shared_ptr<const Resolvent> res,
                                     std::optional<Vector> aggregation = std::nullopt)
{
    require(res != nullptr, "induced kernel needs a solved resolvent");
    model.validate(res->horizon());
    require(res->dim() == model.dim(), "resolvent dimension must match the model");
    Vector w = aggregation.value_or(Vector::Unit(static_cast<Eigen::Index>(model.dim()), 0));
    require(w.size() == static_cast<Eigen::Index>(model.dim()), "aggregation vector has the wrong size");
    const Matrix sigma = model.sigma;
    return VolterraKernel(
        static_cast<std::size_t>(sigma.cols()),
        [res, w, sigma](double, double, double lag) {
            return Vector(((*res)(lag) * sigma).transpose() * w);
        },
        {}, KernelInfo{"integro", {{"steps", static_cast<double>(res->steps())}}});
}

/// g0(t) = R(t) x0 + int_0^t R(t-s) h(s) ds, by Gauss-Legendre on every
/// resolvent grid cell in the lag variable (R is linear there).
inline Path induced_input_curve(const IntegroModel& model, std::shared_ptr<const Resolvent> res)
{
    require(res != nullptr, "input curve needs a solved resolvent");
    model.validate(res->horizon());
    require(res->dim() == model.dim(), "resolvent dimension must match the model");
    const Vector x0 = model.x0;
    const Path h = model.h;
    return [res, x0, h](double t) -> Vector {
        Vector g = (*res)(t) * x0;
        if (!h || t <= 0.0) return g;
        const auto [x, w] = gauss_legendre(4);
        const double dt = res->step();
        const auto cells = static_cast<std::size_t>(std::ceil(t / dt - 1e-9));
        std::vector<CompensatedSum> acc(static_cast<std::size_t>(g.size()));
        for (std::size_t j = 0; j < cells; ++j) {
            const double lo = static_cast<double>(j) * dt;
            const double hi = j + 1 == cells ? t : lo + dt;
            const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
            for (std::size_t q = 0; q < x.size(); ++q) {
                const double u = mid + half * x[q];
                const Vector v = (*res)(u) * h(t - u);
                for (Eigen::Index c = 0; c < v.size(); ++c)
                    acc[static_cast<std::size_t>(c)].add(half * w[q] * v(c));
            }
        }
        for (Eigen::Index c = 0; c < g.size(); ++c) g(c) += acc[static_cast<std::size_t>(c)].value();
        return g;
    };
}

} // namespace volterra
