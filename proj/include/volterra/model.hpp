#pragma once

#include "volterra/kernel.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <vector>

namespace volterra {

/// Deterministic control s -> beta(s) in R^d on [0, T].
///
/// Evaluators receive the remaining time gap = T - s next to s, so policies
/// proportional to a singular kernel keep full accuracy next to the horizon.
class EffortPolicy {
public:
    using Eval = std::function<Vector(double s, double gap)>;

    EffortPolicy(std::size_t dim, double horizon, Eval eval, std::vector<double> breakpoints = {})
        : dim_(dim), horizon_(horizon), eval_(std::move(eval)), breakpoints_(std::move(breakpoints))
    {
        require(dim_ >= 1, "effort dimension must be >= 1");
        require(horizon_ > 0.0, "effort horizon must be positive");
        require(static_cast<bool>(eval_), "effort evaluator must be callable");
        std::sort(breakpoints_.begin(), breakpoints_.end());
    }

    Vector operator()(double s) const { return eval_(s, horizon_ - s); }
    Vector at(double s, double gap) const { return eval_(s, gap); }

    std::size_t dim() const { return dim_; }
    double horizon() const { return horizon_; }
    /// Interior points where the policy may jump; quadrature splits there.
    const std::vector<double>& breakpoints() const { return breakpoints_; }

    /// d x n matrix of values at the given times.
    Matrix sample(const std::vector<double>& times) const
    {
        Matrix out(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(times.size()));
        for (std::size_t i = 0; i < times.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = (*this)(times[i]);
        return out;
    }

    static EffortPolicy zero(std::size_t dim, double horizon)
    {
        return {dim, horizon, [dim](double, double) { return Vector::Zero(static_cast<Eigen::Index>(dim)); }};
    }

    static EffortPolicy constant(const Vector& value, double horizon)
    {
        return {static_cast<std::size_t>(value.size()), horizon, [value](double, double) { return value; }};
    }

    static EffortPolicy from_path(std::size_t dim, double horizon, Path path)
    {
        require(static_cast<bool>(path), "effort path must be callable");
        return {dim, horizon, [path = std::move(path)](double s, double) { return path(s); }};
    }

    /// beta(s) = M K(T, s).
    static EffortPolicy kernel_linear(const VolterraKernel& kernel, double horizon, const Matrix& M)
    {
        require(M.cols() == static_cast<Eigen::Index>(kernel.dim()), "kernel multiplier has the wrong shape");
        return {static_cast<std::size_t>(M.rows()), horizon,
                [kernel, horizon, M](double s, double gap) { return Vector(M * kernel.at(horizon, s, gap)); }};
    }

    EffortPolicy plus(const EffortPolicy& other) const
    {
        require(other.dim_ == dim_ && other.horizon_ == horizon_, "effort policies do not match");
        std::vector<double> cuts = breakpoints_;
        cuts.insert(cuts.end(), other.breakpoints_.begin(), other.breakpoints_.end());
        return {dim_, horizon_,
                [a = eval_, b = other.eval_](double s, double gap) { return Vector(a(s, gap) + b(s, gap)); },
                std::move(cuts)};
    }

    EffortPolicy transformed(const Matrix& M) const
    {
        require(M.cols() == static_cast<Eigen::Index>(dim_), "effort transform has the wrong shape");
        return {static_cast<std::size_t>(M.rows()), horizon_,
                [e = eval_, M](double s, double gap) { return Vector(M * e(s, gap)); }, breakpoints_};
    }

private:
    std::size_t dim_;
    double horizon_;
    Eval eval_;
    std::vector<double> breakpoints_;
};

/// Piecewise-constant control: values[j] on [edges[j], edges[j+1]).
struct PiecewiseConstantEffort {
    std::vector<double> edges;
    std::vector<Vector> values;

    static std::vector<double> uniform_edges(double horizon, std::size_t pieces)
    {
        require(pieces >= 1, "need at least one piece");
        std::vector<double> e(pieces + 1);
        for (std::size_t j = 0; j <= pieces; ++j)
            e[j] = horizon * static_cast<double>(j) / static_cast<double>(pieces);
        e.back() = horizon;
        return e;
    }

    void validate() const
    {
        require(edges.size() >= 2 && values.size() + 1 == edges.size(),
                "piecewise-constant effort needs one value per piece");
        require(edges.front() == 0.0, "piecewise-constant effort must start at 0");
        for (std::size_t j = 1; j < edges.size(); ++j)
            require(edges[j] > edges[j - 1], "piece edges must be strictly increasing");
        for (const auto& v : values)
            require(v.size() == values.front().size() && v.allFinite(), "piece values must be finite, same size");
    }

    std::size_t piece_of(double s) const
    {
        const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, s);
        return static_cast<std::size_t>(it - (edges.begin() + 1));
    }

    EffortPolicy policy() const
    {
        validate();
        auto shared = std::make_shared<const PiecewiseConstantEffort>(*this);
        return {static_cast<std::size_t>(values.front().size()), edges.back(),
                [shared](double s, double) { return shared->values[shared->piece_of(s)]; },
                std::vector<double>(edges.begin() + 1, edges.end() - 1)};
    }
};

/// Principal-agent model with Volterra output X_T = g0(T) + int <K(T,s), dB_s>.
struct AgencyModel {
    double gamma_A = 1.0;
    double gamma_P = 1.0;
    Matrix Gamma; ///< effort cost matrix; 1 x 1 holds kappa
    double y0 = 0.0;
    double T = 1.0;
    VolterraKernel kernel;
    std::function<double(double)> g0; ///< input curve; empty means 0
    QuadratureRule quadrature{};

    AgencyModel(double gamma_a, double gamma_p, Matrix cost, double reservation, double horizon,
                VolterraKernel k, std::function<double(double)> input = {}, QuadratureRule rule = {})
        : gamma_A(gamma_a), gamma_P(gamma_p), Gamma(std::move(cost)), y0(reservation), T(horizon),
          kernel(std::move(k)), g0(std::move(input)), quadrature(rule)
    {
        validate();
    }

    AgencyModel(double gamma_a, double gamma_p, double kappa, double reservation, double horizon,
                VolterraKernel k, std::function<double(double)> input = {}, QuadratureRule rule = {})
        : AgencyModel(gamma_a, gamma_p, Matrix::Constant(1, 1, kappa), reservation, horizon, std::move(k),
                      std::move(input), rule)
    {
    }

    void validate() const
    {
        require(std::isfinite(gamma_A) && gamma_A > 0.0, "gamma_A must be positive");
        require(std::isfinite(gamma_P) && gamma_P > 0.0, "gamma_P must be positive");
        require(std::isfinite(T) && T > 0.0, "horizon T must be positive");
        require(std::isfinite(y0), "reservation value y0 must be finite");
        require(Gamma.rows() >= 1 && Gamma.rows() == Gamma.cols(), "cost matrix must be square");
        require(Gamma.allFinite(), "cost matrix must be finite");
        const double scale = std::max(1.0, Gamma.cwiseAbs().maxCoeff());
        require((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale,
                "cost matrix must be symmetric");
        const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(Gamma, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (!(lmin > 1e-10)) {
            std::ostringstream os;
            os << "cost matrix must be positive definite (smallest eigenvalue " << lmin << ")";
            throw ValidationError(os.str());
        }
        require(kernel.dim() == static_cast<std::size_t>(Gamma.rows()),
                "kernel dimension must match the cost matrix");
        quadrature.validate();
    }

    std::size_t dim() const { return static_cast<std::size_t>(Gamma.rows()); }
    double g0_at(double t) const { return g0 ? g0(t) : 0.0; }
    double g0_T() const { return g0_at(T); }

    Matrix identity() const
    {
        return Matrix::Identity(Gamma.rows(), Gamma.cols());
    }
    Matrix Gamma_inv() const { return Gamma.llt().solve(identity()); }
    /// D = gamma_A I + Gamma^{-1}, the quadratic form of the agent's drift.
    Matrix D() const { return gamma_A * identity() + Gamma_inv(); }
    /// A = gamma_P I + Gamma^{-1}.
    Matrix A() const { return gamma_P * identity() + Gamma_inv(); }
    /// Q = (gamma_A + gamma_P) I + Gamma^{-1}.
    Matrix Q() const { return (gamma_A + gamma_P) * identity() + Gamma_inv(); }

    /// Quadrature nodes on [0, T] for integrands built from K(T, .), split at
    /// the given policy breakpoints.
    NodeSet nodes(std::span<const double> breakpoints = {}) const
    {
        return make_nodes(0.0, T, quadrature.for_kernel(kernel), breakpoints);
    }
};

} // namespace volterra
