#pragma once

// Direct Gaussian evaluation of the principal's and agent's objectives for
// deterministic controls. Nothing here uses the closed-form optimum, so the
// contract formulas can be checked against it.

#include "volterra/model.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/summation.hpp"
#include "volterra/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace volterra {

struct ObjectiveEvaluation {
    double mean = 0.0;     ///< m(beta)
    double variance = 0.0; ///< v(beta)
    double exponent = 0.0; ///< -gamma_P m + gamma_P^2 v / 2
    double value = 0.0;    ///< -exp(exponent)
};

namespace detail {

struct OracleMatrices {
    Matrix Gamma_inv;
    Matrix D;
    explicit OracleMatrices(const AgencyModel& m) : Gamma_inv(m.Gamma_inv()), D(m.D()) {}
};

// Integrand pieces at one node, accumulated into m and v.
inline void accumulate_objective(const OracleMatrices& mats, const Vector& k, const Vector& beta, double w,
                                 CompensatedSum& m, CompensatedSum& v)
{
    m.add(w * (k.dot(mats.Gamma_inv * beta) - 0.5 * beta.dot(mats.D * beta)));
    v.add(w * (k - beta).squaredNorm());
}

inline ObjectiveEvaluation finish_objective(const AgencyModel& model, double y, const CompensatedSum& m,
                                            const CompensatedSum& v)
{
    ObjectiveEvaluation out;
    out.mean = model.g0_T() - y + m.value();
    out.variance = std::max(0.0, v.value());
    out.exponent = -model.gamma_P * out.mean + 0.5 * model.gamma_P * model.gamma_P * out.variance;
    out.value = -std::exp(out.exponent);
    return out;
}

} // namespace detail

/// m = g0(T) - y + int [<K, Gamma^{-1} beta> - <beta, D beta>/2],
/// v = int |K - beta|^2, value = E[-exp(-gamma_P (X_T - Y_T))] under P^beta.
inline ObjectiveEvaluation principal_objective(double y, const EffortPolicy& beta, const AgencyModel& model)
{
    require(beta.dim() == model.dim(), "effort dimension must match the model");
    const NodeSet nodes = model.nodes(beta.breakpoints());
    const detail::OracleMatrices mats(model);
    CompensatedSum m, v;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double s = nodes.nodes[i], gap = nodes.gaps[i];
        const Vector k = model.kernel.at(model.T, s, gap);
        const Vector b = beta.at(s, gap);
        if (!k.allFinite() || !b.allFinite()) {
            std::ostringstream os;
            os << "non-finite kernel or effort at node s=" << s;
            throw NumericalError(os.str());
        }
        detail::accumulate_objective(mats, k, b, nodes.weights[i], m, v);
    }
    return detail::finish_objective(model, y, m, v);
}

/// Certainty equivalent of the agent's pay under contract (y, beta) when
/// exerting the deterministic effort a:
///   y + int [f*(beta) + <beta, a> - <a, Gamma a>/2] - (gamma_A/2) int |beta|^2.
inline double agent_certainty_equivalent(double y, const EffortPolicy& beta, const EffortPolicy& a,
                                         const AgencyModel& model)
{
    require(beta.dim() == model.dim() && a.dim() == model.dim(), "effort dimension must match the model");
    std::vector<double> cuts = beta.breakpoints();
    cuts.insert(cuts.end(), a.breakpoints().begin(), a.breakpoints().end());
    std::sort(cuts.begin(), cuts.end());
    const NodeSet nodes = model.nodes(cuts);
    const Matrix Gi = model.Gamma_inv();
    CompensatedSum acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vector b = beta.at(nodes.nodes[i], nodes.gaps[i]);
        const Vector e = a.at(nodes.nodes[i], nodes.gaps[i]);
        const double fstar = 0.5 * (model.gamma_A * b.squaredNorm() - b.dot(Gi * b));
        const double integrand =
            fstar + b.dot(e) - 0.5 * e.dot(model.Gamma * e) - 0.5 * model.gamma_A * b.squaredNorm();
        acc.add(nodes.weights[i] * integrand);
    }
    return y + acc.value();
}

struct SlopeScan {
    double b_best = 0.0;
    std::vector<double> grid;
    std::vector<double> values; ///< principal value at each grid slope
    bool degenerate = false;
};

/// Evaluates the principal objective on beta = b K(T, .) for every b in the
/// grid and returns the maximiser (the first one on ties).
inline SlopeScan brute_force_slope(double y, const AgencyModel& model, std::vector<double> grid)
{
    require(!grid.empty(), "slope grid must not be empty");
    const NodeSet nodes = model.nodes();
    std::vector<Vector> k(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) k[i] = model.kernel.at(model.T, nodes.nodes[i], nodes.gaps[i]);
    const detail::OracleMatrices mats(model);

    SlopeScan out;
    out.grid = std::move(grid);
    out.values.reserve(out.grid.size());
    double best = -std::numeric_limits<double>::infinity();
    for (double b : out.grid) {
        CompensatedSum m, v;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            detail::accumulate_objective(mats, k[i], Vector(b * k[i]), nodes.weights[i], m, v);
        const double value = detail::finish_objective(model, y, m, v).value;
        out.values.push_back(value);
        if (value > best) {
            best = value;
            out.b_best = b;
        }
    }
    const auto [lo, hi] = std::minmax_element(out.values.begin(), out.values.end());
    out.degenerate = *lo == *hi;
    if (out.degenerate) out.b_best = *std::min_element(out.grid.begin(), out.grid.end());
    return out;
}

inline std::vector<double> slope_grid(double lo, double hi, double step)
{
    require(hi >= lo && step > 0.0, "invalid slope grid");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g[i] = lo + static_cast<double>(i) * step;
    return g;
}

namespace detail {

// Quadrature nodes split at the piece edges, tagged with their piece.
struct PieceNodes {
    NodeSet nodes;
    std::vector<std::size_t> piece;
    std::vector<double> length;
};

inline PieceNodes piece_nodes(const AgencyModel& model, const std::vector<double>& edges)
{
    PiecewiseConstantEffort shape{edges, std::vector<Vector>(edges.size() - 1, Vector::Zero(1))};
    shape.validate();
    require(std::abs(edges.back() - model.T) <= 1e-12 * model.T, "piece edges must end at the horizon");
    PieceNodes out;
    const std::vector<double> interior(edges.begin() + 1, edges.end() - 1);
    out.nodes = model.nodes(interior);
    out.piece.resize(out.nodes.size());
    for (std::size_t i = 0; i < out.nodes.size(); ++i) out.piece[i] = shape.piece_of(out.nodes.nodes[i]);
    for (std::size_t j = 0; j + 1 < edges.size(); ++j) out.length.push_back(edges[j + 1] - edges[j]);
    return out;
}

} // namespace detail

/// L2 projection onto piecewise constants: the piece averages of beta,
/// computed with the model's quadrature.
inline PiecewiseConstantEffort project_onto_pieces(const EffortPolicy& beta, const AgencyModel& model,
                                                   const std::vector<double>& edges)
{
    const auto pn = detail::piece_nodes(model, edges);
    const auto d = static_cast<Eigen::Index>(beta.dim());
    std::vector<std::vector<CompensatedSum>> acc(pn.length.size(), std::vector<CompensatedSum>(d));
    for (std::size_t i = 0; i < pn.nodes.size(); ++i) {
        const Vector b = beta.at(pn.nodes.nodes[i], pn.nodes.gaps[i]);
        for (Eigen::Index c = 0; c < d; ++c) acc[pn.piece[i]][c].add(pn.nodes.weights[i] * b(c));
    }
    PiecewiseConstantEffort out{edges, {}};
    for (std::size_t j = 0; j < pn.length.size(); ++j) {
        Vector v(d);
        for (Eigen::Index c = 0; c < d; ++c) v(c) = acc[j][c].value() / pn.length[j];
        out.values.push_back(std::move(v));
    }
    return out;
}

/// Central finite-difference gradient of the principal exponent
/// -gamma_P m + gamma_P^2 v / 2 with respect to the piece values.
inline std::vector<Vector> finite_difference_gradient(double y, const PiecewiseConstantEffort& beta,
                                                      const AgencyModel& model, double h = 1e-5)
{
    std::vector<Vector> grad;
    PiecewiseConstantEffort probe = beta;
    for (std::size_t j = 0; j < beta.values.size(); ++j) {
        Vector g(beta.values[j].size());
        for (Eigen::Index c = 0; c < g.size(); ++c) {
            probe.values[j](c) = beta.values[j](c) + h;
            const double up = principal_objective(y, probe.policy(), model).exponent;
            probe.values[j](c) = beta.values[j](c) - h;
            const double down = principal_objective(y, probe.policy(), model).exponent;
            probe.values[j](c) = beta.values[j](c);
            g(c) = (up - down) / (2.0 * h);
        }
        grad.push_back(std::move(g));
    }
    return grad;
}

struct EffortSearchOptions {
    double tolerance = 1e-10; ///< on the per-unit-time gradient, sup norm
    std::size_t max_iterations = 100000;
};

struct EffortSearch {
    PiecewiseConstantEffort effort;
    std::size_t iterations = 0;
    double gradient_norm = 0.0; ///< sup over pieces of |dE/dbeta_j| / length_j
    double exponent = 0.0;
};

/// Maximises the principal objective over piecewise-constant beta on n
/// uniform pieces, i.e. minimises the exponent E(beta), which is quadratic:
///   dE/dbeta_j = -gamma_P (Gamma^{-1} kbar_j - len_j D beta_j) + gamma_P^2 (len_j beta_j - kbar_j),
/// kbar_j = int_{piece j} K(T, s) ds. Steepest descent preconditioned by the
/// diagonal of the Hessian, with Armijo backtracking.
inline EffortSearch brute_force_effort(double y, const AgencyModel& model, std::size_t n_pieces,
                                       const EffortSearchOptions& opts = {})
{
    require(n_pieces >= 1, "brute_force_effort needs at least one piece");
    const auto edges = PiecewiseConstantEffort::uniform_edges(model.T, n_pieces);
    const auto pn = detail::piece_nodes(model, edges);
    const auto d = static_cast<Eigen::Index>(model.dim());
    const detail::OracleMatrices mats(model);
    const double gp = model.gamma_P;

    std::vector<Vector> k(pn.nodes.size());
    std::vector<Vector> kbar(n_pieces, Vector::Zero(d));
    for (std::size_t i = 0; i < pn.nodes.size(); ++i) {
        k[i] = model.kernel.at(model.T, pn.nodes.nodes[i], pn.nodes.gaps[i]);
        if (!k[i].allFinite()) throw NumericalError("non-finite kernel value in brute_force_effort");
        kbar[pn.piece[i]] += pn.nodes.weights[i] * k[i];
    }

    auto exponent = [&](const std::vector<Vector>& beta) {
        CompensatedSum m, v;
        for (std::size_t i = 0; i < pn.nodes.size(); ++i)
            detail::accumulate_objective(mats, k[i], beta[pn.piece[i]], pn.nodes.weights[i], m, v);
        return detail::finish_objective(model, y, m, v).exponent;
    };
    auto gradient = [&](const std::vector<Vector>& beta) {
        std::vector<Vector> g(n_pieces);
        for (std::size_t j = 0; j < n_pieces; ++j) {
            const double len = pn.length[j];
            g[j] = -gp * (mats.Gamma_inv * kbar[j] - len * (mats.D * beta[j])) + gp * gp * (len * beta[j] - kbar[j]);
        }
        return g;
    };
    auto scaled_norm = [&](const std::vector<Vector>& g) {
        double worst = 0.0;
        for (std::size_t j = 0; j < n_pieces; ++j) worst = std::max(worst, g[j].cwiseAbs().maxCoeff() / pn.length[j]);
        return worst;
    };

    // Diagonal of the Hessian block len_j gamma_P (D + gamma_P I).
    const Vector hdiag = (gp * (mats.D.diagonal().array() + gp)).matrix();

    std::vector<Vector> beta(n_pieces, Vector::Zero(d));
    double e = exponent(beta);
    EffortSearch out;
    for (std::size_t it = 0;; ++it) {
        const auto g = gradient(beta);
        const double gnorm = scaled_norm(g);
        if (gnorm <= opts.tolerance) {
            out.iterations = it;
            out.gradient_norm = gnorm;
            break;
        }
        if (it >= opts.max_iterations) {
            std::ostringstream os;
            os << "brute_force_effort did not converge in " << opts.max_iterations
               << " iterations (gradient norm " << gnorm << ")";
            throw NumericalError(os.str());
        }
        std::vector<Vector> dir(n_pieces);
        double slope = 0.0;
        for (std::size_t j = 0; j < n_pieces; ++j) {
            dir[j] = -(g[j].array() / (pn.length[j] * hdiag.array())).matrix();
            slope += g[j].dot(dir[j]);
        }
        double t = 1.0;
        std::vector<Vector> trial(n_pieces);
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            for (std::size_t j = 0; j < n_pieces; ++j) trial[j] = beta[j] + t * dir[j];
            const double et = exponent(trial);
            if (et <= e + 1e-4 * t * slope) {
                beta.swap(trial);
                e = et;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Objective differences are below rounding; accept the gradient
            // test from the exact, rounding-free gradient instead.
            for (std::size_t j = 0; j < n_pieces; ++j) trial[j] = beta[j] + dir[j];
            if (scaled_norm(gradient(trial)) < gnorm) {
                beta.swap(trial);
                e = exponent(beta);
                continue;
            }
            std::ostringstream os;
            os << "brute_force_effort line search failed (gradient norm " << gnorm << ")";
            throw NumericalError(os.str());
        }
    }
    out.exponent = e;
    out.effort = PiecewiseConstantEffort{edges, std::move(beta)};
    return out;
}

} // namespace volterra
