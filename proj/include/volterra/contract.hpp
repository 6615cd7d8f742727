#pragma once

#include "volterra/model.hpp"
#include "volterra/quadrature.hpp"
#include "volterra/types.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace volterra {

/// Which exponent formula to use for phi. The one-dimensional derivation in
/// the original text carries gamma_P^2 where the multi-dimensional theorem
/// has gamma_P; only the latter agrees with the Gaussian objective.
enum class PhiVariant { adopted, one_dim_text };

/// f*(z) = (gamma_A/2)|z|^2 + inf_a {<a, Gamma a>/2 - <a, z>} = <z, (gamma_A I - Gamma^{-1}) z>/2.
inline double dual_cost(const Vector& z, const AgencyModel& model)
{
    require(z.size() == static_cast<Eigen::Index>(model.dim()), "dual_cost: wrong vector size");
    const Vector a = model.Gamma.llt().solve(z);
    return 0.5 * (model.gamma_A * z.squaredNorm() - z.dot(a));
}

/// a = Gamma^{-1} beta.
inline EffortPolicy agent_best_response(const EffortPolicy& beta, const AgencyModel& model)
{
    require(beta.dim() == model.dim(), "effort dimension must match the model");
    return beta.transformed(model.Gamma_inv());
}

/// beta* = Q^{-1} A K(T, .); this returns the matrix Q^{-1} A.
inline Matrix optimal_effort_matrix(const AgencyModel& model)
{
    return model.Q().llt().solve(model.A());
}

inline EffortPolicy optimal_effort(const AgencyModel& model)
{
    model.validate();
    return EffortPolicy::kernel_linear(model.kernel, model.T, optimal_effort_matrix(model));
}

/// Gram matrix int K_T K_T^T under the model's quadrature.
inline Matrix terminal_gram(const AgencyModel& model)
{
    return kernel_gram(model.kernel, model.T, model.quadrature);
}

namespace detail {

inline double trace_product(const Matrix& S, const Matrix& G) { return (S.transpose().cwiseProduct(G)).sum(); }

inline double phi0_from_gram(const AgencyModel& m, const Matrix& G, PhiVariant variant)
{
    const Matrix A = m.A();
    const Matrix AQA = A * m.Q().llt().solve(A);
    const double lead = variant == PhiVariant::adopted ? m.gamma_P : m.gamma_P * m.gamma_P;
    return 0.5 * m.gamma_P * trace_product(lead * m.identity() - AQA, G);
}

inline bool degenerate(const Matrix& G) { return !(G.trace() > 0.0); }

inline double slope_from_gram(const AgencyModel& m, const Matrix& G)
{
    if (degenerate(G))
        throw DegenerateModelError("kernel has zero energy on [0,T]: the linear slope is undefined");
    return trace_product(m.A(), G) / trace_product(m.Q(), G);
}

inline double chi0_from_gram(const AgencyModel& m, const Matrix& G)
{
    if (degenerate(G)) return 0.0;
    const double b = slope_from_gram(m, G);
    return 0.5 * m.gamma_P * trace_product(m.gamma_P * m.identity() - b * m.A(), G);
}

/// chi0 - phi0 as the non-negative sum
///   (gamma_P/2) sum_i (eta_i - b (gamma_A + eta_i))^2 / (gamma_A + eta_i) c_i,
/// c_i = <p_i, G p_i> in the eigenbasis of Gamma. Free of the cancellation in
/// the plain difference. A single repeated eigenvalue (radial cost) makes
/// every residual vanish, and the gap is returned as exactly zero.
inline double voi_gap_from_gram(const AgencyModel& m, const Matrix& G)
{
    if (degenerate(G)) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.Gamma);
    const Matrix& P = eig.eigenvectors();
    const Vector eta = (m.gamma_P + eig.eigenvalues().array().inverse()).matrix();
    if (eta.maxCoeff() == eta.minCoeff()) return 0.0;
    Vector c(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) c(i) = std::max(0.0, P.col(i).dot(G * P.col(i)));
    const double num = eta.dot(c);
    const double den = (m.gamma_A + eta.array()).matrix().dot(c);
    const double b = num / den;
    double gap = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double r = eta(i) - b * (m.gamma_A + eta(i));
        gap += r * r / (m.gamma_A + eta(i)) * c(i);
    }
    return 0.5 * m.gamma_P * gap;
}

} // namespace detail

/// phi0 = (gamma_P/2) <K_T, (gamma_P I - A Q^{-1} A) K_T>_{L^2}.
inline double phi0(const AgencyModel& model, PhiVariant variant = PhiVariant::adopted)
{
    model.validate();
    return detail::phi0_from_gram(model, terminal_gram(model), variant);
}

/// V_SB(y) = -exp(-gamma_P (g0(T) - y) + phi0), at y0 unless given.
inline double principal_value_sb(const AgencyModel& model, std::optional<double> y = std::nullopt)
{
    return -std::exp(-model.gamma_P * (model.g0_T() - y.value_or(model.y0)) + phi0(model));
}

/// b* = <K_T, A K_T> / <K_T, Q K_T>.
inline double optimal_linear_slope(const AgencyModel& model)
{
    model.validate();
    return detail::slope_from_gram(model, terminal_gram(model));
}

/// chi0 = (gamma_P/2) <K_T, (gamma_P I - b* A) K_T>; 0 for a zero-energy kernel.
inline double chi0(const AgencyModel& model)
{
    model.validate();
    return detail::chi0_from_gram(model, terminal_gram(model));
}

inline double principal_value_lin(const AgencyModel& model)
{
    return -std::exp(-model.gamma_P * (model.g0_T() - model.y0) + chi0(model));
}

/// chi0 - phi0 >= 0, evaluated without cancellation.
inline double voi_gap(const AgencyModel& model)
{
    model.validate();
    return detail::voi_gap_from_gram(model, terminal_gram(model));
}

/// exp(phi0 - chi0) in (0, 1].
inline double value_of_information(const AgencyModel& model) { return std::exp(-voi_gap(model)); }

/// chi0 - phi0 through the eigen-decomposition Gamma = P diag(lambda) P^T:
///   (gamma_P/2) [ sum eta_i^2/(gamma_A+eta_i) e_i - (sum eta_i e_i)^2 / sum (gamma_A+eta_i) e_i ],
/// eta_i = gamma_P + 1/lambda_i, e_i = int khat_i^2 with khat = P^T K_T
/// integrated component by component.
inline double voi_spectral(const AgencyModel& model)
{
    model.validate();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.Gamma);
    if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the cost matrix failed");
    const Matrix P = eig.eigenvectors();
    const Vector eta = (model.gamma_P + eig.eigenvalues().array().inverse()).matrix();
    const auto d = eta.size();

    const NodeSet nodes = model.nodes();
    std::vector<CompensatedSum> e(static_cast<std::size_t>(d));
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        const Vector khat = P.transpose() * model.kernel.at(model.T, nodes.nodes[n], nodes.gaps[n]);
        for (Eigen::Index i = 0; i < d; ++i)
            e[static_cast<std::size_t>(i)].add(nodes.weights[n] * khat(i) * khat(i));
    }
    CompensatedSum first, lin, quad;
    for (Eigen::Index i = 0; i < d; ++i) {
        const double ei = e[static_cast<std::size_t>(i)].value();
        first.add(eta(i) * eta(i) / (model.gamma_A + eta(i)) * ei);
        lin.add(eta(i) * ei);
        quad.add((model.gamma_A + eta(i)) * ei);
    }
    if (!(quad.value() > 0.0)) return 0.0;
    return 0.5 * model.gamma_P * (first.value() - lin.value() * lin.value() / quad.value());
}

/// (gamma_P/2) (eta_max^2/(gamma_A+eta_min) - eta_min^2/(gamma_A+eta_max)) int |K_T|^2.
inline double voi_upper_bound(const AgencyModel& model)
{
    model.validate();
    const Vector lambda = Eigen::SelfAdjointEigenSolver<Matrix>(model.Gamma, Eigen::EigenvaluesOnly).eigenvalues();
    // eta is decreasing in lambda.
    const double eta_max = model.gamma_P + 1.0 / lambda(0);
    const double eta_min = model.gamma_P + 1.0 / lambda(lambda.size() - 1);
    const double energy = kernel_energy(model.kernel, model.T, model.quadrature);
    return 0.5 * model.gamma_P *
           (eta_max * eta_max / (model.gamma_A + eta_min) - eta_min * eta_min / (model.gamma_A + eta_max)) * energy;
}

struct ContractQuote {
    std::size_t dim = 1;
    double slope = 0.0;
    double intercept = 0.0;
    double integral_term = 0.0; ///< int f*(beta) ds for the quoted contract
    Matrix beta_matrix;         ///< beta*(s) = beta_matrix K(T, s)
    double phi0 = 0.0;
    double chi0 = 0.0;
    double voi_gap = 0.0; ///< chi0 - phi0
    double V_SB = 0.0;
    double V_lin = 0.0;
    double voi = 1.0;
    double agent_value = 0.0;
    double energy = 0.0;
    bool degenerate = false;

    /// Pay as a function of terminal output.
    double pay(double x_T) const { return intercept + slope * x_T; }
};

namespace detail {

inline ContractQuote quote_common(const AgencyModel& m, const Matrix& G)
{
    ContractQuote q;
    q.dim = m.dim();
    q.energy = G.trace();
    q.degenerate = degenerate(G);
    q.beta_matrix = optimal_effort_matrix(m);
    q.phi0 = phi0_from_gram(m, G, PhiVariant::adopted);
    q.chi0 = chi0_from_gram(m, G);
    q.voi_gap = voi_gap_from_gram(m, G);
    q.voi = std::exp(-q.voi_gap);
    const double base = -m.gamma_P * (m.g0_T() - m.y0);
    q.V_SB = -std::exp(base + q.phi0);
    q.V_lin = -std::exp(base + q.chi0);
    q.agent_value = -std::exp(-m.gamma_A * m.y0);
    return q;
}

// int f*(M K) ds = (1/2) tr(M^T (gamma_A I - Gamma^{-1}) M G).
inline double dual_cost_integral(const AgencyModel& m, const Matrix& M, const Matrix& G)
{
    const Matrix F = m.gamma_A * m.identity() - m.Gamma_inv();
    return 0.5 * trace_product(M.transpose() * F * M, G);
}

} // namespace detail

/// One-dimensional optimal contract xi* = intercept + slope X_T with
///   slope = (gamma_P + 1/kappa) / (gamma_A + gamma_P + 1/kappa),
///   intercept = y0 - slope g0(T) + (kappa gamma_A - 1)/(2 kappa) int beta*^2.
/// A zero-energy kernel keeps the slope: X_T = g0(T) is then deterministic
/// and the contract pays y0 in effect.
inline ContractQuote optimal_contract_1d(const AgencyModel& model)
{
    model.validate();
    require(model.dim() == 1, "optimal_contract_1d needs a one-dimensional model");
    const Matrix G = terminal_gram(model);
    ContractQuote q = detail::quote_common(model, G);
    const double kappa = model.Gamma(0, 0);
    q.slope = (model.gamma_P + 1.0 / kappa) / (model.gamma_A + model.gamma_P + 1.0 / kappa);
    const double beta_sq = q.slope * q.slope * G(0, 0);
    q.integral_term = (kappa * model.gamma_A - 1.0) / (2.0 * kappa) * beta_sq;
    q.intercept = model.y0 - q.slope * model.g0_T() + q.integral_term;
    // Every one-dimensional cost is radial.
    q.voi_gap = 0.0;
    q.voi = 1.0;
    q.chi0 = q.phi0;
    q.V_lin = q.V_SB;
    return q;
}

/// Full quote. In one dimension this is the optimal contract; for d > 1 the
/// slope and intercept are those of the best linear contract
///   xi = y0 + int f*(b* K_T) ds + b* (X_T - g0(T)),
/// while phi0 / V_SB describe the second-best benchmark.
inline ContractQuote price(const AgencyModel& model)
{
    if (model.dim() == 1) return optimal_contract_1d(model);
    model.validate();
    const Matrix G = terminal_gram(model);
    ContractQuote q = detail::quote_common(model, G);
    if (q.degenerate) {
        q.slope = 0.0;
        q.integral_term = 0.0;
        q.intercept = model.y0;
        q.chi0 = q.phi0;
        q.V_lin = q.V_SB;
        return q;
    }
    q.slope = detail::slope_from_gram(model, G);
    q.integral_term = detail::dual_cost_integral(model, q.slope * model.identity(), G);
    q.intercept = model.y0 - q.slope * model.g0_T() + q.integral_term;
    return q;
}

} // namespace volterra
