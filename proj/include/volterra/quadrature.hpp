#pragma once

#include "volterra/kernel.hpp"
#include "volterra/summation.hpp"
#include "volterra/types.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

namespace volterra {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int order)
{
    require(order >= 1, "Gauss-Legendre order must be >= 1");
    const int n = order;
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) <= 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return {x, w};
}

struct NodeSet {
    std::vector<double> nodes;
    std::vector<double> weights;
    /// Distance from each node to the right end of the interval, kept
    /// separately because b - node loses everything once node rounds to b.
    std::vector<double> gaps;

    std::size_t size() const { return nodes.size(); }
    void append(const NodeSet& other, double offset = 0.0)
    {
        nodes.insert(nodes.end(), other.nodes.begin(), other.nodes.end());
        weights.insert(weights.end(), other.weights.begin(), other.weights.end());
        for (double g : other.gaps) gaps.push_back(g + offset);
    }
};

/// Composite Gauss-Legendre rule with optional power-law endpoint substitutions.
///
/// An endpoint exponent alpha describes a kernel behaving like
/// dist^alpha there. For alpha < 0 the substitution dist = L u^{m/(2 alpha + 1)}
/// turns the squared kernel into the monomial u^{m-1}; m = grading_power > 1
/// also pushes the smooth corrections dist^k to high powers of u. For
/// alpha > 0 dist = L u^m is used. Exponents with |alpha| <= 0.05 are
/// treated as smooth.
struct QuadratureRule {
    int panels = 64;
    int order = 10;
    std::optional<double> left_exponent;
    std::optional<double> right_exponent;

    static constexpr double smooth_threshold = 0.05;
    static constexpr double grading_power = 3.0;

    void validate() const
    {
        require(panels >= 1, "quadrature panels must be >= 1");
        require(order >= 1 && order <= 128, "quadrature order must lie in [1, 128]");
        for (auto e : {left_exponent, right_exponent})
            if (e) require(*e > -0.5, "endpoint exponent must exceed -1/2 (square integrability)");
    }

    /// Unset endpoints inherit the kernel's singularity metadata.
    QuadratureRule for_kernel(const VolterraKernel& k) const
    {
        QuadratureRule r = *this;
        if (!r.right_exponent) r.right_exponent = k.singularity().at_diagonal;
        if (!r.left_exponent) r.left_exponent = k.singularity().at_origin;
        return r;
    }

    QuadratureRule refined(int factor = 2) const
    {
        QuadratureRule r = *this;
        r.panels *= factor;
        return r;
    }
};

namespace detail {

enum class End { left, right };

inline bool needs_substitution(double integrand_exponent)
{
    return std::abs(integrand_exponent) > 2.0 * QuadratureRule::smooth_threshold;
}

inline NodeSet uniform_panels(double a, double b, int panels, int order)
{
    const auto [x, w] = gauss_legendre(order);
    NodeSet out;
    out.nodes.reserve(static_cast<std::size_t>(panels * order));
    out.weights.reserve(static_cast<std::size_t>(panels * order));
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        for (int i = 0; i < order; ++i) {
            const double s = mid + 0.5 * h * x[i];
            out.nodes.push_back(s);
            out.weights.push_back(0.5 * h * w[i]);
            out.gaps.push_back(b - s);
        }
    }
    return out;
}

// Panels in u over [0,1] with dist = L u^q measured from the singular end.
inline NodeSet graded_panels(double a, double b, int panels, int order, double integrand_exponent,
                             End end)
{
    // Near-critical exponents would push u^q below the double range; back
    // off towards the minimal grading 1/(beta+1), which still keeps the
    // substituted integrand bounded.
    const double u_min = 0.5 * (1.0 + gauss_legendre(order).first.front()) / panels;
    const double q_cap = std::log(1e-150) / std::log(u_min);
    // For beta > 0 the grading stays at q = m so that smooth companions (other
    // components of a stacked kernel) remain polynomial in u.
    const double q = std::max(1.0 / (integrand_exponent + 1.0),
                              std::min(QuadratureRule::grading_power / std::min(1.0, integrand_exponent + 1.0), q_cap));
    const double len = b - a;
    const double inner_lo = std::nextafter(a, b), inner_hi = std::nextafter(b, a);
    const NodeSet base = uniform_panels(0.0, 1.0, panels, order);
    NodeSet out;
    out.nodes.resize(base.size());
    out.weights.resize(base.size());
    out.gaps.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        const double u = base.nodes[i];
        const double dist = len * std::pow(u, q);
        const double s = end == End::left ? a + dist : b - dist;
        out.nodes[i] = std::clamp(s, inner_lo, inner_hi);
        out.weights[i] = base.weights[i] * len * q * std::pow(u, q - 1.0);
        out.gaps[i] = end == End::left ? len - dist : dist;
    }
    if (end == End::right) {
        std::reverse(out.nodes.begin(), out.nodes.end());
        std::reverse(out.weights.begin(), out.weights.end());
        std::reverse(out.gaps.begin(), out.gaps.end());
    }
    return out;
}

inline NodeSet interval_nodes(double a, double b, int panels, int order, double left_exp,
                              double right_exp)
{
    const bool left = needs_substitution(left_exp);
    const bool right = needs_substitution(right_exp);
    if (left && right) {
        const double mid = 0.5 * (a + b);
        const int half = std::max(1, panels / 2);
        NodeSet out;
        out.append(graded_panels(a, mid, half, order, left_exp, End::left), b - mid);
        out.append(graded_panels(mid, b, half, order, right_exp, End::right));
        return out;
    }
    if (left) return graded_panels(a, b, panels, order, left_exp, End::left);
    if (right) return graded_panels(a, b, panels, order, right_exp, End::right);
    return uniform_panels(a, b, panels, order);
}

} // namespace detail

/// Nodes on [a, b] for integrands behaving like dist^{left_integrand_exponent}
/// at a and dist^{right_integrand_exponent} at b. Interior breakpoints split
/// the interval so piecewise-smooth integrands stay smooth on every panel.
inline NodeSet make_nodes(double a, double b, int panels, int order, double left_integrand_exponent,
                          double right_integrand_exponent, std::span<const double> breakpoints = {})
{
    require(b > a, "integration interval must have positive length");
    std::vector<double> cuts{a};
    for (double c : breakpoints)
        if (c > a && c < b && c - cuts.back() > 1e-14 * (b - a)) cuts.push_back(c);
    if (b - cuts.back() <= 1e-14 * (b - a)) cuts.pop_back();
    cuts.push_back(b);

    NodeSet out;
    const std::size_t pieces = cuts.size() - 1;
    for (std::size_t i = 0; i < pieces; ++i) {
        const double lo = cuts[i], hi = cuts[i + 1];
        const int np = std::max(1, static_cast<int>(std::lround(panels * (hi - lo) / (b - a))));
        out.append(detail::interval_nodes(lo, hi, np, order, i == 0 ? left_integrand_exponent : 0.0,
                                          i + 1 == pieces ? right_integrand_exponent : 0.0),
                   b - hi);
    }
    return out;
}

/// Nodes on [a, b] for kernel-squared integrands under `rule`.
inline NodeSet make_nodes(double a, double b, const QuadratureRule& rule,
                          std::span<const double> breakpoints = {})
{
    rule.validate();
    return make_nodes(a, b, rule.panels, rule.order, 2.0 * rule.left_exponent.value_or(0.0),
                      2.0 * rule.right_exponent.value_or(0.0), breakpoints);
}

template <class F>
double integrate(const NodeSet& nodes, F&& f)
{
    CompensatedSum acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double v = f(nodes.nodes[i]);
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite integrand value " << v << " at node s=" << nodes.nodes[i];
            throw NumericalError(os.str());
        }
        acc.add(nodes.weights[i] * v);
    }
    return acc.value();
}

/// int_0^T <f(s), g(s)> ds.
inline double l2_inner_product(const Path& f, const Path& g, double T,
                               const QuadratureRule& rule = {},
                               std::span<const double> breakpoints = {})
{
    require(T > 0.0, "horizon must be positive");
    const NodeSet nodes = make_nodes(0.0, T, rule, breakpoints);
    return integrate(nodes, [&](double s) { return f(s).dot(g(s)); });
}

/// int_0^T ||K(T,s)||^2 ds, with endpoint handling taken from the kernel.
inline double kernel_energy(const VolterraKernel& k, double T, const QuadratureRule& rule = {})
{
    require(T > 0.0, "horizon must be positive");
    const NodeSet nodes = make_nodes(0.0, T, rule.for_kernel(k));
    CompensatedSum acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double v = k.at(T, nodes.nodes[i], nodes.gaps[i]).squaredNorm();
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite kernel energy density at node s=" << nodes.nodes[i];
            throw NumericalError(os.str());
        }
        acc.add(nodes.weights[i] * v);
    }
    return acc.value();
}

/// Gram matrix int_0^T K(T,s) K(T,s)^T ds.
inline Matrix kernel_gram(const VolterraKernel& k, double T, const QuadratureRule& rule = {})
{
    require(T > 0.0, "horizon must be positive");
    const NodeSet nodes = make_nodes(0.0, T, rule.for_kernel(k));
    const auto d = static_cast<Eigen::Index>(k.dim());
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(d * d));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Vector v = k.at(T, nodes.nodes[i], nodes.gaps[i]);
        if (!v.allFinite()) {
            std::ostringstream os;
            os << "non-finite kernel value at node s=" << nodes.nodes[i];
            throw NumericalError(os.str());
        }
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index c = r; c < d; ++c)
                acc[static_cast<std::size_t>(r * d + c)].add(nodes.weights[i] * v(r) * v(c));
    }
    Matrix g(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = r; c < d; ++c)
            g(r, c) = g(c, r) = acc[static_cast<std::size_t>(r * d + c)].value();
    return g;
}

/// Covariance int_0^{s^u} <K(s,r), K(u,r)> dr of the Volterra integral.
inline double kernel_covariance(const VolterraKernel& k, double s, double u,
                                const QuadratureRule& rule = {})
{
    const double lo = std::min(s, u);
    if (lo <= 0.0) return 0.0;
    const double hi = std::max(s, u);
    const auto& sing = k.singularity();
    // Only the kernel evaluated at t = min(s,u) is singular at r = min(s,u).
    const double right = (hi == lo ? 2.0 : 1.0) * rule.right_exponent.value_or(sing.at_diagonal);
    const double left = 2.0 * rule.left_exponent.value_or(sing.at_origin);
    rule.validate();
    const NodeSet nodes = make_nodes(0.0, lo, rule.panels, rule.order, left, right);
    CompensatedSum acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double r = nodes.nodes[i], g = nodes.gaps[i];
        const double v = k.at(s, r, s - lo + g).dot(k.at(u, r, u - lo + g));
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite covariance integrand at node r=" << r;
            throw NumericalError(os.str());
        }
        acc.add(nodes.weights[i] * v);
    }
    return acc.value();
}

} // namespace volterra
