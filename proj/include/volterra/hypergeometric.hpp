#pragma once

#include "volterra/types.hpp"

#include <cmath>
#include <cstddef>
#include <string>

namespace volterra::special {

namespace detail {

inline bool is_nonpositive_integer(double x)
{
    return x <= 0.0 && x == std::round(x);
}

inline double reciprocal_gamma(double x)
{
    return is_nonpositive_integer(x) ? 0.0 : 1.0 / std::tgamma(x);
}

} // namespace detail

inline constexpr std::size_t hyp2f1_max_terms = 1'000'000;

/// Gauss series sum_n (a)_n (b)_n / ((c)_n n!) w^n for 0 <= w < 1.
inline double hyp2f1_series(double a, double b, double c, double w,
                            std::size_t max_terms = hyp2f1_max_terms)
{
    if (detail::is_nonpositive_integer(c))
        throw ValidationError("hyp2f1: c must not be a nonpositive integer");
    if (!(w >= 0.0 && w < 1.0))
        throw ValidationError("hyp2f1_series: argument must lie in [0,1)");

    constexpr double eps = 1e-17;
    const double guard = std::max({std::abs(a), std::abs(b), std::abs(c)}) + 2.0;
    double term = 1.0;
    double sum = 1.0;
    double comp = 0.0;
    for (std::size_t n = 0; n < max_terms; ++n) {
        const double dn = static_cast<double>(n);
        term *= (a + dn) * (b + dn) / ((c + dn) * (dn + 1.0)) * w;
        if (term == 0.0) return sum + comp; // terminating (polynomial) case
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
        // Past the parameter magnitudes the term ratio is ~w, so
        // |term| / (1 - w) bounds the tail.
        if (dn > guard && std::abs(term) <= eps * (1.0 - w) * std::abs(sum + comp))
            return sum + comp;
    }
    throw NumericalError("hyp2f1: power series did not converge within " +
                         std::to_string(max_terms) + " terms (argument " +
                         std::to_string(w) + " too close to 1)");
}

/// 2F1(a, b; c; z) for real z <= 0.
///
/// Pfaff's transformation maps z to w = z/(z-1) in [0,1). For w <= 1/2 the
/// Gauss series is summed directly; beyond that the 1-w connection formula
/// is used so that the fBm kernel can be evaluated arbitrarily close to
/// s = 0. When c-a-b is (numerically) an integer the connection formula is
/// singular and the plain series is used, which may then fail to converge.
inline double gauss_2f1(double a, double b, double c, double z)
{
    if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(z)))
        throw ValidationError("gauss_2f1: non-finite argument");
    if (detail::is_nonpositive_integer(c))
        throw ValidationError("gauss_2f1: c must not be a nonpositive integer");
    if (z > 0.0) throw ValidationError("gauss_2f1: only z <= 0 is supported");
    if (z == 0.0 || a == 0.0 || b == 0.0) return 1.0;

    const double w = z / (z - 1.0);
    const double prefactor = std::pow(1.0 - z, -a);
    const double b2 = c - b; // 2F1(a,b;c;z) = (1-z)^{-a} 2F1(a, c-b; c; w)

    const double s = c - a - b2;
    const bool polynomial =
        detail::is_nonpositive_integer(a) || detail::is_nonpositive_integer(b2);
    const bool integer_gap = std::abs(s - std::round(s)) < 1e-8;
    if (w <= 0.5 || polynomial || integer_gap)
        return prefactor * hyp2f1_series(a, b2, c, w);

    const double v = 1.0 / (1.0 - z); // 1 - w without cancellation
    const double gc = std::tgamma(c);
    const double first = gc * std::tgamma(s) * detail::reciprocal_gamma(c - a) *
                         detail::reciprocal_gamma(c - b2) * hyp2f1_series(a, b2, 1.0 - s, v);
    const double second = std::pow(v, s) * gc * std::tgamma(-s) * detail::reciprocal_gamma(a) *
                          detail::reciprocal_gamma(b2) *
                          hyp2f1_series(c - a, c - b2, 1.0 + s, v);
    return prefactor * (first + second);
}

} // namespace volterra::special
