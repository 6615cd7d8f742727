#pragma once

#include "volterra/hypergeometric.hpp"
#include "volterra/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace volterra {

/// Descriptive metadata; never consumed by the numerics.
struct KernelInfo {
    std::string family;
    std::vector<std::pair<std::string, double>> params;

    std::string label() const
    {
        std::ostringstream os;
        os << family << '(';
        for (std::size_t i = 0; i < params.size(); ++i)
            os << (i ? ", " : "") << params[i].first << '=' << params[i].second;
        os << ')';
        return os.str();
    }
};

/// Endpoint behaviour of s -> ||K(t,s)|| used to pick quadrature substitutions.
struct SingularityProfile {
    double at_diagonal = 0.0; ///< ||K(t,s)|| ~ (t-s)^alpha as s -> t
    double at_origin = 0.0;   ///< ||K(t,s)|| ~ s^alpha as s -> 0
};

/// A deterministic kernel K(t,s) in R^d with K(t,s) = 0 for s >= t.
class VolterraKernel {
public:
    /// Only invoked for s < t, with lag = t - s > 0 supplied separately so
    /// that power-law kernels stay accurate when s is within rounding of t.
    using Eval = std::function<Vector(double t, double s, double lag)>;

    VolterraKernel(std::size_t dim, Eval eval, SingularityProfile singularity, KernelInfo info)
        : dim_(dim), eval_(std::move(eval)), singularity_(singularity), info_(std::move(info))
    {
        require(dim_ >= 1, "kernel dimension must be >= 1");
        require(static_cast<bool>(eval_), "kernel evaluator must be callable");
    }

    Vector operator()(double t, double s) const
    {
        if (!(s < t)) return Vector::Zero(static_cast<Eigen::Index>(dim_));
        return eval_(t, s, t - s);
    }
    Vector eval(double t, double s) const { return (*this)(t, s); }

    /// K(t, s) given an accurate lag = t - s (e.g. a quadrature node's
    /// distance to the horizon).
    Vector at(double t, double s, double lag) const
    {
        if (!(lag > 0.0)) return Vector::Zero(static_cast<Eigen::Index>(dim_));
        return eval_(t, s, lag);
    }

    /// The terminal slice s -> K(T, s).
    Path slice(double T) const
    {
        return [k = *this, T](double s) { return k(T, s); };
    }

    std::size_t dim() const { return dim_; }
    double singularity_exponent() const { return singularity_.at_diagonal; }
    const SingularityProfile& singularity() const { return singularity_; }
    const KernelInfo& info() const { return info_; }
    std::string label() const { return info_.label(); }

private:
    std::size_t dim_;
    Eval eval_;
    SingularityProfile singularity_;
    KernelInfo info_;
};

struct FractionalParams {
    double hurst = 0.5;
    double scale = 1.0; ///< c_H

    void validate() const
    {
        require(hurst > 0.0 && hurst < 1.0, "Hurst index must lie strictly inside (0,1)");
        require(scale > 0.0 && std::isfinite(scale), "fractional scale c_H must be positive");
    }
};

/// c_H = sqrt(2H), for which the Riemann-Liouville slice has energy T^{2H}.
inline double riemann_liouville_default_scale(double hurst) { return std::sqrt(2.0 * hurst); }

/// Normalisation making the Molchan-Golosov kernel reproduce the fBm
/// covariance (s^{2H} + u^{2H} - |s-u|^{2H}) / 2.
inline double molchan_golosov_default_scale(double hurst)
{
    return std::sqrt(2.0 * hurst * std::tgamma(1.5 - hurst) * std::tgamma(hurst + 0.5) /
                     std::tgamma(2.0 - 2.0 * hurst));
}

inline FractionalParams riemann_liouville_params(double hurst)
{
    return {hurst, riemann_liouville_default_scale(hurst)};
}

inline FractionalParams molchan_golosov_params(double hurst)
{
    return {hurst, molchan_golosov_default_scale(hurst)};
}

// Brownian loading: K(t,s) = sigma.
inline VolterraKernel make_constant(const Vector& sigma)
{
    require(sigma.size() >= 1, "constant kernel needs at least one component");
    KernelInfo info{"constant", {}};
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        info.params.emplace_back("sigma" + std::to_string(i), sigma(i));
    return VolterraKernel(static_cast<std::size_t>(sigma.size()),
                          [sigma](double, double, double) { return sigma; }, {}, std::move(info));
}

inline VolterraKernel make_constant(double sigma) { return make_constant(Vector::Constant(1, sigma)); }

/// Time-dependent volatility K(t,s) = sigma(s).
inline VolterraKernel make_time_varying(std::size_t dim, Path sigma)
{
    require(static_cast<bool>(sigma), "volatility path must be callable");
    return VolterraKernel(dim, [sigma = std::move(sigma)](double, double s, double) { return sigma(s); },
                          {}, KernelInfo{"time_varying", {}});
}

/// Ornstein-Uhlenbeck loading exp(-lambda_i (t-s)); lambda_i may be negative.
inline VolterraKernel make_exponential(const Vector& lambda)
{
    require(lambda.size() >= 1, "exponential kernel needs at least one component");
    KernelInfo info{"exponential", {}};
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        info.params.emplace_back("lambda" + std::to_string(i), lambda(i));
    return VolterraKernel(
        static_cast<std::size_t>(lambda.size()),
        [lambda](double, double, double lag) { return Vector((-lambda.array() * lag).exp()); }, {},
        std::move(info));
}

inline VolterraKernel make_exponential(double lambda)
{
    return make_exponential(Vector::Constant(1, lambda));
}

/// Brownian bridge pinned at T0 > horizon: (T0 - t) / (T0 - s).
inline VolterraKernel make_bridge(double pin_time, double horizon)
{
    require(horizon > 0.0, "horizon must be positive");
    require(pin_time > horizon, "bridge pinning time T0 must exceed the horizon T");
    return VolterraKernel(
        1,
        [pin_time](double t, double s, double) {
            return Vector::Constant(1, (pin_time - t) / (pin_time - s));
        },
        {}, KernelInfo{"bridge", {{"T0", pin_time}}});
}

/// c_H (t-s)^{H-1/2}.
inline VolterraKernel make_riemann_liouville(const FractionalParams& p)
{
    p.validate();
    const double exponent = p.hurst - 0.5;
    const double scale = p.scale;
    return VolterraKernel(
        1,
        [exponent, scale](double, double, double lag) {
            return Vector::Constant(1, scale * std::pow(lag, exponent));
        },
        {exponent, 0.0}, KernelInfo{"riemann_liouville", {{"H", p.hurst}, {"c_H", scale}}});
}

/// Volterra representation of fractional Brownian motion:
/// c_H (t-s)^{H-1/2} / Gamma(H+1/2) * 2F1(H-1/2, 1/2-H; H+1/2; 1 - t/s).
/// s is clamped to at least 1e-200 t; near the origin the kernel behaves like
/// s^{-|H-1/2|}, so the clamp only matters for an explicit evaluation at s = 0.
inline VolterraKernel make_fbm_molchan_golosov(const FractionalParams& p)
{
    p.validate();
    const double h = p.hurst;
    const double pre = p.scale / std::tgamma(h + 0.5);
    const double a = h - 0.5;
    const double b = 0.5 - h;
    const double c = h + 0.5;
    return VolterraKernel(
        1,
        [=](double t, double s, double lag) {
            const double se = std::max(s, 1e-200 * t);
            const double gap = s < se ? t - se : lag;
            return Vector::Constant(
                1, pre * std::pow(gap, a) * special::gauss_2f1(a, b, c, 1.0 - t / se));
        },
        {a, -std::abs(a)}, KernelInfo{"fbm", {{"H", h}, {"c_H", p.scale}}});
}

/// K(t,s) = f(t) with f the indicator of the observation dates.
inline VolterraKernel make_discrete_observation(std::vector<double> times, double horizon)
{
    require(!times.empty(), "discrete observation kernel needs at least one date");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(times[i] > 0.0 && times[i] <= horizon * (1.0 + 1e-14),
                "observation dates must lie in (0, T]");
        if (i > 0) require(times[i] > times[i - 1], "observation dates must be strictly increasing");
    }
    KernelInfo info{"discrete", {}};
    for (std::size_t i = 0; i < times.size(); ++i)
        info.params.emplace_back("t" + std::to_string(i), times[i]);
    return VolterraKernel(
        1,
        [times = std::move(times)](double t, double, double) {
            const double tol = 1e-12 * std::max(1.0, std::abs(t));
            auto it = std::lower_bound(times.begin(), times.end(), t - tol);
            const bool hit = it != times.end() && std::abs(*it - t) <= tol;
            return Vector::Constant(1, hit ? 1.0 : 0.0);
        },
        {}, std::move(info));
}

/// Componentwise assembly of lower-dimensional kernels into one R^d kernel.
inline VolterraKernel stack(std::vector<VolterraKernel> parts)
{
    require(!parts.empty(), "stack needs at least one kernel");
    if (parts.size() == 1) return std::move(parts.front());
    std::size_t dim = 0;
    // The endpoint substitution follows the most singular component, or
    // the roughest vanishing one when none blows up.
    auto pick = [](double acc, double e) {
        if (acc < 0.0 || e < 0.0) return std::min(acc, e);
        return std::max(acc, e);
    };
    SingularityProfile sing = parts.front().singularity();
    KernelInfo info{"stack", {}};
    for (const auto& k : parts) {
        dim += k.dim();
        sing.at_diagonal = pick(sing.at_diagonal, k.singularity().at_diagonal);
        sing.at_origin = pick(sing.at_origin, k.singularity().at_origin);
        info.family += (&k == &parts.front() ? ":" : "+") + k.info().family;
        for (const auto& kv : k.info().params) info.params.push_back(kv);
    }
    auto shared = std::make_shared<std::vector<VolterraKernel>>(std::move(parts));
    return VolterraKernel(
        dim,
        [shared, dim](double t, double s, double lag) {
            Vector out(static_cast<Eigen::Index>(dim));
            Eigen::Index at = 0;
            for (const auto& k : *shared) {
                const Vector v = k.at(t, s, lag);
                out.segment(at, v.size()) = v;
                at += v.size();
            }
            return out;
        },
        sing, std::move(info));
}

} // namespace volterra
