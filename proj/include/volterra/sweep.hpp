#pragma once

// Value-of-information tables over two-task kernel families.

#include "volterra/contract.hpp"
#include "volterra/kernel.hpp"
#include "volterra/model.hpp"
#include "volterra/parallel.hpp"
#include "volterra/types.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

namespace volterra {

enum class SweepFamily {
    exponential, ///< k_i(t) = exp(-rho_i t)
    fractional   ///< k_i(t) = sqrt(2 H_i) t^{H_i - 1/2}
};

inline const char* to_string(SweepFamily f) { return f == SweepFamily::exponential ? "exponential" : "fractional"; }

struct SweepSpec {
    SweepFamily family = SweepFamily::exponential;
    std::vector<double> horizons;
    std::vector<double> param1; ///< rho_1 or H_1
    std::vector<double> param2; ///< rho_2 or H_2
    double gamma_A = 1.0;
    double gamma_P = 1.0;
    Vector lambda = Vector::Constant(2, 1.0); ///< Gamma = diag(lambda_1, lambda_2)
    QuadratureRule quadrature;
    unsigned threads = 0;

    void validate() const
    {
        require(!horizons.empty() && !param1.empty() && !param2.empty(), "sweep grids must be non-empty");
        for (double T : horizons) require(std::isfinite(T) && T > 0.0, "sweep horizons must be positive");
        for (const auto* ps : {&param1, &param2})
            for (double p : *ps) {
                require(std::isfinite(p), "sweep parameters must be finite");
                if (family == SweepFamily::fractional)
                    require(p > 0.0 && p < 1.0, "Hurst indices must lie strictly inside (0,1)");
            }
        require(lambda.size() == 2, "sweep cost matrix needs two eigenvalues");
        require(lambda.minCoeff() > 0.0 && lambda.allFinite(), "sweep cost eigenvalues must be positive");
        quadrature.validate();
    }

    /// T = dT, 2 dT, ..., T_max.
    static std::vector<double> uniform_horizons(double T_max, std::size_t n)
    {
        require(T_max > 0.0 && n >= 1, "uniform_horizons needs T_max > 0 and n >= 1");
        std::vector<double> out;
        for (std::size_t i = 1; i <= n; ++i) out.push_back(T_max * static_cast<double>(i) / static_cast<double>(n));
        return out;
    }
};

struct SweepRow {
    double T = 0.0, p1 = 0.0, p2 = 0.0;
    double phi0 = 0.0, chi0 = 0.0, b_star = 0.0, voi = 1.0;
    double voi_gap = 0.0;             ///< chi0 - phi0
    double energy1 = 0.0, energy2 = 0.0; ///< int_0^T k_i^2
};

inline VolterraKernel sweep_component(SweepFamily family, double p)
{
    return family == SweepFamily::exponential ? make_exponential(p)
                                              : make_riemann_liouville(riemann_liouville_params(p));
}

inline AgencyModel sweep_model(const SweepSpec& spec, double T, double p1, double p2)
{
    AgencyModel m(spec.gamma_A, spec.gamma_P, Matrix(spec.lambda.asDiagonal()), 0.0, T,
                  stack({sweep_component(spec.family, p1), sweep_component(spec.family, p2)}));
    m.quadrature = spec.quadrature;
    return m;
}

/// Rows ordered by (p1, p2, T), T fastest.
inline std::vector<SweepRow> voi_sweep(const SweepSpec& spec)
{
    spec.validate();
    struct Point {
        double T, p1, p2;
    };
    std::vector<Point> grid;
    for (double p1 : spec.param1)
        for (double p2 : spec.param2)
            for (double T : spec.horizons) grid.push_back({T, p1, p2});
    std::vector<SweepRow> rows(grid.size());
    detail::parallel_for(
        grid.size(), detail::resolve_threads(spec.threads),
        [&](std::size_t i) {
            const auto [T, p1, p2] = grid[i];
            const AgencyModel m = sweep_model(spec, T, p1, p2);
            const Matrix G = terminal_gram(m);
            SweepRow& r = rows[i];
            r.T = T;
            r.p1 = p1;
            r.p2 = p2;
            r.phi0 = detail::phi0_from_gram(m, G, PhiVariant::adopted);
            r.chi0 = detail::chi0_from_gram(m, G);
            r.b_star = detail::slope_from_gram(m, G);
            r.voi_gap = detail::voi_gap_from_gram(m, G);
            r.voi = std::exp(-r.voi_gap);
            r.energy1 = G(0, 0);
            r.energy2 = G(1, 1);
        },
        1);
    return rows;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "T,p1,p2,phi0,chi0,b_star,voi,voi_gap,energy_1,energy_2\n";
    const auto old = os.precision(17);
    for (const auto& r : rows)
        os << r.T << ',' << r.p1 << ',' << r.p2 << ',' << r.phi0 << ',' << r.chi0 << ',' << r.b_star << ','
           << r.voi << ',' << r.voi_gap << ',' << r.energy1 << ',' << r.energy2 << '\n';
    os.precision(old);
}

} // namespace volterra
