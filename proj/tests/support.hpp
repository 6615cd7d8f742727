#pragma once

// Random model generators shared by the unit and acceptance suites.

#include "volterra/kernel.hpp"
#include "volterra/model.hpp"

#include <Eigen/QR>

#include <random>
#include <vector>

namespace volterra::test_support {

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign fixed).
inline Matrix random_orthogonal(std::mt19937_64& rng, Eigen::Index d)
{
    std::normal_distribution<double> n01;
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n01(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

/// O diag(lambda) O^T with eigenvalues uniform in [lo, hi].
inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index d, double lo = 0.2, double hi = 5.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    const Matrix o = random_orthogonal(rng, d);
    Vector lambda(d);
    for (Eigen::Index i = 0; i < d; ++i) lambda(i) = u(rng);
    Matrix s = o * lambda.asDiagonal() * o.transpose();
    return 0.5 * (s + s.transpose());
}

/// One scalar kernel from a random catalogue family.
inline VolterraKernel random_scalar_kernel(std::mt19937_64& rng, double horizon)
{
    std::uniform_int_distribution<int> family(0, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (family(rng)) {
    case 0: return make_constant(0.2 + 2.0 * u(rng));
    case 1: return make_exponential(-1.0 + 3.0 * u(rng));
    case 2: return make_bridge(horizon * (1.1 + u(rng)), horizon);
    case 3: return make_riemann_liouville(riemann_liouville_params(0.1 + 0.8 * u(rng)));
    case 4: return make_fbm_molchan_golosov(molchan_golosov_params(0.2 + 0.6 * u(rng)));
    default: {
        const double c = 0.5 + u(rng);
        return make_time_varying(1, [c](double s) { return Vector::Constant(1, c * (1.0 + std::sin(3.0 * s))); });
    }
    }
}

inline VolterraKernel random_kernel(std::mt19937_64& rng, std::size_t d, double horizon)
{
    std::vector<VolterraKernel> parts;
    for (std::size_t i = 0; i < d; ++i) parts.push_back(random_scalar_kernel(rng, horizon));
    return stack(std::move(parts));
}

inline AgencyModel random_model(std::mt19937_64& rng, std::size_t d)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double T = 0.25 + 3.75 * u(rng);
    return AgencyModel(0.2 + 2.0 * u(rng), 0.2 + 2.0 * u(rng), random_spd(rng, static_cast<Eigen::Index>(d)),
                       -1.0 + 2.0 * u(rng), T, random_kernel(rng, d, T),
                       [c = u(rng)](double t) { return c * t; });
}

} // namespace volterra::test_support
