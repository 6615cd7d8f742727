#include "volterra/contract.hpp"
#include "volterra/oracle.hpp"
#include "volterra/philox.hpp"
#include "volterra/simulator.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace volterra;

namespace {

AgencyModel scalar_model(double ga, double gp, double kappa, VolterraKernel k, double T = 1.0, double y0 = 0.0,
                         std::function<double(double)> g0 = {})
{
    return AgencyModel(ga, gp, kappa, y0, T, std::move(k), std::move(g0));
}

SimulationConfig config(std::size_t paths, std::size_t steps, Scheme scheme, std::uint64_t seed = 7)
{
    SimulationConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.scheme = scheme;
    c.seed = seed;
    return c;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

} // namespace

TEST(Philox, KnownAnswerVectors)
{
    // Random123 kat_vectors, philox4x32 with 10 rounds.
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(NormalStream, MomentsAndAddressing)
{
    const NormalStream ns(12345);
    std::vector<double> z(200000);
    for (std::size_t i = 0; i < z.size(); i += 2) {
        const auto p = ns.pair(i / 2000, i % 2000);
        z[i] = p[0];
        z[i + 1] = p[1];
    }
    const auto m = estimate(z);
    const auto v = variance_estimate(z);
    EXPECT_TRUE(m.within(0.0, 4.0)) << m.mean;
    EXPECT_TRUE(v.within(1.0, 4.0)) << v.mean;
    // Same address, same draw; a different seed changes it.
    EXPECT_EQ(ns.pair(3, 9), ns.pair(3, 9));
    EXPECT_NE(ns.pair(3, 9), NormalStream(12346).pair(3, 9));
    EXPECT_NE(ns.pair(3, 9), ns.pair(4, 9));
}

TEST(SampleTerminal, ZeroEffortGivesUncontrolledLaw)
{
    const auto k = make_exponential(0.7);
    const auto m = scalar_model(1, 1, 1, k, 1.5, 0.0, [](double t) { return 0.4 * t; });
    const double energy = kernel_energy(k, 1.5);
    for (Scheme sch : {Scheme::terminal_exact, Scheme::euler_path}) {
        const auto s = sample_terminal(m, EffortPolicy::zero(1, 1.5), 0.0, config(100000, 256, sch));
        const auto mx = estimate(s.x);
        const auto vx = variance_estimate(s.x);
        EXPECT_TRUE(mx.within(0.6)) << mx.mean << " +- " << mx.se;
        EXPECT_TRUE(vx.within(energy)) << vx.mean << " vs " << energy;
        for (double y : s.y) EXPECT_EQ(y, 0.0);
    }
}

TEST(SampleTerminal, OptimalEffortMatchesSecondBestValue)
{
    const std::vector<VolterraKernel> kernels{make_constant(1.0), make_exponential(1.0),
                                              make_fbm_molchan_golosov(molchan_golosov_params(0.3)),
                                              make_fbm_molchan_golosov(molchan_golosov_params(0.7))};
    for (const auto& k : kernels) {
        const auto m = scalar_model(1.0, 1.5, 0.8, k, 1.0, 0.2, [](double t) { return t; });
        const auto s = sample_terminal(m, optimal_effort(m), m.y0, config(100000, 1, Scheme::terminal_exact));
        const auto u = estimate(s.principal_utility(m.gamma_P));
        EXPECT_TRUE(u.within(principal_value_sb(m))) << k.label() << ": " << u.mean << " +- " << u.se << " vs "
                                                     << principal_value_sb(m);
    }
}

TEST(SampleTerminal, PerfectHedgeRemovesRisk)
{
    const auto m = scalar_model(1, 1, 1, make_constant(1.3));
    const auto hedge = EffortPolicy::kernel_linear(m.kernel, m.T, Matrix::Identity(1, 1));
    EXPECT_NEAR(principal_objective(0.0, hedge, m).variance, 0.0, 1e-15);
    for (Scheme sch : {Scheme::terminal_exact, Scheme::euler_path}) {
        const auto s = sample_terminal(m, hedge, 0.0, config(20000, 64, sch));
        EXPECT_LT(variance_estimate(difference(s.x, s.y)).mean, 1e-20);
    }
}

TEST(SampleTerminal, OneDimensionalContractReplicatesValueProcess)
{
    // xi* = intercept + slope X_T coincides with Y_T^{y0, beta*} path by path.
    const auto m = scalar_model(2, 1, 1, make_exponential(0.4), 1.3, 0.2, [](double t) { return 0.5 + t; });
    const auto q = optimal_contract_1d(m);
    const auto s = sample_terminal(m, optimal_effort(m), m.y0, config(1000, 1, Scheme::terminal_exact));
    for (std::size_t i = 0; i < s.x.size(); ++i) EXPECT_NEAR(q.pay(s.x[i]), s.y[i], 1e-12);
}

TEST(SampleTerminal, RandomEffortsMatchGaussianOracle)
{
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n01;
    for (int i = 0; i < 10; ++i) {
        auto m = test_support::random_model(rng, 1 + static_cast<std::size_t>(i % 3));
        m.gamma_P = 0.2 + 0.6 * std::abs(n01(rng)) / 2.0; // keep the lognormal tails tame
        const Vector c = Vector::NullaryExpr(static_cast<Eigen::Index>(m.dim()), [&](Eigen::Index) { return 0.5 * n01(rng); });
        const double w = n01(rng);
        const auto beta = EffortPolicy::from_path(m.dim(), m.T, [c, w](double s) { return Vector(c * std::cos(w * s)); });
        const auto s = sample_terminal(m, beta, m.y0, config(100000, 1, Scheme::terminal_exact, 200 + i));
        const auto u = estimate(s.principal_utility(m.gamma_P));
        const double v = principal_objective(m.y0, beta, m).value;
        EXPECT_TRUE(u.within(v)) << m.kernel.label() << ": " << u.mean << " +- " << u.se << " vs " << v;
    }
}

TEST(SampleTerminal, SchemesAgree)
{
    const AgencyModel m(1.0, 1.0, Matrix((Vector(2) << 1.0, 2.0).finished().asDiagonal()), 0.0, 1.0,
                        stack({make_exponential(0.5), make_fbm_molchan_golosov(molchan_golosov_params(0.7))}));
    const auto beta = optimal_effort(m);
    const auto a = sample_terminal(m, beta, 0.0, config(20000, 2048, Scheme::terminal_exact, 1));
    const auto b = sample_terminal(m, beta, 0.0, config(20000, 2048, Scheme::euler_path, 2));
    const double bias = 1.0 / 2048;
    auto agree = [&](Estimate x, Estimate y) {
        return std::abs(x.mean - y.mean) <= 3.0 * std::hypot(x.se, y.se) + bias;
    };
    EXPECT_TRUE(agree(estimate(a.x), estimate(b.x)));
    EXPECT_TRUE(agree(estimate(a.y), estimate(b.y)));
    EXPECT_TRUE(agree(variance_estimate(a.x), variance_estimate(b.x)));
    EXPECT_TRUE(agree(variance_estimate(a.y), variance_estimate(b.y)));
}

TEST(SampleTerminal, BitIdenticalAcrossThreadCounts)
{
    const auto m = scalar_model(1, 1, 1, make_riemann_liouville(riemann_liouville_params(0.3)));
    for (Scheme sch : {Scheme::terminal_exact, Scheme::euler_path}) {
        auto c1 = config(3000, 50, sch);
        auto c8 = c1;
        c1.threads = 1;
        c8.threads = 8;
        const auto s1 = sample_terminal(m, optimal_effort(m), 0.0, c1);
        const auto s8 = sample_terminal(m, optimal_effort(m), 0.0, c8);
        EXPECT_EQ(s1.x, s8.x);
        EXPECT_EQ(s1.y, s8.y);
    }
}

TEST(SampleTerminal, RejectsBadConfig)
{
    const auto m = scalar_model(1, 1, 1, make_constant(1.0));
    EXPECT_THROW(sample_terminal(m, EffortPolicy::zero(1, 1.0), 0.0, config(0, 10, Scheme::euler_path)), ValidationError);
    EXPECT_THROW(sample_terminal(m, EffortPolicy::zero(1, 1.0), 0.0, config(10, 0, Scheme::euler_path)), ValidationError);
    EXPECT_THROW(sample_terminal(m, EffortPolicy::zero(2, 1.0), 0.0, config(10, 10, Scheme::euler_path)), ValidationError);
}

TEST(SimulatePaths, TerminalIdentityAndStartValues)
{
    const AgencyModel m(0.5, 1.2, Matrix((Vector(2) << 1.5, 0.7).finished().asDiagonal()), 0.1, 0.8,
                        stack({make_constant(1.0), make_fbm_molchan_golosov(molchan_golosov_params(0.3))}),
                        [](double t) { return 1.0 + t; });
    const auto bundle = simulate_paths(m, optimal_effort(m), m.y0, config(500, 128, Scheme::euler_path));
    ASSERT_EQ(bundle.times.size(), 129u);
    EXPECT_EQ(bundle.times.back(), 0.8);
    EXPECT_EQ(bundle.phi.back(), 0.0);
    for (Eigen::Index p = 0; p < bundle.forward_output.rows(); ++p) {
        EXPECT_EQ(bundle.forward_output(p, 0), m.g0_T());
        EXPECT_EQ(bundle.y_process(p, 0), m.y0);
        const double gT = bundle.forward_output(p, 128);
        EXPECT_NEAR(gT, bundle.terminal_x[static_cast<std::size_t>(p)], 1e-13 * std::max(1.0, std::abs(gT)));
        EXPECT_NEAR(bundle.m_process(p, 128), std::exp(-m.gamma_P * (gT - bundle.y_process(p, 128))), 1e-12);
    }
    // On a fine grid the discrete phi_0 approaches the closed form.
    EXPECT_NEAR(bundle.phi.front(), phi0(m), 5e-3 * std::abs(phi0(m)));
}

TEST(MartingaleDiagnostic, FlatUnderOptimalEffort)
{
    const auto m = scalar_model(1, 1, 1, make_exponential(0.5), 1.0, 0.0, [](double t) { return t; });
    const std::vector<double> cps{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto rep = martingale_diagnostic(m, optimal_effort(m), 0.0, config(20000, 256, Scheme::euler_path), cps);
    ASSERT_EQ(rep.points.size(), 5u);
    EXPECT_TRUE(rep.flat()) << rep.points.back().value.mean << " vs " << rep.initial;
    EXPECT_NEAR(rep.points.front().value.mean, rep.initial, 1e-14);
    // M_0 sits at -V_SB up to the grid version of phi.
    EXPECT_NEAR(rep.initial, -principal_value_sb(m), 1e-3 * std::abs(principal_value_sb(m)));
}

TEST(MartingaleDiagnostic, PerturbedEffortIsSubmartingale)
{
    const auto m = scalar_model(1, 1, 1, make_exponential(0.5));
    const auto beta = optimal_effort(m).plus(EffortPolicy::constant(Vector::Constant(1, 0.2), 1.0));
    const auto rep = martingale_diagnostic(m, beta, 0.0, config(20000, 256, Scheme::euler_path), {0.0, 0.5, 1.0});
    EXPECT_GE(rep.points.back().value.mean, rep.initial - 3.0 * rep.points.back().value.se);
    EXPECT_EQ(rep.drift_sign(), 1);
    EXPECT_GT(rep.drift.mean, 3.0 * rep.drift.se);
}

TEST(MartingaleDiagnostic, TextVariantOfPhiIsNotFlat)
{
    const auto m = scalar_model(1, 2, 1, make_constant(1.0));
    const auto cfg = config(20000, 256, Scheme::euler_path);
    const auto rep = martingale_diagnostic(m, optimal_effort(m), 0.0, cfg, {0.0, 1.0}, PhiVariant::one_dim_text);
    EXPECT_FALSE(rep.flat());
    EXPECT_TRUE(martingale_diagnostic(m, optimal_effort(m), 0.0, cfg, {0.0, 1.0}).flat());
}

TEST(MartingaleDiagnostic, RejectsTerminalExactScheme)
{
    const auto m = scalar_model(1, 1, 1, make_constant(1.0));
    EXPECT_THROW(martingale_diagnostic(m, optimal_effort(m), 0.0, config(10, 10, Scheme::terminal_exact), {0.5}),
                 ValidationError);
    EXPECT_THROW(martingale_diagnostic(m, optimal_effort(m), 0.0, config(10, 10, Scheme::euler_path), {1.5}),
                 ValidationError);
}

TEST(AgentDiagnostic, BestReplyFlatDeviationLoses)
{
    std::mt19937_64 rng(9);
    const AgencyModel m(1.0, 1.0, test_support::random_spd(rng, 2), 0.3, 1.0,
                        stack({make_exponential(1.0), make_constant(0.5)}));
    const auto beta = optimal_effort(m);
    const auto cfg = config(20000, 128, Scheme::euler_path);
    const std::vector<double> cps{0.0, 0.5, 1.0};
    const auto best = agent_diagnostic(m, beta, agent_best_response(beta, m), m.y0, cfg, cps);
    EXPECT_TRUE(best.flat());
    EXPECT_EQ(best.initial, -std::exp(-m.gamma_A * m.y0));
    const auto off = agent_best_response(beta, m).plus(EffortPolicy::constant((Vector(2) << 0.3, -0.2).finished(), 1.0));
    const auto dev = agent_diagnostic(m, beta, off, m.y0, cfg, cps);
    EXPECT_LT(dev.drift.mean, -3.0 * dev.drift.se);
    EXPECT_LT(dev.points.back().value.mean, best.points.back().value.mean);
}

TEST(SampleOutputPath, BrownianVariance)
{
    const auto m = scalar_model(1, 1, 1, make_constant(1.0), 2.0);
    const auto out = sample_output_path(m, config(40000, 16, Scheme::euler_path));
    for (int j : {4, 8, 16}) {
        std::vector<double> col(out.paths.rows());
        for (Eigen::Index p = 0; p < out.paths.rows(); ++p) col[static_cast<std::size_t>(p)] = out.paths(p, j);
        const auto v = variance_estimate(col);
        EXPECT_TRUE(v.within(out.times[static_cast<std::size_t>(j)])) << v.mean;
    }
    for (Eigen::Index p = 0; p < out.paths.rows(); ++p) EXPECT_EQ(out.paths(p, 0), 0.0);
}

TEST(SampleOutputPath, BridgePinsNearT0)
{
    // Var X_t = t (T0 - t) / T0 for the bridge kernel (T0 - t)/(T0 - s).
    const double T0 = 1.0, T = 0.99;
    const auto m = scalar_model(1, 1, 1, make_bridge(T0, T), T);
    const auto out = sample_output_path(m, config(40000, 33, Scheme::euler_path));
    std::vector<double> last(out.paths.rows());
    for (Eigen::Index p = 0; p < out.paths.rows(); ++p) last[static_cast<std::size_t>(p)] = out.paths(p, 33);
    const auto v = variance_estimate(last);
    EXPECT_TRUE(v.within(T * (T0 - T) / T0)) << v.mean;
    EXPECT_LT(v.mean, 0.011);
}

TEST(SampleOutputPath, FractionalUnitVariance)
{
    const auto m = scalar_model(1, 1, 1, make_fbm_molchan_golosov(molchan_golosov_params(0.7)), 1.0);
    const auto out = sample_output_path(m, config(40000, 20, Scheme::euler_path));
    std::vector<double> last(out.paths.rows()), mid(out.paths.rows());
    for (Eigen::Index p = 0; p < out.paths.rows(); ++p) {
        last[static_cast<std::size_t>(p)] = out.paths(p, 20);
        mid[static_cast<std::size_t>(p)] = out.paths(p, 10);
    }
    EXPECT_TRUE(variance_estimate(last).within(1.0)) << variance_estimate(last).mean;
    EXPECT_TRUE(variance_estimate(mid).within(std::pow(0.5, 1.4))) << variance_estimate(mid).mean;
}
