#include "volterra/cli/commands.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace volterra;
using namespace volterra::cli;

namespace {

json hm(double gA = 1, double gP = 1, double kappa = 1, json kernel = {{"type", "constant"}})
{
    return {{"model", {{"gamma_A", gA}, {"gamma_P", gP}, {"kappa", kappa}, {"T", 1.0}}}, {"kernel", kernel}};
}

json diag12()
{
    return {{"model", {{"gamma_A", 1}, {"gamma_P", 1}, {"Gamma", {{1, 0}, {0, 2}}}, {"T", 1}}},
            {"kernel", {{"type", "constant"}, {"sigma", {1, 1}}}}};
}

json radial()
{
    return {{"model", {{"gamma_A", 1.3}, {"gamma_P", 0.7}, {"Gamma", {{1.7, 0}, {0, 1.7}}}, {"T", 2}}},
            {"kernel",
             {{"type", "stack"},
              {"components", {{{"type", "exponential"}, {"lambda", 0.5}}, {{"type", "fbm"}, {"hurst", 0.3}}}}}}};
}

RunResult go(const std::string& cmd, json sc, std::optional<Format> f = std::nullopt)
{
    RunRequest r;
    r.command = cmd;
    r.scenario = std::move(sc);
    r.format = f;
    return run(r);
}

json body(const RunResult& r) { return json::parse(r.body); }

std::vector<std::vector<double>> csv(const std::string& text, std::string* header = nullptr)
{
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    if (header) *header = line;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ls, cell, ',')) v.push_back(std::stod(cell));
        rows.push_back(v);
    }
    return rows;
}

const json* find_check(const json& j, const std::string& name)
{
    for (const auto& c : j.at("checks"))
        if (c.at("check") == name) return &c;
    return nullptr;
}

} // namespace

TEST(CliPrice, OneDimensionalSlopeFormula)
{
    for (auto [gA, gP, k] : {std::tuple{1.0, 1.0, 1.0}, {2.0, 0.5, 3.0}, {0.3, 4.0, 0.25}}) {
        const auto r = go("price", hm(gA, gP, k));
        ASSERT_EQ(r.exit_code, 0) << r.error;
        const auto q = body(r).at("quote");
        EXPECT_NEAR(q.at("slope").get<double>(), (gP + 1 / k) / (gA + gP + 1 / k), 1e-14);
        EXPECT_EQ(q.at("voi").get<double>(), 1.0);
        EXPECT_EQ(q.at("beta_table").size(), 20u);
    }
}

TEST(CliPrice, RadialHasUnitValueOfInformation)
{
    const auto r = go("price", radial());
    ASSERT_EQ(r.exit_code, 0) << r.error;
    const auto q = body(r).at("quote");
    EXPECT_EQ(q.at("voi").get<double>(), 1.0);
    EXPECT_LE(std::abs(q.at("voi_gap").get<double>()), 1e-12);
}

TEST(CliPrice, DiagonalReference)
{
    const auto q = body(go("price", diag12())).at("quote");
    EXPECT_NEAR(q.at("voi").get<double>(), std::exp(-1.0 / 330.0), 1e-12);
    EXPECT_NEAR(q.at("voi").get<double>(), 0.996974, 5e-7);
    EXPECT_NEAR(q.at("slope").get<double>(), 7.0 / 11.0, 1e-14);
}

TEST(CliPrice, DegenerateKernelWarns)
{
    const auto r = go("price", hm(1, 1, 1, {{"type", "constant"}, {"sigma", 0.0}}));
    ASSERT_EQ(r.exit_code, 0) << r.error;
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_TRUE(body(r).at("quote").at("degenerate").get<bool>());
}

TEST(CliPrice, CsvTable)
{
    std::string header;
    const auto rows = csv(go("price", diag12(), Format::csv).body, &header);
    EXPECT_EQ(header, "s,beta_0,beta_1,effort_0,effort_1");
    ASSERT_EQ(rows.size(), 20u);
    // beta* = Q^{-1} A K with K = (1, 1): entries (2/3, 3/5).
    EXPECT_NEAR(rows[3][1], 2.0 / 3.0, 1e-14);
    EXPECT_NEAR(rows[3][2], 3.0 / 5.0, 1e-14);
    EXPECT_NEAR(rows[3][4], 3.0 / 10.0, 1e-14);
}

TEST(CliSweep, RadialAndFractionalColumns)
{
    json sc = diag12();
    sc["sweep"] = {{"family", "exponential"}, {"lambda", {1.5, 1.5}}};
    auto rows = csv(go("voi-sweep", sc).body);
    ASSERT_EQ(rows.size(), 270u);
    for (const auto& r : rows) EXPECT_EQ(r[6], 1.0);

    sc["sweep"] = {{"family", "fractional"}, {"T_max", 2.0}, {"n_T", 4}};
    rows = csv(go("voi-sweep", sc).body);
    ASSERT_EQ(rows.size(), 36u);
    for (const auto& r : rows) {
        EXPECT_NEAR(r[8], std::pow(r[0], 2 * r[1]), 1e-8);
        EXPECT_NEAR(r[9], std::pow(r[0], 2 * r[2]), 1e-8);
    }
}

TEST(CliSweep, GapNondecreasingInHorizonForUnitRates)
{
    json sc = diag12();
    sc["sweep"] = {{"family", "exponential"}, {"param1", {1.0}}, {"param2", {1.0}}};
    const auto rows = csv(go("voi-sweep", sc).body);
    ASSERT_EQ(rows.size(), 30u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i][7], rows[i - 1][7]);
    EXPECT_GT(rows.back()[7], 0.0);
}

TEST(CliSweep, MissingSectionIsValidationError)
{
    const auto r = go("voi-sweep", diag12());
    EXPECT_EQ(r.exit_code, exit_validation);
    EXPECT_NE(r.error.find("scenario.sweep"), std::string::npos);
}

TEST(CliResolvent, ReferenceMeasures)
{
    json sc = hm();
    sc["resolvent"] = {{"n", 10000}, {"x0", {1}}, {"measure", {{"atoms", {{{"t", 0}, {"a", -1}}}}}}};
    std::string header;
    auto rows = csv(go("resolvent", sc).body, &header);
    EXPECT_EQ(header, "t,R_00,K_0,g0");
    ASSERT_EQ(rows.size(), 101u);
    EXPECT_NEAR(rows.back()[1], std::exp(-1.0), 1e-6);
    for (const auto& r : rows) {
        if (r[0] > 0) {
            EXPECT_NEAR(r[2], std::exp(-r[0]), 1e-6) << r[0];
        }
        EXPECT_NEAR(r[3], std::exp(-r[0]), 1e-6);
    }

    // R' = R(t - 1/2): method of steps gives 1.5 + 0.2 + 0.02 at t = 1.2.
    sc["resolvent"] = {{"T", 1.2}, {"n", 12000}, {"output_points", 7}, {"measure", {{"atoms", {{{"t", 0.5}, {"a", 1}}}}}}};
    sc["model"]["T"] = 1.2;
    rows = csv(go("resolvent", sc).body);
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_NEAR(rows.back()[1], 1.72, 1e-6);
    EXPECT_NEAR(rows[3][1], 1.1, 1e-6);
}

TEST(CliResolvent, InducedKernelMatchesExponential)
{
    json sc = {{"model", {{"gamma_A", 1}, {"gamma_P", 1}, {"T", 1}}},
               {"kernel", {{"type", "induced"}}},
               {"resolvent", {{"n", 10000}, {"x0", {0}}, {"measure", {{"atoms", {{{"t", 0}, {"a", -0.8}}}}}}}}};
    const auto induced = body(go("price", sc)).at("quote");
    const auto exact = body(go("price", hm(1, 1, 1, {{"type", "exponential"}, {"lambda", 0.8}}))).at("quote");
    EXPECT_NEAR(induced.at("phi0").get<double>(), exact.at("phi0").get<double>(), 1e-6);
}

TEST(CliVerify, ReferencePassesAndInjectedSlopeFails)
{
    const auto ok = go("verify", hm());
    ASSERT_EQ(ok.exit_code, 0) << ok.body;
    const json j = body(ok);
    EXPECT_TRUE(j.at("passed").get<bool>());
    EXPECT_GE(j.at("checks").size(), 10u);
    for (const auto& c : j.at("checks")) EXPECT_EQ(c.at("status"), "pass") << c.dump();

    RunRequest bad;
    bad.command = "verify";
    bad.scenario = hm();
    bad.inject_slope_error = true;
    const auto r = run(bad);
    EXPECT_EQ(r.exit_code, exit_verification);
    const json jb = body(r);
    EXPECT_FALSE(jb.at("passed").get<bool>());
    EXPECT_EQ(find_check(jb, "stationarity")->at("status"), "fail");
    EXPECT_EQ(find_check(jb, "slope-scan")->at("status"), "fail");
    EXPECT_EQ(find_check(jb, "phi0-oracle")->at("status"), "pass");
}

TEST(CliVerify, RadialVoiIdentity)
{
    const auto r = go("verify", radial());
    const json j = body(r);
    const json* c = find_check(j, "voi-identity");
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->at("status"), "pass");
    EXPECT_LE(c->at("statistic").get<double>(), 1e-12);
    const json* b = find_check(j, "voi-bound");
    EXPECT_LE(std::abs(b->at("statistic").get<double>()), 1e-12);
    EXPECT_EQ(r.exit_code, 0) << r.body;
}

TEST(CliVerify, InconsistentModelIsValidationError)
{
    json sc = hm(1, 1, 1, {{"type", "induced"}});
    sc["resolvent"] = {{"n", 100}, {"x0", {0, 0}}, {"sigma", {{1, 0}, {0, 1}}}};
    const auto r = go("verify", sc);
    // The induced kernel has two noise components but kappa is scalar.
    EXPECT_EQ(r.exit_code, exit_validation);
    EXPECT_NE(r.error.find("scenario.model"), std::string::npos) << r.error;
}

TEST(CliSimulate, MartingaleCsvIsFlatUnderOptimalEffort)
{
    json sc = diag12();
    sc["simulation"] = {{"n_paths", 4000}, {"n_steps", 64}};
    std::string header;
    const auto rows = csv(go("simulate", sc).body, &header);
    EXPECT_EQ(header, "t,mean_M,stderr_M");
    ASSERT_EQ(rows.size(), 5u);
    for (const auto& r : rows) EXPECT_LE(std::abs(r[1] - rows[0][1]), 3 * r[2] + 1e-14);
}

TEST(CliSimulate, TerminalAndOutputPathModes)
{
    json sc = hm(1, 1, 1, {{"type", "fbm"}, {"hurst", 0.7}});
    sc["simulation"] = {{"mode", "terminal"}, {"n_paths", 500}};
    std::string header;
    auto rows = csv(go("simulate", sc).body, &header);
    EXPECT_EQ(header, "path,X_T,Y_T,utility");
    EXPECT_EQ(rows.size(), 500u);

    sc["simulation"] = {{"mode", "output-paths"}, {"n_paths", 50}, {"n_steps", 16}, {"max_output_paths", 10}};
    rows = csv(go("simulate", sc).body, &header);
    ASSERT_EQ(rows.size(), 17u);
    EXPECT_EQ(rows[0].size(), 11u);
    for (std::size_t p = 1; p < 11; ++p) EXPECT_EQ(rows[0][p], 0.0);
}

TEST(CliSimulate, OverflowIsNumericalError)
{
    json sc = hm(1, 1000, 1, {{"type", "constant"}, {"sigma", 60.0}});
    sc["simulation"] = {{"n_paths", 200}, {"n_steps", 16}, {"effort", {{"type", "zero"}}}};
    const auto r = go("simulate", sc);
    EXPECT_EQ(r.exit_code, exit_numerical) << r.error;
}

TEST(CliScenario, EchoRoundTripsBitIdentically)
{
    for (const json& sc : {hm(), diag12(), radial()}) {
        json withsim = sc;
        withsim["simulation"] = {{"n_paths", 2000}, {"n_steps", 32}, {"seed", 99}};
        const auto a = go("simulate", withsim);
        ASSERT_EQ(a.exit_code, 0) << a.error;
        const auto b = go("simulate", json::parse(a.normalized));
        EXPECT_EQ(a.body, b.body);
        EXPECT_EQ(a.normalized, b.normalized);
        const auto p1 = go("price", withsim), p2 = go("price", json::parse(p1.normalized));
        EXPECT_EQ(p1.body, p2.body);
    }
}

TEST(CliScenario, DefaultsAreExplicit)
{
    const auto n = parse_scenario(hm()).normalized;
    EXPECT_EQ(n.at("model").at("Gamma"), json({{1.0}}));
    EXPECT_EQ(n.at("model").at("y0"), 0.0);
    EXPECT_EQ(n.at("kernel").at("sigma"), json({1.0}));
    EXPECT_EQ(n.at("quadrature").at("panels"), 64);
    EXPECT_TRUE(n.at("quadrature").at("left_exponent").is_null());
    EXPECT_EQ(n.at("simulation").at("seed"), 20240601u);
    EXPECT_EQ(n.at("simulation").at("scheme"), "euler-path");
    EXPECT_EQ(n.at("simulation").at("checkpoints").size(), 5u);
    const auto f = parse_scenario(hm(1, 1, 1, {{"type", "fbm"}, {"hurst", 0.5}})).normalized;
    EXPECT_NEAR(f.at("kernel").at("scale").get<double>(), 1.0, 1e-14);
}

TEST(CliScenario, SeedOverrideIsEchoed)
{
    json sc = hm();
    sc["simulation"] = {{"n_paths", 500}, {"n_steps", 8}};
    RunRequest r;
    r.command = "simulate";
    r.scenario = sc;
    r.seed = 7;
    const auto a = run(r);
    EXPECT_EQ(json::parse(a.normalized).at("simulation").at("seed"), 7u);
    EXPECT_NE(a.body, go("simulate", sc).body);
    EXPECT_EQ(a.body, go("simulate", json::parse(a.normalized)).body);
}

TEST(CliScenario, ErrorsCarryFieldPaths)
{
    auto expect_error = [](json sc, const std::string& path) {
        const auto r = go("price", std::move(sc));
        EXPECT_EQ(r.exit_code, exit_validation);
        EXPECT_EQ(r.error.rfind(path + ":", 0), 0u) << r.error;
    };
    json sc = hm();
    sc["model"]["typo"] = 1;
    expect_error(sc, "scenario.model.typo");
    sc = hm();
    sc["model"]["gamma_A"] = "one";
    expect_error(sc, "scenario.model.gamma_A");
    sc = hm();
    sc["model"]["gamma_P"] = -1;
    expect_error(sc, "scenario.model.gamma_P");
    expect_error(hm(1, 1, 1, {{"type", "fbm"}, {"hurst", 1.2}}), "scenario.kernel.hurst");
    expect_error(hm(1, 1, 1, {{"type", "spline"}}), "scenario.kernel.type");
    expect_error(hm(1, 1, 1, {{"type", "stack"}, {"components", {{{"type", "bridge"}, {"T0", 0.5}}}}}),
                 "scenario.kernel.components[0].T0");
    sc = hm();
    sc["simulation"] = {{"scheme", "terminal-exact"}};
    expect_error(sc, "scenario.simulation.scheme");
    sc = hm();
    sc["simulation"] = {{"n_paths", 0}};
    expect_error(sc, "scenario.simulation.n_paths");
    sc = hm();
    sc["simulation"] = {{"checkpoints", {0.5, 2.0}}};
    expect_error(sc, "scenario.simulation.checkpoints[1]");
    sc = diag12();
    sc["model"]["Gamma"] = {{1, 0}, {0}};
    expect_error(sc, "scenario.model.Gamma[1]");
    sc = diag12();
    sc["kernel"]["sigma"] = {1, 1, 1};
    expect_error(sc, "scenario.model");
    sc = hm(1, 1, 1, {{"type", "induced"}});
    expect_error(sc, "scenario.resolvent");
    EXPECT_EQ(go("nope", hm()).exit_code, exit_validation);
}

#ifdef VOLTERRA_CLI_PATH
namespace {

int shell(const std::string& args)
{
    const std::string cmd = std::string(VOLTERRA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string scratch(const std::string& name, const json& j)
{
    const std::string path = testing::TempDir() + name;
    std::ofstream(path) << j.dump();
    return path;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(CliBinary, ExitCodes)
{
    const auto good = scratch("cli_good.json", hm());
    EXPECT_EQ(shell("price --scenario " + good), 0);
    EXPECT_EQ(shell("verify --scenario " + good), 0);
    EXPECT_EQ(shell("verify --scenario " + good + " --inject-slope-error"), 3);
    EXPECT_EQ(shell("price --scenario " + good + " --format xml"), 1);
    EXPECT_EQ(shell("price"), 1);
    EXPECT_EQ(shell("price --scenario /nonexistent.json"), 1);
    json bad = hm();
    bad["model"]["extra"] = true;
    EXPECT_EQ(shell("price --scenario " + scratch("cli_bad.json", bad)), 1);
    std::ofstream(testing::TempDir() + "cli_broken.json") << "{ not json";
    EXPECT_EQ(shell("price --scenario " + testing::TempDir() + "cli_broken.json"), 1);
    json overflow = hm(1, 1000, 1, {{"type", "constant"}, {"sigma", 60.0}});
    overflow["simulation"] = {{"n_paths", 100}, {"n_steps", 8}, {"effort", {{"type", "zero"}}}};
    EXPECT_EQ(shell("simulate --scenario " + scratch("cli_overflow.json", overflow)), 2);
}

TEST(CliBinary, CsvSidecarReproducesOutput)
{
    json sc = diag12();
    sc["simulation"] = {{"n_paths", 1000}, {"n_steps", 16}};
    const auto in = scratch("cli_sim.json", sc);
    const auto a = testing::TempDir() + "cli_a.csv", b = testing::TempDir() + "cli_b.csv";
    ASSERT_EQ(shell("simulate --scenario " + in + " --seed 11 --out " + a), 0);
    ASSERT_EQ(shell("simulate --scenario " + a + ".scenario.json --out " + b), 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
    EXPECT_EQ(json::parse(slurp(a + ".scenario.json")).at("simulation").at("seed"), 11u);
}
#endif
