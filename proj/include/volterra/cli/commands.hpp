#pragma once

// Batch commands behind the volterra executable. Each command maps a parsed
// scenario to one text artifact; `run` adds the exit-code policy so tests can
// drive the tool in-process.

#include "volterra/cli/scenario.hpp"
#include "volterra/contract.hpp"
#include "volterra/oracle.hpp"
#include "volterra/simulator.hpp"
#include "volterra/sweep.hpp"

#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace volterra::cli {

enum class Format { json, csv };

struct CommandOptions {
    Format format = Format::json;
    bool inject_slope_error = false; ///< test hook: adds 0.1 to the quoted slope
};

struct CommandOutput {
    std::string body;
    bool passed = true; ///< false only when verify finds a failing check
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string csv_number(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string csv_row(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + csv_number(v[i]);
    return s + "\n";
}

inline json envelope(const char* command, const Scenario& sc)
{
    return {{"command", command}, {"scenario", sc.normalized}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline ContractQuote quote_for(const AgencyModel& m, const CommandOptions& opt)
{
    ContractQuote q = price(m);
    if (opt.inject_slope_error) {
        q.slope += 0.1;
        q.beta_matrix += 0.1 * Matrix::Identity(q.beta_matrix.rows(), q.beta_matrix.cols());
    }
    return q;
}

/// beta* on midpoints of 20 equal cells; midpoints avoid the endpoint
/// singularities of fractional kernels.
inline std::vector<double> table_times(double T, std::size_t n = 20)
{
    std::vector<double> s;
    for (std::size_t j = 0; j < n; ++j) s.push_back(T * (static_cast<double>(j) + 0.5) / static_cast<double>(n));
    return s;
}

inline EffortPolicy effort_for(const Scenario& sc, const AgencyModel& m)
{
    const auto& e = sc.simulation.effort;
    switch (e.kind) {
    case EffortSpec::Kind::zero: return EffortPolicy::zero(m.dim(), m.T);
    case EffortSpec::Kind::optimal_shift: return optimal_effort(m).plus(EffortPolicy::constant(e.shift, m.T));
    case EffortSpec::Kind::linear: return EffortPolicy::kernel_linear(m.kernel, m.T, e.slope * m.identity());
    case EffortSpec::Kind::optimal: break;
    }
    return optimal_effort(m);
}

inline json report_json(const MartingaleReport& r)
{
    json pts = json::array();
    for (const auto& c : r.points) pts.push_back({{"t", c.t}, {"mean", c.value.mean}, {"stderr", c.value.se}});
    return {{"initial", r.initial}, {"checkpoints", pts}, {"drift", {{"mean", r.drift.mean}, {"stderr", r.drift.se}}}};
}

} // namespace detail

inline CommandOutput cmd_price(const Scenario& sc, const CommandOptions& opt = {})
{
    const AgencyModel m = sc.model();
    const ContractQuote q = detail::quote_for(m, opt);
    CommandOutput out;
    if (q.degenerate)
        out.warnings.push_back("kernel has zero energy on [0, T]: output is deterministic and the slope is a convention");

    const auto times = detail::table_times(m.T);
    const Matrix Gi = m.Gamma_inv();
    std::vector<Vector> beta, effort;
    for (double s : times) {
        beta.push_back(q.beta_matrix * m.kernel(m.T, s));
        effort.push_back(Gi * beta.back());
    }

    if (opt.format == Format::csv) {
        std::ostringstream os;
        os << "s";
        for (std::size_t i = 0; i < m.dim(); ++i) os << ",beta_" << i;
        for (std::size_t i = 0; i < m.dim(); ++i) os << ",effort_" << i;
        os << "\n";
        for (std::size_t j = 0; j < times.size(); ++j) {
            std::vector<double> row{times[j]};
            row.insert(row.end(), beta[j].data(), beta[j].data() + beta[j].size());
            row.insert(row.end(), effort[j].data(), effort[j].data() + effort[j].size());
            os << detail::csv_row(row);
        }
        out.body = os.str();
        return out;
    }

    json table = json::array();
    for (std::size_t j = 0; j < times.size(); ++j)
        table.push_back({{"s", times[j]}, {"beta", schema::to_json(beta[j])}, {"effort", schema::to_json(effort[j])}});
    json j = detail::envelope("price", sc);
    j["quote"] = {{"dim", q.dim},
                  {"slope", q.slope},
                  {"intercept", q.intercept},
                  {"integral_term", q.integral_term},
                  {"beta_matrix", schema::to_json(q.beta_matrix)},
                  {"beta_table", table},
                  {"phi0", q.phi0},
                  {"chi0", q.chi0},
                  {"voi_gap", q.voi_gap},
                  {"V_SB", q.V_SB},
                  {"V_lin", q.V_lin},
                  {"voi", q.voi},
                  {"agent_value", q.agent_value},
                  {"energy", q.energy},
                  {"degenerate", q.degenerate}};
    j["warnings"] = out.warnings;
    out.body = detail::dump(j);
    return out;
}

inline CommandOutput cmd_voi_sweep(const Scenario& sc, const CommandOptions& opt = {})
{
    if (!sc.sweep) throw ValidationError("scenario.sweep: section required by voi-sweep");
    const auto rows = voi_sweep(*sc.sweep);
    CommandOutput out;
    if (opt.format == Format::csv) {
        std::ostringstream os;
        write_sweep_csv(os, rows);
        out.body = os.str();
        return out;
    }
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"T", r.T}, {"p1", r.p1}, {"p2", r.p2}, {"phi0", r.phi0}, {"chi0", r.chi0},
                       {"b_star", r.b_star}, {"voi", r.voi}, {"voi_gap", r.voi_gap}, {"energy_1", r.energy1},
                       {"energy_2", r.energy2}});
    json j = detail::envelope("voi-sweep", sc);
    j["family"] = to_string(sc.sweep->family);
    j["rows"] = arr;
    out.body = detail::dump(j);
    return out;
}

/// Columns: t, R_ij (row-major), K_j = induced kernel K(t, 0) = w^T R(t) sigma
/// per noise component, g0 = w^T (R(t) x0 + int R(t-s) h(s) ds).
inline CommandOutput cmd_resolvent(const Scenario& sc, const CommandOptions& opt = {})
{
    if (!sc.resolvent) throw ValidationError("scenario.resolvent: section required by the resolvent command");
    const auto& spec = *sc.resolvent;
    const auto res = sc.solved_resolvent();
    const VolterraKernel k = induced_kernel(spec.model, res, spec.aggregation);
    const Path curve = induced_input_curve(spec.model, res);
    const auto d = static_cast<Eigen::Index>(res->dim());
    const double T = spec.T;

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < spec.output_points; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(spec.output_points - 1);
        std::vector<double> row{t};
        const Matrix R = (*res)(t);
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) row.push_back(R(a, b));
        const Vector kv = k.at(t, 0.0, t);
        row.insert(row.end(), kv.data(), kv.data() + kv.size());
        row.push_back(spec.aggregation.dot(curve(t)));
        for (double v : row)
            if (!std::isfinite(v)) throw NumericalError("resolvent output is not finite at t=" + detail::csv_number(t));
        rows.push_back(std::move(row));
    }

    std::vector<std::string> names{"t"};
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = 0; b < d; ++b) names.push_back("R_" + std::to_string(a) + std::to_string(b));
    for (std::size_t j = 0; j < k.dim(); ++j) names.push_back("K_" + std::to_string(j));
    names.push_back("g0");

    CommandOutput out;
    if (opt.format == Format::csv) {
        std::string s;
        for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
        s += "\n";
        for (const auto& r : rows) s += detail::csv_row(r);
        out.body = s;
        return out;
    }
    json arr = json::array();
    for (const auto& r : rows) {
        json o;
        for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = r[i];
        arr.push_back(o);
    }
    json j = detail::envelope("resolvent", sc);
    j["rows"] = arr;
    out.body = detail::dump(j);
    return out;
}

/// martingale mode: t, mean_M, stderr_M at the checkpoints.
/// terminal mode: one row per path, path, X_T, Y_T, utility.
/// output-paths mode: t then one column per path.
inline CommandOutput cmd_simulate(const Scenario& sc, const CommandOptions& opt = {})
{
    const AgencyModel m = sc.model();
    const auto& sim = sc.simulation;
    CommandOutput out;
    json j = detail::envelope("simulate", sc);
    std::ostringstream os;

    if (sim.mode == SimulationMode::martingale) {
        const auto rep = martingale_diagnostic(m, detail::effort_for(sc, m), m.y0, sim.config, sim.checkpoints,
                                               sim.phi_variant);
        os << "t,mean_M,stderr_M\n";
        for (const auto& c : rep.points) os << detail::csv_row({c.t, c.value.mean, c.value.se});
        j["martingale"] = detail::report_json(rep);
    } else if (sim.mode == SimulationMode::terminal) {
        const auto s = sample_terminal(m, detail::effort_for(sc, m), m.y0, sim.config);
        const auto u = s.principal_utility(m.gamma_P);
        os << "path,X_T,Y_T,utility\n";
        for (std::size_t p = 0; p < u.size(); ++p)
            os << p << ',' << detail::csv_number(s.x[p]) << ',' << detail::csv_number(s.y[p]) << ','
               << detail::csv_number(u[p]) << '\n';
        const Estimate e = estimate(u);
        j["terminal"] = {{"mean_utility", e.mean}, {"stderr", e.se}, {"V_SB", principal_value_sb(m)}};
    } else {
        const auto paths = sample_output_path(m, sim.config);
        const auto n = std::min<std::size_t>(sim.max_output_paths, static_cast<std::size_t>(paths.paths.rows()));
        os << "t";
        for (std::size_t p = 0; p < n; ++p) os << ",X_" << p;
        os << "\n";
        json cols = json::array();
        for (std::size_t i = 0; i < paths.times.size(); ++i) {
            std::vector<double> row{paths.times[i]};
            for (std::size_t p = 0; p < n; ++p)
                row.push_back(paths.paths(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)));
            os << detail::csv_row(row);
            cols.push_back(row);
        }
        j["output_paths"] = {{"jitter", paths.jitter}, {"rows", cols}};
    }
    out.body = opt.format == Format::csv ? os.str() : detail::dump(j);
    return out;
}

struct CheckResult {
    std::string check;
    bool passed = false;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double tolerance = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
};

namespace detail {

inline CheckResult guarded(const std::string& name, const std::function<CheckResult()>& f)
{
    try {
        CheckResult r = f();
        r.check = name;
        return r;
    } catch (const std::exception& e) {
        CheckResult r;
        r.check = name;
        r.detail = std::string("error: ") + e.what();
        return r;
    }
}

inline CheckResult bounded(double statistic, double tolerance, std::string text = {})
{
    return {{}, std::isfinite(statistic) && statistic <= tolerance, statistic, tolerance, std::move(text)};
}

} // namespace detail

/// The scenario's certificate: oracle value, stationarity, agent identity,
/// value-of-information identity and bound, slope scan, and the Monte Carlo
/// value and martingale checks. A failing check never stops the others.
inline std::vector<CheckResult> verify_checks(const Scenario& sc, const CommandOptions& opt = {})
{
    std::vector<CheckResult> out;
    std::optional<AgencyModel> model;
    out.push_back(detail::guarded("model", [&] {
        model.emplace(sc.model());
        return detail::bounded(0.0, 0.0, "scenario builds a valid model");
    }));
    if (!model) return out;
    const AgencyModel& m = *model;
    const double y = m.y0;
    const auto quote = [&] { return detail::quote_for(m, opt); };
    const auto quoted_effort = [&](const ContractQuote& q) {
        return EffortPolicy::kernel_linear(m.kernel, m.T, m.dim() == 1 ? Matrix::Constant(1, 1, q.slope) : q.beta_matrix);
    };

    out.push_back(detail::guarded("phi0-oracle", [&] {
        // The Gaussian objective at beta* must equal the closed-form V_SB.
        const double e = principal_objective(y, optimal_effort(m), m).exponent;
        const double target = -m.gamma_P * (m.g0_T() - y) + phi0(m);
        return detail::bounded(std::abs(e - target), 1e-10 * std::max(1.0, std::abs(target)));
    }));

    out.push_back(detail::guarded("stationarity", [&] {
        // Piece averages of beta* are stationary for the piecewise problem, so
        // the gradient per unit length vanishes at the quoted effort.
        const auto edges = PiecewiseConstantEffort::uniform_edges(m.T, 16);
        const auto pieces = project_onto_pieces(quoted_effort(quote()), m, edges);
        const auto g = finite_difference_gradient(y, pieces, m);
        double worst = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j)
            worst = std::max(worst, g[j].lpNorm<Eigen::Infinity>() / (edges[j + 1] - edges[j]));
        return detail::bounded(worst, 1e-6, "sup-norm finite-difference gradient per unit time");
    }));

    out.push_back(detail::guarded("agent-identity", [&] {
        const EffortPolicy beta = quoted_effort(quote());
        const EffortPolicy best = beta.transformed(m.Gamma_inv());
        const double ce = agent_certainty_equivalent(y, beta, best, m);
        return detail::bounded(std::abs(ce - y), 1e-12 * std::max(1.0, std::abs(y)),
                               "certainty equivalent at a = Gamma^{-1} beta equals y");
    }));

    out.push_back(detail::guarded("agent-perturbation", [&] {
        const EffortPolicy beta = quoted_effort(quote());
        const EffortPolicy best = beta.transformed(m.Gamma_inv());
        double worst = -std::numeric_limits<double>::infinity();
        for (double eps : {-0.1, 0.1}) {
            const Vector shift = Vector::Constant(static_cast<Eigen::Index>(m.dim()), eps);
            const double ce = agent_certainty_equivalent(y, beta, best.plus(EffortPolicy::constant(shift, m.T)), m);
            worst = std::max(worst, ce - y);
        }
        CheckResult r{{}, worst < 0.0, worst, 0.0, "max CE change under constant perturbations of a; must be < 0"};
        return r;
    }));

    out.push_back(detail::guarded("voi-identity", [&] {
        const double gap = voi_gap(m);
        const double spectral = voi_spectral(m);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(m.Gamma);
        const bool radial = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff() <=
                            1e-14 * es.eigenvalues().maxCoeff();
        auto r = detail::bounded(std::abs(spectral - gap), 1e-9 * std::max(1.0, std::abs(gap)),
                                 "|voi_spectral - (chi0 - phi0)|");
        if (radial && !(std::abs(gap) <= 1e-12)) {
            r.passed = false;
            r.detail += "; radial cost but chi0 - phi0 = " + detail::csv_number(gap);
        }
        return r;
    }));

    out.push_back(detail::guarded("voi-bound", [&] {
        const double gap = voi_gap(m), bound = voi_upper_bound(m);
        const double slack = 1e-12 * std::max(1.0, bound);
        CheckResult r{{}, gap >= -slack && gap <= bound + slack, gap, bound, "0 <= chi0 - phi0 <= bound"};
        return r;
    }));

    out.push_back(detail::guarded("slope-scan", [&] {
        const ContractQuote q = quote();
        const double step = 1e-3;
        const auto scan = brute_force_slope(y, m, slope_grid(-0.5, 1.5, step));
        if (scan.degenerate) return detail::bounded(0.0, step, "flat objective (zero-energy kernel)");
        return detail::bounded(std::abs(scan.b_best - q.slope), step * (1.0 + 1e-9),
                               "|grid maximiser - quoted slope|, grid step 1e-3");
    }));

    const auto& sim = sc.simulation;
    out.push_back(detail::guarded("mc-value", [&] {
        SimulationConfig cfg = sim.config;
        cfg.scheme = Scheme::terminal_exact;
        const auto u = sample_terminal(m, optimal_effort(m), y, cfg).principal_utility(m.gamma_P);
        const Estimate e = estimate(u);
        const double target = principal_value_sb(m);
        return detail::bounded(std::abs(e.mean - target), 3.0 * e.se + 1e-12 * std::abs(target),
                               "|mean utility - V_SB| within 3 standard errors");
    }));

    out.push_back(detail::guarded("martingale-flat", [&] {
        SimulationConfig cfg = sim.config;
        cfg.scheme = Scheme::euler_path;
        const auto rep = martingale_diagnostic(m, optimal_effort(m), y, cfg, sim.checkpoints);
        double z = 0.0;
        for (const auto& c : rep.points)
            if (c.value.se > 0.0) {
                // Same rounding slack as Estimate::within; matters at t = 0.
                const double excess = std::abs(c.value.mean - rep.initial) - 1e-12 * std::abs(rep.initial);
                z = std::max(z, std::max(excess, 0.0) / c.value.se);
            }
        CheckResult r{{}, rep.flat(3.0), z, 3.0, "max |z| of mean M_t against M_0 over checkpoints"};
        return r;
    }));

    out.push_back(detail::guarded("martingale-perturbed", [&] {
        SimulationConfig cfg = sim.config;
        cfg.scheme = Scheme::euler_path;
        const Vector shift = Vector::Constant(static_cast<Eigen::Index>(m.dim()), 0.2);
        const auto beta = optimal_effort(m).plus(EffortPolicy::constant(shift, m.T));
        const auto rep = martingale_diagnostic(m, beta, y, cfg, {m.T});
        const auto& end = rep.points.back().value;
        CheckResult r{{}, end.mean >= rep.initial - 3.0 * end.se && rep.drift.mean > 0.0, rep.drift.mean, 0.0,
                      "beta* + 0.2: mean M_T >= M_0 - 3 se and drift > 0"};
        return r;
    }));
    return out;
}

inline CommandOutput cmd_verify(const Scenario& sc, const CommandOptions& opt = {})
{
    const auto checks = verify_checks(sc, opt);
    CommandOutput out;
    out.passed = std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
    if (opt.format == Format::csv) {
        std::ostringstream os;
        os << "check,status,statistic,tolerance\n";
        for (const auto& c : checks)
            os << c.check << ',' << (c.passed ? "pass" : "fail") << ',' << detail::csv_number(c.statistic) << ','
               << detail::csv_number(c.tolerance) << '\n';
        out.body = os.str();
        return out;
    }
    json arr = json::array();
    for (const auto& c : checks) {
        json o{{"check", c.check}, {"status", c.passed ? "pass" : "fail"}};
        o["statistic"] = std::isfinite(c.statistic) ? json(c.statistic) : json(nullptr);
        o["tolerance"] = std::isfinite(c.tolerance) ? json(c.tolerance) : json(nullptr);
        if (!c.detail.empty()) o["detail"] = c.detail;
        arr.push_back(o);
    }
    json j = detail::envelope("verify", sc);
    j["checks"] = arr;
    j["passed"] = out.passed;
    out.body = detail::dump(j);
    return out;
}

// ---------------------------------------------------------------------------

enum ExitCode { exit_ok = 0, exit_validation = 1, exit_numerical = 2, exit_verification = 3 };

struct RunRequest {
    std::string command;
    json scenario;
    std::optional<Format> format; ///< command default when empty
    std::optional<std::uint64_t> seed;
    bool inject_slope_error = false;
};

struct RunResult {
    int exit_code = exit_ok;
    std::string body;
    std::string normalized; ///< normalized scenario, for the sidecar echo
    std::vector<std::string> warnings;
    std::string error;
    Format format = Format::json;
};

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"price", "voi-sweep", "resolvent", "simulate", "verify"};
    return names;
}

inline Format default_format(const std::string& command)
{
    return command == "price" || command == "verify" ? Format::json : Format::csv;
}

inline RunResult run(const RunRequest& req)
{
    RunResult r;
    try {
        if (std::find(command_names().begin(), command_names().end(), req.command) == command_names().end())
            throw ValidationError("unknown command \"" + req.command + "\"");
        json root = req.scenario;
        if (req.seed) {
            if (!root.is_object()) throw ValidationError("scenario: expected an object");
            if (!root.contains("simulation")) root["simulation"] = json::object();
            if (!root["simulation"].is_object()) throw ValidationError("scenario.simulation: expected an object");
            root["simulation"]["seed"] = *req.seed;
        }
        const Scenario sc = parse_scenario(root);
        r.normalized = sc.normalized.dump(2) + "\n";
        r.format = req.format.value_or(default_format(req.command));
        const CommandOptions opt{r.format, req.inject_slope_error};
        CommandOutput out;
        if (req.command == "price") out = cmd_price(sc, opt);
        if (req.command == "voi-sweep") out = cmd_voi_sweep(sc, opt);
        if (req.command == "resolvent") out = cmd_resolvent(sc, opt);
        if (req.command == "simulate") out = cmd_simulate(sc, opt);
        if (req.command == "verify") out = cmd_verify(sc, opt);
        r.body = std::move(out.body);
        r.warnings = std::move(out.warnings);
        if (!out.passed) r.exit_code = exit_verification;
    } catch (const ValidationError& e) {
        r.exit_code = exit_validation;
        r.error = e.what();
    } catch (const DegenerateModelError& e) {
        r.exit_code = exit_validation;
        r.error = e.what();
    } catch (const json::exception& e) {
        r.exit_code = exit_validation;
        r.error = std::string("scenario: ") + e.what();
    } catch (const NumericalError& e) {
        r.exit_code = exit_numerical;
        r.error = e.what();
    }
    return r;
}

} // namespace volterra::cli
