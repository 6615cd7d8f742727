#pragma once

// Scenario files: one JSON document with sections model / kernel /
// quadrature / simulation / sweep / resolvent. Parsing validates every field
// (errors carry the field path) and produces a normalized copy with all
// defaults spelled out; re-parsing the normalized copy yields the same
// scenario.

#include "volterra/contract.hpp"
#include "volterra/kernel.hpp"
#include "volterra/model.hpp"
#include "volterra/resolvent.hpp"
#include "volterra/simulator.hpp"
#include "volterra/sweep.hpp"
#include "volterra/types.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace volterra::cli {

using json = nlohmann::json;

namespace schema {

[[noreturn]] inline void fail(const std::string& path, const std::string& what)
{
    throw ValidationError(path + ": " + what);
}

inline std::string join(const std::string& path, const std::string& key) { return path + "." + key; }
inline std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline void object(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) fail(path, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) fail(join(path, k), "unknown field");
}

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "must be finite");
    return v;
}

inline double positive(const json& j, const std::string& path)
{
    const double v = number(j, path);
    if (!(v > 0.0)) fail(path, "must be positive");
    return v;
}

inline std::uint64_t count(const json& j, const std::string& path, std::uint64_t min = 1)
{
    if (!j.is_number_integer() && !j.is_number_unsigned()) fail(path, "expected an integer");
    if (j.is_number_integer() && j.get<std::int64_t>() < 0) fail(path, "must be non-negative");
    const auto v = j.get<std::uint64_t>();
    if (v < min) fail(path, "must be >= " + std::to_string(min));
    return v;
}

inline std::string text(const json& j, const std::string& path, std::initializer_list<const char*> choices)
{
    if (!j.is_string()) fail(path, "expected a string");
    const auto s = j.get<std::string>();
    for (const char* c : choices)
        if (s == c) return s;
    std::string all;
    for (const char* c : choices) all += std::string(all.empty() ? "" : ", ") + c;
    fail(path, "must be one of " + all + " (got \"" + s + "\")");
}

inline std::vector<double> numbers(const json& j, const std::string& path, bool allow_empty = false)
{
    if (!j.is_array()) fail(path, "expected an array of numbers");
    if (j.empty() && !allow_empty) fail(path, "must not be empty");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], index(path, i)));
    return out;
}

inline Vector vector(const json& j, const std::string& path)
{
    const auto v = numbers(j, path);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Row-major array of arrays.
inline Matrix matrix(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    Matrix m;
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto row = numbers(j[r], index(path, r));
        if (r == 0) m.resize(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(row.size()));
        if (row.size() != static_cast<std::size_t>(m.cols())) fail(index(path, r), "rows must have equal length");
        for (std::size_t c = 0; c < row.size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    }
    return m;
}

inline json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json to_json(const Matrix& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

/// Runs `f(where)` and prefixes validation failures raised by the library
/// (which know nothing about paths) with the scenario field.
template <class F>
auto at(const std::string& path, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        if (msg.rfind("scenario", 0) == 0) throw;
        fail(path, msg);
    }
}

} // namespace schema

enum class SimulationMode { martingale, terminal, output_paths };

/// Which effort the simulate / verify commands feed the simulator.
struct EffortSpec {
    enum class Kind { optimal, zero, optimal_shift, linear } kind = Kind::optimal;
    Vector shift;        ///< optimal_shift
    double slope = 0.0;  ///< linear: beta = slope K(T, .)
};

struct SimulationSpec {
    SimulationConfig config;
    SimulationMode mode = SimulationMode::martingale;
    EffortSpec effort;
    std::vector<double> checkpoints;
    PhiVariant phi_variant = PhiVariant::adopted;
    std::size_t max_output_paths = 100; ///< paths written in output-paths mode
};

struct ResolventSpec {
    IntegroModel model;
    double T = 1.0;
    std::size_t n = 1000;
    Vector aggregation;
    std::size_t output_points = 101;
};

struct Scenario {
    json normalized;

    double gamma_A = 1.0, gamma_P = 1.0, y0 = 0.0, T = 1.0;
    Matrix Gamma;
    json kernel_spec; ///< normalized kernel section
    json g0_spec;     ///< normalized model.g0
    QuadratureRule quadrature;
    SimulationSpec simulation;
    std::optional<SweepSpec> sweep;
    std::optional<ResolventSpec> resolvent;

    /// Solved once and shared by the induced kernel and input curve.
    std::shared_ptr<const Resolvent> solved_resolvent() const
    {
        if (!resolvent) throw ValidationError("scenario.resolvent: section required by this command");
        if (!resolvent_cache_)
            resolvent_cache_ = std::make_shared<const Resolvent>(
                solve_resolvent(resolvent->model.mu, resolvent->T, resolvent->n));
        return resolvent_cache_;
    }

    VolterraKernel kernel() const { return build_kernel(kernel_spec); }

    AgencyModel model() const
    {
        std::function<double(double)> g0;
        if (g0_spec.at("type") == "affine") {
            const double a = g0_spec.at("intercept").get<double>(), b = g0_spec.at("slope").get<double>();
            if (a != 0.0 || b != 0.0) g0 = [a, b](double t) { return a + b * t; };
        } else {
            const auto res = solved_resolvent();
            const Path curve = induced_input_curve(resolvent->model, res);
            const Vector w = resolvent->aggregation;
            g0 = [curve, w](double t) { return w.dot(curve(t)); };
        }
        return schema::at("scenario.model", [&] {
            return AgencyModel(gamma_A, gamma_P, Gamma, y0, T, kernel(), g0, quadrature);
        });
    }

private:
    mutable std::shared_ptr<const Resolvent> resolvent_cache_;

    VolterraKernel build_kernel(const json& k) const
    {
        const std::string type = k.at("type");
        if (type == "constant") return make_constant(schema::vector(k.at("sigma"), ""));
        if (type == "exponential") return make_exponential(schema::vector(k.at("lambda"), ""));
        if (type == "bridge") return make_bridge(k.at("T0").get<double>(), T);
        if (type == "riemann_liouville") return make_riemann_liouville({k.at("hurst"), k.at("scale")});
        if (type == "fbm") return make_fbm_molchan_golosov({k.at("hurst"), k.at("scale")});
        if (type == "discrete_observation")
            return make_discrete_observation(k.at("times").get<std::vector<double>>(), T);
        if (type == "stack") {
            std::vector<VolterraKernel> parts;
            for (const auto& c : k.at("components")) parts.push_back(build_kernel(c));
            return stack(std::move(parts));
        }
        return induced_kernel(resolvent->model, solved_resolvent(), resolvent->aggregation);
    }
};

namespace detail {

inline json parse_kernel(const json& j, const std::string& path, double T, std::size_t depth = 0)
{
    if (!j.is_object() || !j.contains("type")) schema::fail(path, "expected an object with a \"type\"");
    const std::string type =
        schema::text(j.at("type"), schema::join(path, "type"),
                     {"constant", "exponential", "bridge", "riemann_liouville", "fbm", "discrete_observation",
                      "stack", "induced"});
    auto vec_or_scalar = [&](const char* key, double def) -> json {
        const std::string p = schema::join(path, key);
        if (!j.contains(key)) return json::array({def});
        if (j.at(key).is_number()) return json::array({schema::number(j.at(key), p)});
        return json(schema::numbers(j.at(key), p));
    };
    json out{{"type", type}};
    if (type == "constant") {
        schema::object(j, path, {"type", "sigma"});
        out["sigma"] = vec_or_scalar("sigma", 1.0);
    } else if (type == "exponential") {
        schema::object(j, path, {"type", "lambda"});
        if (!j.contains("lambda")) schema::fail(schema::join(path, "lambda"), "required");
        out["lambda"] = vec_or_scalar("lambda", 0.0);
    } else if (type == "bridge") {
        schema::object(j, path, {"type", "T0"});
        if (!j.contains("T0")) schema::fail(schema::join(path, "T0"), "required");
        const double t0 = schema::number(j.at("T0"), schema::join(path, "T0"));
        if (!(t0 > T)) schema::fail(schema::join(path, "T0"), "pinning time must exceed model.T");
        out["T0"] = t0;
    } else if (type == "riemann_liouville" || type == "fbm") {
        schema::object(j, path, {"type", "hurst", "scale"});
        if (!j.contains("hurst")) schema::fail(schema::join(path, "hurst"), "required");
        const double h = schema::number(j.at("hurst"), schema::join(path, "hurst"));
        if (!(h > 0.0 && h < 1.0)) schema::fail(schema::join(path, "hurst"), "must lie strictly inside (0,1)");
        out["hurst"] = h;
        out["scale"] = j.contains("scale") ? schema::positive(j.at("scale"), schema::join(path, "scale"))
                       : type == "fbm"     ? molchan_golosov_default_scale(h)
                                           : riemann_liouville_default_scale(h);
    } else if (type == "discrete_observation") {
        schema::object(j, path, {"type", "times"});
        if (!j.contains("times")) schema::fail(schema::join(path, "times"), "required");
        const auto times = schema::numbers(j.at("times"), schema::join(path, "times"));
        schema::at(schema::join(path, "times"), [&] { return make_discrete_observation(times, T); });
        out["times"] = times;
    } else if (type == "stack") {
        schema::object(j, path, {"type", "components"});
        if (depth > 8) schema::fail(path, "stack nesting too deep");
        const std::string p = schema::join(path, "components");
        if (!j.contains("components") || !j.at("components").is_array() || j.at("components").empty())
            schema::fail(p, "expected a non-empty array of kernels");
        out["components"] = json::array();
        for (std::size_t i = 0; i < j.at("components").size(); ++i)
            out["components"].push_back(parse_kernel(j.at("components")[i], schema::index(p, i), T, depth + 1));
    } else {
        schema::object(j, path, {"type"});
    }
    return out;
}

inline QuadratureRule parse_quadrature(const json& j, json& out)
{
    const std::string path = "scenario.quadrature";
    schema::object(j, path, {"panels", "order", "left_exponent", "right_exponent"});
    QuadratureRule r;
    if (j.contains("panels")) r.panels = static_cast<int>(schema::count(j.at("panels"), schema::join(path, "panels")));
    if (j.contains("order")) r.order = static_cast<int>(schema::count(j.at("order"), schema::join(path, "order")));
    for (const char* key : {"left_exponent", "right_exponent"}) {
        if (!j.contains(key) || j.at(key).is_null()) continue;
        const double v = schema::number(j.at(key), schema::join(path, key));
        (std::string(key) == "left_exponent" ? r.left_exponent : r.right_exponent) = v;
    }
    schema::at(path, [&] {
        r.validate();
        return 0;
    });
    out = {{"panels", r.panels},
           {"order", r.order},
           {"left_exponent", r.left_exponent ? json(*r.left_exponent) : json(nullptr)},
           {"right_exponent", r.right_exponent ? json(*r.right_exponent) : json(nullptr)}};
    return r;
}

inline SimulationSpec parse_simulation(const json& j, double T, std::size_t dim, json& out)
{
    const std::string path = "scenario.simulation";
    schema::object(j, path,
                   {"n_paths", "n_steps", "seed", "scheme", "threads", "mode", "effort", "checkpoints", "phi_variant",
                    "max_output_paths"});
    SimulationSpec s;
    auto& c = s.config;
    if (j.contains("n_paths")) c.n_paths = schema::count(j.at("n_paths"), schema::join(path, "n_paths"));
    if (j.contains("n_steps")) c.n_steps = schema::count(j.at("n_steps"), schema::join(path, "n_steps"));
    if (j.contains("seed")) c.seed = schema::count(j.at("seed"), schema::join(path, "seed"), 0);
    if (j.contains("threads"))
        c.threads = static_cast<unsigned>(schema::count(j.at("threads"), schema::join(path, "threads"), 0));
    const std::string mode = j.contains("mode") ? schema::text(j.at("mode"), schema::join(path, "mode"),
                                                               {"martingale", "terminal", "output-paths"})
                                                : "martingale";
    s.mode = mode == "martingale" ? SimulationMode::martingale
             : mode == "terminal" ? SimulationMode::terminal
                                  : SimulationMode::output_paths;
    const std::string scheme =
        j.contains("scheme") ? schema::text(j.at("scheme"), schema::join(path, "scheme"), {"terminal-exact", "euler-path"})
        : s.mode == SimulationMode::terminal ? "terminal-exact"
                                             : "euler-path";
    c.scheme = scheme == "terminal-exact" ? Scheme::terminal_exact : Scheme::euler_path;
    if (s.mode == SimulationMode::martingale && c.scheme != Scheme::euler_path)
        schema::fail(schema::join(path, "scheme"), "martingale mode needs the euler-path scheme");

    json effort_out{{"type", "optimal"}};
    if (j.contains("effort")) {
        const auto& e = j.at("effort");
        const std::string ep = schema::join(path, "effort");
        schema::object(e, ep, {"type", "shift", "slope"});
        if (!e.contains("type")) schema::fail(schema::join(ep, "type"), "required");
        const std::string type =
            schema::text(e.at("type"), schema::join(ep, "type"), {"optimal", "zero", "optimal-shift", "linear"});
        effort_out = {{"type", type}};
        if (type == "optimal") s.effort.kind = EffortSpec::Kind::optimal;
        if (type == "zero") s.effort.kind = EffortSpec::Kind::zero;
        if (type == "optimal-shift") {
            s.effort.kind = EffortSpec::Kind::optimal_shift;
            if (!e.contains("shift")) schema::fail(schema::join(ep, "shift"), "required");
            s.effort.shift = e.at("shift").is_number()
                                 ? Vector::Constant(static_cast<Eigen::Index>(dim), schema::number(e.at("shift"), schema::join(ep, "shift")))
                                 : schema::vector(e.at("shift"), schema::join(ep, "shift"));
            if (s.effort.shift.size() != static_cast<Eigen::Index>(dim))
                schema::fail(schema::join(ep, "shift"), "must have one entry per kernel component");
            effort_out["shift"] = schema::to_json(s.effort.shift);
        }
        if (type == "linear") {
            s.effort.kind = EffortSpec::Kind::linear;
            if (!e.contains("slope")) schema::fail(schema::join(ep, "slope"), "required");
            s.effort.slope = schema::number(e.at("slope"), schema::join(ep, "slope"));
            effort_out["slope"] = s.effort.slope;
        }
    }
    s.checkpoints = j.contains("checkpoints") ? schema::numbers(j.at("checkpoints"), schema::join(path, "checkpoints"))
                                              : std::vector<double>{0.0, 0.25 * T, 0.5 * T, 0.75 * T, T};
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i)
        if (s.checkpoints[i] < 0.0 || s.checkpoints[i] > T)
            schema::fail(schema::index(schema::join(path, "checkpoints"), i), "must lie in [0, model.T]");
    const std::string phi =
        j.contains("phi_variant") ? schema::text(j.at("phi_variant"), schema::join(path, "phi_variant"), {"adopted", "one-dim-text"})
                                  : "adopted";
    s.phi_variant = phi == "adopted" ? PhiVariant::adopted : PhiVariant::one_dim_text;
    if (j.contains("max_output_paths"))
        s.max_output_paths = schema::count(j.at("max_output_paths"), schema::join(path, "max_output_paths"));
    out = {{"n_paths", c.n_paths}, {"n_steps", c.n_steps}, {"seed", c.seed},     {"scheme", scheme},
           {"threads", c.threads}, {"mode", mode},         {"effort", effort_out}, {"checkpoints", s.checkpoints},
           {"phi_variant", phi},   {"max_output_paths", s.max_output_paths}};
    return s;
}

inline SweepSpec parse_sweep(const json& j, const Scenario& sc, json& out)
{
    const std::string path = "scenario.sweep";
    schema::object(j, path,
                   {"family", "horizons", "T_max", "n_T", "param1", "param2", "lambda", "gamma_A", "gamma_P", "threads"});
    SweepSpec s;
    if (!j.contains("family")) schema::fail(schema::join(path, "family"), "required");
    const std::string family = schema::text(j.at("family"), schema::join(path, "family"), {"exponential", "fractional"});
    s.family = family == "exponential" ? SweepFamily::exponential : SweepFamily::fractional;
    if (j.contains("horizons")) {
        if (j.contains("T_max") || j.contains("n_T"))
            schema::fail(path, "give either horizons or T_max/n_T, not both");
        s.horizons = schema::numbers(j.at("horizons"), schema::join(path, "horizons"));
    } else {
        const double tmax = j.contains("T_max") ? schema::positive(j.at("T_max"), schema::join(path, "T_max")) : 3.0;
        const auto n = j.contains("n_T") ? schema::count(j.at("n_T"), schema::join(path, "n_T")) : 30;
        s.horizons = SweepSpec::uniform_horizons(tmax, n);
    }
    const std::vector<double> defaults =
        s.family == SweepFamily::exponential ? std::vector<double>{-1.0, 0.0, 1.0} : std::vector<double>{0.25, 0.5, 0.75};
    s.param1 = j.contains("param1") ? schema::numbers(j.at("param1"), schema::join(path, "param1")) : defaults;
    s.param2 = j.contains("param2") ? schema::numbers(j.at("param2"), schema::join(path, "param2")) : defaults;
    s.lambda = j.contains("lambda") ? schema::vector(j.at("lambda"), schema::join(path, "lambda"))
                                    : (Vector(2) << 2.0, 1.0).finished();
    s.gamma_A = j.contains("gamma_A") ? schema::positive(j.at("gamma_A"), schema::join(path, "gamma_A")) : sc.gamma_A;
    s.gamma_P = j.contains("gamma_P") ? schema::positive(j.at("gamma_P"), schema::join(path, "gamma_P")) : sc.gamma_P;
    s.threads = j.contains("threads") ? static_cast<unsigned>(schema::count(j.at("threads"), schema::join(path, "threads"), 0))
                                      : sc.simulation.config.threads;
    s.quadrature = sc.quadrature;
    schema::at(path, [&] {
        s.validate();
        return 0;
    });
    out = {{"family", family},   {"horizons", s.horizons},   {"param1", s.param1}, {"param2", s.param2},
           {"lambda", schema::to_json(s.lambda)}, {"gamma_A", s.gamma_A}, {"gamma_P", s.gamma_P},
           {"threads", s.threads}};
    return s;
}

inline ResolventSpec parse_resolvent(const json& j, double model_T, json& out)
{
    const std::string path = "scenario.resolvent";
    schema::object(j, path, {"T", "n", "measure", "x0", "sigma", "h", "aggregation", "output_points"});
    ResolventSpec r;
    r.T = j.contains("T") ? schema::positive(j.at("T"), schema::join(path, "T")) : model_T;
    if (j.contains("n")) r.n = schema::count(j.at("n"), schema::join(path, "n"), 2);
    r.model.x0 = j.contains("x0") ? schema::vector(j.at("x0"), schema::join(path, "x0")) : Vector::Zero(1);
    const auto d = r.model.x0.size();
    r.model.sigma = j.contains("sigma") ? schema::matrix(j.at("sigma"), schema::join(path, "sigma"))
                                        : Matrix::Identity(d, d);
    json h_out = nullptr;
    if (j.contains("h") && !j.at("h").is_null()) {
        const Vector h = schema::vector(j.at("h"), schema::join(path, "h"));
        if (h.size() != d) schema::fail(schema::join(path, "h"), "must match the size of x0");
        r.model.h = [h](double) { return h; };
        h_out = schema::to_json(h);
    }
    r.aggregation = j.contains("aggregation") ? schema::vector(j.at("aggregation"), schema::join(path, "aggregation"))
                                              : Vector(Vector::Unit(d, 0));
    if (r.aggregation.size() != d) schema::fail(schema::join(path, "aggregation"), "must match the size of x0");
    if (j.contains("output_points"))
        r.output_points = schema::count(j.at("output_points"), schema::join(path, "output_points"), 2);

    const std::string mp = schema::join(path, "measure");
    ConvolutionMeasure mu = ConvolutionMeasure::zero(static_cast<std::size_t>(d));
    json measure_out{{"atoms", json::array()}, {"density", {{"type", "none"}}}};
    if (j.contains("measure")) {
        const auto& m = j.at("measure");
        schema::object(m, mp, {"atoms", "density"});
        if (m.contains("atoms")) {
            const std::string ap = schema::join(mp, "atoms");
            if (!m.at("atoms").is_array()) schema::fail(ap, "expected an array");
            for (std::size_t i = 0; i < m.at("atoms").size(); ++i) {
                const auto& a = m.at("atoms")[i];
                const std::string p = schema::index(ap, i);
                schema::object(a, p, {"t", "a"});
                if (!a.contains("t") || !a.contains("a")) schema::fail(p, "atoms need \"t\" and \"a\"");
                const double t = schema::number(a.at("t"), schema::join(p, "t"));
                const Matrix w = a.at("a").is_number() ? Matrix::Constant(1, 1, schema::number(a.at("a"), schema::join(p, "a")))
                                                       : schema::matrix(a.at("a"), schema::join(p, "a"));
                mu.atoms.push_back({t, w});
                measure_out["atoms"].push_back({{"t", t}, {"a", schema::to_json(w)}});
            }
        }
        if (m.contains("density")) {
            const auto& dn = m.at("density");
            const std::string dp = schema::join(mp, "density");
            schema::object(dn, dp, {"type", "value", "rate"});
            if (!dn.contains("type")) schema::fail(schema::join(dp, "type"), "required");
            const std::string type = schema::text(dn.at("type"), schema::join(dp, "type"), {"none", "constant", "exponential"});
            measure_out["density"] = {{"type", type}};
            if (type != "none") {
                if (!dn.contains("value")) schema::fail(schema::join(dp, "value"), "required");
                const Matrix v = dn.at("value").is_number()
                                     ? Matrix::Constant(1, 1, schema::number(dn.at("value"), schema::join(dp, "value")))
                                     : schema::matrix(dn.at("value"), schema::join(dp, "value"));
                measure_out["density"]["value"] = schema::to_json(v);
                const double rate = type == "exponential" && dn.contains("rate")
                                        ? schema::number(dn.at("rate"), schema::join(dp, "rate"))
                                        : 0.0;
                if (type == "exponential") measure_out["density"]["rate"] = rate;
                mu.density = [v, rate](double t) { return Matrix(v * std::exp(-rate * t)); };
                if (v.rows() != d || v.cols() != d) schema::fail(schema::join(dp, "value"), "must be d x d with d = size of x0");
            } else if (dn.contains("value") || dn.contains("rate")) {
                schema::fail(dp, "density of type none takes no parameters");
            }
        }
    }
    r.model.mu = mu;
    schema::at(path, [&] {
        r.model.validate(r.T);
        require(r.T / static_cast<double>(r.n) <= mu.min_atom_gap() * (1.0 + 1e-12),
                "n too small: the step must not exceed the smallest atom spacing");
        return 0;
    });
    out = {{"T", r.T},
           {"n", r.n},
           {"measure", measure_out},
           {"x0", schema::to_json(r.model.x0)},
           {"sigma", schema::to_json(r.model.sigma)},
           {"h", h_out},
           {"aggregation", schema::to_json(r.aggregation)},
           {"output_points", r.output_points}};
    return r;
}

} // namespace detail

inline Scenario parse_scenario(const json& root)
{
    schema::object(root, "scenario", {"model", "kernel", "quadrature", "simulation", "sweep", "resolvent"});
    Scenario sc;
    json& norm = sc.normalized;
    norm = json::object();

    const std::string mp = "scenario.model";
    if (!root.contains("model")) schema::fail(mp, "required");
    const auto& m = root.at("model");
    schema::object(m, mp, {"gamma_A", "gamma_P", "Gamma", "kappa", "y0", "T", "g0"});
    for (const char* key : {"gamma_A", "gamma_P", "T"})
        if (!m.contains(key)) schema::fail(schema::join(mp, key), "required");
    sc.gamma_A = schema::positive(m.at("gamma_A"), schema::join(mp, "gamma_A"));
    sc.gamma_P = schema::positive(m.at("gamma_P"), schema::join(mp, "gamma_P"));
    sc.T = schema::positive(m.at("T"), schema::join(mp, "T"));
    sc.y0 = m.contains("y0") ? schema::number(m.at("y0"), schema::join(mp, "y0")) : 0.0;
    if (m.contains("Gamma") && m.contains("kappa")) schema::fail(mp, "give either Gamma or kappa, not both");
    if (m.contains("Gamma"))
        sc.Gamma = m.at("Gamma").is_number() ? Matrix::Constant(1, 1, schema::positive(m.at("Gamma"), schema::join(mp, "Gamma")))
                                             : schema::matrix(m.at("Gamma"), schema::join(mp, "Gamma"));
    else
        sc.Gamma = Matrix::Constant(1, 1, m.contains("kappa") ? schema::positive(m.at("kappa"), schema::join(mp, "kappa")) : 1.0);
    sc.g0_spec = {{"type", "affine"}, {"intercept", 0.0}, {"slope", 0.0}};
    if (m.contains("g0")) {
        const auto& g = m.at("g0");
        const std::string gp = schema::join(mp, "g0");
        schema::object(g, gp, {"type", "intercept", "slope"});
        const std::string type = g.contains("type") ? schema::text(g.at("type"), schema::join(gp, "type"), {"affine", "induced"})
                                                    : "affine";
        if (type == "affine") {
            sc.g0_spec["intercept"] = g.contains("intercept") ? schema::number(g.at("intercept"), schema::join(gp, "intercept")) : 0.0;
            sc.g0_spec["slope"] = g.contains("slope") ? schema::number(g.at("slope"), schema::join(gp, "slope")) : 0.0;
        } else {
            if (g.contains("intercept") || g.contains("slope")) schema::fail(gp, "induced g0 takes no parameters");
            sc.g0_spec = {{"type", "induced"}};
        }
    }
    norm["model"] = {{"gamma_A", sc.gamma_A}, {"gamma_P", sc.gamma_P}, {"Gamma", schema::to_json(sc.Gamma)},
                     {"y0", sc.y0},           {"T", sc.T},             {"g0", sc.g0_spec}};

    if (!root.contains("kernel")) schema::fail("scenario.kernel", "required");
    sc.kernel_spec = detail::parse_kernel(root.at("kernel"), "scenario.kernel", sc.T);
    norm["kernel"] = sc.kernel_spec;

    json q = json::object();
    sc.quadrature = detail::parse_quadrature(root.value("quadrature", json::object()), q);
    norm["quadrature"] = q;

    if (sc.kernel_spec.dump().find("\"induced\"") != std::string::npos || sc.g0_spec.at("type") == "induced")
        if (!root.contains("resolvent")) schema::fail("scenario.resolvent", "required by induced kernel or g0");
    if (root.contains("resolvent")) {
        json r;
        sc.resolvent = detail::parse_resolvent(root.at("resolvent"), sc.T, r);
        norm["resolvent"] = r;
        if (sc.resolvent->T < sc.T) schema::fail("scenario.resolvent.T", "must cover model.T");
    }

    // Dimension check through the library's own validation.
    const AgencyModel model = sc.model();

    json s;
    sc.simulation = detail::parse_simulation(root.value("simulation", json::object()), sc.T, model.dim(), s);
    norm["simulation"] = s;

    if (root.contains("sweep")) {
        json w;
        sc.sweep = detail::parse_sweep(root.at("sweep"), sc, w);
        norm["sweep"] = w;
    }
    return sc;
}

inline Scenario load_scenario(const std::string& file)
{
    std::ifstream in(file);
    if (!in) throw ValidationError("scenario: cannot open file " + file);
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("scenario: invalid JSON: ") + e.what());
    }
    return parse_scenario(root);
}

} // namespace volterra::cli
