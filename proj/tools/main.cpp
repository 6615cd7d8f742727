#include "volterra/cli/commands.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

using namespace volterra::cli;

namespace {

bool write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    return static_cast<bool>(out);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Optimal contracts for Volterra-Gaussian output processes"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, format_name;
    std::optional<std::uint64_t> seed;
    bool inject = false;

    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--scenario", scenario_path, "scenario JSON file")->required();
        sub->add_option("--out", out_path, "output file (stdout when omitted)");
        sub->add_option("--format", format_name, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--seed", seed, "overrides simulation.seed");
        sub->add_flag("--inject-slope-error", inject)->group("");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_validation;
    }

    RunRequest req;
    req.command = app.get_subcommands().front()->get_name();
    req.seed = seed;
    req.inject_slope_error = inject;
    if (!format_name.empty()) req.format = format_name == "csv" ? Format::csv : Format::json;

    try {
        std::ifstream in(scenario_path);
        if (!in) {
            std::cerr << "error: scenario: cannot open " << scenario_path << "\n";
            return exit_validation;
        }
        req.scenario = json::parse(in);
    } catch (const json::parse_error& e) {
        std::cerr << "error: scenario: invalid JSON: " << e.what() << "\n";
        return exit_validation;
    }

    RunResult r;
    try {
        r = run(req);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    if (!r.error.empty()) {
        std::cerr << "error: " << r.error << "\n";
        return r.exit_code;
    }

    if (out_path.empty()) {
        std::cout << r.body;
    } else {
        bool ok = write_file(out_path, r.body);
        // CSV carries no metadata, so the scenario travels next to it.
        if (r.format == Format::csv) ok = write_file(out_path + ".scenario.json", r.normalized) && ok;
        if (!ok) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return exit_validation;
        }
    }
    return r.exit_code;
}
