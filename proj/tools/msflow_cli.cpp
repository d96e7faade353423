// Command-line front end: run, validate and compare configurations.

#include "msflow/simulation.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <iostream>
#include <optional>

using nlohmann::json;

namespace {

enum ExitCode { ok = 0, failure = 1, bad_input = 2, incompatible = 3, solver = 4, simulation = 5 };

int report(const std::string& type, const std::string& message, int code, json extra = json::object())
{
    json j = {{"status", "error"}, {"type", type}, {"message", message}};
    for (auto& [k, v] : extra.items())
        j[k] = v;
    std::cerr << j.dump() << "\n";
    return code;
}

json diagnostics_json(const std::vector<msflow::Diagnostic>& diags)
{
    json list = json::array();
    for (const auto& d : diags)
        list.push_back({{"path", d.path}, {"message", d.message}});
    return list;
}

json summary(const std::vector<msflow::RunResult>& results)
{
    json rows = json::array();
    for (const auto& r : results) {
        json row = {{"method", r.method.label()}, {"dof", r.dof}, {"T_setup", r.t_setup}, {"T_sim", r.t_sim}};
        if (r.error)
            row["e_s"] = r.error->average;
        rows.push_back(row);
    }
    return rows;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-phase flow with mixed multiscale methods"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
    std::optional<std::uint64_t> seed;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "configuration file (JSON)")->required();
        if (with_out) {
            sub->add_option("--out", out_dir, "output directory");
            sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
            sub->add_option("--seed", seed, "seed for synthetic permeability");
        }
    };
    CLI::App* run_cmd = app.add_subcommand("run", "run the configured method");
    CLI::App* validate_cmd = app.add_subcommand("validate", "check a configuration without running");
    CLI::App* compare_cmd = app.add_subcommand("compare", "run the reference and every method in the compare list");
    add_common(run_cmd, true);
    add_common(validate_cmd, false);
    add_common(compare_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), bad_input);
    }

    try {
        if (validate_cmd->parsed()) {
            const auto diags = msflow::validate_config_file(config_path);
            json j = {{"status", diags.empty() ? "valid" : "invalid"}, {"diagnostics", diagnostics_json(diags)}};
            std::cout << j.dump(2) << "\n";
            return diags.empty() ? ok : bad_input;
        }
        msflow::Config config = msflow::load_config(config_path);
        if (seed)
            config.permeability.seed = *seed;
        std::vector<msflow::RunResult> results;
        if (run_cmd->parsed())
            results = msflow::run(config, out_dir, threads);
        else
            results = msflow::compare(config, out_dir, threads);
        std::cout << json{{"status", "ok"}, {"out", out_dir}, {"runs", summary(results)}}.dump(2) << "\n";
        return ok;
    } catch (const msflow::ConfigError& e) {
        return report("config", e.what(), bad_input, {{"diagnostics", diagnostics_json(e.diagnostics())}});
    } catch (const msflow::SimulationError& e) {
        return report("simulation", e.what(), simulation, {{"step", e.step()}});
    } catch (const msflow::IncompatibleData& e) {
        return report("incompatible_data", e.what(), incompatible, {{"imbalance", e.imbalance()}});
    } catch (const msflow::SolverFailure& e) {
        return report("solver_failure", e.what(), solver, {{"residual", e.residual()}});
    } catch (const msflow::InputError& e) {
        return report("input", e.what(), bad_input);
    } catch (const std::exception& e) {
        return report("internal", e.what(), failure);
    }
}
