#include "doctest.h"

#include "msflow/simulation.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace msflow;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "msflow_cli_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream o(path);
    o << text;
    return path;
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool mentions(const std::vector<Diagnostic>& diags, const std::string& needle)
{
    for (const auto& d : diags)
        if (d.message.find(needle) != std::string::npos || d.path.find(needle) != std::string::npos)
            return true;
    return false;
}

const char* small_config = R"({
  "grid": {"cells": [8, 8, 4], "spacing": [1, 1, 1]},
  "permeability": {"source": "synthetic", "kind": "channel", "contrast": 100, "seed": 5},
  "method": {"kind": "mgmsfem", "n": 4, "basis": "2+1"},
  "wells": {"case": 1, "rate": 1.0},
  "time": {"steps": 10, "pore_volumes": 0.2, "pressure_interval": 2, "checkpoints": [10]},
  "output": {"volumes": true, "reference_errors": true}
})";

int run_cli(const std::string& args, const std::filesystem::path& log)
{
    const std::string cmd = std::string(MSFLOW_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("basis count parsing")
{
    CHECK(parse_basis_counts("2+2") == std::pair{2, 2});
    CHECK(parse_basis_counts("4") == std::pair{4, 0});
    CHECK(parse_basis_counts("1+0") == std::pair{1, 0});
    CHECK_THROWS_AS(parse_basis_counts("2+"), InputError);
    CHECK_THROWS_AS(parse_basis_counts("a+1"), InputError);
    CHECK_THROWS_AS(parse_basis_counts("2+1x"), InputError);
}

TEST_CASE("configuration diagnostics")
{
    SUBCASE("valid")
    {
        Config c;
        CHECK(parse_config(small_config, c).empty());
        CHECK(c.cells == Index3{8, 8, 4});
        CHECK(c.method.kind == MethodKind::mgmsfem);
        CHECK(c.method.factor == Index3{4, 4, 4});
        CHECK(c.method.offline == 2);
        CHECK(c.method.online == 1);
        CHECK(c.method.label() == "MGMsFEM(2+1)");
    }
    SUBCASE("coarsening factor must divide every axis")
    {
        Config c;
        const auto d = parse_config(
            R"({"grid": {"cells": [20, 30, 10]}, "method": {"kind": "mmsfem", "n": [5, 7, 5]}})", c);
        REQUIRE(d.size() == 1);
        CHECK(d[0].path == "/method/n");
        CHECK(d[0].message == "n=7 does not divide the 30 cells along y");
    }
    SUBCASE("offline count bounded by the snapshot count")
    {
        Config c;
        const auto d = parse_config(
            R"({"grid": {"cells": [40, 40, 40]}, "method": {"kind": "mgmsfem", "n": 20, "basis": "401+0"}})", c);
        CHECK(mentions(d, "exceeds J_i=400"));
        Config ok;
        CHECK(parse_config(R"({"grid": {"cells": [40, 40, 40]}, "method": {"kind": "mgmsfem", "n": 20, "basis": "400+0"}})",
                           ok)
                  .empty());
    }
    SUBCASE("zero offline functions")
    {
        Config c;
        CHECK(mentions(parse_config(R"({"method": {"kind": "mgmsfem", "n": 4, "basis": "0+2"}})", c),
                       "at least one offline function"));
    }
    SUBCASE("unknown keys and bad values are all reported")
    {
        Config c;
        const auto d = parse_config(
            R"({"grdi": {}, "time": {"steps": -1, "cfl_safety": 2}, "wells": {"case": 3}, "method": {"kind": "fem"}})", c);
        CHECK(mentions(d, "grdi"));
        CHECK(mentions(d, "/time/steps"));
        CHECK(mentions(d, "/time/cfl_safety"));
        CHECK(mentions(d, "/wells/case"));
        CHECK(mentions(d, "/method/kind"));
    }
    SUBCASE("malformed JSON")
    {
        Config c;
        const auto d = parse_config("{\"grid\": ", c);
        REQUIRE(d.size() == 1);
        CHECK(d[0].message.find("not valid JSON") != std::string::npos);
    }
    SUBCASE("custom wells must balance")
    {
        Config c;
        const auto d = parse_config(
            R"({"wells": {"custom": [{"box": {"lo": [0,0,0], "hi": [1,1,8]}, "rate": 1.0},
                                     {"box": {"lo": [15,15,0], "hi": [16,16,8]}, "rate": -0.5}]}})",
            c);
        CHECK(mentions(d, "sum to zero"));
    }
    SUBCASE("missing spe10 file is caught by validation")
    {
        const auto dir = scratch_dir("spe10");
        const auto path = write_text(
            dir / "c.json",
            R"({"grid": {"cells": [4, 4, 2]}, "permeability": {"source": "spe10", "path": "/nonexistent/perm.dat", "dims": [4, 4, 2]}})");
        const auto d = validate_config_file(path);
        REQUIRE(d.size() == 1);
        CHECK(d[0].path == "/permeability");
    }
}

TEST_CASE("run artifacts and dof report")
{
    Config c;
    REQUIRE(parse_config(small_config, c).empty());
    const auto out = scratch_dir("run");
    const auto results = run(c, out, 1);
    REQUIRE(results.size() == 2);

    const RunResult& fine = results[0];
    const RunResult& ms = results[1];
    CHECK(fine.method.kind == MethodKind::reference);
    CHECK(fine.t_setup == 0.0);
    CHECK(fine.dof == dof_fine(FineGrid({8, 8, 4}, {1.0, 1.0, 1.0})));
    REQUIRE(ms.error.has_value());
    CHECK(ms.error->average >= 0.0);
    CHECK(ms.series.times == fine.series.times);
    CHECK(ms.worst_coarse_conservation <= 1e-10);

    // 2x2x1 blocks, 4 interior edges: 2 offline + 1 online per edge
    const CoarsePartition part(FineGrid({8, 8, 4}, {1.0, 1.0, 1.0}), {4, 4, 4});
    CHECK(ms.dof == part.num_blocks() + 3 * part.num_edges());

    for (const char* f : {"permeability.vtk", "errors.csv", "dof.json", "table.csv", "reference/water_cut.csv",
                          "reference/timing.json", "reference/saturation_10.vtk", "mgmsfem_n4_2+1/water_cut.csv",
                          "mgmsfem_n4_2+1/timing.json", "mgmsfem_n4_2+1/saturation_10.vtk"})
        CHECK_MESSAGE(std::filesystem::exists(out / f), f);

    const json dof = json::parse(read_text(out / "dof.json"));
    CHECK(dof["fine"].get<long>() == fine.dof);
    CHECK(dof["methods"][1]["dof"].get<long>() == ms.dof);
    CHECK(dof["methods"][1]["formula"].get<long>() == ms.dof);

    const Series cut = read_series(out / "reference" / "water_cut.csv");
    CHECK(cut.columns == std::vector<std::string>{"P1"});
    CHECK(cut.records.size() == fine.series.cut_times.size());

    const Volume sat = read_volume(out / "reference" / "saturation_10.vtk");
    REQUIRE(fine.series.checkpoints.size() == 1);
    CHECK(fine.series.checkpoints[0].first == 10);
    CHECK((sat.values - fine.series.checkpoints[0].second).cwiseAbs().maxCoeff() <= 1e-12);

    SUBCASE("deterministic rerun")
    {
        const auto again = run(c, scratch_dir("run_again"), 1);
        REQUIRE(again[1].series.saturation.size() == ms.series.saturation.size());
        for (std::size_t i = 0; i < ms.series.saturation.size(); ++i)
            CHECK((again[1].series.saturation[i] - ms.series.saturation[i]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(again[1].error->average == ms.error->average);
    }
}

TEST_CASE("gmsfem dof report on 16x16x8")
{
    Config c;
    REQUIRE(parse_config(R"({"method": {"kind": "mgmsfem", "n": 4, "basis": "2+2"}})", c).empty());
    const FineGrid grid(c.cells, c.spacing);
    const CoarsePartition part(grid, c.method.factor);
    CHECK(part.num_blocks() == 32);
    // x: 3*4*2, y: 4*3*2, z: 4*4*1
    CHECK(part.num_edges() == 64);
    CHECK(dof_gmsfem(part, 2, 2) == 32 + 4 * 64);
}

TEST_CASE("command line")
{
    const auto dir = scratch_dir("cli");
    const auto good = write_text(dir / "good.json", small_config);
    const auto bad = write_text(dir / "bad.json", R"({"grid": {"cells": [10, 8, 4]}, "method": {"kind": "mmsfem", "n": 4}})");
    const auto log = dir / "log.txt";

    SUBCASE("validate")
    {
        CHECK(run_cli("validate --config " + good.string(), log) == 0);
        CHECK(json::parse(read_text(log))["status"] == "valid");
        CHECK(run_cli("validate --config " + bad.string(), log) == 2);
        const json j = json::parse(read_text(log));
        CHECK(j["status"] == "invalid");
        CHECK(j["diagnostics"][0]["message"] == "n=4 does not divide the 10 cells along x");
    }
    SUBCASE("run failures give a machine-readable report")
    {
        CHECK(run_cli("run --config " + bad.string() + " --out " + (dir / "o").string(), log) == 2);
        const json j = json::parse(read_text(log));
        CHECK(j["status"] == "error");
        CHECK(j["type"] == "config");
        CHECK(run_cli("run --config " + (dir / "missing.json").string(), log) == 2);
        CHECK(json::parse(read_text(log))["type"] == "input");
        CHECK(run_cli("frobnicate", log) == 2);
        CHECK(run_cli("run --config " + good.string() + " --threads 0", log) == 2);
    }
    SUBCASE("run and compare succeed")
    {
        CHECK(run_cli("run --config " + good.string() + " --out " + (dir / "r").string() + " --threads 2 --seed 11",
                      log) == 0);
        const json j = json::parse(read_text(log));
        CHECK(j["status"] == "ok");
        CHECK(j["runs"].size() == 2);
        CHECK(std::filesystem::exists(dir / "r" / "table.csv"));

        const auto cmp = write_text(dir / "cmp.json", R"({
          "grid": {"cells": [8, 8, 4]},
          "permeability": {"kind": "layered", "contrast": 10},
          "wells": {"case": 2},
          "time": {"steps": 4, "pore_volumes": 0.1},
          "output": {"volumes": false},
          "compare": [{"kind": "mmsfem", "n": 4}, {"kind": "mgmsfem", "n": 4, "basis": "1+0"}]
        })");
        CHECK(run_cli("compare --config " + cmp.string() + " --out " + (dir / "c").string(), log) == 0);
        const std::string table = read_text(dir / "c" / "table.csv");
        CHECK(table.find("Method,n,Dof,T_setup,T_sim,e_s") == 0);
        CHECK(table.find("MMsFEM,4,") != std::string::npos);
        CHECK(table.find("MGMsFEM(1+0),4,") != std::string::npos);
    }
}
