#include "doctest.h"

#include "msflow/fields_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace msflow;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "msflow_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("spe10 loader")
{
    SUBCASE("uniform file")
    {
        std::istringstream in("1.0 1.0 1.0 1.0\n1.0 1.0 1.0 1.0\n");
        Spe10Layout layout;
        layout.dims = {2, 2, 2};
        const auto k = load_spe10(in, layout);
        CHECK(k.dims() == Index3{2, 2, 2});
        CHECK(k.min() == 1.0);
        CHECK(k.max() == 1.0);
    }
    SUBCASE("short file names the expected count")
    {
        std::istringstream in("1 1 1 1 1 1 1");
        Spe10Layout layout;
        layout.dims = {2, 2, 2};
        try {
            load_spe10(in, layout);
            FAIL("no error");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("expected 8") != std::string::npos);
        }
    }
    SUBCASE("channels, layers and ordering")
    {
        // two channels of a 2x3x3 grid; value encodes channel and index
        std::ostringstream text;
        for (int ch = 0; ch < 2; ++ch)
            for (int i = 0; i < 18; ++i)
                text << (ch + 1) * 100 + i << (i % 5 == 4 ? "\n" : "  ");
        Spe10Layout layout;
        layout.dims = {2, 3, 3};
        layout.channels = 2;
        layout.channel = 1;
        layout.first_layer = 1;
        layout.last_layer = 2;
        std::istringstream in(text.str());
        const auto k = load_spe10(in, layout);
        CHECK(k.dims() == Index3{2, 3, 2});
        for (int c = 0; c < k.size(); ++c)
            CHECK(k[c] == 200 + 6 + c);
    }
    SUBCASE("malformed and non-positive values")
    {
        Spe10Layout layout;
        layout.dims = {1, 1, 2};
        std::istringstream bad("1.0 abc");
        CHECK_THROWS_AS(load_spe10(bad, layout), InputError);
        std::istringstream zero("1.0 0.0");
        CHECK_THROWS_AS(load_spe10(zero, layout), InputError);
        layout.last_layer = 5;
        std::istringstream ok("1 2");
        CHECK_THROWS_AS(load_spe10(ok, layout), InputError);
    }
    SUBCASE("file round trip")
    {
        const auto k = gen_synthetic(SyntheticKind::channel, {6, 5, 4}, 1e3, 3);
        const auto path = scratch("perm.dat");
        write_permeability(path, k);
        Spe10Layout layout;
        layout.dims = {6, 5, 4};
        const auto back = load_spe10(path, layout);
        CHECK((back.values() - k.values()).cwiseAbs().maxCoeff() == 0.0);
        CHECK_THROWS_AS(load_spe10(scratch("missing.dat"), layout), InputError);
    }
}

TEST_CASE("synthetic permeability")
{
    const auto u = gen_synthetic(SyntheticKind::uniform, {4, 4, 4}, 1.0, 9);
    CHECK(u.min() == 1.0);
    CHECK(u.max() == 1.0);

    const auto l = gen_synthetic(SyntheticKind::layered, {8, 8, 8}, 1e4, 7);
    for (int c = 0; c < l.size(); ++c)
        CHECK((l[c] == 1.0 || l[c] == 1e4));
    CHECK(l.max() / l.min() == doctest::Approx(1e4));

    const auto a = gen_synthetic(SyntheticKind::channel, {16, 16, 8}, 1e4, 42);
    const auto b = gen_synthetic(SyntheticKind::channel, {16, 16, 8}, 1e4, 42);
    const auto c = gen_synthetic(SyntheticKind::channel, {16, 16, 8}, 1e4, 43);
    CHECK(a.hash() == b.hash());
    CHECK((a.values().array() == b.values().array()).all());
    CHECK(a.hash() != c.hash());
    CHECK(a.max() / a.min() == doctest::Approx(1e4).epsilon(1e-9));

    CHECK_THROWS_AS(gen_synthetic(SyntheticKind::channel, {4, 4, 4}, 0.5, 1), InputError);
    CHECK_THROWS_AS(parse_synthetic_kind("checkerboard"), InputError);
}

TEST_CASE("permeability validation and sub-blocks")
{
    CHECK_THROWS_AS(PermeabilityField({2, 1, 1}, Eigen::VectorXd::Ones(3)), InputError);
    Eigen::VectorXd v(2);
    v << 1.0, -1.0;
    CHECK_THROWS_AS(PermeabilityField({2, 1, 1}, v), InputError);

    Eigen::VectorXd vals(24);
    for (int i = 0; i < 24; ++i)
        vals[i] = i + 1;
    const PermeabilityField k({4, 3, 2}, vals);
    const auto s = k.sub_block(CellBox{{1, 1, 1}, {3, 3, 2}});
    CHECK(s.dims() == Index3{2, 2, 1});
    CHECK(s[0] == 1 + 1 + 4 * (1 + 3 * 1));
    CHECK(s[3] == 1 + 2 + 4 * (2 + 3 * 1));
    CHECK_THROWS_AS(k.sub_block(CellBox{{0, 0, 0}, {5, 1, 1}}), InputError);
}

TEST_CASE("series csv")
{
    SUBCASE("empty record list gives a header-only file")
    {
        Series s;
        s.columns = {"P1"};
        const auto path = scratch("empty.csv");
        write_series(path, s);
        std::ifstream in(path);
        std::string line;
        int lines = 0;
        while (std::getline(in, line))
            ++lines;
        CHECK(lines == 1);
        CHECK(read_series(path).records.empty());
    }
    SUBCASE("2000 records and round trip")
    {
        Series s;
        s.columns = {"P1", "P2"};
        for (int i = 0; i < 2000; ++i)
            s.records.push_back({i * 0.1, "MGMsFEM(2+2)", {std::sin(i * 1.3) / 3.0, 1.0 / (i + 7.0)}});
        s.records[5].values[1] = std::nan("");
        const auto path = scratch("cut.csv");
        write_series(path, s);
        std::ifstream in(path);
        std::string line;
        int lines = 0;
        while (std::getline(in, line))
            ++lines;
        CHECK(lines == 2001);

        const Series back = read_series(path);
        REQUIRE(back.records.size() == 2000);
        CHECK(back.columns == s.columns);
        for (std::size_t i = 0; i < 2000; ++i) {
            CHECK(back.records[i].method == "MGMsFEM(2+2)");
            CHECK(back.records[i].t == s.records[i].t);
            for (int k = 0; k < 2; ++k) {
                const double a = s.records[i].values[k];
                const double b = back.records[i].values[k];
                if (std::isnan(a))
                    CHECK(std::isnan(b));
                else
                    CHECK(std::abs(a - b) <= 1e-15 * std::abs(a));
            }
        }
    }
    SUBCASE("malformed files")
    {
        const auto path = scratch("bad.csv");
        {
            std::ofstream o(path);
            o << "time,method\n";
        }
        CHECK_THROWS_AS(read_series(path), InputError);
        {
            std::ofstream o(path);
            o << "t,method,a\n1,x\n";
        }
        CHECK_THROWS_AS(read_series(path), InputError);
    }
}

TEST_CASE("volume round trip")
{
    const Index3 dims{3, 2, 2};
    CellField f(12);
    for (int i = 0; i < 12; ++i)
        f[i] = 0.1 * i * i - 0.3;
    const auto path = scratch("sat.vtk");
    write_volume(path, "saturation", f, dims, {1.0, 2.0, 0.5});
    const Volume v = read_volume(path);
    CHECK(v.dims == dims);
    CHECK(v.name == "saturation");
    CHECK(v.spacing[1] == 2.0);
    CHECK((v.values - f).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(write_volume(path, "x", f, {2, 2, 2}, {1.0, 1.0, 1.0}), InputError);
}
