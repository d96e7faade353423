#include "msflow/simulation.hpp"

#include "msflow/basis_limited_global.hpp"
#include "msflow/metrics.hpp"
#include "msflow/postprocess.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace msflow {

using nlohmann::json;

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : InputError([&] {
          std::ostringstream msg;
          msg << "invalid configuration";
          for (const auto& d : diagnostics)
              msg << "; " << d.path << ": " << d.message;
          return msg.str();
      }())
    , diagnostics_(std::move(diagnostics))
{
}

const char* method_kind_name(MethodKind kind)
{
    switch (kind) {
    case MethodKind::reference:
        return "reference";
    case MethodKind::mmsfem:
        return "mmsfem";
    case MethodKind::mgmsfem:
        return "mgmsfem";
    }
    return "?";
}

std::string MethodSpec::label() const
{
    switch (kind) {
    case MethodKind::reference:
        return "Fine";
    case MethodKind::mmsfem:
        return "MMsFEM";
    case MethodKind::mgmsfem:
        return "MGMsFEM(" + std::to_string(offline) + "+" + std::to_string(online) + ")";
    }
    return "?";
}

std::pair<int, int> parse_basis_counts(const std::string& text)
{
    const auto plus = text.find('+');
    try {
        std::size_t used = 0;
        if (plus == std::string::npos) {
            const int a = std::stoi(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return {a, 0};
        }
        const std::string lhs = text.substr(0, plus);
        const std::string rhs = text.substr(plus + 1);
        const int a = std::stoi(lhs, &used);
        if (used != lhs.size())
            throw std::invalid_argument(text);
        const int b = std::stoi(rhs, &used);
        if (used != rhs.size())
            throw std::invalid_argument(text);
        return {a, b};
    } catch (const std::logic_error&) {
        throw InputError("basis counts must look like \"a+b\", got \"" + text + "\"");
    }
}

namespace {

class Reader {
public:
    explicit Reader(std::vector<Diagnostic>& diags) : diags_(diags) {}

    void error(const std::string& path, const std::string& message) { diags_.push_back({path, message}); }

    bool object(const json& j, const std::string& path)
    {
        if (j.is_object())
            return true;
        error(path, "expected an object");
        return false;
    }

    void known_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
    {
        const std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [key, value] : j.items())
            if (!allowed.count(key))
                error(path + "/" + key, "unknown key");
    }

    template <typename T>
    void get(const json& j, const char* key, const std::string& path, T& out)
    {
        if (!j.contains(key))
            return;
        const json& v = j.at(key);
        const std::string p = path + "/" + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean())
                return error(p, "expected a boolean");
            out = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer())
                return error(p, "expected an integer");
            out = v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number())
                return error(p, "expected a number");
            out = v.get<T>();
            if (!std::isfinite(out))
                error(p, "must be finite");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string())
                return error(p, "expected a string");
            out = v.get<std::string>();
        }
    }

    bool triple(const json& j, const char* key, const std::string& path, Index3& out)
    {
        if (!j.contains(key))
            return false;
        const json& v = j.at(key);
        const std::string p = path + "/" + key;
        if (!v.is_array() || v.size() != 3) {
            error(p, "expected an array of three integers");
            return false;
        }
        for (int d = 0; d < 3; ++d) {
            if (!v[d].is_number_integer()) {
                error(p + "/" + std::to_string(d), "expected an integer");
                return false;
            }
            out[d] = v[d].get<int>();
        }
        return true;
    }

    bool triple(const json& j, const char* key, const std::string& path, std::array<double, 3>& out)
    {
        if (!j.contains(key))
            return false;
        const json& v = j.at(key);
        const std::string p = path + "/" + key;
        if (!v.is_array() || v.size() != 3) {
            error(p, "expected an array of three numbers");
            return false;
        }
        for (int d = 0; d < 3; ++d) {
            if (!v[d].is_number()) {
                error(p + "/" + std::to_string(d), "expected a number");
                return false;
            }
            out[d] = v[d].get<double>();
        }
        return true;
    }

    bool box(const json& j, const char* key, const std::string& path, CellBox& out)
    {
        if (!j.contains(key))
            return false;
        const json& v = j.at(key);
        const std::string p = path + "/" + key;
        if (!object(v, p))
            return false;
        known_keys(v, p, {"lo", "hi"});
        const bool lo = triple(v, "lo", p, out.lo);
        const bool hi = triple(v, "hi", p, out.hi);
        if (!lo || !hi) {
            error(p, "a box needs both lo and hi");
            return false;
        }
        return true;
    }

private:
    std::vector<Diagnostic>& diags_;
};

void parse_method(Reader& r, const json& j, const std::string& path, MethodSpec& m)
{
    if (!r.object(j, path))
        return;
    r.known_keys(j, path, {"kind", "n", "basis", "oversampling", "postprocess", "source_lift"});
    std::string kind = method_kind_name(m.kind);
    r.get(j, "kind", path, kind);
    if (kind == "reference" || kind == "fine")
        m.kind = MethodKind::reference;
    else if (kind == "mmsfem")
        m.kind = MethodKind::mmsfem;
    else if (kind == "mgmsfem")
        m.kind = MethodKind::mgmsfem;
    else
        r.error(path + "/kind", "unknown method '" + kind + "' (expected reference, mmsfem or mgmsfem)");

    if (j.contains("n")) {
        if (j.at("n").is_number_integer()) {
            const int n = j.at("n").get<int>();
            m.factor = {n, n, n};
        } else {
            r.triple(j, "n", path, m.factor);
        }
    }
    for (int d = 0; d < 3; ++d)
        if (m.factor[d] < 1)
            r.error(path + "/n", "coarsening factor must be positive");

    if (j.contains("basis")) {
        std::string basis;
        r.get(j, "basis", path, basis);
        try {
            std::tie(m.offline, m.online) = parse_basis_counts(basis);
        } catch (const InputError& e) {
            r.error(path + "/basis", e.what());
        }
    }
    r.get(j, "oversampling", path, m.layers);
    r.get(j, "source_lift", path, m.source_lift);
    if (j.contains("postprocess")) {
        std::string mode;
        r.get(j, "postprocess", path, mode);
        try {
            m.postprocess = parse_postprocess_mode(mode);
        } catch (const InputError& e) {
            r.error(path + "/postprocess", e.what());
        }
    }
}

void check_method(Reader& r, const Config& c, const MethodSpec& m, const std::string& path)
{
    if (m.kind == MethodKind::reference)
        return;
    for (Axis a : all_axes) {
        const int d = to_int(a);
        if (m.factor[d] >= 1 && c.cells[d] >= 1 && c.cells[d] % m.factor[d] != 0) {
            std::ostringstream msg;
            msg << "n=" << m.factor[d] << " does not divide the " << c.cells[d] << " cells along "
                << axis_name(a);
            r.error(path + "/n", msg.str());
        }
    }
    if (m.kind == MethodKind::mgmsfem) {
        if (m.offline < 1)
            r.error(path + "/basis", "at least one offline function per edge is required");
        if (m.online < 0)
            r.error(path + "/basis", "online sweep count must be nonnegative");
        // smallest snapshot count over edge orientations that exist
        int j_min = std::numeric_limits<int>::max();
        for (int a = 0; a < 3; ++a) {
            const int blocks = m.factor[a] >= 1 ? c.cells[a] / m.factor[a] : 0;
            if (blocks >= 2)
                j_min = std::min(j_min, m.factor[(a + 1) % 3] * m.factor[(a + 2) % 3]);
        }
        if (j_min != std::numeric_limits<int>::max() && m.offline > j_min) {
            std::ostringstream msg;
            msg << "offline count " << m.offline << " exceeds J_i=" << j_min;
            r.error(path + "/basis", msg.str());
        }
    }
    if (m.layers < -1)
        r.error(path + "/oversampling", "must be -1 (default) or a nonnegative layer count");
}

Axis parse_axis(const std::string& s)
{
    if (s == "x")
        return Axis::x;
    if (s == "y")
        return Axis::y;
    if (s == "z")
        return Axis::z;
    throw InputError("unknown axis '" + s + "'");
}

} // namespace

std::vector<Diagnostic> parse_config(const std::string& text, Config& c)
{
    std::vector<Diagnostic> diags;
    Reader r(diags);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        diags.push_back({"", std::string("not valid JSON: ") + e.what()});
        return diags;
    }
    if (!r.object(root, ""))
        return diags;
    r.known_keys(root, "", {"grid", "permeability", "method", "mobility", "wells", "time", "output", "compare"});

    if (root.contains("grid") && r.object(root["grid"], "/grid")) {
        const json& g = root["grid"];
        r.known_keys(g, "/grid", {"cells", "spacing"});
        r.triple(g, "cells", "/grid", c.cells);
        r.triple(g, "spacing", "/grid", c.spacing);
    }
    for (int d = 0; d < 3; ++d) {
        if (c.cells[d] < 1)
            r.error("/grid/cells", "cell counts must be positive");
        if (!(c.spacing[d] > 0.0))
            r.error("/grid/spacing", "spacing must be positive");
    }

    if (root.contains("permeability") && r.object(root["permeability"], "/permeability")) {
        const json& p = root["permeability"];
        const std::string path = "/permeability";
        r.known_keys(p, path,
                     {"source", "kind", "contrast", "seed", "path", "dims", "channels", "channel", "layers",
                      "swap_xy", "sub_block"});
        auto& s = c.permeability;
        r.get(p, "source", path, s.source);
        if (s.source == "synthetic") {
            std::string kind = "channel";
            r.get(p, "kind", path, kind);
            try {
                s.kind = parse_synthetic_kind(kind);
            } catch (const InputError& e) {
                r.error(path + "/kind", e.what());
            }
            r.get(p, "contrast", path, s.contrast);
            if (!(s.contrast >= 1.0))
                r.error(path + "/contrast", "contrast must be at least 1");
            r.get(p, "seed", path, s.seed);
        } else if (s.source == "spe10") {
            std::string file;
            r.get(p, "path", path, file);
            if (file.empty())
                r.error(path + "/path", "spe10 source needs a file path");
            s.path = file;
            r.triple(p, "dims", path, s.layout.dims);
            r.get(p, "channels", path, s.layout.channels);
            r.get(p, "channel", path, s.layout.channel);
            if (p.contains("layers")) {
                const json& l = p["layers"];
                if (l.is_array() && l.size() == 2 && l[0].is_number_integer() && l[1].is_number_integer()) {
                    s.layout.first_layer = l[0].get<int>();
                    s.layout.last_layer = l[1].get<int>();
                } else {
                    r.error(path + "/layers", "expected [first, last]");
                }
            }
            r.get(p, "swap_xy", path, s.swap_xy);
        } else {
            r.error(path + "/source", "unknown permeability source '" + s.source + "' (expected synthetic or spe10)");
        }
        CellBox box;
        if (r.box(p, "sub_block", path, box))
            s.sub_block = box;
    }

    if (root.contains("method"))
        parse_method(r, root["method"], "/method", c.method);

    if (root.contains("mobility") && r.object(root["mobility"], "/mobility")) {
        const json& m = root["mobility"];
        r.known_keys(m, "/mobility", {"mu_w", "mu_o", "exponent_w", "exponent_o"});
        r.get(m, "mu_w", "/mobility", c.mobility.mu_w);
        r.get(m, "mu_o", "/mobility", c.mobility.mu_o);
        r.get(m, "exponent_w", "/mobility", c.mobility.exponent_w);
        r.get(m, "exponent_o", "/mobility", c.mobility.exponent_o);
    }
    try {
        c.mobility.validate();
    } catch (const InputError& e) {
        r.error("/mobility", e.what());
    }

    if (root.contains("wells") && r.object(root["wells"], "/wells")) {
        const json& w = root["wells"];
        const std::string path = "/wells";
        r.known_keys(w, path, {"case", "rate", "axis", "velocity", "custom"});
        if (w.contains("case")) {
            if (w["case"].is_number_integer()) {
                const int k = w["case"].get<int>();
                if (k == 1 || k == 2)
                    c.wells.kind = "case" + std::to_string(k);
                else
                    r.error(path + "/case", "well case must be 1, 2, flow_through or custom");
            } else if (w["case"].is_string()) {
                c.wells.kind = w["case"].get<std::string>();
                if (c.wells.kind != "case1" && c.wells.kind != "case2" && c.wells.kind != "flow_through" &&
                    c.wells.kind != "custom")
                    r.error(path + "/case", "well case must be 1, 2, flow_through or custom");
            } else {
                r.error(path + "/case", "expected an integer or a string");
            }
        }
        r.get(w, "rate", path, c.wells.rate);
        std::string axis = "x";
        r.get(w, "axis", path, axis);
        try {
            c.wells.axis = parse_axis(axis);
        } catch (const InputError& e) {
            r.error(path + "/axis", e.what());
        }
        r.get(w, "velocity", path, c.wells.velocity);
        if (w.contains("custom")) {
            c.wells.kind = "custom";
            const json& list = w["custom"];
            if (!list.is_array()) {
                r.error(path + "/custom", "expected an array of wells");
            } else {
                for (std::size_t i = 0; i < list.size(); ++i) {
                    const std::string p = path + "/custom/" + std::to_string(i);
                    if (!r.object(list[i], p))
                        continue;
                    r.known_keys(list[i], p, {"name", "box", "rate"});
                    CustomWell cw;
                    cw.name = "W" + std::to_string(i + 1);
                    r.get(list[i], "name", p, cw.name);
                    if (!r.box(list[i], "box", p, cw.box))
                        r.error(p + "/box", "a custom well needs a cell box");
                    r.get(list[i], "rate", p, cw.rate);
                    const CellBox domain{{0, 0, 0}, c.cells};
                    for (int d = 0; d < 3; ++d)
                        if (cw.box.lo[d] < 0 || cw.box.hi[d] > domain.hi[d] || cw.box.lo[d] >= cw.box.hi[d]) {
                            r.error(p + "/box", "well cells must lie inside the domain and the box must be nonempty");
                            break;
                        }
                    c.wells.custom.push_back(cw);
                }
                double net = 0.0, mag = 0.0;
                for (const auto& cw : c.wells.custom) {
                    net += cw.rate;
                    mag += std::abs(cw.rate);
                }
                if (std::abs(net) > 1e-12 * std::max(mag, 1e-300))
                    r.error(path + "/custom", "well rates must sum to zero on a closed domain");
                if (mag == 0.0)
                    r.error(path + "/custom", "at least one well must have a nonzero rate");
            }
        }
    }
    if ((c.wells.kind == "case1" || c.wells.kind == "case2") && !(c.wells.rate > 0.0))
        r.error("/wells/rate", "rate must be positive");
    if (c.wells.kind == "flow_through" && c.wells.velocity == 0.0)
        r.error("/wells/velocity", "velocity must be nonzero");
    if (c.wells.kind == "custom" && c.wells.custom.empty())
        r.error("/wells/custom", "custom wells need a list");

    if (root.contains("time") && r.object(root["time"], "/time")) {
        const json& t = root["time"];
        const std::string path = "/time";
        r.known_keys(t, path,
                     {"steps", "dt", "pore_volumes", "pressure_interval", "cfl_safety", "record_interval",
                      "checkpoints", "initial_saturation"});
        r.get(t, "steps", path, c.time.steps);
        r.get(t, "dt", path, c.time.dt);
        r.get(t, "pore_volumes", path, c.time.pore_volumes);
        r.get(t, "pressure_interval", path, c.time.pressure_interval);
        r.get(t, "cfl_safety", path, c.time.cfl_safety);
        r.get(t, "record_interval", path, c.time.record_interval);
        r.get(t, "initial_saturation", path, c.time.initial_saturation);
        if (t.contains("checkpoints")) {
            const json& cp = t["checkpoints"];
            if (!cp.is_array())
                r.error(path + "/checkpoints", "expected an array of instants");
            else
                for (std::size_t i = 0; i < cp.size(); ++i) {
                    if (!cp[i].is_number_integer())
                        r.error(path + "/checkpoints/" + std::to_string(i), "expected an integer");
                    else
                        c.time.checkpoints.push_back(cp[i].get<int>());
                }
        }
    }
    if (c.time.steps < 0)
        r.error("/time/steps", "must be nonnegative");
    if (c.time.dt < 0.0)
        r.error("/time/dt", "must be nonnegative (0 derives it from pore_volumes)");
    if (c.time.dt == 0.0 && !(c.time.pore_volumes > 0.0))
        r.error("/time/pore_volumes", "must be positive");
    if (c.time.pressure_interval < 1)
        r.error("/time/pressure_interval", "must be at least 1");
    if (!(c.time.cfl_safety > 0.0 && c.time.cfl_safety <= 1.0))
        r.error("/time/cfl_safety", "must lie in (0, 1]");
    if (c.time.record_interval < 1)
        r.error("/time/record_interval", "must be at least 1");
    if (!(c.time.initial_saturation >= 0.0 && c.time.initial_saturation <= 1.0))
        r.error("/time/initial_saturation", "must lie in [0, 1]");
    for (std::size_t i = 0; i < c.time.checkpoints.size(); ++i)
        if (c.time.checkpoints[i] < 0 || c.time.checkpoints[i] > c.time.steps)
            r.error("/time/checkpoints/" + std::to_string(i), "instant outside [0, steps]");

    if (root.contains("output") && r.object(root["output"], "/output")) {
        const json& o = root["output"];
        r.known_keys(o, "/output", {"volumes", "reference_errors", "cache_dir"});
        r.get(o, "volumes", "/output", c.output.volumes);
        r.get(o, "reference_errors", "/output", c.output.reference_errors);
        std::string cache;
        r.get(o, "cache_dir", "/output", cache);
        c.output.cache_dir = cache;
    }

    if (root.contains("compare")) {
        const json& list = root["compare"];
        if (!list.is_array()) {
            r.error("/compare", "expected an array of methods");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                MethodSpec m;
                parse_method(r, list[i], "/compare/" + std::to_string(i), m);
                c.compare.push_back(m);
            }
        }
    }

    check_method(r, c, c.method, "/method");
    for (std::size_t i = 0; i < c.compare.size(); ++i)
        check_method(r, c, c.compare[i], "/compare/" + std::to_string(i));
    return diags;
}

namespace {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open configuration '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

Config load_config(const std::filesystem::path& path)
{
    Config c;
    auto diags = parse_config(read_file(path), c);
    if (!diags.empty())
        throw ConfigError(std::move(diags));
    return c;
}

std::vector<Diagnostic> validate_config_file(const std::filesystem::path& path)
{
    Config c;
    std::string text;
    try {
        text = read_file(path);
    } catch (const InputError& e) {
        return {{"", e.what()}};
    }
    auto diags = parse_config(text, c);
    if (!diags.empty())
        return diags;
    if (c.permeability.source == "spe10") {
        try {
            load_permeability(c.permeability, c.cells);
        } catch (const std::exception& e) {
            diags.push_back({"/permeability", e.what()});
        }
    }
    return diags;
}

PermeabilityField load_permeability(const PermeabilitySpec& spec, Index3 cells)
{
    PermeabilityField field;
    if (spec.source == "synthetic") {
        Index3 dims = cells;
        if (spec.sub_block)
            for (int d = 0; d < 3; ++d)
                dims[d] = std::max(dims[d], spec.sub_block->hi[d]);
        field = gen_synthetic(spec.kind, dims, spec.contrast, spec.seed);
    } else {
        field = load_spe10(spec.path, spec.layout);
        if (spec.swap_xy) {
            const Index3 d = field.dims();
            Eigen::VectorXd values(field.size());
            for (int k = 0; k < d[2]; ++k)
                for (int j = 0; j < d[1]; ++j)
                    for (int i = 0; i < d[0]; ++i)
                        values[j + d[1] * (i + d[0] * k)] = field[i + d[0] * (j + d[1] * k)];
            field = PermeabilityField({d[1], d[0], d[2]}, std::move(values));
        }
    }
    if (spec.sub_block)
        field = field.sub_block(*spec.sub_block);
    if (field.dims() != cells) {
        std::ostringstream msg;
        msg << "permeability has " << field.dims()[0] << "x" << field.dims()[1] << "x" << field.dims()[2]
            << " cells, grid has " << cells[0] << "x" << cells[1] << "x" << cells[2];
        throw InputError(msg.str());
    }
    return field;
}

Scenario build_scenario(const Config& c)
{
    FineGrid grid(c.cells, c.spacing);
    PermeabilityField kappa = load_permeability(c.permeability, c.cells);
    WellSet wells;
    if (c.wells.kind == "case1") {
        wells = five_spot(grid, c.wells.rate);
    } else if (c.wells.kind == "case2") {
        wells = inverted_five_spot(grid, c.wells.rate);
    } else if (c.wells.kind == "flow_through") {
        wells = flow_through(grid, c.wells.axis, c.wells.velocity);
    } else {
        for (const auto& cw : c.wells.custom) {
            Well w{cw.name, grid.cells_in(cw.box), cw.rate};
            if (w.rate < 0.0)
                wells.producers.push_back(Producer{w.name, w.cells, {}});
            wells.wells.push_back(std::move(w));
        }
    }
    SourceSpec sources = wells.sources(grid);
    const double dt = c.time.dt > 0.0 ? c.time.dt
                                      : instant_length(grid, sources, c.time.pore_volumes, std::max(1, c.time.steps));
    return Scenario{std::move(grid), std::move(kappa), std::move(wells), std::move(sources), dt};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t n)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t basis_key(const Scenario& s, const Config& c, const MethodSpec& m)
{
    std::uint64_t h = 14695981039346656037ull;
    const std::uint64_t kh = s.kappa.hash();
    h = fnv(h, &kh, sizeof kh);
    const int ints[] = {static_cast<int>(m.kind), m.factor[0], m.factor[1], m.factor[2], m.offline, m.online, m.layers,
                        m.source_lift ? 1 : 0};
    h = fnv(h, ints, sizeof ints);
    const double reals[] = {c.mobility.mu_w, c.mobility.mu_o, c.mobility.exponent_w, c.mobility.exponent_o,
                            c.time.initial_saturation, c.spacing[0], c.spacing[1], c.spacing[2]};
    h = fnv(h, reals, sizeof reals);
    h = fnv(h, s.sources.rate.data(), sizeof(double) * static_cast<std::size_t>(s.sources.rate.size()));
    h = fnv(h, s.sources.boundary_flux.data(),
            sizeof(double) * static_cast<std::size_t>(s.sources.boundary_flux.size()));
    return h;
}

ImpesOptions impes_options(const Config& c, double dt)
{
    ImpesOptions o;
    o.steps = c.time.steps;
    o.dt = dt;
    o.pressure_interval = c.time.pressure_interval;
    o.cfl_safety = c.time.cfl_safety;
    o.record_interval = c.time.record_interval;
    o.checkpoints = c.time.checkpoints;
    o.initial_saturation = c.time.initial_saturation;
    return o;
}

} // namespace

RunResult run_method(const Scenario& s, const Config& c, const MethodSpec& m, int threads)
{
    RunResult out;
    out.method = m;
    const ImpesOptions opt = impes_options(c, s.dt);
    if (m.kind == MethodKind::reference) {
        FinePressureSolver solver(s.grid, s.kappa, s.sources);
        out.dof = solver.dof();
        const auto start = Clock::now();
        out.series = impes_run(s.grid, s.sources, s.wells.producers, c.mobility, solver, opt);
        out.t_sim = seconds_since(start);
        out.series.method = m.label();
        out.worst_fine_conservation = solver.worst_fine_conservation();
        return out;
    }

    const auto setup_start = Clock::now();
    const CoarsePartition partition(s.grid, m.factor);
    const CellField mobility0 = CellField::Constant(s.grid.num_cells(), c.mobility.total(c.time.initial_saturation));
    const CellField res0 = resistivity(s.kappa, mobility0);
    const BlockSolvers blocks(partition, res0, threads);
    const FluxField g = s.sources.boundary_flux.size() == s.grid.num_faces()
                            ? s.sources.boundary_flux
                            : FluxField(FluxField::Zero(s.grid.num_faces()));
    FluxField lift = boundary_lift(blocks, g);
    if (m.source_lift)
        lift += source_lift(blocks, s.sources.rate);

    std::optional<MultiscaleSpace> space;
    std::filesystem::path cache_file;
    const std::uint64_t key = basis_key(s, c, m);
    if (!c.output.cache_dir.empty()) {
        std::ostringstream name;
        name << "basis_" << std::hex << std::setw(16) << std::setfill('0') << key << ".bin";
        cache_file = c.output.cache_dir / name.str();
        space = load_space(cache_file, key);
    }
    if (!space) {
        if (m.kind == MethodKind::mmsfem) {
            const FluxField v_sp = solve_single_phase(s.grid, s.kappa, s.sources);
            LimitedGlobalBasis basis = build_basis(blocks, v_sp, threads);
            out.fallback_edges = basis.fallback_edges;
            space = std::move(basis.space);
        } else {
            MultiscaleSpace offline = build_offline(blocks, m.offline, threads);
            if (m.online > 0) {
                const SaddleSystem fine0 = assemble(s.grid, res0, s.sources);
                EnrichOptions eo;
                eo.layers = m.layers;
                eo.threads = threads;
                EnrichReport report;
                space = enrich(blocks, std::move(offline), fine0, lift, m.online, eo, &report);
                out.residual_norms = report.residual_norms;
            } else {
                space = std::move(offline);
            }
        }
        if (!cache_file.empty()) {
            std::filesystem::create_directories(c.output.cache_dir);
            save_space(cache_file, *space, key);
        }
    }
    out.dof = dof(partition, *space);
    CoarseOperator op(partition, *space, lift);
    out.dropped = op.dropped();
    MultiscalePressureSolver solver(partition, s.kappa, s.sources, std::move(op), m.label(), m.postprocess,
                                    threads);
    out.postprocessed = solver.postprocessing();
    out.t_setup = seconds_since(setup_start);

    const auto sim_start = Clock::now();
    out.series = impes_run(s.grid, s.sources, s.wells.producers, c.mobility, solver, opt);
    out.t_sim = seconds_since(sim_start);
    out.worst_coarse_conservation = solver.worst_coarse_conservation();
    out.worst_fine_conservation = solver.worst_fine_conservation();
    return out;
}

void attach_error(RunResult& result, const RunResult& reference, const FineGrid& grid)
{
    result.error = saturation_error(reference.series.times, reference.series.saturation, result.series.times,
                                    result.series.saturation, grid.cell_volume());
}

namespace {

std::string tag(const MethodSpec& m)
{
    std::ostringstream t;
    t << method_kind_name(m.kind);
    if (m.kind != MethodKind::reference) {
        t << "_n" << m.factor[0];
        if (m.factor[1] != m.factor[0] || m.factor[2] != m.factor[0])
            t << "x" << m.factor[1] << "x" << m.factor[2];
    }
    if (m.kind == MethodKind::mgmsfem)
        t << "_" << m.offline << "+" << m.online;
    return t.str();
}

std::string n_column(const MethodSpec& m)
{
    if (m.kind == MethodKind::reference)
        return "-";
    if (m.factor[1] == m.factor[0] && m.factor[2] == m.factor[0])
        return std::to_string(m.factor[0]);
    return std::to_string(m.factor[0]) + "x" + std::to_string(m.factor[1]) + "x" + std::to_string(m.factor[2]);
}

void write_outputs(const std::filesystem::path& out, const Config& c, const Scenario& s, RunResult& r)
{
    const auto dir = out / tag(r.method);
    std::filesystem::create_directories(dir);
    write_water_cut(dir / "water_cut.csv", r);
    write_timing(dir / "timing.json", r);
    if (c.output.volumes)
        for (const auto& [n, field] : r.series.checkpoints)
            write_volume(dir / ("saturation_" + std::to_string(n) + ".vtk"), "saturation", field, s.grid.cells_per_axis(),
                         s.grid.spacing());
}

} // namespace

void write_water_cut(const std::filesystem::path& path, const RunResult& r)
{
    Series series;
    series.columns = r.series.producers;
    for (std::size_t i = 0; i < r.series.cut_times.size(); ++i)
        series.records.push_back({r.series.cut_times[i], r.method.label(), r.series.water_cut[i]});
    write_series(path, series);
}

void write_errors(const std::filesystem::path& path, const std::vector<RunResult>& results)
{
    Series series;
    series.columns = {"e_s"};
    for (const auto& r : results) {
        if (!r.error)
            continue;
        for (std::size_t i = 0; i < r.error->times.size(); ++i)
            series.records.push_back({r.error->times[i], r.method.label(), {r.error->per_instant[i]}});
    }
    write_series(path, series);
}

void write_timing(const std::filesystem::path& path, const RunResult& r)
{
    json j;
    j["method"] = r.method.label();
    j["n"] = n_column(r.method);
    j["dof"] = r.dof;
    j["T_setup"] = r.t_setup;
    j["T_sim"] = r.t_sim;
    j["pressure_solves"] = r.series.pressure_solves;
    j["transport_steps"] = r.series.transport_steps;
    j["postprocessed"] = r.postprocessed;
    j["worst_mass_balance"] = r.series.worst_mass_balance;
    j["worst_coarse_conservation"] = r.worst_coarse_conservation;
    j["worst_fine_conservation"] = r.worst_fine_conservation;
    if (r.error)
        j["e_s"] = r.error->average;
    if (!r.residual_norms.empty())
        j["online_residual_norms"] = r.residual_norms;
    if (!r.fallback_edges.empty())
        j["fallback_edges"] = r.fallback_edges;
    if (!r.dropped.empty())
        j["dropped_functions"] = r.dropped;
    std::ofstream o(path);
    if (!o)
        throw InputError("cannot write '" + path.string() + "'");
    o << j.dump(2) << "\n";
}

void write_dof_report(const std::filesystem::path& path, const Config& c, const std::vector<RunResult>& results)
{
    const FineGrid grid(c.cells, c.spacing);
    json j;
    j["fine"] = dof_fine(grid);
    j["methods"] = json::array();
    for (const auto& r : results) {
        json m;
        m["method"] = r.method.label();
        m["n"] = n_column(r.method);
        m["dof"] = r.dof;
        if (r.method.kind != MethodKind::reference) {
            const CoarsePartition part(grid, r.method.factor);
            m["N_e"] = part.num_blocks();
            m["N_in"] = part.num_edges();
            m["formula"] = r.method.kind == MethodKind::mmsfem
                               ? dof_limited_global(part)
                               : dof_gmsfem(part, r.method.offline, r.method.online);
        }
        j["methods"].push_back(m);
    }
    std::ofstream o(path);
    if (!o)
        throw InputError("cannot write '" + path.string() + "'");
    o << j.dump(2) << "\n";
}

void write_table(const std::filesystem::path& path, const std::vector<RunResult>& results)
{
    std::ofstream o(path);
    if (!o)
        throw InputError("cannot write '" + path.string() + "'");
    o << "Method,n,Dof,T_setup,T_sim,e_s\n";
    o << std::setprecision(6);
    for (const auto& r : results) {
        o << r.method.label() << "," << n_column(r.method) << "," << r.dof << "," << r.t_setup << "," << r.t_sim
          << ",";
        if (r.error)
            o << r.error->average;
        o << "\n";
    }
}

std::vector<RunResult> run(const Config& c, const std::filesystem::path& out, int threads)
{
    const Scenario s = build_scenario(c);
    std::filesystem::create_directories(out);
    if (c.output.volumes)
        write_volume(out / "permeability.vtk", "permeability", s.kappa.values(), s.grid.cells_per_axis(),
                     s.grid.spacing());
    std::vector<RunResult> results;
    const bool with_reference = c.method.kind == MethodKind::reference || c.output.reference_errors;
    if (with_reference) {
        results.push_back(run_method(s, c, MethodSpec{}, threads));
        write_outputs(out, c, s, results.back());
    }
    if (c.method.kind != MethodKind::reference) {
        results.push_back(run_method(s, c, c.method, threads));
        if (with_reference)
            attach_error(results.back(), results.front(), s.grid);
        write_outputs(out, c, s, results.back());
    }
    write_errors(out / "errors.csv", results);
    write_dof_report(out / "dof.json", c, results);
    write_table(out / "table.csv", results);
    return results;
}

std::vector<RunResult> compare(const Config& c, const std::filesystem::path& out, int threads)
{
    if (c.compare.empty())
        throw ConfigError(std::vector<Diagnostic>{{"/compare", "compare mode needs a nonempty method list"}});
    const Scenario s = build_scenario(c);
    std::filesystem::create_directories(out);
    std::vector<RunResult> results;
    results.push_back(run_method(s, c, MethodSpec{}, threads));
    write_outputs(out, c, s, results.back());
    for (const auto& m : c.compare) {
        if (m.kind == MethodKind::reference)
            continue;
        results.push_back(run_method(s, c, m, threads));
        attach_error(results.back(), results.front(), s.grid);
        write_outputs(out, c, s, results.back());
    }
    write_errors(out / "errors.csv", results);
    write_dof_report(out / "dof.json", c, results);
    write_table(out / "table.csv", results);
    return results;
}

} // namespace msflow
