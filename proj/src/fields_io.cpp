#include "msflow/fields_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>

namespace msflow {

PermeabilityField::PermeabilityField(Index3 dims, Eigen::VectorXd values)
    : dims_(dims), values_(std::move(values))
{
    const long expected = static_cast<long>(dims_[0]) * dims_[1] * dims_[2];
    if (expected != values_.size())
        throw InputError("permeability: " + std::to_string(values_.size()) + " values for " +
                         std::to_string(expected) + " cells");
    for (Eigen::Index c = 0; c < values_.size(); ++c)
        if (!std::isfinite(values_[c]) || values_[c] <= 0.0)
            throw InputError("permeability: non-positive or non-finite value at cell " + std::to_string(c));
}

PermeabilityField PermeabilityField::sub_block(const CellBox& box) const
{
    const FineGrid grid(dims_);
    if (grid.clip(box) != box || box.count() <= 0)
        throw InputError("permeability: sub-block outside the field");
    const std::vector<int> cells = grid.cells_in(box);
    Eigen::VectorXd v(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = values_[cells[i]];
    return PermeabilityField({box.extent(Axis::x), box.extent(Axis::y), box.extent(Axis::z)}, std::move(v));
}

std::uint64_t PermeabilityField::hash() const
{
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    mix(dims_.data(), sizeof(dims_));
    mix(values_.data(), sizeof(double) * static_cast<std::size_t>(values_.size()));
    return h;
}

SourceSpec SourceSpec::zero(const FineGrid& grid)
{
    SourceSpec s;
    s.rate = CellField::Zero(grid.num_cells());
    s.boundary_flux = FluxField::Zero(grid.num_faces());
    return s;
}

double SourceSpec::imbalance(const FineGrid& grid) const
{
    double total = rate.sum() * grid.cell_volume();
    for (int f = 0; f < grid.num_faces(); ++f) {
        if (!grid.is_boundary_face(f) || boundary_flux[f] == 0.0)
            continue;
        // outflow through the face: high boundary counts +v, low boundary -v
        const int sign = grid.face_cells(f)[1] < 0 ? 1 : -1;
        total -= sign * boundary_flux[f] * grid.face_area(f);
    }
    return total;
}

namespace {

struct Token {
    std::string_view text;
    std::size_t offset;
};

std::vector<Token> tokenize(std::string_view data)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < data.size()) {
        while (i < data.size() && std::isspace(static_cast<unsigned char>(data[i])))
            ++i;
        if (i >= data.size())
            break;
        const std::size_t start = i;
        while (i < data.size() && !std::isspace(static_cast<unsigned char>(data[i])))
            ++i;
        out.push_back({data.substr(start, i - start), start});
    }
    return out;
}

} // namespace

PermeabilityField load_spe10(std::istream& in, const Spe10Layout& layout)
{
    const std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const std::vector<Token> tokens = tokenize(data);

    const Index3& d = layout.dims;
    if (d[0] <= 0 || d[1] <= 0 || d[2] <= 0 || layout.channels <= 0 || layout.channel < 0 ||
        layout.channel >= layout.channels)
        throw InputError("spe10: invalid layout");
    const std::size_t per_channel = static_cast<std::size_t>(d[0]) * d[1] * d[2];
    const std::size_t expected = per_channel * static_cast<std::size_t>(layout.channels);
    if (tokens.size() != expected) {
        std::ostringstream msg;
        msg << "spe10: expected " << expected << " values, found " << tokens.size() << " (byte offset "
            << data.size() << ")";
        throw InputError(msg.str());
    }

    const int first = layout.first_layer;
    const int last = layout.last_layer < 0 ? d[2] - 1 : layout.last_layer;
    if (first < 0 || last >= d[2] || first > last)
        throw InputError("spe10: layer range [" + std::to_string(first) + ", " + std::to_string(last) +
                         "] outside 0.." + std::to_string(d[2] - 1));

    const Index3 out_dims{d[0], d[1], last - first + 1};
    Eigen::VectorXd values(static_cast<Eigen::Index>(out_dims[0]) * out_dims[1] * out_dims[2]);
    const std::size_t base = per_channel * static_cast<std::size_t>(layout.channel);
    Eigen::Index out = 0;
    for (int k = first; k <= last; ++k)
        for (int j = 0; j < d[1]; ++j)
            for (int i = 0; i < d[0]; ++i) {
                const Token& t = tokens[base + i + static_cast<std::size_t>(d[0]) * (j + static_cast<std::size_t>(d[1]) * k)];
                double v = 0.0;
                const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
                if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
                    std::ostringstream msg;
                    msg << "spe10: malformed number '" << t.text << "' at byte offset " << t.offset;
                    throw InputError(msg.str());
                }
                if (!std::isfinite(v) || v <= 0.0) {
                    std::ostringstream msg;
                    msg << "spe10: non-positive permeability " << t.text << " at byte offset " << t.offset;
                    throw InputError(msg.str());
                }
                values[out++] = v;
            }
    return PermeabilityField(out_dims, std::move(values));
}

PermeabilityField load_spe10(const std::filesystem::path& path, const Spe10Layout& layout)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("spe10: cannot open " + path.string());
    return load_spe10(in, layout);
}

SyntheticKind parse_synthetic_kind(const std::string& name)
{
    if (name == "uniform")
        return SyntheticKind::uniform;
    if (name == "layered")
        return SyntheticKind::layered;
    if (name == "channel")
        return SyntheticKind::channel;
    throw InputError("unknown synthetic permeability kind '" + name + "'");
}

namespace {

Eigen::VectorXd smoothed_noise(const FineGrid& grid, std::mt19937_64& rng, int passes)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd field(grid.num_cells());
    for (Eigen::Index c = 0; c < field.size(); ++c)
        field[c] = normal(rng);

    // separable box filter, vertical smoothing kept short
    for (int pass = 0; pass < passes; ++pass) {
        for (Axis a : all_axes) {
            if (a == Axis::z && pass % 2 == 1)
                continue;
            Eigen::VectorXd next(field.size());
            for (int c = 0; c < grid.num_cells(); ++c) {
                const Index3 ijk = grid.cell_ijk(c);
                double sum = field[c];
                int count = 1;
                for (int s : {-1, 1}) {
                    Index3 nb = ijk;
                    nb[to_int(a)] += s;
                    if (grid.in_grid(nb)) {
                        sum += field[grid.cell(nb)];
                        ++count;
                    }
                }
                next[c] = sum / count;
            }
            field.swap(next);
        }
    }
    const double mean = field.mean();
    const double sd = std::sqrt((field.array() - mean).square().mean());
    if (sd > 0.0)
        field = (field.array() - mean) / sd;
    return field;
}

// Min-max map of log-values onto [0, log(contrast)], then exponentiate.
Eigen::VectorXd rescale_log(const Eigen::VectorXd& logk, double contrast)
{
    const double lo = logk.minCoeff();
    const double hi = logk.maxCoeff();
    Eigen::VectorXd out(logk.size());
    if (hi - lo <= 0.0 || contrast == 1.0) {
        out.setOnes();
        return out;
    }
    const double span = std::log(contrast);
    for (Eigen::Index c = 0; c < logk.size(); ++c) {
        if (logk[c] == lo)
            out[c] = 1.0;
        else if (logk[c] == hi)
            out[c] = contrast;
        else
            out[c] = std::exp((logk[c] - lo) / (hi - lo) * span);
    }
    return out;
}

} // namespace

PermeabilityField gen_synthetic(SyntheticKind kind, Index3 dims, double contrast, std::uint64_t seed)
{
    if (!(contrast >= 1.0) || !std::isfinite(contrast))
        throw InputError("synthetic permeability: contrast must be >= 1");
    const FineGrid grid(dims);
    std::mt19937_64 rng(seed);
    Eigen::VectorXd values = Eigen::VectorXd::Ones(grid.num_cells());

    switch (kind) {
    case SyntheticKind::uniform:
        break;

    case SyntheticKind::layered: {
        // layer along the longest stacked axis available: z, else y, else x
        Axis layer_axis = Axis::z;
        if (dims[2] == 1)
            layer_axis = dims[1] > 1 ? Axis::y : Axis::x;
        const int nl = dims[to_int(layer_axis)];
        std::vector<int> high(nl);
        std::bernoulli_distribution coin(0.5);
        for (int l = 0; l < nl; ++l)
            high[l] = coin(rng) ? 1 : 0;
        if (nl >= 2) {
            if (std::all_of(high.begin(), high.end(), [](int h) { return h == 1; }))
                high[0] = 0;
            if (std::all_of(high.begin(), high.end(), [](int h) { return h == 0; }))
                high[nl - 1] = 1;
        }
        for (int c = 0; c < grid.num_cells(); ++c)
            values[c] = high[grid.cell_ijk(c)[to_int(layer_axis)]] ? contrast : 1.0;
        break;
    }

    case SyntheticKind::channel: {
        Eigen::VectorXd logk = smoothed_noise(grid, rng, 3);
        const double background_top = logk.maxCoeff();
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> jitter(0.0, 0.15);
        const double pi = std::acos(-1.0);

        // sinuous channels in a subset of z-layer packets, alternating direction
        const int packet = std::max(1, dims[2] / 8);
        for (int k0 = 0; k0 < dims[2]; k0 += packet) {
            if (unit(rng) < 0.35 && dims[2] > 1)
                continue;
            const bool along_x = (k0 / packet) % 2 == 0;
            const Axis flow = along_x ? Axis::x : Axis::y;
            const Axis across = along_x ? Axis::y : Axis::x;
            const int len = dims[to_int(flow)];
            const int wid = dims[to_int(across)];
            const int n_channels = std::max(1, wid / 16);
            for (int ch = 0; ch < n_channels; ++ch) {
                const double centre = (ch + 0.2 + 0.6 * unit(rng)) * wid / n_channels;
                const double amplitude = (0.08 + 0.12 * unit(rng)) * wid;
                const double wavelength = (0.5 + 0.8 * unit(rng)) * len;
                const double phase = 2.0 * pi * unit(rng);
                const double half_width = std::max(0.5, (0.03 + 0.04 * unit(rng)) * wid);
                for (int k = k0; k < std::min(dims[2], k0 + packet); ++k)
                    for (int s = 0; s < len; ++s) {
                        const double mid = centre + amplitude * std::sin(2.0 * pi * s / wavelength + phase);
                        for (int t = 0; t < wid; ++t) {
                            if (std::abs(t + 0.5 - mid) > half_width)
                                continue;
                            Index3 ijk{};
                            ijk[to_int(flow)] = s;
                            ijk[to_int(across)] = t;
                            ijk[2] = k;
                            const int c = grid.cell(ijk);
                            logk[c] = background_top + 2.0 + jitter(rng);
                        }
                    }
            }
        }
        values = rescale_log(logk, contrast);
        break;
    }
    }
    return PermeabilityField(dims, std::move(values));
}

void write_permeability(const std::filesystem::path& path, const PermeabilityField& field)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << std::setprecision(17);
    for (int c = 0; c < field.size(); ++c)
        out << field[c] << ((c + 1) % 6 == 0 ? '\n' : ' ');
    out << '\n';
    if (!out)
        throw InputError("write failed: " + path.string());
}

void write_series(const std::filesystem::path& path, const Series& series)
{
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << "t,method";
    for (const auto& c : series.columns)
        out << ',' << c;
    out << '\n';
    out << std::setprecision(17);
    for (const auto& r : series.records) {
        out << r.t << ',' << r.method;
        for (double v : r.values)
            out << ',' << v;
        out << '\n';
    }
    if (!out)
        throw InputError("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& where)
{
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InputError(where + ": malformed number '" + s + "'");
    return v;
}

} // namespace

Series read_series(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    Series series;
    std::string line;
    if (!std::getline(in, line))
        throw InputError(path.string() + ": missing header");
    auto header = split_csv(line);
    if (header.size() < 2 || header[0] != "t" || header[1] != "method")
        throw InputError(path.string() + ": header must start with t,method");
    series.columns.assign(header.begin() + 2, header.end());
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        auto cells = split_csv(line);
        const std::string where = path.string() + ":" + std::to_string(row);
        if (cells.size() != header.size())
            throw InputError(where + ": expected " + std::to_string(header.size()) + " columns");
        SeriesRecord r;
        r.t = parse_double(cells[0], where);
        r.method = cells[1];
        for (std::size_t i = 2; i < cells.size(); ++i)
            r.values.push_back(parse_double(cells[i], where));
        series.records.push_back(std::move(r));
    }
    return series;
}

void write_volume(const std::filesystem::path& path, const std::string& name, const CellField& field,
                  Index3 dims, std::array<double, 3> spacing)
{
    const long n = static_cast<long>(dims[0]) * dims[1] * dims[2];
    if (n != field.size())
        throw InputError("write_volume: field size does not match dimensions");
    std::ofstream out(path);
    if (!out)
        throw InputError("cannot write " + path.string());
    out << "# vtk DataFile Version 3.0\n"
        << name << "\nASCII\nDATASET STRUCTURED_POINTS\n"
        << "DIMENSIONS " << dims[0] + 1 << ' ' << dims[1] + 1 << ' ' << dims[2] + 1 << '\n'
        << "ORIGIN 0 0 0\n"
        << std::setprecision(17) << "SPACING " << spacing[0] << ' ' << spacing[1] << ' ' << spacing[2] << '\n'
        << "CELL_DATA " << n << '\n'
        << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index c = 0; c < field.size(); ++c)
        out << field[c] << '\n';
    if (!out)
        throw InputError("write failed: " + path.string());
}

Volume read_volume(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open " + path.string());
    Volume vol;
    std::string line;
    std::getline(in, line); // version
    std::getline(in, vol.name);
    std::string word;
    long n = -1;
    while (in >> word) {
        if (word == "DIMENSIONS") {
            in >> vol.dims[0] >> vol.dims[1] >> vol.dims[2];
            for (int& d : vol.dims)
                d -= 1;
        } else if (word == "SPACING") {
            in >> vol.spacing[0] >> vol.spacing[1] >> vol.spacing[2];
        } else if (word == "CELL_DATA") {
            in >> n;
        } else if (word == "LOOKUP_TABLE") {
            in >> word;
            break;
        }
    }
    if (n < 0)
        throw InputError(path.string() + ": missing CELL_DATA");
    vol.values.resize(n);
    for (long c = 0; c < n; ++c) {
        std::string tok;
        if (!(in >> tok))
            throw InputError(path.string() + ": truncated CELL_DATA");
        vol.values[c] = parse_double(tok, path.string());
    }
    return vol;
}

} // namespace msflow
