#include "msflow/multiscale_space.hpp"

#include "msflow/mesh.hpp"

#include <algorithm>
#include <fstream>

namespace msflow {

const char* basis_kind_name(BasisKind kind)
{
    switch (kind) {
    case BasisKind::limited_global: return "limited_global";
    case BasisKind::snapshot: return "snapshot";
    case BasisKind::offline: return "offline";
    case BasisKind::online: return "online";
    }
    return "?";
}

FluxField BasisFunction::to_fine(int num_faces) const
{
    FluxField v = FluxField::Zero(num_faces);
    for (std::size_t i = 0; i < faces.size(); ++i)
        v[faces[i]] = values[static_cast<Eigen::Index>(i)];
    return v;
}

double BasisFunction::at(int face) const
{
    const auto it = std::lower_bound(faces.begin(), faces.end(), face);
    if (it == faces.end() || *it != face)
        return 0.0;
    return values[it - faces.begin()];
}

void MultiscaleSpace::append(BasisFunction fn)
{
    const int e = fn.edge;
    if (e >= 0) {
        const auto need = static_cast<std::size_t>(e) + 1;
        if (offline_count.size() < need)
            offline_count.resize(need, 0);
        if (online_count.size() < need)
            online_count.resize(need, 0);
        if (fn.kind == BasisKind::online)
            ++online_count[e];
        else
            ++offline_count[e];
    }
    functions.push_back(std::move(fn));
}

long dof_fine(const FineGrid& grid)
{
    return static_cast<long>(grid.num_cells()) + grid.num_interior_faces();
}

long dof_limited_global(const CoarsePartition& partition)
{
    return static_cast<long>(partition.num_blocks()) + partition.num_edges();
}

long dof_gmsfem(const CoarsePartition& partition, int offline_per_edge, int online_per_edge)
{
    return static_cast<long>(partition.num_blocks()) +
           static_cast<long>(offline_per_edge + online_per_edge) * partition.num_edges();
}

long dof(const CoarsePartition& partition, const MultiscaleSpace& space)
{
    return static_cast<long>(partition.num_blocks()) + space.dimension();
}

namespace {

constexpr std::uint64_t cache_magic = 0x4d53464c4f573031ull; // "MSFLOW01"

template <typename T>
void put(std::ostream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& v)
{
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<bool>(in);
}

} // namespace

void save_space(const std::filesystem::path& path, const MultiscaleSpace& space, std::uint64_t key)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write basis cache " + path.string());
    put(out, cache_magic);
    put(out, key);
    put(out, static_cast<std::int32_t>(space.generation));
    put(out, static_cast<std::int64_t>(space.functions.size()));
    for (const auto& fn : space.functions) {
        put(out, static_cast<std::int32_t>(fn.edge));
        put(out, static_cast<std::int32_t>(fn.kind));
        put(out, static_cast<std::int64_t>(fn.faces.size()));
        out.write(reinterpret_cast<const char*>(fn.faces.data()),
                  static_cast<std::streamsize>(fn.faces.size() * sizeof(int)));
        out.write(reinterpret_cast<const char*>(fn.values.data()),
                  static_cast<std::streamsize>(fn.faces.size() * sizeof(double)));
    }
    if (!out)
        throw InputError("basis cache write failed: " + path.string());
}

std::optional<MultiscaleSpace> load_space(const std::filesystem::path& path, std::uint64_t key)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    std::uint64_t magic = 0, stored = 0;
    std::int32_t generation = 0;
    std::int64_t count = 0;
    if (!get(in, magic) || magic != cache_magic || !get(in, stored) || stored != key || !get(in, generation) ||
        !get(in, count) || count < 0)
        return std::nullopt;
    MultiscaleSpace space;
    for (std::int64_t i = 0; i < count; ++i) {
        std::int32_t edge = 0, kind = 0;
        std::int64_t n = 0;
        if (!get(in, edge) || !get(in, kind) || !get(in, n) || n < 0)
            return std::nullopt;
        BasisFunction fn;
        fn.edge = edge;
        fn.kind = static_cast<BasisKind>(kind);
        fn.faces.resize(static_cast<std::size_t>(n));
        fn.values.resize(n);
        in.read(reinterpret_cast<char*>(fn.faces.data()), static_cast<std::streamsize>(n * sizeof(int)));
        in.read(reinterpret_cast<char*>(fn.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!in)
            return std::nullopt;
        space.append(std::move(fn));
    }
    space.generation = generation;
    return space;
}

} // namespace msflow
