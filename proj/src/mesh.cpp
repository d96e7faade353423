#include "msflow/mesh.hpp"

#include <algorithm>
#include <sstream>

namespace msflow {

const char* axis_name(Axis a)
{
    switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
    }
    return "?";
}

bool CellBox::contains(const Index3& ijk) const
{
    for (int d = 0; d < 3; ++d)
        if (ijk[d] < lo[d] || ijk[d] >= hi[d])
            return false;
    return true;
}

FineGrid::FineGrid(Index3 cells, std::array<double, 3> spacing)
    : cells_(cells), spacing_(spacing)
{
    for (int d = 0; d < 3; ++d) {
        if (cells_[d] <= 0)
            throw InputError(std::string("fine grid: non-positive cell count along ") +
                             axis_name(static_cast<Axis>(d)));
        if (!(spacing_[d] > 0.0))
            throw InputError(std::string("fine grid: non-positive spacing along ") +
                             axis_name(static_cast<Axis>(d)));
    }
    num_cells_ = cells_[0] * cells_[1] * cells_[2];
    face_offset_[0] = 0;
    face_offset_[1] = (cells_[0] + 1) * cells_[1] * cells_[2];
    face_offset_[2] = face_offset_[1] + cells_[0] * (cells_[1] + 1) * cells_[2];
    face_offset_[3] = face_offset_[2] + cells_[0] * cells_[1] * (cells_[2] + 1);
}

int FineGrid::num_interior_faces(Axis a) const
{
    Index3 n = cells_;
    n[to_int(a)] -= 1;
    return n[0] * n[1] * n[2];
}

int FineGrid::num_interior_faces() const
{
    return num_interior_faces(Axis::x) + num_interior_faces(Axis::y) + num_interior_faces(Axis::z);
}

double FineGrid::face_area(Axis a) const
{
    switch (a) {
    case Axis::x: return spacing_[1] * spacing_[2];
    case Axis::y: return spacing_[0] * spacing_[2];
    case Axis::z: return spacing_[0] * spacing_[1];
    }
    return 0.0;
}

Index3 FineGrid::cell_ijk(int c) const
{
    const int i = c % cells_[0];
    const int rest = c / cells_[0];
    return {i, rest % cells_[1], rest / cells_[1]};
}

bool FineGrid::in_grid(const Index3& ijk) const
{
    return box().contains(ijk);
}

int FineGrid::face(Axis a, const Index3& ijk) const
{
    const int d = to_int(a);
    Index3 n = cells_;
    n[d] += 1;
    return face_offset_[d] + ijk[0] + n[0] * (ijk[1] + n[1] * ijk[2]);
}

Axis FineGrid::face_axis(int face) const
{
    if (face < face_offset_[1])
        return Axis::x;
    if (face < face_offset_[2])
        return Axis::y;
    return Axis::z;
}

Index3 FineGrid::face_ijk(int face) const
{
    const int d = to_int(face_axis(face));
    Index3 n = cells_;
    n[d] += 1;
    const int local = face - face_offset_[d];
    const int i = local % n[0];
    const int rest = local / n[0];
    return {i, rest % n[1], rest / n[1]};
}

bool FineGrid::is_boundary_face(int face) const
{
    const int d = to_int(face_axis(face));
    const int pos = face_ijk(face)[d];
    return pos == 0 || pos == cells_[d];
}

std::array<int, 2> FineGrid::face_cells(int face) const
{
    const int d = to_int(face_axis(face));
    Index3 ijk = face_ijk(face);
    std::array<int, 2> out{-1, -1};
    if (ijk[d] < cells_[d])
        out[1] = cell(ijk);
    if (ijk[d] > 0) {
        ijk[d] -= 1;
        out[0] = cell(ijk);
    }
    return out;
}

int FineGrid::cell_face(int c, Axis a, Side s) const
{
    Index3 ijk = cell_ijk(c);
    if (s == Side::high)
        ijk[to_int(a)] += 1;
    return face(a, ijk);
}

std::array<int, 6> FineGrid::cell_faces(int c) const
{
    std::array<int, 6> out{};
    const Index3 ijk = cell_ijk(c);
    for (Axis a : all_axes) {
        Index3 hi = ijk;
        hi[to_int(a)] += 1;
        out[2 * to_int(a)] = face(a, ijk);
        out[2 * to_int(a) + 1] = face(a, hi);
    }
    return out;
}

int FineGrid::outward_sign(int c, int face) const
{
    return face_cells(face)[0] == c ? 1 : -1;
}

CellBox FineGrid::clip(const CellBox& b) const
{
    CellBox out;
    for (int d = 0; d < 3; ++d) {
        out.lo[d] = std::clamp(b.lo[d], 0, cells_[d]);
        out.hi[d] = std::clamp(b.hi[d], out.lo[d], cells_[d]);
    }
    return out;
}

std::vector<int> FineGrid::cells_in(const CellBox& b) const
{
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(std::max(0, b.count())));
    for (int k = b.lo[2]; k < b.hi[2]; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j)
            for (int i = b.lo[0]; i < b.hi[0]; ++i)
                out.push_back(cell(i, j, k));
    return out;
}

std::vector<int> box_boundary_faces(const FineGrid& grid, const CellBox& box,
                                    std::vector<int>* outward_normal)
{
    std::vector<int> faces;
    if (outward_normal)
        outward_normal->clear();
    for (Axis a : all_axes) {
        const int d = to_int(a);
        const int e1 = (d + 1) % 3;
        const int e2 = (d + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            Index3 ijk{};
            ijk[d] = side == 0 ? box.lo[d] : box.hi[d];
            for (int u = box.lo[e1]; u < box.hi[e1]; ++u)
                for (int v = box.lo[e2]; v < box.hi[e2]; ++v) {
                    ijk[e1] = u;
                    ijk[e2] = v;
                    faces.push_back(grid.face(a, ijk));
                    if (outward_normal)
                        outward_normal->push_back(side == 0 ? -1 : 1);
                }
        }
    }
    return faces;
}

CoarsePartition::CoarsePartition(const FineGrid& grid, Index3 factor)
    : grid_(grid), factor_(factor)
{
    for (int d = 0; d < 3; ++d) {
        const auto name = axis_name(static_cast<Axis>(d));
        if (factor_[d] <= 0)
            throw InputError(std::string("coarse partition: non-positive coarsening factor along ") + name);
        if (grid_.cells_per_axis()[d] % factor_[d] != 0) {
            std::ostringstream msg;
            msg << "coarse partition: factor " << factor_[d] << " does not divide "
                << grid_.cells_per_axis()[d] << " fine cells along axis " << name;
            throw InputError(msg.str());
        }
        blocks_[d] = grid_.cells_per_axis()[d] / factor_[d];
    }

    const int nb = blocks_[0] * blocks_[1] * blocks_[2];
    block_cells_.resize(nb);
    cell_block_.assign(grid_.num_cells(), -1);
    for (int b = 0; b < nb; ++b) {
        block_cells_[b] = grid_.cells_in(block_box(b));
        for (int c : block_cells_[b])
            cell_block_[c] = b;
    }

    block_edges_.resize(nb);
    for (Axis a : all_axes) {
        const int d = to_int(a);
        Index3 range = blocks_;
        range[d] -= 1;
        for (int i = 0; i < range[0]; ++i)
            for (int j = 0; j < range[1]; ++j)
                for (int k = 0; k < range[2]; ++k) {
                    CoarseEdge e;
                    e.id = static_cast<int>(edges_.size());
                    e.axis = a;
                    Index3 lo{i, j, k};
                    Index3 hi = lo;
                    hi[d] += 1;
                    e.lo_block = block(lo);
                    e.hi_block = block(hi);

                    const CellBox hb = block_box(e.hi_block);
                    Index3 pos{};
                    pos[d] = hb.lo[d];
                    const int e1 = d == 0 ? 1 : 0;
                    const int e2 = d == 2 ? 1 : 2;
                    // ascending face ids: e1 runs fastest like the face numbering
                    for (int v = hb.lo[e2]; v < hb.hi[e2]; ++v)
                        for (int u = hb.lo[e1]; u < hb.hi[e1]; ++u) {
                            pos[e1] = u;
                            pos[e2] = v;
                            e.faces.push_back(grid_.face(a, pos));
                        }
                    block_edges_[e.lo_block].push_back(e.id);
                    block_edges_[e.hi_block].push_back(e.id);
                    edges_.push_back(std::move(e));
                }
    }
}

Index3 CoarsePartition::block_ijk(int b) const
{
    const int i = b % blocks_[0];
    const int rest = b / blocks_[0];
    return {i, rest % blocks_[1], rest / blocks_[1]};
}

CellBox CoarsePartition::block_box(int b) const
{
    const Index3 bijk = block_ijk(b);
    CellBox box;
    for (int d = 0; d < 3; ++d) {
        box.lo[d] = bijk[d] * factor_[d];
        box.hi[d] = box.lo[d] + factor_[d];
    }
    return box;
}

double CoarsePartition::block_volume(int b) const
{
    return static_cast<double>(block_cells(b).size()) * grid_.cell_volume();
}

const CoarseEdge& CoarsePartition::edge(int e) const
{
    if (e < 0 || e >= num_edges())
        throw InputError("unknown coarse edge id " + std::to_string(e));
    return edges_[e];
}

std::array<int, 2> CoarsePartition::neighborhood(int e) const
{
    const CoarseEdge& ce = edge(e);
    return {ce.lo_block, ce.hi_block};
}

CellBox CoarsePartition::neighborhood_box(int e) const
{
    const CoarseEdge& ce = edge(e);
    CellBox box = block_box(ce.lo_block);
    box.hi = block_box(ce.hi_block).hi;
    return box;
}

std::vector<int> CoarsePartition::block_boundary_faces(int b) const
{
    return box_boundary_faces(grid_, block_box(b));
}

bool CoarsePartition::on_coarse_plane(int face) const
{
    const int d = to_int(grid_.face_axis(face));
    return grid_.face_ijk(face)[d] % factor_[d] == 0;
}

CoarsePartition build_coarse_partition(const FineGrid& grid, Index3 factor)
{
    return CoarsePartition(grid, factor);
}

OversampledNeighborhood oversample(const CoarsePartition& partition, int edge, int layers)
{
    if (layers < 0)
        throw InputError("oversample: negative layer count");
    OversampledNeighborhood out;
    out.edge = edge;
    out.layers = layers;
    CellBox box = partition.neighborhood_box(edge);
    for (int d = 0; d < 3; ++d) {
        box.lo[d] -= layers;
        box.hi[d] += layers;
    }
    out.box = partition.grid().clip(box);
    out.cells = partition.grid().cells_in(out.box);
    out.boundary_faces = box_boundary_faces(partition.grid(), out.box, &out.outward_normal);
    return out;
}

const std::vector<int>& faces_on_coarse_edge(const CoarsePartition& partition, int edge)
{
    return partition.edge(edge).faces;
}

int default_oversampling_layers(const CoarsePartition& partition)
{
    const Index3& f = partition.factor();
    return std::max(0, *std::min_element(f.begin(), f.end()) / 2);
}

} // namespace msflow
