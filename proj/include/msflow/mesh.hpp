#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace msflow {

enum class Axis : int { x = 0, y = 1, z = 2 };
enum class Side : int { low = 0, high = 1 };

inline constexpr std::array<Axis, 3> all_axes{Axis::x, Axis::y, Axis::z};

inline constexpr int to_int(Axis a) { return static_cast<int>(a); }
const char* axis_name(Axis a);

using Index3 = std::array<int, 3>;

/// Thrown for malformed user input (bad dimensions, unreadable files, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Half-open box of fine cells, [lo, hi) along every axis.
struct CellBox {
    Index3 lo{0, 0, 0};
    Index3 hi{0, 0, 0};

    int extent(Axis a) const { return hi[to_int(a)] - lo[to_int(a)]; }
    int count() const { return extent(Axis::x) * extent(Axis::y) * extent(Axis::z); }
    bool contains(const Index3& ijk) const;
    bool operator==(const CellBox&) const = default;
};

/// Structured Cartesian fine grid with uniform spacing per axis.
///
/// Cells are numbered x-fastest. Faces are numbered per axis (all x faces,
/// then y, then z); within an axis the face at index position i along that
/// axis sits on the low side of cell i, so positions run 0..n_axis. Every
/// face carries the +axis unit normal.
class FineGrid {
public:
    FineGrid(Index3 cells, std::array<double, 3> spacing = {1.0, 1.0, 1.0});

    const Index3& cells_per_axis() const { return cells_; }
    int cells(Axis a) const { return cells_[to_int(a)]; }
    double spacing(Axis a) const { return spacing_[to_int(a)]; }
    const std::array<double, 3>& spacing() const { return spacing_; }

    int num_cells() const { return num_cells_; }
    int num_faces() const { return face_offset_[3]; }
    int num_faces(Axis a) const { return face_offset_[to_int(a) + 1] - face_offset_[to_int(a)]; }
    int num_interior_faces(Axis a) const;
    int num_interior_faces() const;

    double cell_volume() const { return spacing_[0] * spacing_[1] * spacing_[2]; }
    double face_area(Axis a) const;
    double face_area(int face) const { return face_area(face_axis(face)); }

    int cell(int i, int j, int k) const { return i + cells_[0] * (j + cells_[1] * k); }
    int cell(const Index3& ijk) const { return cell(ijk[0], ijk[1], ijk[2]); }
    Index3 cell_ijk(int c) const;
    bool in_grid(const Index3& ijk) const;

    /// Face at position ijk along axis a; ijk[a] may equal cells(a) (high boundary).
    int face(Axis a, const Index3& ijk) const;
    Axis face_axis(int face) const;
    Index3 face_ijk(int face) const;
    bool is_boundary_face(int face) const;

    /// Low-side and high-side cells of a face, -1 where it lies on the domain boundary.
    std::array<int, 2> face_cells(int face) const;
    int cell_face(int c, Axis a, Side s) const;
    /// Faces of a cell ordered (x low, x high, y low, y high, z low, z high).
    std::array<int, 6> cell_faces(int c) const;
    /// +1 when the face is on the high side of the cell (its normal points out), -1 otherwise.
    int outward_sign(int c, int face) const;

    CellBox box() const { return CellBox{{0, 0, 0}, cells_}; }
    CellBox clip(const CellBox& b) const;
    std::vector<int> cells_in(const CellBox& b) const;

private:
    Index3 cells_;
    std::array<double, 3> spacing_;
    int num_cells_ = 0;
    std::array<int, 4> face_offset_{};
};

/// Interior coarse face E_i between two adjacent coarse blocks.
struct CoarseEdge {
    int id = -1;
    Axis axis = Axis::x;
    int lo_block = -1; ///< block on the -m_i side
    int hi_block = -1; ///< block on the +m_i side
    std::vector<int> faces; ///< fine faces tiling E_i, ascending
};

/// Coarse partition T^H: contiguous boxes of fine cells plus interior coarse faces.
///
/// Blocks are numbered x-fastest like cells. Interior coarse faces are
/// enumerated by (axis, i, j, k) with i the slowest index.
class CoarsePartition {
public:
    CoarsePartition(const FineGrid& grid, Index3 factor);

    const FineGrid& grid() const { return grid_; }
    const Index3& factor() const { return factor_; }
    int factor(Axis a) const { return factor_[to_int(a)]; }
    const Index3& blocks_per_axis() const { return blocks_; }

    int num_blocks() const { return static_cast<int>(block_cells_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    int block(const Index3& bijk) const { return bijk[0] + blocks_[0] * (bijk[1] + blocks_[1] * bijk[2]); }
    Index3 block_ijk(int b) const;
    CellBox block_box(int b) const;
    const std::vector<int>& block_cells(int b) const { return block_cells_.at(b); }
    int block_of_cell(int c) const { return cell_block_.at(c); }
    const std::vector<int>& cell_blocks() const { return cell_block_; }
    double block_volume(int b) const;

    const CoarseEdge& edge(int e) const;
    const std::vector<CoarseEdge>& edges() const { return edges_; }
    /// Interior coarse faces bounding a block.
    const std::vector<int>& block_edges(int b) const { return block_edges_.at(b); }

    /// Coarse neighborhood omega_i = the two blocks sharing E_i.
    std::array<int, 2> neighborhood(int e) const;
    CellBox neighborhood_box(int e) const;

    /// Fine faces lying on the boundary of a block.
    std::vector<int> block_boundary_faces(int b) const;
    /// True when the face lies on a coarse-block boundary plane.
    bool on_coarse_plane(int face) const;

private:
    FineGrid grid_;
    Index3 factor_;
    Index3 blocks_;
    std::vector<std::vector<int>> block_cells_;
    std::vector<int> cell_block_;
    std::vector<CoarseEdge> edges_;
    std::vector<std::vector<int>> block_edges_;
};

/// omega_i dilated by a number of fine-cell layers and clipped to the domain.
struct OversampledNeighborhood {
    int edge = -1;
    int layers = 0;
    CellBox box;
    std::vector<int> cells;
    std::vector<int> boundary_faces;
    std::vector<int> outward_normal; ///< +1/-1 relative to the +axis face normal
};

CoarsePartition build_coarse_partition(const FineGrid& grid, Index3 factor);
OversampledNeighborhood oversample(const CoarsePartition& partition, int edge, int layers);
const std::vector<int>& faces_on_coarse_edge(const CoarsePartition& partition, int edge);

/// Faces (fine face ids) lying on the boundary of a cell box.
std::vector<int> box_boundary_faces(const FineGrid& grid, const CellBox& box,
                                    std::vector<int>* outward_normal = nullptr);

/// Default oversampling extent: half a coarse block, rounded down.
int default_oversampling_layers(const CoarsePartition& partition);

} // namespace msflow
