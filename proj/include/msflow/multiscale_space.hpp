#pragma once

#include "msflow/fields.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace msflow {

enum class BasisKind : int { limited_global = 0, snapshot = 1, offline = 2, online = 3 };
const char* basis_kind_name(BasisKind kind);

/// A coarse velocity basis function stored as its fine-face coefficients on
/// the faces of its support.
struct BasisFunction {
    int edge = -1;
    BasisKind kind = BasisKind::offline;
    std::vector<int> faces;
    Eigen::VectorXd values;

    FluxField to_fine(int num_faces) const;
    /// Coefficient on a given fine face (0 outside the support).
    double at(int face) const;
};

/// Ordered coarse velocity space V_H^l.
struct MultiscaleSpace {
    std::vector<BasisFunction> functions;
    std::vector<int> offline_count; ///< per edge
    std::vector<int> online_count;  ///< per edge
    int generation = 0;             ///< number of online sweeps applied

    int dimension() const { return static_cast<int>(functions.size()); }
    void append(BasisFunction fn);
};

class CoarsePartition;
class FineGrid;

/// Dimension of the coarse saddle system: one pressure per block plus velocity functions.
long dof_fine(const FineGrid& grid);
long dof_limited_global(const CoarsePartition& partition);
long dof_gmsfem(const CoarsePartition& partition, int offline_per_edge, int online_per_edge);
long dof(const CoarsePartition& partition, const MultiscaleSpace& space);

/// Binary cache of basis coefficients keyed by a caller-supplied hash.
void save_space(const std::filesystem::path& path, const MultiscaleSpace& space, std::uint64_t key);
std::optional<MultiscaleSpace> load_space(const std::filesystem::path& path, std::uint64_t key);

} // namespace msflow
