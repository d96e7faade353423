#pragma once

#include "msflow/local_basis.hpp"
#include "msflow/mixed_fem.hpp"
#include "msflow/multiscale_space.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace msflow {

/// Prolongations of a coarse velocity/pressure pair onto the fine grid.
///
/// Velocity columns are the stored basis coefficients; pressure columns are
/// disjoint cell-group indicators (coarse blocks). A fixed `lift` carries
/// nonzero boundary flux; coarse velocities are lift + V c.
class CoarseOperator {
public:
    using SparseMatrix = Eigen::SparseMatrix<double>;

    CoarseOperator(const CoarsePartition& partition, const MultiscaleSpace& space, FluxField lift = {});
    CoarseOperator(const FineGrid& grid, SparseMatrix velocity, std::vector<int> cell_group, int num_groups,
                   FluxField lift = {}, std::vector<int> column_edge = {});

    const SparseMatrix& velocity_prolongation() const { return velocity_; }
    const SparseMatrix& pressure_prolongation() const { return pressure_; }
    const FluxField& lift() const { return lift_; }
    const std::vector<int>& column_edge() const { return column_edge_; }
    /// Indices (into the space) of functions dropped as near-dependent.
    const std::vector<int>& dropped() const { return dropped_; }
    /// Column of each kept space function.
    const std::vector<int>& kept() const { return kept_; }
    int num_velocity() const { return static_cast<int>(velocity_.cols()); }
    int num_pressure() const { return static_cast<int>(pressure_.cols()); }
    const Eigen::VectorXd& group_volume() const { return group_volume_; }

private:
    void finish(const FineGrid& grid, std::vector<int> cell_group, int num_groups);

    SparseMatrix velocity_;
    SparseMatrix pressure_;
    FluxField lift_;
    Eigen::VectorXd group_volume_;
    std::vector<int> column_edge_;
    std::vector<int> dropped_;
    std::vector<int> kept_;
};

/// Reduced saddle system  [V^T A V, V^T B^T P; P^T B V, 0].
struct CoarseSystem {
    Eigen::SparseMatrix<double> velocity_block;
    Eigen::SparseMatrix<double> divergence_block; ///< groups x velocity columns
    Eigen::VectorXd velocity_rhs;
    Eigen::VectorXd pressure_rhs;
};

struct CoarseSolution {
    Eigen::VectorXd velocity;
    Eigen::VectorXd pressure; ///< zero volume-weighted mean
    double residual = 0.0;
};

/// Exact triple products against a whole-domain fine system.
CoarseSystem assemble_coarse(const CoarseOperator& op, const SaddleSystem& fine);
CoarseSolution solve_coarse(const CoarseOperator& op, const CoarseSystem& system);

struct Downscaled {
    FluxField velocity;
    CellField pressure;
};
Downscaled downscale(const CoarseOperator& op, const CoarseSolution& coarse);

/// Fixed fine field carrying the boundary flux g: per boundary block, a
/// local solve with trace g on the domain boundary, zero on interior coarse
/// faces and a constant balancing source. Zero when g vanishes.
FluxField boundary_lift(const BlockSolvers& blocks, const FluxField& g);

/// Fixed fine field carrying the within-block variation of the source: per
/// block, zero trace on the block boundary and divergence rate - mean(rate).
/// Zero in blocks where the rate is constant.
FluxField source_lift(const BlockSolvers& blocks, const CellField& rate);

/// Per coarse block, integral of div(v) minus integral of f, relative to the flux magnitude.
double coarse_conservation_residual(const CoarsePartition& partition, const FluxField& v, const CellField& rate);

} // namespace msflow
