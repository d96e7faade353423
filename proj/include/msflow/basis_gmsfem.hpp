#pragma once

#include "msflow/coarse_system.hpp"
#include "msflow/local_basis.hpp"
#include "msflow/multiscale_space.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <vector>

namespace msflow {

/// Snapshot functions of one coarse edge: unit flux through a single fine
/// face of E_i, zero elsewhere on E_i and on the neighborhood boundary.
/// Function j belongs to the j-th face of the edge. All functions share one
/// face support (the faces of both blocks).
struct SnapshotSet {
    int edge = -1;
    std::vector<BasisFunction> functions;

    int size() const { return static_cast<int>(functions.size()); }
};

SnapshotSet build_snapshots(const BlockSolvers& blocks, int edge);

/// Edge form a_i and neighborhood form s_i in snapshot coordinates.
struct SpectralForms {
    Eigen::MatrixXd edge_form;
    Eigen::MatrixXd neighborhood_form;
};

/// Face resistivity on E_i is the mean of the two adjacent cells; s_i uses the
/// lumped mass of the neighborhood plus the cellwise divergence product.
SpectralForms assemble_spectral(const CoarsePartition& partition, const SnapshotSet& snapshots,
                                const CellField& resistivity);

struct SpectralResult {
    Eigen::VectorXd eigenvalues; ///< ascending
    Eigen::MatrixXd vectors;     ///< columns, s-orthonormal
};

/// Solves a x = lambda s x. Throws SolverFailure when s is not positive definite.
SpectralResult solve_spectral(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s);

/// Combination sum_k v(k, j) psi_k for the first `count` columns.
std::vector<BasisFunction> offline_functions(const SnapshotSet& snapshots, const SpectralResult& spectral,
                                             int count);

/// `count` offline functions on every edge.
MultiscaleSpace build_offline(const BlockSolvers& blocks, int count, int threads = 1);
MultiscaleSpace build_offline(const BlockSolvers& blocks, const std::vector<int>& counts, int threads = 1);

/// Residual functional of a projected coarse solution on a set of fine faces:
/// R(phi_f) = (A v_H + B^T p_H - G)_f. Essential faces of the fine system evaluate to zero.
struct LocalResidual {
    std::vector<int> faces;
    Eigen::VectorXd values;

    double norm() const { return values.norm(); }
};

FluxField global_residual(const SaddleSystem& fine, const FluxField& v_h, const CellField& p_h);
LocalResidual compute_residual(const SaddleSystem& fine, const FluxField& v_h, const CellField& p_h,
                               const std::vector<int>& faces);

/// Mixed problem on an oversampled neighborhood with zero normal flux on its
/// boundary; maps residual data to its divergence-free representative.
class RieszSolver {
public:
    RieszSolver(const CoarsePartition& partition, int edge, int layers, const CellField& resistivity);

    const OversampledNeighborhood& region() const { return region_; }
    const SaddleSystem& system() const { return system_; }
    /// Fine faces interior to the region (where test functions live), sorted.
    const std::vector<int>& test_faces() const { return test_faces_; }
    /// Representative as a global flux field.
    FluxField represent(const LocalResidual& residual, int num_faces) const;

private:
    OversampledNeighborhood region_;
    SaddleSystem system_;
    std::unique_ptr<SaddleSolver> solver_;
    std::vector<int> test_faces_;
};

/// Online function for one edge from its local residual. Empty when the
/// divergence-free part of the residual (relative to `scale`) or its trace
/// on E_i is negligible.
std::optional<BasisFunction> online_basis(const BlockSolvers& blocks, const RieszSolver& riesz,
                                          const LocalResidual& residual, double scale,
                                          double tolerance = 1e-9);

struct EnrichOptions {
    int layers = -1; ///< oversampling layers, -1 for the default
    int threads = 1;
    double tolerance = 1e-9;
};

struct EnrichReport {
    /// Global residual norm of the coarse solution before the first sweep and after every sweep.
    std::vector<double> residual_norms;
    std::vector<int> added; ///< functions appended per sweep
};

/// Dual norm of the residual over divergence-free fine fields vanishing on the domain boundary.
double residual_norm(const SaddleSolver& fine_solver, const SaddleSystem& fine, const FluxField& residual);

/// `sweeps` rounds of: coarse solve on the current space, residual per
/// edge on its oversampled neighborhood, one online function per edge.
/// `fine` is the whole-domain system the coarse solves are driven by.
MultiscaleSpace enrich(const BlockSolvers& blocks, MultiscaleSpace space, const SaddleSystem& fine,
                       const FluxField& lift, int sweeps, const EnrichOptions& options = {},
                       EnrichReport* report = nullptr);

} // namespace msflow
