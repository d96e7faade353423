#pragma once

#include "msflow/mixed_fem.hpp"
#include "msflow/multiscale_space.hpp"

#include <span>
#include <vector>

namespace msflow {

/// Factorized pure-Neumann mixed problems, one per coarse block, all
/// boundary faces essential. Built once for the basis mobility and shared by
/// every edge-basis construction.
class BlockSolvers {
public:
    BlockSolvers(const CoarsePartition& partition, const CellField& resistivity, int threads = 1);

    const CoarsePartition& partition() const { return *partition_; }
    const SaddleSystem& system(int block) const { return systems_.at(block); }
    const SaddleSolver& solver(int block) const { return solvers_.at(block); }
    const CellField& resistivity() const { return resistivity_; }

private:
    const CoarsePartition* partition_;
    CellField resistivity_;
    std::vector<SaddleSystem> systems_;
    std::vector<SaddleSolver> solvers_;
};

/// Velocity function on omega_i with the given normal trace on E_i (one value
/// per fine face of E_i, in edge order), zero normal trace on the rest of
/// the neighborhood boundary and constant divergence per block balancing the
/// edge flux. Each of the two blocks is solved separately.
BasisFunction edge_basis(const BlockSolvers& blocks, int edge, std::span<const double> trace, BasisKind kind);

/// Net flux of a trace through E_i (sum of value times face area).
double edge_flux(const CoarsePartition& partition, int edge, std::span<const double> trace);

/// Normal trace of a fine flux field on the faces of E_i.
std::vector<double> edge_trace(const CoarsePartition& partition, int edge, const FluxField& v);

} // namespace msflow
