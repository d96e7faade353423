#pragma once

#include "msflow/local_basis.hpp"
#include "msflow/multiscale_space.hpp"

#include <vector>

namespace msflow {

/// One velocity function per interior coarse edge, seeded by the trace of a
/// single-phase fine velocity.
struct LimitedGlobalBasis {
    MultiscaleSpace space;
    std::vector<int> fallback_edges; ///< edges whose seed trace vanished (uniform trace used instead)
};

/// Fine mixed solve with unit mobility.
FluxField solve_single_phase(const FineGrid& grid, const PermeabilityField& kappa, const SourceSpec& sources);

/// Edge functions built from the traces of `v_sp` against factorized block problems.
LimitedGlobalBasis build_basis(const BlockSolvers& blocks, const FluxField& v_sp, int threads = 1);
LimitedGlobalBasis build_basis(const CoarsePartition& partition, const PermeabilityField& kappa,
                               const CellField& mobility, const FluxField& v_sp, int threads = 1);

} // namespace msflow
