#pragma once

#include "msflow/mixed_fem.hpp"

namespace msflow {

/// Mean method: one Neumann solve per coarse block with the block-boundary
/// trace of `v_h` and source `rate`. The result keeps v_h on every coarse
/// plane and is conservative cell by cell. Throws IncompatibleData naming
/// the block when v_h is not coarsely conservative there.
FluxField mean_postprocess(const CoarsePartition& partition, const FluxField& v_h, const CellField& resistivity,
                           const CellField& rate, int threads = 1);

/// True when `rate` varies inside at least one coarse block.
bool rate_varies_within_blocks(const CoarsePartition& partition, const CellField& rate);

} // namespace msflow
