#include "msflow/postprocess.hpp"

#include "msflow/parallel.hpp"

#include <sstream>

namespace msflow {

FluxField mean_postprocess(const CoarsePartition& partition, const FluxField& v_h, const CellField& res,
                           const CellField& rate, int threads)
{
    const FineGrid& grid = partition.grid();
    if (v_h.size() != grid.num_faces() || rate.size() != grid.num_cells() || res.size() != grid.num_cells())
        throw InputError("mean_postprocess: field sizes do not match the grid");
    FluxField out = v_h;
    const int nb = partition.num_blocks();
    std::vector<LocalSolution> local(nb);
    parallel_for(nb, threads, [&](int b) {
        try {
            local[b] = solve_local(grid, partition.block_cells(b), res, rate, v_h);
        } catch (const IncompatibleData& err) {
            std::ostringstream msg;
            msg << "mean postprocess: block " << b << " is not coarsely conservative: " << err.what();
            throw IncompatibleData(msg.str(), err.imbalance());
        }
    });
    // block-boundary faces carry v_h in both neighbors, so scattering in any order is consistent
    for (const auto& l : local)
        l.scatter(out);
    return out;
}

bool rate_varies_within_blocks(const CoarsePartition& partition, const CellField& rate)
{
    for (int b = 0; b < partition.num_blocks(); ++b) {
        const auto& cells = partition.block_cells(b);
        const double first = rate[cells.front()];
        for (int c : cells)
            if (rate[c] != first)
                return true;
    }
    return false;
}

} // namespace msflow
