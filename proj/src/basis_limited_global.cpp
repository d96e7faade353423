#include "msflow/basis_limited_global.hpp"

#include "msflow/parallel.hpp"

#include <cmath>

namespace msflow {

FluxField solve_single_phase(const FineGrid& grid, const PermeabilityField& kappa, const SourceSpec& sources)
{
    const SaddleSystem sys = assemble(grid, kappa, CellField::Ones(grid.num_cells()), sources);
    FluxField v = FluxField::Zero(grid.num_faces());
    scatter_flux(sys, solve(sys).flux, v);
    return v;
}

LimitedGlobalBasis build_basis(const BlockSolvers& blocks, const FluxField& v_sp, int threads)
{
    const CoarsePartition& part = blocks.partition();
    if (v_sp.size() != part.grid().num_faces())
        throw InputError("limited global basis: seed velocity size does not match the grid");

    const double scale = v_sp.size() > 0 ? v_sp.cwiseAbs().maxCoeff() : 0.0;
    const int ne = part.num_edges();
    std::vector<BasisFunction> fns(ne);
    std::vector<char> fallback(ne, 0);
    parallel_for(ne, threads, [&](int e) {
        std::vector<double> trace = edge_trace(part, e, v_sp);
        double largest = 0.0;
        for (double t : trace)
            largest = std::max(largest, std::abs(t));
        // below the fine solver's accuracy the seed carries no usable trace
        if (largest <= 1e-10 * scale || largest == 0.0) {
            const double area = part.grid().face_area(part.edge(e).axis) * static_cast<double>(trace.size());
            trace.assign(trace.size(), 1.0 / area);
            fallback[e] = 1;
        }
        fns[e] = edge_basis(blocks, e, trace, BasisKind::limited_global);
    });

    LimitedGlobalBasis out;
    out.space.offline_count.assign(ne, 0);
    out.space.online_count.assign(ne, 0);
    for (int e = 0; e < ne; ++e) {
        out.space.append(std::move(fns[e]));
        if (fallback[e])
            out.fallback_edges.push_back(e);
    }
    return out;
}

LimitedGlobalBasis build_basis(const CoarsePartition& partition, const PermeabilityField& kappa,
                               const CellField& mobility, const FluxField& v_sp, int threads)
{
    const BlockSolvers blocks(partition, resistivity(kappa, mobility), threads);
    return build_basis(blocks, v_sp, threads);
}

} // namespace msflow
