#include "msflow/pressure.hpp"

#include "msflow/postprocess.hpp"

#include <algorithm>

namespace msflow {

FinePressureSolver::FinePressureSolver(const FineGrid& grid, PermeabilityField kappa, SourceSpec sources)
    : grid_(grid), kappa_(std::move(kappa)), sources_(std::move(sources))
{
}

FluxField FinePressureSolver::solve(const CellField& mobility)
{
    const SaddleSystem sys = assemble(grid_, kappa_, mobility, sources_);
    FluxField v = FluxField::Zero(grid_.num_faces());
    scatter_flux(sys, msflow::solve(sys).flux, v);
    worst_fine_ = std::max(worst_fine_, conservation_residual(grid_, v, sources_.rate));
    return v;
}

long FinePressureSolver::dof() const
{
    return dof_fine(grid_);
}

PostprocessMode parse_postprocess_mode(const std::string& name)
{
    if (name == "auto")
        return PostprocessMode::automatic;
    if (name == "always")
        return PostprocessMode::always;
    if (name == "never")
        return PostprocessMode::never;
    throw InputError("unknown postprocess mode '" + name + "' (expected auto, always or never)");
}

MultiscalePressureSolver::MultiscalePressureSolver(const CoarsePartition& partition, PermeabilityField kappa,
                                                   SourceSpec sources, CoarseOperator op, std::string name,
                                                   PostprocessMode postprocess, int threads)
    : partition_(partition)
    , kappa_(std::move(kappa))
    , sources_(std::move(sources))
    , op_(std::move(op))
    , name_(std::move(name))
    , threads_(threads)
{
    switch (postprocess) {
    case PostprocessMode::always:
        postprocess_ = true;
        break;
    case PostprocessMode::never:
        postprocess_ = false;
        break;
    default:
        postprocess_ = rate_varies_within_blocks(partition_, sources_.rate);
    }
}

FluxField MultiscalePressureSolver::solve(const CellField& mobility)
{
    const FineGrid& grid = partition_.grid();
    const CellField res = resistivity(kappa_, mobility);
    const SaddleSystem fine = assemble(grid, res, sources_);
    const CoarseSolution coarse = solve_coarse(op_, assemble_coarse(op_, fine));
    last_coarse_ = downscale(op_, coarse).velocity;
    worst_coarse_ = std::max(worst_coarse_, coarse_conservation_residual(partition_, last_coarse_, sources_.rate));
    if (!postprocess_)
        return last_coarse_;
    FluxField v = mean_postprocess(partition_, last_coarse_, res, sources_.rate, threads_);
    worst_fine_ = std::max(worst_fine_, conservation_residual(grid, v, sources_.rate));
    return v;
}

long MultiscalePressureSolver::dof() const
{
    return static_cast<long>(op_.num_velocity()) + op_.num_pressure();
}

} // namespace msflow
