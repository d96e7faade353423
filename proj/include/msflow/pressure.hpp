#pragma once

#include "msflow/coarse_system.hpp"
#include "msflow/mixed_fem.hpp"

#include <memory>
#include <string>

namespace msflow {

/// Velocity for the current total mobility; one implementation per method.
class PressureSolver {
public:
    virtual ~PressureSolver() = default;
    virtual FluxField solve(const CellField& mobility) = 0;
    virtual std::string name() const = 0;
    virtual long dof() const = 0;
    /// Largest cellwise conservation residual over all solves so far.
    double worst_fine_conservation() const { return worst_fine_; }

protected:
    double worst_fine_ = 0.0;
};

class FinePressureSolver : public PressureSolver {
public:
    FinePressureSolver(const FineGrid& grid, PermeabilityField kappa, SourceSpec sources);
    FluxField solve(const CellField& mobility) override;
    std::string name() const override { return "fine"; }
    long dof() const override;

private:
    const FineGrid& grid_;
    PermeabilityField kappa_;
    SourceSpec sources_;
};

enum class PostprocessMode { automatic, always, never };
PostprocessMode parse_postprocess_mode(const std::string& name);

/// Frozen multiscale space; the fine mass block is rebuilt for every call.
class MultiscalePressureSolver : public PressureSolver {
public:
    MultiscalePressureSolver(const CoarsePartition& partition, PermeabilityField kappa, SourceSpec sources,
                             CoarseOperator op, std::string name, PostprocessMode postprocess, int threads = 1);
    FluxField solve(const CellField& mobility) override;
    std::string name() const override { return name_; }
    long dof() const override;

    const CoarseOperator& coarse_operator() const { return op_; }
    bool postprocessing() const { return postprocess_; }
    /// Largest per-block coarse conservation residual over all solves so far.
    double worst_coarse_conservation() const { return worst_coarse_; }
    /// Last downscaled field before postprocessing.
    const FluxField& last_coarse_velocity() const { return last_coarse_; }

private:
    const CoarsePartition& partition_;
    PermeabilityField kappa_;
    SourceSpec sources_;
    CoarseOperator op_;
    std::string name_;
    bool postprocess_;
    int threads_;
    double worst_coarse_ = 0.0;
    FluxField last_coarse_;
};

} // namespace msflow
