#pragma once

#include "msflow/fields.hpp"

#include <Eigen/Sparse>

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace msflow {

/// Data violates the Neumann compatibility condition of a pure-flux problem.
class IncompatibleData : public std::runtime_error {
public:
    IncompatibleData(const std::string& what, double imbalance)
        : std::runtime_error(what), imbalance_(imbalance) {}
    double imbalance() const { return imbalance_; }

private:
    double imbalance_;
};

/// The linear solve did not reach the requested residual.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

/// Lowest-order mixed saddle-point system on a set of fine cells.
///
///     [ A  B^T ] [v]   [G]
///     [ B   0  ] [p] = [F]
///
/// A is the lumped face mass matrix (diagonal) weighted by (lambda kappa)^-1,
/// B the cellwise divergence with entries +/- face area. Faces flagged
/// essential carry a prescribed normal flux and are eliminated. Indices are
/// local; `cells` and `faces` map them back to the fine grid.
struct SaddleSystem {
    std::vector<int> cells;
    std::vector<int> faces;
    double cell_volume = 1.0;
    Eigen::VectorXd mass;
    Eigen::SparseMatrix<double> div;
    Eigen::VectorXd velocity_rhs;
    Eigen::VectorXd pressure_rhs;
    std::vector<char> essential;
    Eigen::VectorXd essential_flux;

    int num_cells() const { return static_cast<int>(cells.size()); }
    int num_faces() const { return static_cast<int>(faces.size()); }
};

struct SaddleSolution {
    Eigen::VectorXd flux;     ///< per local face
    Eigen::VectorXd pressure; ///< per local cell, zero mean per connected component
    double residual = 0.0;    ///< relative residual of the divergence block
};

/// (lambda kappa)^-1 per cell.
CellField resistivity(const PermeabilityField& kappa, const CellField& mobility);

/// Whole-domain system: boundary faces carry g from `sources`.
SaddleSystem assemble(const FineGrid& grid, const PermeabilityField& kappa, const CellField& mobility,
                      const SourceSpec& sources);
SaddleSystem assemble(const FineGrid& grid, const CellField& resistivity, const SourceSpec& sources);

/// System on a subset of cells. Faces on the region boundary and the
/// `designated` interior faces are essential (flux zero until set).
SaddleSystem assemble_region(const FineGrid& grid, std::span<const int> cells, const CellField& resistivity,
                             std::span<const int> designated = {});

/// Factorized pressure Schur complement of a saddle system, reusable for
/// many right-hand sides with the same essential set.
class SaddleSolver {
public:
    explicit SaddleSolver(const SaddleSystem& system);
    ~SaddleSolver();
    SaddleSolver(SaddleSolver&&) noexcept;
    SaddleSolver& operator=(SaddleSolver&&) noexcept;

    SaddleSolution solve(const Eigen::VectorXd& velocity_rhs, const Eigen::VectorXd& pressure_rhs,
                         const Eigen::VectorXd& essential_flux) const;
    SaddleSolution solve(const SaddleSystem& system) const;

    int num_components() const;
    /// Connected component of each local cell (cells linked through free faces).
    const std::vector<int>& component() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SaddleSolution solve(const SaddleSystem& system);

/// Map a local solution back onto a global flux field (other faces untouched).
void scatter_flux(const SaddleSystem& system, const Eigen::VectorXd& local_flux, FluxField& global);
void scatter_cells(const SaddleSystem& system, const Eigen::VectorXd& local, CellField& global);
Eigen::VectorXd gather_faces(const SaddleSystem& system, const FluxField& global);

struct LocalSolution {
    SaddleSystem system;
    SaddleSolution solution;

    void scatter(FluxField& global) const { scatter_flux(system, solution.flux, global); }
};

/// Mixed solve on a cell subset with source `alpha` (per unit volume, per
/// global cell) and normal flux taken from `prescribed` on the region
/// boundary and on `designated` interior faces.
LocalSolution solve_local(const FineGrid& grid, std::span<const int> cells, const CellField& resistivity,
                          const CellField& alpha, const FluxField& prescribed,
                          std::span<const int> designated = {});

/// Cellwise divergence: signed sum of face fluxes times areas over the cell volume.
CellField divergence(const FineGrid& grid, const FluxField& v);

/// Lumped mass matrix diagonal over all fine faces (boundary faces get one half-cell term).
Eigen::VectorXd face_mass(const FineGrid& grid, const CellField& resistivity);

/// Residual of B v = F relative to |F|, for a solution of a whole-domain problem.
double conservation_residual(const FineGrid& grid, const FluxField& v, const CellField& rate);

} // namespace msflow
