#pragma once

#include "msflow/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace msflow {

/// One scalar per fine cell (pressure or saturation).
using CellField = Eigen::VectorXd;
/// One signed normal velocity per fine face, oriented along the +axis normal.
using FluxField = Eigen::VectorXd;

/// Isotropic permeability, one strictly positive finite value per fine cell.
class PermeabilityField {
public:
    PermeabilityField() = default;
    PermeabilityField(Index3 dims, Eigen::VectorXd values);

    const Index3& dims() const { return dims_; }
    int size() const { return static_cast<int>(values_.size()); }
    double operator[](int c) const { return values_[c]; }
    const Eigen::VectorXd& values() const { return values_; }

    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }
    /// Restriction to a sub-box (used to cut desk-scale sub-blocks).
    PermeabilityField sub_block(const CellBox& box) const;
    /// FNV-1a hash of the raw values, for cache keys.
    std::uint64_t hash() const;

private:
    Index3 dims_{0, 0, 0};
    Eigen::VectorXd values_;
};

/// Sources for the pressure and transport equations.
///
/// `rate` is a volumetric rate per unit volume used both as f in div(v) = f
/// and as q in the saturation equation. Positive cells inject fluid at
/// `injected_saturation`; negative cells produce at the resident saturation.
/// `boundary_flux` holds g on boundary fine faces (+axis orientation, so
/// inflow through a low-side boundary face is positive).
struct SourceSpec {
    CellField rate;
    FluxField boundary_flux;
    double injected_saturation = 1.0;

    static SourceSpec zero(const FineGrid& grid);
    /// Integral of f over the domain minus the net boundary outflow; zero for compatible data.
    double imbalance(const FineGrid& grid) const;
};

} // namespace msflow
