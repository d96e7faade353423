#pragma once

#include "msflow/fields.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace msflow {

/// Corey-type relative permeabilities k_rw = S^a, k_ro = (1-S)^b with constant viscosities.
struct MobilityModel {
    double mu_w = 1.0;
    double mu_o = 5.0;
    double exponent_w = 2.0;
    double exponent_o = 2.0;

    double water(double s) const;
    double oil(double s) const;
    double total(double s) const { return water(s) + oil(s); }
    double fractional_flow(double s) const;
    /// max over [0,1] of f'(S), sampled and refined.
    double max_fractional_slope() const;
    CellField total(const CellField& s) const;

    void validate() const;
};

/// A saturation update left [0,1] (beyond 1e-12).
class TransportFailure : public std::runtime_error {
public:
    TransportFailure(const std::string& what, int cell, double value)
        : std::runtime_error(what), cell_(cell), value_(value) {}
    int cell() const { return cell_; }
    double value() const { return value_; }

private:
    int cell_;
    double value_;
};

/// One explicit upwind step. Inflow through boundary faces and positive
/// sources carry f(injected saturation); outflow and sinks carry f(S_cell).
CellField advance_saturation(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& sources,
                             const MobilityModel& mobility, double dt);

/// Water entering minus water leaving over one step of length dt, for the
/// discrete mass balance sum |V_i| dS_i.
double water_balance(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& sources,
                     const MobilityModel& mobility, double dt);

/// safety * min |V_i| / (outflow_i * max f'), outflow counting faces and sinks.
double cfl_dt(const FineGrid& grid, const FluxField& v, const SourceSpec& sources, const MobilityModel& mobility,
              double safety, double max_dt);

} // namespace msflow
