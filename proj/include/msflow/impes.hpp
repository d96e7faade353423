#pragma once

#include "msflow/pressure.hpp"
#include "msflow/transport.hpp"
#include "msflow/wells.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace msflow {

struct ImpesOptions {
    int steps = 200;            ///< time instants
    double dt = 0.0;            ///< instant length (> 0)
    int pressure_interval = 5;  ///< instants per pressure solve
    double cfl_safety = 0.9;    ///< transport sub-steps keep CFL below this
    int record_interval = 1;    ///< store the saturation every this many instants
    std::vector<int> checkpoints;
    double initial_saturation = 0.0;
};

/// Recorded history of one run. Instant n sits at time n * dt.
struct TimeSeries {
    std::string method;
    std::vector<double> times;          ///< recorded saturation instants
    std::vector<CellField> saturation;
    std::vector<double> cut_times;      ///< every instant
    std::vector<std::string> producers;
    std::vector<std::vector<double>> water_cut; ///< per instant, per producer (NaN when undefined)
    std::vector<std::pair<int, CellField>> checkpoints;
    CellField final_saturation;
    int pressure_solves = 0;
    long transport_steps = 0;
    double worst_mass_balance = 0.0; ///< largest per-step relative water balance error
};

/// A failure inside the time loop, tagged with the instant it happened at.
class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

TimeSeries impes_run(const FineGrid& grid, const SourceSpec& sources, const std::vector<Producer>& producers,
                     const MobilityModel& mobility, PressureSolver& pressure, const ImpesOptions& options);

/// Instant length that injects `pore_volumes` domain volumes over `steps` instants.
double instant_length(const FineGrid& grid, const SourceSpec& sources, double pore_volumes, int steps);

} // namespace msflow
