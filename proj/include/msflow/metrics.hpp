#pragma once

#include "msflow/transport.hpp"
#include "msflow/wells.hpp"

#include <vector>

namespace msflow {

struct SaturationError {
    std::vector<double> times;       ///< instants that entered the average
    std::vector<double> per_instant; ///< e_{s,i}
    std::vector<double> skipped;     ///< instants with a zero-norm reference
    double average = 0.0;
};

/// Relative L2 saturation error per instant and its mean over compared
/// instants. Instants must match exactly; reference instants with zero norm
/// are skipped.
SaturationError saturation_error(const std::vector<double>& times, const std::vector<CellField>& reference,
                                 const std::vector<double>& test_times, const std::vector<CellField>& test,
                                 double cell_volume = 1.0);

/// Fraction of water in the fluid produced by `producer`, evaluated with the
/// saturation of the producing cell. Throws InputError when nothing is produced.
double water_cut(const FineGrid& grid, const FluxField& v, const CellField& s, const CellField& rate,
                 const MobilityModel& mobility, const Producer& producer);

} // namespace msflow
