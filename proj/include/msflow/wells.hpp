#pragma once

#include "msflow/fields.hpp"

#include <string>
#include <vector>

namespace msflow {

/// Group of cells sharing a total volumetric rate (positive injects).
struct Well {
    std::string name;
    std::vector<int> cells;
    double rate = 0.0;
};

/// Where produced fluid is measured: sink cells and/or outflow boundary faces.
struct Producer {
    std::string name;
    std::vector<int> cells;
    std::vector<int> faces;
};

struct WellSet {
    std::vector<Well> wells;
    FluxField boundary_flux; ///< empty for closed boundaries
    std::vector<Producer> producers;

    SourceSpec sources(const FineGrid& grid, double injected_saturation = 1.0) const;
};

/// Full-height column of cells at (i, j).
std::vector<int> column_cells(const FineGrid& grid, int i, int j);

/// Injectors on the four vertical domain edges sharing `rate`, producer column in the center.
WellSet five_spot(const FineGrid& grid, double rate);
/// Same geometry with injectors and producers exchanged.
WellSet inverted_five_spot(const FineGrid& grid, double rate);
/// Uniform normal velocity entering through the low boundary of `axis` and leaving through the high one.
WellSet flow_through(const FineGrid& grid, Axis axis, double velocity);

} // namespace msflow
