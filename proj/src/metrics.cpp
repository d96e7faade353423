#include "msflow/metrics.hpp"

#include <cmath>
#include <sstream>

namespace msflow {

SaturationError saturation_error(const std::vector<double>& times, const std::vector<CellField>& reference,
                                 const std::vector<double>& test_times, const std::vector<CellField>& test,
                                 double cell_volume)
{
    if (times.size() != reference.size() || test_times.size() != test.size())
        throw InputError("saturation_error: one field per instant required");
    if (times != test_times)
        throw InputError("saturation_error: reference and test series are recorded at different instants");
    SaturationError out;
    double sum = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (reference[i].size() != test[i].size())
            throw InputError("saturation_error: fields on different grids");
        const double ref2 = cell_volume * reference[i].squaredNorm();
        if (ref2 == 0.0) {
            out.skipped.push_back(times[i]);
            continue;
        }
        const double e = std::sqrt(cell_volume * (reference[i] - test[i]).squaredNorm() / ref2);
        out.times.push_back(times[i]);
        out.per_instant.push_back(e);
        sum += e;
    }
    out.average = out.per_instant.empty() ? 0.0 : sum / static_cast<double>(out.per_instant.size());
    return out;
}

double water_cut(const FineGrid& grid, const FluxField& v, const CellField& s, const CellField& rate,
                 const MobilityModel& mobility, const Producer& producer)
{
    double qt = 0.0;
    double qw = 0.0;
    for (int c : producer.cells) {
        const double q = rate[c];
        if (q < 0.0) {
            qt -= q * grid.cell_volume();
            qw -= q * grid.cell_volume() * mobility.fractional_flow(s[c]);
        }
    }
    for (int f : producer.faces) {
        const auto [lo, hi] = grid.face_cells(f);
        const int inside = lo >= 0 ? lo : hi;
        const double outward = (lo >= 0 ? v[f] : -v[f]) * grid.face_area(f);
        if (outward > 0.0) {
            qt += outward;
            qw += outward * mobility.fractional_flow(s[inside]);
        }
    }
    if (!(qt > 0.0)) {
        std::ostringstream msg;
        msg << "water cut undefined for producer '" << producer.name << "': net production " << qt;
        throw InputError(msg.str());
    }
    return qw / qt;
}

} // namespace msflow
