#include "msflow/impes.hpp"

#include "msflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msflow {

double instant_length(const FineGrid& grid, const SourceSpec& sources, double pore_volumes, int steps)
{
    if (steps <= 0 || !(pore_volumes > 0.0))
        throw InputError("instant length needs a positive step count and injected volume");
    double injected = 0.0;
    for (int c = 0; c < grid.num_cells(); ++c)
        injected += std::max(0.0, sources.rate[c]) * grid.cell_volume();
    if (sources.boundary_flux.size() == grid.num_faces())
        for (int f = 0; f < grid.num_faces(); ++f) {
            if (!grid.is_boundary_face(f))
                continue;
            const double inward = (grid.face_cells(f)[0] >= 0 ? -1.0 : 1.0) * sources.boundary_flux[f];
            injected += std::max(0.0, inward) * grid.face_area(f);
        }
    if (!(injected > 0.0))
        throw InputError("instant length: nothing is injected");
    const double volume = grid.cell_volume() * grid.num_cells();
    return pore_volumes * volume / (injected * steps);
}

TimeSeries impes_run(const FineGrid& grid, const SourceSpec& sources, const std::vector<Producer>& producers,
                     const MobilityModel& mobility, PressureSolver& pressure, const ImpesOptions& opt)
{
    mobility.validate();
    if (opt.steps < 0 || !(opt.dt > 0.0) || opt.pressure_interval < 1 || opt.record_interval < 1)
        throw InputError("impes: steps >= 0, dt > 0, pressure_interval >= 1 and record_interval >= 1 required");

    TimeSeries out;
    out.method = pressure.name();
    for (const auto& p : producers)
        out.producers.push_back(p.name);
    CellField s = CellField::Constant(grid.num_cells(), opt.initial_saturation);
    FluxField v = FluxField::Zero(grid.num_faces());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double volume = grid.cell_volume();

    auto record = [&](int n) {
        const double t = n * opt.dt;
        if (n % opt.record_interval == 0 || n == opt.steps) {
            out.times.push_back(t);
            out.saturation.push_back(s);
        }
        if (std::find(opt.checkpoints.begin(), opt.checkpoints.end(), n) != opt.checkpoints.end())
            out.checkpoints.emplace_back(n, s);
        if (n == 0)
            return; // no velocity yet
        std::vector<double> row;
        for (const auto& p : producers) {
            try {
                row.push_back(water_cut(grid, v, s, sources.rate, mobility, p));
            } catch (const InputError&) {
                row.push_back(nan);
            }
        }
        out.cut_times.push_back(t);
        out.water_cut.push_back(std::move(row));
    };

    record(0);
    int substeps = 1;
    for (int n = 1; n <= opt.steps; ++n) {
        try {
            if ((n - 1) % opt.pressure_interval == 0) {
                v = pressure.solve(mobility.total(s));
                ++out.pressure_solves;
                const double h = cfl_dt(grid, v, sources, mobility, opt.cfl_safety, opt.dt);
                substeps = std::max(1, static_cast<int>(std::ceil(opt.dt / h - 1e-12)));
            }
            const double h = opt.dt / substeps;
            for (int k = 0; k < substeps; ++k) {
                const double expected = water_balance(grid, s, v, sources, mobility, h);
                const CellField next = advance_saturation(grid, s, v, sources, mobility, h);
                const double stored = volume * (next - s).sum();
                const double scale = std::max({std::abs(expected), volume * (next - s).cwiseAbs().sum(), 1e-300});
                out.worst_mass_balance = std::max(out.worst_mass_balance, std::abs(stored - expected) / scale);
                s = next;
                ++out.transport_steps;
            }
        } catch (const std::exception& err) {
            throw SimulationError("instant " + std::to_string(n) + ": " + err.what(), n);
        }
        record(n);
    }
    out.final_saturation = s;
    return out;
}

} // namespace msflow
