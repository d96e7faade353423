#include "msflow/wells.hpp"

#include <cmath>

namespace msflow {

SourceSpec WellSet::sources(const FineGrid& grid, double injected_saturation) const
{
    SourceSpec out = SourceSpec::zero(grid);
    out.injected_saturation = injected_saturation;
    for (const Well& w : wells) {
        if (w.cells.empty())
            throw InputError("well '" + w.name + "' has no cells");
        const double per_cell = w.rate / (static_cast<double>(w.cells.size()) * grid.cell_volume());
        for (int c : w.cells) {
            if (c < 0 || c >= grid.num_cells())
                throw InputError("well '" + w.name + "' references a cell outside the grid");
            out.rate[c] += per_cell;
        }
    }
    if (boundary_flux.size() != 0) {
        if (boundary_flux.size() != grid.num_faces())
            throw InputError("boundary flux size does not match the grid");
        out.boundary_flux = boundary_flux;
    }
    return out;
}

std::vector<int> column_cells(const FineGrid& grid, int i, int j)
{
    std::vector<int> cells;
    for (int k = 0; k < grid.cells(Axis::z); ++k)
        cells.push_back(grid.cell(i, j, k));
    return cells;
}

namespace {

WellSet corner_center(const FineGrid& grid, double rate, double corner_sign)
{
    const int nx = grid.cells(Axis::x);
    const int ny = grid.cells(Axis::y);
    WellSet out;
    const int corners[4][2] = {{0, 0}, {nx - 1, 0}, {0, ny - 1}, {nx - 1, ny - 1}};
    for (int k = 0; k < 4; ++k) {
        Well w;
        w.name = (corner_sign > 0 ? "I" : "P") + std::to_string(k + 1);
        w.cells = column_cells(grid, corners[k][0], corners[k][1]);
        w.rate = corner_sign * rate / 4.0;
        out.wells.push_back(std::move(w));
    }
    Well center;
    center.name = corner_sign > 0 ? "P1" : "I1";
    center.cells = column_cells(grid, nx / 2, ny / 2);
    center.rate = -corner_sign * rate;
    out.wells.push_back(std::move(center));
    for (const Well& w : out.wells)
        if (w.rate < 0.0)
            out.producers.push_back(Producer{w.name, w.cells, {}});
    return out;
}

} // namespace

WellSet five_spot(const FineGrid& grid, double rate)
{
    return corner_center(grid, rate, 1.0);
}

WellSet inverted_five_spot(const FineGrid& grid, double rate)
{
    return corner_center(grid, rate, -1.0);
}

WellSet flow_through(const FineGrid& grid, Axis axis, double velocity)
{
    WellSet out;
    out.boundary_flux = FluxField::Zero(grid.num_faces());
    Producer outlet{"outlet", {}, {}};
    const int a = to_int(axis);
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    Index3 ijk{0, 0, 0};
    for (int u = 0; u < grid.cells_per_axis()[b]; ++u)
        for (int w = 0; w < grid.cells_per_axis()[c]; ++w) {
            ijk[b] = u;
            ijk[c] = w;
            ijk[a] = 0;
            out.boundary_flux[grid.face(axis, ijk)] = velocity;
            ijk[a] = grid.cells(axis);
            const int f = grid.face(axis, ijk);
            out.boundary_flux[f] = velocity;
            outlet.faces.push_back(f);
        }
    out.producers.push_back(std::move(outlet));
    return out;
}

} // namespace msflow
