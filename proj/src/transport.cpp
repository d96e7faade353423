#include "msflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace msflow {

double MobilityModel::water(double s) const
{
    return std::pow(std::clamp(s, 0.0, 1.0), exponent_w) / mu_w;
}

double MobilityModel::oil(double s) const
{
    return std::pow(1.0 - std::clamp(s, 0.0, 1.0), exponent_o) / mu_o;
}

double MobilityModel::fractional_flow(double s) const
{
    const double w = water(s);
    return w / (w + oil(s));
}

double MobilityModel::max_fractional_slope() const
{
    constexpr int samples = 2000;
    auto slope = [this](double s) {
        const double h = 1e-6;
        const double a = std::max(0.0, s - h);
        const double b = std::min(1.0, s + h);
        return (fractional_flow(b) - fractional_flow(a)) / (b - a);
    };
    double best = 0.0;
    int arg = 0;
    for (int i = 0; i <= samples; ++i) {
        const double d = slope(static_cast<double>(i) / samples);
        if (d > best) {
            best = d;
            arg = i;
        }
    }
    // golden-section refinement around the best sample
    double lo = std::max(0.0, (arg - 1.0) / samples);
    double hi = std::min(1.0, (arg + 1.0) / samples);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 60; ++it) {
        const double x1 = hi - g * (hi - lo);
        const double x2 = lo + g * (hi - lo);
        if (slope(x1) > slope(x2))
            hi = x2;
        else
            lo = x1;
    }
    return std::max(best, slope(0.5 * (lo + hi)));
}

CellField MobilityModel::total(const CellField& s) const
{
    CellField out(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        out[i] = total(s[i]);
    return out;
}

void MobilityModel::validate() const
{
    if (!(mu_w > 0.0) || !(mu_o > 0.0) || !std::isfinite(mu_w) || !std::isfinite(mu_o))
        throw InputError("mobility: viscosities must be positive and finite");
    if (!(exponent_w >= 1.0) || !(exponent_o >= 1.0) || !std::isfinite(exponent_w) || !std::isfinite(exponent_o))
        throw InputError("mobility: relative permeability exponents must be at least 1");
}

namespace {

void check_sizes(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& sources)
{
    if (s.size() != grid.num_cells() || v.size() != grid.num_faces() || sources.rate.size() != grid.num_cells())
        throw InputError("transport: field sizes do not match the grid");
}

// Water flux (per unit time) leaving each cell, signed (positive out).
CellField water_outflow(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& src,
                        const MobilityModel& mob)
{
    const double f_inj = mob.fractional_flow(src.injected_saturation);
    CellField fw_cell(grid.num_cells());
    for (int c = 0; c < grid.num_cells(); ++c)
        fw_cell[c] = mob.fractional_flow(s[c]);
    CellField out = CellField::Zero(grid.num_cells());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const double q = v[f] * grid.face_area(f);
        if (q == 0.0)
            continue;
        const auto [lo, hi] = grid.face_cells(f);
        // flux along +axis leaves lo; the upwind cell is the one it leaves
        const int up = q > 0.0 ? lo : hi;
        const double fw = up >= 0 ? fw_cell[up] : f_inj;
        if (lo >= 0)
            out[lo] += q * fw;
        if (hi >= 0)
            out[hi] -= q * fw;
    }
    const double vol = grid.cell_volume();
    for (int c = 0; c < grid.num_cells(); ++c) {
        const double r = src.rate[c];
        if (r > 0.0)
            out[c] -= r * vol * f_inj;
        else if (r < 0.0)
            out[c] -= r * vol * fw_cell[c];
    }
    return out;
}

} // namespace

CellField advance_saturation(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& sources,
                             const MobilityModel& mobility, double dt)
{
    check_sizes(grid, s, v, sources);
    const CellField out_w = water_outflow(grid, s, v, sources, mobility);
    CellField next = s - (dt / grid.cell_volume()) * out_w;
    constexpr double eps = 1e-12;
    for (int c = 0; c < grid.num_cells(); ++c) {
        if (!(next[c] >= -eps && next[c] <= 1.0 + eps)) {
            std::ostringstream msg;
            msg << "saturation update rejected: cell " << c << " reached " << next[c];
            throw TransportFailure(msg.str(), c, next[c]);
        }
    }
    return next;
}

double water_balance(const FineGrid& grid, const CellField& s, const FluxField& v, const SourceSpec& sources,
                     const MobilityModel& mobility, double dt)
{
    check_sizes(grid, s, v, sources);
    const double f_inj = mobility.fractional_flow(sources.injected_saturation);
    double net = 0.0;
    for (int f = 0; f < grid.num_faces(); ++f) {
        if (!grid.is_boundary_face(f))
            continue;
        const auto [lo, hi] = grid.face_cells(f);
        const int inside = lo >= 0 ? lo : hi;
        // inward flux: +axis flux enters through a low-side boundary face
        const double inward = (lo >= 0 ? -v[f] : v[f]) * grid.face_area(f);
        net += inward > 0.0 ? inward * f_inj : inward * mobility.fractional_flow(s[inside]);
    }
    const double vol = grid.cell_volume();
    for (int c = 0; c < grid.num_cells(); ++c) {
        const double r = sources.rate[c];
        net += r > 0.0 ? r * vol * f_inj : r * vol * mobility.fractional_flow(s[c]);
    }
    return dt * net;
}

double cfl_dt(const FineGrid& grid, const FluxField& v, const SourceSpec& sources, const MobilityModel& mobility,
              double safety, double max_dt)
{
    if (!(safety > 0.0 && safety <= 1.0))
        throw InputError("cfl_dt: safety factor must lie in (0, 1]");
    if (v.size() != grid.num_faces())
        throw InputError("cfl_dt: flux field size does not match the grid");
    CellField outflow = CellField::Zero(grid.num_cells());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const double q = v[f] * grid.face_area(f);
        const auto [lo, hi] = grid.face_cells(f);
        if (q > 0.0 && lo >= 0)
            outflow[lo] += q;
        else if (q < 0.0 && hi >= 0)
            outflow[hi] -= q;
    }
    if (sources.rate.size() == grid.num_cells())
        for (int c = 0; c < grid.num_cells(); ++c)
            if (sources.rate[c] < 0.0)
                outflow[c] -= sources.rate[c] * grid.cell_volume();
    const double largest = outflow.size() > 0 ? outflow.maxCoeff() : 0.0;
    const double slope = mobility.max_fractional_slope();
    if (largest <= 0.0 || slope <= 0.0)
        return max_dt;
    return std::min(max_dt, safety * grid.cell_volume() / (largest * slope));
}

} // namespace msflow
