#include "msflow/mixed_fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace msflow {

namespace {

constexpr double compatibility_tolerance = 1e-10;
constexpr double acceptable_residual = 1e-8;
constexpr int direct_solver_limit = 20000;

} // namespace

CellField resistivity(const PermeabilityField& kappa, const CellField& mobility)
{
    if (kappa.size() != mobility.size())
        throw InputError("resistivity: permeability and mobility sizes differ");
    CellField r(mobility.size());
    for (Eigen::Index c = 0; c < r.size(); ++c) {
        if (!(mobility[c] > 0.0))
            throw InputError("resistivity: non-positive mobility at cell " + std::to_string(c));
        r[c] = 1.0 / (mobility[c] * kappa[static_cast<int>(c)]);
    }
    return r;
}

Eigen::VectorXd face_mass(const FineGrid& grid, const CellField& res)
{
    if (res.size() != grid.num_cells())
        throw InputError("face_mass: resistivity size does not match the grid");
    const double half = 0.5 * grid.cell_volume();
    Eigen::VectorXd m(grid.num_faces());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const auto cells = grid.face_cells(f);
        double w = 0.0;
        for (int c : cells)
            if (c >= 0)
                w += half * res[c];
        m[f] = w;
    }
    return m;
}

SaddleSystem assemble(const FineGrid& grid, const PermeabilityField& kappa, const CellField& mobility,
                      const SourceSpec& sources)
{
    if (kappa.dims() != grid.cells_per_axis())
        throw InputError("assemble: permeability dimensions do not match the grid");
    return assemble(grid, resistivity(kappa, mobility), sources);
}

SaddleSystem assemble(const FineGrid& grid, const CellField& res, const SourceSpec& sources)
{
    if (res.size() != grid.num_cells() || sources.rate.size() != grid.num_cells() ||
        sources.boundary_flux.size() != grid.num_faces())
        throw InputError("assemble: field sizes do not match the grid");

    SaddleSystem sys;
    sys.cells.resize(grid.num_cells());
    std::iota(sys.cells.begin(), sys.cells.end(), 0);
    sys.faces.resize(grid.num_faces());
    std::iota(sys.faces.begin(), sys.faces.end(), 0);
    sys.cell_volume = grid.cell_volume();
    sys.mass = face_mass(grid, res);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * static_cast<std::size_t>(grid.num_faces()));
    sys.essential.assign(grid.num_faces(), 0);
    sys.essential_flux = Eigen::VectorXd::Zero(grid.num_faces());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const auto cells = grid.face_cells(f);
        const double area = grid.face_area(f);
        if (cells[0] >= 0)
            trips.emplace_back(cells[0], f, area);
        if (cells[1] >= 0)
            trips.emplace_back(cells[1], f, -area);
        if (cells[0] < 0 || cells[1] < 0) {
            sys.essential[f] = 1;
            sys.essential_flux[f] = sources.boundary_flux[f];
        }
    }
    sys.div.resize(grid.num_cells(), grid.num_faces());
    sys.div.setFromTriplets(trips.begin(), trips.end());
    sys.velocity_rhs = Eigen::VectorXd::Zero(grid.num_faces());
    sys.pressure_rhs = sources.rate * grid.cell_volume();
    return sys;
}

SaddleSystem assemble_region(const FineGrid& grid, std::span<const int> cells, const CellField& res,
                             std::span<const int> designated)
{
    if (res.size() != grid.num_cells())
        throw InputError("assemble_region: resistivity size does not match the grid");
    SaddleSystem sys;
    sys.cells.assign(cells.begin(), cells.end());
    sys.cell_volume = grid.cell_volume();

    std::unordered_map<int, int> local_cell;
    local_cell.reserve(cells.size() * 2);
    for (std::size_t i = 0; i < cells.size(); ++i)
        local_cell.emplace(cells[i], static_cast<int>(i));

    sys.faces.reserve(cells.size() * 4);
    for (int c : cells)
        for (int f : grid.cell_faces(c))
            sys.faces.push_back(f);
    std::sort(sys.faces.begin(), sys.faces.end());
    sys.faces.erase(std::unique(sys.faces.begin(), sys.faces.end()), sys.faces.end());
    const int nf = sys.num_faces();
    auto local_face = [&](int f) {
        const auto it = std::lower_bound(sys.faces.begin(), sys.faces.end(), f);
        return it != sys.faces.end() && *it == f ? static_cast<int>(it - sys.faces.begin()) : -1;
    };

    const double half = 0.5 * grid.cell_volume();
    sys.mass = Eigen::VectorXd::Zero(nf);
    sys.essential.assign(nf, 0);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * static_cast<std::size_t>(nf));
    for (int lf = 0; lf < nf; ++lf) {
        const int f = sys.faces[lf];
        const auto fc = grid.face_cells(f);
        const double area = grid.face_area(f);
        int inside = 0;
        for (int s = 0; s < 2; ++s) {
            if (fc[s] < 0)
                continue;
            const auto it = local_cell.find(fc[s]);
            if (it == local_cell.end())
                continue;
            ++inside;
            sys.mass[lf] += half * res[fc[s]];
            trips.emplace_back(it->second, lf, s == 0 ? area : -area);
        }
        if (inside < 2)
            sys.essential[lf] = 1;
    }
    for (int f : designated) {
        const int lf = local_face(f);
        if (lf < 0)
            throw InputError("assemble_region: designated face " + std::to_string(f) + " not in region");
        sys.essential[lf] = 1;
    }
    sys.div.resize(sys.num_cells(), nf);
    sys.div.setFromTriplets(trips.begin(), trips.end());
    sys.velocity_rhs = Eigen::VectorXd::Zero(nf);
    sys.pressure_rhs = Eigen::VectorXd::Zero(sys.num_cells());
    sys.essential_flux = Eigen::VectorXd::Zero(nf);
    return sys;
}

struct SaddleSolver::Impl {
    using SparseMatrix = Eigen::SparseMatrix<double>;

    int num_cells = 0;
    int num_faces = 0;
    Eigen::VectorXd mass;
    SparseMatrix div;
    std::vector<char> essential;

    std::vector<int> component;
    std::vector<char> anchored; ///< component touched by a free face with one cell
    int num_components = 0;
    std::vector<int> reduced; ///< reduced index per cell, -1 when pinned
    int num_reduced = 0;

    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> direct;
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> iterative;
    SparseMatrix schur; ///< kept alive for the iterative solver, which references it
    bool use_direct = true;

    explicit Impl(const SaddleSystem& sys)
        : num_cells(sys.num_cells()), num_faces(sys.num_faces()), mass(sys.mass), div(sys.div),
          essential(sys.essential)
    {
        if (mass.size() != num_faces || div.rows() != num_cells || div.cols() != num_faces ||
            static_cast<int>(essential.size()) != num_faces)
            throw InputError("saddle system: inconsistent block dimensions");

        // union-find over cells joined by free faces
        std::vector<int> parent(num_cells);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            return a;
        };
        std::vector<char> root_anchored(num_cells, 0);
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(4 * static_cast<std::size_t>(num_faces));
        std::vector<std::pair<int, double>> col;
        for (int f = 0; f < num_faces; ++f) {
            if (essential[f])
                continue;
            if (!(mass[f] > 0.0))
                throw InputError("saddle system: non-positive mass on a free face");
            col.clear();
            for (SparseMatrix::InnerIterator it(div, f); it; ++it)
                col.emplace_back(static_cast<int>(it.row()), it.value());
            if (col.size() == 2) {
                const int a = find(col[0].first);
                const int b = find(col[1].first);
                if (a != b)
                    parent[a] = b;
            } else if (col.size() == 1) {
                root_anchored[col[0].first] = 1; // resolved to roots below
            }
        }
        component.assign(num_cells, -1);
        std::vector<int> root_id(num_cells, -1);
        for (int c = 0; c < num_cells; ++c) {
            const int r = find(c);
            if (root_id[r] < 0)
                root_id[r] = num_components++;
            component[c] = root_id[r];
        }
        anchored.assign(num_components, 0);
        for (int c = 0; c < num_cells; ++c)
            if (root_anchored[c])
                anchored[component[c]] = 1;

        reduced.assign(num_cells, -1);
        std::vector<char> pinned(num_components, 0);
        for (int c = 0; c < num_cells; ++c) {
            const int k = component[c];
            if (!anchored[k] && !pinned[k]) {
                pinned[k] = 1;
                continue;
            }
            reduced[c] = num_reduced++;
        }

        for (int f = 0; f < num_faces; ++f) {
            if (essential[f])
                continue;
            col.clear();
            for (SparseMatrix::InnerIterator it(div, f); it; ++it)
                col.emplace_back(static_cast<int>(it.row()), it.value());
            for (const auto& [ca, va] : col)
                for (const auto& [cb, vb] : col) {
                    const int ra = reduced[ca];
                    const int rb = reduced[cb];
                    if (ra >= 0 && rb >= 0)
                        trips.emplace_back(ra, rb, va * vb / mass[f]);
                }
        }
        schur.resize(num_reduced, num_reduced);
        schur.setFromTriplets(trips.begin(), trips.end());

        use_direct = num_reduced <= direct_solver_limit;
        if (num_reduced == 0)
            return;
        if (use_direct) {
            direct.compute(schur);
            schur = SparseMatrix();
            if (direct.info() != Eigen::Success)
                throw SolverFailure("saddle system: pressure factorization failed", 1.0);
        } else {
            iterative.setTolerance(1e-12);
            iterative.setMaxIterations(20000);
            iterative.compute(schur);
            if (iterative.info() != Eigen::Success)
                throw SolverFailure("saddle system: preconditioner setup failed", 1.0);
        }
    }

    SaddleSolution solve(const Eigen::VectorXd& g_vel, const Eigen::VectorXd& f_p, const Eigen::VectorXd& g_ess) const
    {
        if (g_vel.size() != num_faces || f_p.size() != num_cells || g_ess.size() != num_faces)
            throw InputError("saddle solve: right-hand side sizes do not match the system");

        // S p = B_free A^-1 G + B_ess g - F
        Eigen::VectorXd rhs = -f_p;
        Eigen::VectorXd scale = f_p.cwiseAbs();
        for (int f = 0; f < num_faces; ++f) {
            const double coeff = essential[f] ? g_ess[f] : g_vel[f] / mass[f];
            if (coeff == 0.0)
                continue;
            for (SparseMatrix::InnerIterator it(div, f); it; ++it) {
                rhs[it.row()] += it.value() * coeff;
                scale[it.row()] += std::abs(it.value() * coeff);
            }
        }

        std::vector<double> imbalance(num_components, 0.0), magnitude(num_components, 0.0);
        for (int c = 0; c < num_cells; ++c) {
            imbalance[component[c]] += rhs[c];
            magnitude[component[c]] += scale[c];
        }
        for (int k = 0; k < num_components; ++k) {
            if (anchored[k])
                continue;
            if (std::abs(imbalance[k]) > compatibility_tolerance * magnitude[k] &&
                std::abs(imbalance[k]) > 1e-300) {
                std::ostringstream msg;
                msg << "incompatible flux data: net imbalance " << imbalance[k] << " on component " << k
                    << " (relative " << imbalance[k] / magnitude[k] << ")";
                throw IncompatibleData(msg.str(), imbalance[k]);
            }
        }

        SaddleSolution out;
        out.pressure = Eigen::VectorXd::Zero(num_cells);
        if (num_reduced > 0) {
            Eigen::VectorXd r(num_reduced);
            for (int c = 0; c < num_cells; ++c)
                if (reduced[c] >= 0)
                    r[reduced[c]] = rhs[c];
            Eigen::VectorXd x;
            if (use_direct) {
                x = direct.solve(r);
            } else {
                // the recursive CG residual drifts on high-contrast problems; refine against the true one
                x = Eigen::VectorXd::Zero(num_reduced);
                const double target = 1e-12 * std::max(r.norm(), 1e-300);
                Eigen::VectorXd defect = r;
                for (int pass = 0; pass < 4 && defect.norm() > target; ++pass) {
                    x += iterative.solve(defect);
                    if (iterative.info() != Eigen::Success && iterative.info() != Eigen::NoConvergence)
                        throw SolverFailure("saddle system: conjugate gradient failed", iterative.error());
                    defect = r - schur * x;
                }
                if (defect.norm() > 1e-10 * std::max(r.norm(), 1e-300))
                    throw SolverFailure("saddle system: conjugate gradient did not converge",
                                        defect.norm() / std::max(r.norm(), 1e-300));
            }
            for (int c = 0; c < num_cells; ++c)
                if (reduced[c] >= 0)
                    out.pressure[c] = x[reduced[c]];
        }

        std::vector<double> sum(num_components, 0.0);
        std::vector<int> count(num_components, 0);
        for (int c = 0; c < num_cells; ++c) {
            sum[component[c]] += out.pressure[c];
            ++count[component[c]];
        }
        for (int c = 0; c < num_cells; ++c)
            if (!anchored[component[c]])
                out.pressure[c] -= sum[component[c]] / count[component[c]];

        out.flux.resize(num_faces);
        const Eigen::VectorXd btp = div.transpose() * out.pressure;
        for (int f = 0; f < num_faces; ++f)
            out.flux[f] = essential[f] ? g_ess[f] : (g_vel[f] - btp[f]) / mass[f];

        const Eigen::VectorXd res = div * out.flux - f_p;
        const double denom = std::max(scale.norm(), 1e-300);
        out.residual = res.norm() / denom;
        if (out.residual > acceptable_residual)
            throw SolverFailure("saddle system: residual " + std::to_string(out.residual) + " above tolerance",
                                out.residual);
        return out;
    }
};

SaddleSolver::SaddleSolver(const SaddleSystem& system) : impl_(std::make_unique<Impl>(system)) {}
SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

SaddleSolution SaddleSolver::solve(const Eigen::VectorXd& velocity_rhs, const Eigen::VectorXd& pressure_rhs,
                                   const Eigen::VectorXd& essential_flux) const
{
    return impl_->solve(velocity_rhs, pressure_rhs, essential_flux);
}

SaddleSolution SaddleSolver::solve(const SaddleSystem& system) const
{
    return impl_->solve(system.velocity_rhs, system.pressure_rhs, system.essential_flux);
}

int SaddleSolver::num_components() const { return impl_->num_components; }
const std::vector<int>& SaddleSolver::component() const { return impl_->component; }

SaddleSolution solve(const SaddleSystem& system)
{
    return SaddleSolver(system).solve(system);
}

void scatter_flux(const SaddleSystem& system, const Eigen::VectorXd& local_flux, FluxField& global)
{
    for (int lf = 0; lf < system.num_faces(); ++lf)
        global[system.faces[lf]] = local_flux[lf];
}

void scatter_cells(const SaddleSystem& system, const Eigen::VectorXd& local, CellField& global)
{
    for (int lc = 0; lc < system.num_cells(); ++lc)
        global[system.cells[lc]] = local[lc];
}

Eigen::VectorXd gather_faces(const SaddleSystem& system, const FluxField& global)
{
    Eigen::VectorXd out(system.num_faces());
    for (int lf = 0; lf < system.num_faces(); ++lf)
        out[lf] = global[system.faces[lf]];
    return out;
}

LocalSolution solve_local(const FineGrid& grid, std::span<const int> cells, const CellField& res,
                          const CellField& alpha, const FluxField& prescribed, std::span<const int> designated)
{
    LocalSolution out;
    out.system = assemble_region(grid, cells, res, designated);
    SaddleSystem& sys = out.system;
    for (int lc = 0; lc < sys.num_cells(); ++lc)
        sys.pressure_rhs[lc] = alpha[sys.cells[lc]] * grid.cell_volume();
    for (int lf = 0; lf < sys.num_faces(); ++lf)
        if (sys.essential[lf])
            sys.essential_flux[lf] = prescribed[sys.faces[lf]];
    out.solution = solve(sys);
    return out;
}

CellField divergence(const FineGrid& grid, const FluxField& v)
{
    if (v.size() != grid.num_faces())
        throw InputError("divergence: flux field size does not match the grid");
    CellField d = CellField::Zero(grid.num_cells());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const auto cells = grid.face_cells(f);
        const double q = v[f] * grid.face_area(f);
        if (cells[0] >= 0)
            d[cells[0]] += q;
        if (cells[1] >= 0)
            d[cells[1]] -= q;
    }
    return d / grid.cell_volume();
}

double conservation_residual(const FineGrid& grid, const FluxField& v, const CellField& rate)
{
    CellField magnitude = CellField::Zero(grid.num_cells());
    for (int f = 0; f < grid.num_faces(); ++f) {
        const auto cells = grid.face_cells(f);
        const double q = std::abs(v[f]) * grid.face_area(f);
        for (int c : cells)
            if (c >= 0)
                magnitude[c] += q;
    }
    const double vol = grid.cell_volume();
    const CellField res = (divergence(grid, v) - rate) * vol;
    const double denom = (rate.cwiseAbs() * vol + magnitude).norm();
    return denom > 0.0 ? res.norm() / denom : res.norm();
}

} // namespace msflow
