#include "msflow/basis_gmsfem.hpp"

#include "msflow/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace msflow {

SnapshotSet build_snapshots(const BlockSolvers& blocks, int edge)
{
    const CoarseEdge& e = blocks.partition().edge(edge);
    SnapshotSet out;
    out.edge = edge;
    out.functions.reserve(e.faces.size());
    std::vector<double> trace(e.faces.size(), 0.0);
    for (std::size_t j = 0; j < e.faces.size(); ++j) {
        std::fill(trace.begin(), trace.end(), 0.0);
        trace[j] = 1.0;
        try {
            out.functions.push_back(edge_basis(blocks, edge, trace, BasisKind::snapshot));
        } catch (const SolverFailure& err) {
            throw SolverFailure("snapshot on edge " + std::to_string(edge) + ": " + err.what(), err.residual());
        }
    }
    return out;
}

namespace {

Eigen::MatrixXd snapshot_matrix(const SnapshotSet& snaps)
{
    const auto& faces = snaps.functions.front().faces;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(faces.size()), snaps.size());
    for (int j = 0; j < snaps.size(); ++j) {
        if (snaps.functions[j].faces != faces)
            throw std::logic_error("snapshot set: functions do not share a support");
        m.col(j) = snaps.functions[j].values;
    }
    return m;
}

int local_index(const std::vector<int>& sorted, int face)
{
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), face);
    if (it == sorted.end() || *it != face)
        return -1;
    return static_cast<int>(it - sorted.begin());
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m, const char* name)
{
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double size = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
    if (asym > 1e-12 * size)
        throw std::logic_error(std::string("spectral assembly: ") + name + " lost symmetry");
    return 0.5 * (m + m.transpose());
}

} // namespace

SpectralForms assemble_spectral(const CoarsePartition& partition, const SnapshotSet& snapshots,
                                const CellField& res)
{
    if (snapshots.size() == 0)
        throw InputError("assemble_spectral: empty snapshot set");
    const FineGrid& grid = partition.grid();
    const CoarseEdge& e = partition.edge(snapshots.edge);
    const auto& faces = snapshots.functions.front().faces;
    const Eigen::MatrixXd psi = snapshot_matrix(snapshots);
    const Eigen::Index nf = psi.rows();

    // edge form: sum over faces of E_i of area * face resistivity * trace products
    Eigen::MatrixXd edge_rows(e.faces.size(), psi.cols());
    Eigen::VectorXd edge_weight(e.faces.size());
    for (std::size_t k = 0; k < e.faces.size(); ++k) {
        const int f = e.faces[k];
        const int lf = local_index(faces, f);
        const auto cells = grid.face_cells(f);
        edge_rows.row(static_cast<Eigen::Index>(k)) = psi.row(lf);
        edge_weight[static_cast<Eigen::Index>(k)] = grid.face_area(f) * 0.5 * (res[cells[0]] + res[cells[1]]);
    }
    SpectralForms out;
    out.edge_form = symmetrized(edge_rows.transpose() * edge_weight.asDiagonal() * edge_rows, "edge form");

    // neighborhood form: lumped mass over omega_i plus divergence products
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(nf);
    const double vol = grid.cell_volume();
    std::vector<int> cells;
    for (int b : partition.neighborhood(snapshots.edge))
        cells.insert(cells.end(), partition.block_cells(b).begin(), partition.block_cells(b).end());
    Eigen::MatrixXd div = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), psi.cols());
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const int c = cells[r];
        for (int f : grid.cell_faces(c)) {
            const int lf = local_index(faces, f);
            if (lf < 0)
                continue;
            mass[lf] += 0.5 * vol * res[c];
            div.row(static_cast<Eigen::Index>(r)) += grid.outward_sign(c, f) * grid.face_area(f) * psi.row(lf);
        }
    }
    out.neighborhood_form = symmetrized(psi.transpose() * mass.asDiagonal() * psi + div.transpose() * div / vol,
                                        "neighborhood form");
    return out;
}

SpectralResult solve_spectral(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s)
{
    if (a.rows() != a.cols() || s.rows() != s.cols() || a.rows() != s.rows())
        throw InputError("solve_spectral: forms must be square and of equal size");
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw SolverFailure("spectral problem: neighborhood form is not positive definite", 1.0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(a, s, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success)
        throw SolverFailure("spectral problem: eigensolver failed", 1.0);

    SpectralResult out;
    out.eigenvalues = ges.eigenvalues();
    out.vectors = ges.eigenvectors();
    // fix the sign so the largest component is positive
    for (Eigen::Index j = 0; j < out.vectors.cols(); ++j) {
        Eigen::Index imax = 0;
        out.vectors.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.vectors(imax, j) < 0.0)
            out.vectors.col(j) *= -1.0;
    }
    // round-off can leave tiny negative eigenvalues of a semidefinite edge form
    const double top = out.eigenvalues.size() > 0 ? std::abs(out.eigenvalues.maxCoeff()) : 0.0;
    for (Eigen::Index j = 0; j < out.eigenvalues.size(); ++j)
        if (out.eigenvalues[j] < 0.0 && out.eigenvalues[j] > -1e-12 * std::max(top, 1.0))
            out.eigenvalues[j] = 0.0;
    return out;
}

std::vector<BasisFunction> offline_functions(const SnapshotSet& snapshots, const SpectralResult& spectral,
                                             int count)
{
    if (count < 0 || count > snapshots.size()) {
        std::ostringstream msg;
        msg << "offline count " << count << " exceeds J_i=" << snapshots.size() << " on edge " << snapshots.edge;
        throw InputError(msg.str());
    }
    const Eigen::MatrixXd psi = snapshot_matrix(snapshots);
    std::vector<BasisFunction> out;
    out.reserve(count);
    for (int j = 0; j < count; ++j) {
        BasisFunction fn;
        fn.edge = snapshots.edge;
        fn.kind = BasisKind::offline;
        fn.faces = snapshots.functions.front().faces;
        fn.values = psi * spectral.vectors.col(j);
        out.push_back(std::move(fn));
    }
    return out;
}

MultiscaleSpace build_offline(const BlockSolvers& blocks, int count, int threads)
{
    return build_offline(blocks, std::vector<int>(blocks.partition().num_edges(), count), threads);
}

MultiscaleSpace build_offline(const BlockSolvers& blocks, const std::vector<int>& counts, int threads)
{
    const CoarsePartition& part = blocks.partition();
    const int ne = part.num_edges();
    if (static_cast<int>(counts.size()) != ne)
        throw InputError("build_offline: one count per edge required");
    std::vector<std::vector<BasisFunction>> per_edge(ne);
    parallel_for(ne, threads, [&](int e) {
        const int j = static_cast<int>(part.edge(e).faces.size());
        if (counts[e] < 0 || counts[e] > j) {
            std::ostringstream msg;
            msg << "offline count " << counts[e] << " exceeds J_i=" << j << " on edge " << e;
            throw InputError(msg.str());
        }
        if (counts[e] == 0)
            return;
        const SnapshotSet snaps = build_snapshots(blocks, e);
        const SpectralForms forms = assemble_spectral(part, snaps, blocks.resistivity());
        const SpectralResult spec = solve_spectral(forms.edge_form, forms.neighborhood_form);
        per_edge[e] = offline_functions(snaps, spec, counts[e]);
    });
    MultiscaleSpace space;
    space.offline_count.assign(ne, 0);
    space.online_count.assign(ne, 0);
    for (auto& fns : per_edge)
        for (auto& fn : fns)
            space.append(std::move(fn));
    return space;
}

FluxField global_residual(const SaddleSystem& fine, const FluxField& v_h, const CellField& p_h)
{
    if (fine.num_faces() != v_h.size() || fine.num_cells() != p_h.size())
        throw InputError("global_residual: expects a whole-domain system");
    FluxField r = fine.mass.cwiseProduct(v_h) + fine.div.transpose() * p_h - fine.velocity_rhs;
    for (int f = 0; f < fine.num_faces(); ++f)
        if (fine.essential[f])
            r[f] = 0.0;
    return r;
}

LocalResidual compute_residual(const SaddleSystem& fine, const FluxField& v_h, const CellField& p_h,
                               const std::vector<int>& faces)
{
    if (fine.num_faces() != v_h.size() || fine.num_cells() != p_h.size())
        throw InputError("compute_residual: expects a whole-domain system");
    LocalResidual out;
    out.faces = faces;
    out.values.resize(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t k = 0; k < faces.size(); ++k) {
        const int f = faces[k];
        double r = 0.0;
        if (!fine.essential[f]) {
            r = fine.mass[f] * v_h[f] - fine.velocity_rhs[f];
            for (Eigen::SparseMatrix<double>::InnerIterator it(fine.div, f); it; ++it)
                r += it.value() * p_h[it.row()];
        }
        out.values[static_cast<Eigen::Index>(k)] = r;
    }
    return out;
}

RieszSolver::RieszSolver(const CoarsePartition& partition, int edge, int layers, const CellField& res)
    : region_(oversample(partition, edge, layers))
    , system_(assemble_region(partition.grid(), region_.cells, res))
    , solver_(std::make_unique<SaddleSolver>(system_))
{
    for (int lf = 0; lf < system_.num_faces(); ++lf)
        if (!system_.essential[lf])
            test_faces_.push_back(system_.faces[lf]);
}

FluxField RieszSolver::represent(const LocalResidual& residual, int num_faces) const
{
    Eigen::VectorXd g = Eigen::VectorXd::Zero(system_.num_faces());
    for (std::size_t k = 0; k < residual.faces.size(); ++k) {
        const auto it = std::lower_bound(system_.faces.begin(), system_.faces.end(), residual.faces[k]);
        if (it == system_.faces.end() || *it != residual.faces[k])
            continue;
        g[it - system_.faces.begin()] = residual.values[static_cast<Eigen::Index>(k)];
    }
    const SaddleSolution sol = solver_->solve(g, Eigen::VectorXd::Zero(system_.num_cells()),
                                              Eigen::VectorXd::Zero(system_.num_faces()));
    FluxField out = FluxField::Zero(num_faces);
    scatter_flux(system_, sol.flux, out);
    return out;
}

std::optional<BasisFunction> online_basis(const BlockSolvers& blocks, const RieszSolver& riesz,
                                          const LocalResidual& residual, double scale, double tolerance)
{
    if (residual.norm() <= tolerance * scale)
        return std::nullopt;
    const CoarsePartition& part = blocks.partition();
    const int edge = riesz.region().edge;
    const FluxField phi = riesz.represent(residual, part.grid().num_faces());
    // M phi is the part of the residual seen by divergence-free test fields;
    // the rest is absorbed by the fine pressure multiplier
    const SaddleSystem& local = riesz.system();
    double seen2 = 0.0;
    for (int lf = 0; lf < local.num_faces(); ++lf) {
        const double mv = local.mass[lf] * phi[local.faces[lf]];
        seen2 += mv * mv;
    }
    if (std::sqrt(seen2) <= tolerance * scale)
        return std::nullopt;
    std::vector<double> trace = edge_trace(part, edge, phi);
    const double area = part.grid().face_area(part.edge(edge).axis);
    double norm2 = 0.0;
    for (double t : trace)
        norm2 += t * t * area;
    const double norm = std::sqrt(norm2);
    // a trace far below the representative's size carries no information on E_i
    if (norm == 0.0 || norm <= 1e-12 * phi.norm() * std::sqrt(area))
        return std::nullopt;
    for (double& t : trace)
        t /= norm;
    return edge_basis(blocks, edge, trace, BasisKind::online);
}

double residual_norm(const SaddleSolver& fine_solver, const SaddleSystem& fine, const FluxField& residual)
{
    Eigen::VectorXd g = residual;
    for (int f = 0; f < fine.num_faces(); ++f)
        if (fine.essential[f])
            g[f] = 0.0;
    const SaddleSolution sol =
        fine_solver.solve(g, Eigen::VectorXd::Zero(fine.num_cells()), Eigen::VectorXd::Zero(fine.num_faces()));
    return std::sqrt(std::max(0.0, sol.flux.dot(fine.mass.cwiseProduct(sol.flux))));
}

MultiscaleSpace enrich(const BlockSolvers& blocks, MultiscaleSpace space, const SaddleSystem& fine,
                       const FluxField& lift, int sweeps, const EnrichOptions& options, EnrichReport* report)
{
    if (sweeps < 0)
        throw InputError("enrich: negative sweep count");
    if (sweeps == 0 && report == nullptr)
        return space;
    const CoarsePartition& part = blocks.partition();
    const int ne = part.num_edges();
    const int layers = options.layers >= 0 ? options.layers : default_oversampling_layers(part);

    const SaddleSolver fine_solver(fine);
    std::vector<std::unique_ptr<RieszSolver>> riesz(ne);
    if (sweeps > 0)
        parallel_for(ne, options.threads, [&](int e) {
            riesz[e] = std::make_unique<RieszSolver>(part, e, layers, blocks.resistivity());
        });

    for (int sweep = 0; sweep <= sweeps; ++sweep) {
        const CoarseOperator op(part, space, lift);
        const CoarseSolution coarse = solve_coarse(op, assemble_coarse(op, fine));
        const Downscaled d = downscale(op, coarse);
        const FluxField r = global_residual(fine, d.velocity, d.pressure);
        if (report)
            report->residual_norms.push_back(residual_norm(fine_solver, fine, r));
        if (sweep == sweeps)
            break;

        double scale = (fine.mass.cwiseProduct(d.velocity)).norm() + (fine.div.transpose() * d.pressure).norm() +
                       fine.velocity_rhs.norm();
        scale = std::max(scale, 1e-300);
        std::vector<std::optional<BasisFunction>> added(ne);
        parallel_for(ne, options.threads, [&](int e) {
            const LocalResidual local = compute_residual(fine, d.velocity, d.pressure, riesz[e]->test_faces());
            added[e] = online_basis(blocks, *riesz[e], local, scale, options.tolerance);
        });
        int count = 0;
        for (auto& fn : added)
            if (fn) {
                space.append(std::move(*fn));
                ++count;
            }
        ++space.generation;
        if (report)
            report->added.push_back(count);
    }
    return space;
}

} // namespace msflow
