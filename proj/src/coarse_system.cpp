#include "msflow/coarse_system.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace msflow {

namespace {

constexpr double dependence_threshold = 1e-10;

// Modified Gram-Schmidt on the columns of one edge; returns the positions to keep.
std::vector<int> independent_columns(const std::vector<const BasisFunction*>& fns)
{
    std::map<int, int> row;
    for (const auto* fn : fns)
        for (int f : fn->faces)
            row.emplace(f, 0);
    int r = 0;
    for (auto& [f, idx] : row)
        idx = r++;

    std::vector<Eigen::VectorXd> basis;
    std::vector<int> keep;
    for (std::size_t j = 0; j < fns.size(); ++j) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(r);
        for (std::size_t k = 0; k < fns[j]->faces.size(); ++k)
            w[row.at(fns[j]->faces[k])] = fns[j]->values[static_cast<Eigen::Index>(k)];
        const double original = w.norm();
        if (original == 0.0)
            continue;
        for (const auto& q : basis)
            w -= q.dot(w) * q;
        for (const auto& q : basis) // second pass for stability
            w -= q.dot(w) * q;
        const double remaining = w.norm();
        if (remaining < dependence_threshold * original)
            continue;
        basis.push_back(w / remaining);
        keep.push_back(static_cast<int>(j));
    }
    return keep;
}

} // namespace

CoarseOperator::CoarseOperator(const CoarsePartition& partition, const MultiscaleSpace& space, FluxField lift)
    : lift_(std::move(lift))
{
    const FineGrid& grid = partition.grid();
    std::map<int, std::vector<int>> by_edge;
    for (int j = 0; j < space.dimension(); ++j)
        by_edge[space.functions[j].edge].push_back(j);

    std::vector<char> keep(space.dimension(), 0);
    for (const auto& [edge, idx] : by_edge) {
        if (edge < 0) {
            for (int j : idx)
                keep[j] = 1;
            continue;
        }
        std::vector<const BasisFunction*> fns;
        for (int j : idx)
            fns.push_back(&space.functions[j]);
        for (int pos : independent_columns(fns))
            keep[idx[pos]] = 1;
    }

    std::vector<Eigen::Triplet<double>> trips;
    kept_.assign(space.dimension(), -1);
    int col = 0;
    for (int j = 0; j < space.dimension(); ++j) {
        if (!keep[j]) {
            dropped_.push_back(j);
            continue;
        }
        const BasisFunction& fn = space.functions[j];
        for (std::size_t k = 0; k < fn.faces.size(); ++k) {
            const double v = fn.values[static_cast<Eigen::Index>(k)];
            if (v != 0.0)
                trips.emplace_back(fn.faces[k], col, v);
        }
        column_edge_.push_back(fn.edge);
        kept_[j] = col++;
    }
    velocity_.resize(grid.num_faces(), col);
    velocity_.setFromTriplets(trips.begin(), trips.end());
    finish(grid, partition.cell_blocks(), partition.num_blocks());
}

CoarseOperator::CoarseOperator(const FineGrid& grid, SparseMatrix velocity, std::vector<int> cell_group,
                               int num_groups, FluxField lift, std::vector<int> column_edge)
    : velocity_(std::move(velocity)), lift_(std::move(lift)), column_edge_(std::move(column_edge))
{
    if (velocity_.rows() != grid.num_faces())
        throw InputError("coarse operator: velocity prolongation rows must equal the fine face count");
    if (column_edge_.empty())
        column_edge_.assign(static_cast<std::size_t>(velocity_.cols()), -1);
    kept_.resize(static_cast<std::size_t>(velocity_.cols()));
    for (int j = 0; j < velocity_.cols(); ++j)
        kept_[j] = j;
    finish(grid, std::move(cell_group), num_groups);
}

void CoarseOperator::finish(const FineGrid& grid, std::vector<int> cell_group, int num_groups)
{
    if (static_cast<int>(cell_group.size()) != grid.num_cells())
        throw InputError("coarse operator: one group per fine cell required");
    if (lift_.size() == 0)
        lift_ = FluxField::Zero(grid.num_faces());
    if (lift_.size() != grid.num_faces())
        throw InputError("coarse operator: lift size does not match the grid");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(cell_group.size());
    group_volume_ = Eigen::VectorXd::Zero(num_groups);
    for (int c = 0; c < grid.num_cells(); ++c) {
        const int g = cell_group[c];
        if (g < 0 || g >= num_groups)
            throw InputError("coarse operator: cell group out of range");
        trips.emplace_back(c, g, 1.0);
        group_volume_[g] += grid.cell_volume();
    }
    pressure_.resize(grid.num_cells(), num_groups);
    pressure_.setFromTriplets(trips.begin(), trips.end());
}

CoarseSystem assemble_coarse(const CoarseOperator& op, const SaddleSystem& fine)
{
    const auto& V = op.velocity_prolongation();
    const auto& P = op.pressure_prolongation();
    if (fine.num_faces() != V.rows() || fine.num_cells() != P.rows())
        throw InputError("assemble_coarse: fine system is not a whole-domain system of this grid");

    CoarseSystem out;
    const Eigen::SparseMatrix<double> mv = fine.mass.asDiagonal() * V;
    out.velocity_block = (V.transpose() * mv).pruned();
    const Eigen::SparseMatrix<double> bv = fine.div * V;
    out.divergence_block = (P.transpose() * bv).pruned();

    const Eigen::VectorXd& lift = op.lift();
    out.velocity_rhs = V.transpose() * (fine.velocity_rhs - fine.mass.cwiseProduct(lift));
    out.pressure_rhs = P.transpose() * (fine.pressure_rhs - fine.div * lift);
    return out;
}

namespace {

std::string suspect_edges(const CoarseOperator& op, const Eigen::SparseMatrix<double>& a)
{
    std::map<int, std::vector<int>> cols;
    for (int j = 0; j < a.cols(); ++j)
        cols[op.column_edge()[j]].push_back(j);
    std::ostringstream out;
    bool any = false;
    for (const auto& [edge, idx] : cols) {
        Eigen::MatrixXd sub(idx.size(), idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < idx.size(); ++c)
                sub(r, c) = a.coeff(idx[r], idx[c]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        if (ev.size() > 0 && ev[0] <= 1e-12 * std::max(ev[ev.size() - 1], 1e-300)) {
            out << (any ? ", " : "") << edge;
            any = true;
        }
    }
    return any ? out.str() : std::string("none isolated");
}

} // namespace

CoarseSolution solve_coarse(const CoarseOperator& op, const CoarseSystem& sys)
{
    const auto& A = sys.velocity_block;
    const auto& B = sys.divergence_block;
    const int nv = static_cast<int>(A.rows());
    const int np = static_cast<int>(B.rows());
    if (A.cols() != nv || B.cols() != nv || sys.velocity_rhs.size() != nv || sys.pressure_rhs.size() != np)
        throw InputError("solve_coarse: inconsistent reduced system");

    // constant pressure is in the kernel of B^T whenever every column is divergence-balanced
    const Eigen::VectorXd bt1 = B.transpose() * Eigen::VectorXd::Ones(np);
    double bnorm = 0.0;
    for (int k = 0; k < B.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(B, k); it; ++it)
            bnorm = std::max(bnorm, std::abs(it.value()));
    const bool floating = bt1.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(bnorm, 1e-300);

    if (floating) {
        const double imbalance = sys.pressure_rhs.sum();
        const double scale = sys.pressure_rhs.cwiseAbs().sum();
        if (std::abs(imbalance) > 1e-10 * scale && std::abs(imbalance) > 1e-300)
            throw IncompatibleData("coarse system: incompatible source data, imbalance " + std::to_string(imbalance),
                                   imbalance);
    }
    const int pinned = floating ? 0 : -1;
    auto prow = [&](int g) { return pinned < 0 ? nv + g : (g < pinned ? nv + g : nv + g - 1); };
    const int n = nv + np - (pinned >= 0 ? 1 : 0);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(A.nonZeros() + 2 * B.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int k = 0; k < B.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(B, k); it; ++it) {
            const int g = static_cast<int>(it.row());
            if (g == pinned)
                continue;
            trips.emplace_back(prow(g), static_cast<int>(it.col()), it.value());
            trips.emplace_back(static_cast<int>(it.col()), prow(g), it.value());
        }
    Eigen::SparseMatrix<double> kkt(n, n);
    kkt.setFromTriplets(trips.begin(), trips.end());
    kkt.makeCompressed();

    Eigen::VectorXd rhs(n);
    rhs.head(nv) = sys.velocity_rhs;
    for (int g = 0; g < np; ++g)
        if (g != pinned)
            rhs[prow(g)] = sys.pressure_rhs[g];

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(kkt);
    if (lu.info() != Eigen::Success)
        throw SolverFailure("coarse system: singular reduced velocity block; suspect edges: " +
                                suspect_edges(op, A),
                            1.0);
    const Eigen::VectorXd x = lu.solve(rhs);

    CoarseSolution out;
    out.velocity = x.head(nv);
    out.pressure = Eigen::VectorXd::Zero(np);
    for (int g = 0; g < np; ++g)
        if (g != pinned)
            out.pressure[g] = x[prow(g)];
    if (floating) {
        const Eigen::VectorXd& vol = op.group_volume();
        out.pressure.array() -= vol.dot(out.pressure) / vol.sum();
    }

    const Eigen::VectorXd r1 = A * out.velocity + B.transpose() * out.pressure - sys.velocity_rhs;
    const Eigen::VectorXd r2 = B * out.velocity - sys.pressure_rhs;
    const double denom = std::max((A * out.velocity).norm() + sys.velocity_rhs.norm() + sys.pressure_rhs.norm() +
                                      (B.transpose() * out.pressure).norm(),
                                  1e-300);
    out.residual = (r1.norm() + r2.norm()) / denom;
    if (!std::isfinite(out.residual) || out.residual > 1e-8)
        throw SolverFailure("coarse system: residual " + std::to_string(out.residual) +
                                " above tolerance; suspect edges: " + suspect_edges(op, A),
                            out.residual);
    return out;
}

Downscaled downscale(const CoarseOperator& op, const CoarseSolution& coarse)
{
    Downscaled out;
    out.velocity = op.lift() + op.velocity_prolongation() * coarse.velocity;
    out.pressure = op.pressure_prolongation() * coarse.pressure;
    return out;
}

FluxField boundary_lift(const BlockSolvers& blocks, const FluxField& g)
{
    const CoarsePartition& part = blocks.partition();
    const FineGrid& grid = part.grid();
    FluxField lift = FluxField::Zero(grid.num_faces());
    if (g.size() != grid.num_faces())
        throw InputError("boundary_lift: flux size does not match the grid");
    for (int b = 0; b < part.num_blocks(); ++b) {
        const SaddleSystem& sys = blocks.system(b);
        Eigen::VectorXd ess = Eigen::VectorXd::Zero(sys.num_faces());
        double outflow = 0.0;
        bool any = false;
        for (int lf = 0; lf < sys.num_faces(); ++lf) {
            const int f = sys.faces[lf];
            if (!grid.is_boundary_face(f) || g[f] == 0.0)
                continue;
            ess[lf] = g[f];
            const int sign = grid.face_cells(f)[1] < 0 ? 1 : -1;
            outflow += sign * g[f] * grid.face_area(f);
            any = true;
        }
        if (!any)
            continue;
        const double alpha = outflow / part.block_volume(b);
        const Eigen::VectorXd prhs = Eigen::VectorXd::Constant(sys.num_cells(), alpha * sys.cell_volume);
        const SaddleSolution sol = blocks.solver(b).solve(Eigen::VectorXd::Zero(sys.num_faces()), prhs, ess);
        for (int lf = 0; lf < sys.num_faces(); ++lf)
            if (sol.flux[lf] != 0.0)
                lift[sys.faces[lf]] = sol.flux[lf];
    }
    return lift;
}

FluxField source_lift(const BlockSolvers& blocks, const CellField& rate)
{
    const CoarsePartition& part = blocks.partition();
    const FineGrid& grid = part.grid();
    if (rate.size() != grid.num_cells())
        throw InputError("source_lift: rate size does not match the grid");
    FluxField lift = FluxField::Zero(grid.num_faces());
    for (int b = 0; b < part.num_blocks(); ++b) {
        const SaddleSystem& sys = blocks.system(b);
        double mean = 0.0;
        bool constant = true;
        for (int c : sys.cells) {
            mean += rate[c];
            constant = constant && rate[c] == rate[sys.cells.front()];
        }
        if (constant)
            continue;
        mean /= sys.num_cells();
        Eigen::VectorXd prhs(sys.num_cells());
        for (int lc = 0; lc < sys.num_cells(); ++lc)
            prhs[lc] = (rate[sys.cells[lc]] - mean) * sys.cell_volume;
        const SaddleSolution sol = blocks.solver(b).solve(Eigen::VectorXd::Zero(sys.num_faces()), prhs,
                                                          Eigen::VectorXd::Zero(sys.num_faces()));
        for (int lf = 0; lf < sys.num_faces(); ++lf)
            if (!sys.essential[lf])
                lift[sys.faces[lf]] = sol.flux[lf];
    }
    return lift;
}

double coarse_conservation_residual(const CoarsePartition& partition, const FluxField& v, const CellField& rate)
{
    const FineGrid& grid = partition.grid();
    const CellField div = divergence(grid, v);
    Eigen::VectorXd res = Eigen::VectorXd::Zero(partition.num_blocks());
    Eigen::VectorXd mag = Eigen::VectorXd::Zero(partition.num_blocks());
    for (int c = 0; c < grid.num_cells(); ++c) {
        const int b = partition.block_of_cell(c);
        res[b] += (div[c] - rate[c]) * grid.cell_volume();
        mag[b] += std::abs(rate[c]) * grid.cell_volume();
    }
    for (int f = 0; f < grid.num_faces(); ++f) {
        const auto cells = grid.face_cells(f);
        for (int c : cells)
            if (c >= 0)
                mag[partition.block_of_cell(c)] += std::abs(v[f]) * grid.face_area(f);
    }
    const double denom = mag.norm();
    return denom > 0.0 ? res.norm() / denom : res.norm();
}

} // namespace msflow
