#include "msflow/local_basis.hpp"

#include "msflow/parallel.hpp"

#include <algorithm>
#include <utility>

namespace msflow {

BlockSolvers::BlockSolvers(const CoarsePartition& partition, const CellField& res, int threads)
    : partition_(&partition), resistivity_(res)
{
    const int nb = partition.num_blocks();
    systems_.resize(nb);
    std::vector<std::unique_ptr<SaddleSolver>> built(nb);
    parallel_for(nb, threads, [&](int b) {
        systems_[b] = assemble_region(partition.grid(), partition.block_cells(b), res);
        built[b] = std::make_unique<SaddleSolver>(systems_[b]);
    });
    solvers_.reserve(nb);
    for (auto& s : built)
        solvers_.push_back(std::move(*s));
}

double edge_flux(const CoarsePartition& partition, int edge, std::span<const double> trace)
{
    const CoarseEdge& e = partition.edge(edge);
    const double area = partition.grid().face_area(e.axis);
    double q = 0.0;
    for (double t : trace)
        q += t * area;
    return q;
}

std::vector<double> edge_trace(const CoarsePartition& partition, int edge, const FluxField& v)
{
    const CoarseEdge& e = partition.edge(edge);
    std::vector<double> t(e.faces.size());
    for (std::size_t k = 0; k < e.faces.size(); ++k)
        t[k] = v[e.faces[k]];
    return t;
}

BasisFunction edge_basis(const BlockSolvers& blocks, int edge, std::span<const double> trace, BasisKind kind)
{
    const CoarsePartition& part = blocks.partition();
    const CoarseEdge& e = part.edge(edge);
    if (trace.size() != e.faces.size())
        throw InputError("edge_basis: trace length does not match the coarse edge");
    const double q = edge_flux(part, edge, trace);

    std::vector<std::pair<int, double>> entries;
    for (int side = 0; side < 2; ++side) {
        const int b = side == 0 ? e.lo_block : e.hi_block;
        const SaddleSystem& sys = blocks.system(b);
        Eigen::VectorXd ess = Eigen::VectorXd::Zero(sys.num_faces());
        for (std::size_t k = 0; k < e.faces.size(); ++k) {
            const auto it = std::lower_bound(sys.faces.begin(), sys.faces.end(), e.faces[k]);
            ess[it - sys.faces.begin()] = trace[k];
        }
        // the low block drains the edge flux (source), the high block receives it (sink)
        const double alpha = (side == 0 ? q : -q) / part.block_volume(b);
        const Eigen::VectorXd prhs = Eigen::VectorXd::Constant(sys.num_cells(), alpha * sys.cell_volume);
        const SaddleSolution sol =
            blocks.solver(b).solve(Eigen::VectorXd::Zero(sys.num_faces()), prhs, ess);
        for (int lf = 0; lf < sys.num_faces(); ++lf)
            entries.emplace_back(sys.faces[lf], sol.flux[lf]);
    }
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    BasisFunction fn;
    fn.edge = edge;
    fn.kind = kind;
    fn.faces.reserve(entries.size());
    std::vector<double> values;
    values.reserve(entries.size());
    for (const auto& [f, v] : entries) {
        if (!fn.faces.empty() && fn.faces.back() == f)
            continue; // faces of E_i appear in both blocks with the same prescribed value
        fn.faces.push_back(f);
        values.push_back(v);
    }
    fn.values = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    return fn;
}

} // namespace msflow
