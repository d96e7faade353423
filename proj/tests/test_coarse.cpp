#include "doctest.h"
#include "oracle.hpp"

#include "msflow/basis_limited_global.hpp"
#include "msflow/coarse_system.hpp"
#include "msflow/fields_io.hpp"
#include "msflow/wells.hpp"

#include <random>

using namespace msflow;

namespace {

double face_error(const FluxField& v, const FluxField& ref)
{
    return (v - ref).norm() / ref.norm();
}

// Coarse solve with the given space; lift made of boundary and source parts.
Downscaled coarse_solve(const CoarsePartition& p, const BlockSolvers& blocks, const MultiscaleSpace& space,
                        const SaddleSystem& fine, const SourceSpec& s, bool with_source_lift = true)
{
    FluxField lift = boundary_lift(blocks, s.boundary_flux);
    if (with_source_lift)
        lift += source_lift(blocks, s.rate);
    const CoarseOperator op(p, space, lift);
    return downscale(op, solve_coarse(op, assemble_coarse(op, fine)));
}

} // namespace

TEST_CASE("edge basis against per-block dense solves")
{
    const FineGrid g({8, 4, 4});
    const PermeabilityField k({8, 4, 4}, Eigen::VectorXd::Ones(g.num_cells()));
    const CoarsePartition p(g, {4, 4, 4});
    const CellField res = CellField::Ones(g.num_cells());
    const BlockSolvers blocks(p, res);
    REQUIRE(p.num_edges() == 1);

    // uniform crossing velocity gives a constant trace
    const FluxField v_sp = solve_single_phase(g, k, flow_through(g, Axis::x, 1.0).sources(g));
    const auto trace = edge_trace(p, 0, v_sp);
    for (double t : trace)
        CHECK(t == doctest::Approx(1.0).epsilon(1e-12));

    const BasisFunction fn = edge_basis(blocks, 0, trace, BasisKind::limited_global);
    const FluxField v = fn.to_fine(g.num_faces());
    const auto& edge = p.edge(0);
    const double q = edge_flux(p, 0, trace);
    for (int side = 0; side < 2; ++side) {
        const int b = side == 0 ? edge.lo_block : edge.hi_block;
        FluxField prescribed = FluxField::Zero(g.num_faces());
        for (std::size_t j = 0; j < edge.faces.size(); ++j)
            prescribed[edge.faces[j]] = trace[j];
        const CellField alpha = CellField::Constant(g.num_cells(), (side == 0 ? q : -q) / p.block_volume(b));
        const auto ref = oracle::dense_mixed(g, p.block_cells(b), res, alpha, prescribed);
        for (int c : p.block_cells(b))
            for (int f : g.cell_faces(c))
                CHECK(v[f] == doctest::Approx(ref.flux[f]).epsilon(1e-9).scale(1.0));
    }
    // flux is piecewise linear along x: the fine x-faces of the low block carry 1, 0.75, 0.5, 0.25
    for (int i = 0; i <= 4; ++i)
        CHECK(v[g.face(Axis::x, {i, 1, 2})] == doctest::Approx(i / 4.0).epsilon(1e-12).scale(1.0));
    // divergence constant per block
    const CellField d = divergence(g, v);
    for (int c : p.block_cells(edge.lo_block))
        CHECK(d[c] == doctest::Approx(q / p.block_volume(edge.lo_block)));
    CHECK_THROWS_AS(edge_basis(blocks, 0, std::vector<double>(3, 1.0), BasisKind::offline), InputError);
}

TEST_CASE("limited global basis is linear in the seed")
{
    const FineGrid g({8, 8, 4});
    const auto k = gen_synthetic(SyntheticKind::channel, {8, 8, 4}, 1e3, 4);
    const CoarsePartition p(g, {4, 4, 4});
    const WellSet w = five_spot(g, 1.0);
    const FluxField v_sp = solve_single_phase(g, k, w.sources(g));
    const auto a = build_basis(p, k, CellField::Ones(g.num_cells()), v_sp);
    const auto b = build_basis(p, k, CellField::Ones(g.num_cells()), 3.5 * v_sp);
    REQUIRE(a.space.dimension() == p.num_edges());
    for (int j = 0; j < a.space.dimension(); ++j)
        CHECK((b.space.functions[j].values - 3.5 * a.space.functions[j].values).norm() <=
              1e-12 * (1.0 + b.space.functions[j].values.norm()));
    CHECK(a.fallback_edges.empty());
}

TEST_CASE("zero traces fall back to the uniform trace")
{
    const FineGrid g({8, 8, 4});
    const PermeabilityField k({8, 8, 4}, Eigen::VectorXd::Ones(g.num_cells()));
    const CoarsePartition p(g, {4, 4, 4});
    const FluxField v_sp = solve_single_phase(g, k, flow_through(g, Axis::x, 1.0).sources(g));
    const auto basis = build_basis(p, k, CellField::Ones(g.num_cells()), v_sp);
    int y_edges = 0;
    for (const auto& e : p.edges())
        if (e.axis == Axis::y)
            ++y_edges;
    CHECK(static_cast<int>(basis.fallback_edges.size()) == y_edges);
    for (int e : basis.fallback_edges) {
        CHECK(p.edge(e).axis == Axis::y);
        const auto t = edge_trace(p, e, basis.space.functions[e].to_fine(g.num_faces()));
        CHECK(edge_flux(p, e, t) == doctest::Approx(1.0));
    }
}

TEST_CASE("limited global space reproduces single-phase flow")
{
    SUBCASE("two blocks, boundary driven")
    {
        const FineGrid g({8, 4, 4});
        const auto k = gen_synthetic(SyntheticKind::channel, {8, 4, 4}, 1e4, 6);
        const CoarsePartition p(g, {4, 4, 4});
        const SourceSpec s = flow_through(g, Axis::x, 1.0).sources(g);
        const FluxField v_sp = solve_single_phase(g, k, s);
        const BlockSolvers blocks(p, resistivity(k, CellField::Ones(g.num_cells())));
        const auto basis = build_basis(blocks, v_sp);
        const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), s);
        const Downscaled d = coarse_solve(p, blocks, basis.space, fine, s);
        CHECK(face_error(d.velocity, v_sp) <= 1e-8);
    }
    SUBCASE("wells on a heterogeneous field")
    {
        const FineGrid g({16, 16, 8});
        const auto k = gen_synthetic(SyntheticKind::channel, {16, 16, 8}, 1e4, 9);
        const CoarsePartition p(g, {4, 4, 4});
        const SourceSpec s = five_spot(g, 1.0).sources(g);
        const FluxField v_sp = solve_single_phase(g, k, s);
        const BlockSolvers blocks(p, resistivity(k, CellField::Ones(g.num_cells())));
        const auto basis = build_basis(blocks, v_sp);
        const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), s);
        const Downscaled d = coarse_solve(p, blocks, basis.space, fine, s);
        CHECK(face_error(d.velocity, v_sp) <= 1e-8);
        CHECK(coarse_conservation_residual(p, d.velocity, s.rate) <= 1e-10);
    }
}

TEST_CASE("identity prolongation reproduces the fine system")
{
    const FineGrid g({4, 3, 2});
    const auto k = gen_synthetic(SyntheticKind::channel, {4, 3, 2}, 50.0, 1);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SourceSpec s = SourceSpec::zero(g);
    for (int f = 0; f < g.num_faces(); ++f)
        if (g.is_boundary_face(f))
            s.boundary_flux[f] = u(rng);
    for (int c = 0; c < g.num_cells(); ++c)
        s.rate[c] = u(rng);
    s.rate.array() -= s.imbalance(g) / g.num_cells();
    const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), s);

    std::vector<Eigen::Triplet<double>> trips;
    int col = 0;
    std::vector<int> interior;
    for (int f = 0; f < g.num_faces(); ++f)
        if (!g.is_boundary_face(f)) {
            trips.emplace_back(f, col++, 1.0);
            interior.push_back(f);
        }
    Eigen::SparseMatrix<double> V(g.num_faces(), col);
    V.setFromTriplets(trips.begin(), trips.end());
    std::vector<int> groups(g.num_cells());
    for (int c = 0; c < g.num_cells(); ++c)
        groups[c] = c;
    FluxField lift = FluxField::Zero(g.num_faces());
    for (int f = 0; f < g.num_faces(); ++f)
        if (g.is_boundary_face(f))
            lift[f] = s.boundary_flux[f];
    const CoarseOperator op(g, V, groups, g.num_cells(), lift);
    const CoarseSystem cs = assemble_coarse(op, fine);
    for (int j = 0; j < col; ++j)
        CHECK(cs.velocity_block.coeff(j, j) == doctest::Approx(fine.mass[interior[j]]));
    CHECK(cs.velocity_block.nonZeros() == col);
    const Downscaled d = downscale(op, solve_coarse(op, cs));
    const SaddleSolution ref = solve(fine);
    CHECK(oracle::relative_error(d.velocity, ref.flux) <= 1e-10);
    CHECK(oracle::relative_error(d.pressure, ref.pressure) <= 1e-10);
}

TEST_CASE("triple products match dense products")
{
    const FineGrid g({8, 4, 4});
    const auto k = gen_synthetic(SyntheticKind::channel, {8, 4, 4}, 1e2, 2);
    const CoarsePartition p(g, {2, 2, 2});
    const SourceSpec s = five_spot(g, 2.0).sources(g);
    const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), s);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MultiscaleSpace space;
    for (int e = 0; e < p.num_edges(); e += 3) {
        BasisFunction fn;
        fn.edge = e;
        for (int f = 0; f < g.num_faces(); f += 1 + e % 5)
            fn.faces.push_back(f);
        fn.values.resize(static_cast<Eigen::Index>(fn.faces.size()));
        for (auto& v : fn.values)
            v = u(rng);
        space.append(fn);
    }
    FluxField lift(g.num_faces());
    for (auto& v : lift)
        v = u(rng);
    const CoarseOperator op(p, space, lift);
    const CoarseSystem cs = assemble_coarse(op, fine);

    const Eigen::MatrixXd V = Eigen::MatrixXd(op.velocity_prolongation());
    const Eigen::MatrixXd P = Eigen::MatrixXd(op.pressure_prolongation());
    const Eigen::MatrixXd A = fine.mass.asDiagonal();
    const Eigen::MatrixXd B = Eigen::MatrixXd(fine.div);
    CHECK((Eigen::MatrixXd(cs.velocity_block) - V.transpose() * A * V).norm() <= 1e-12 * (V.transpose() * A * V).norm());
    CHECK((Eigen::MatrixXd(cs.divergence_block) - P.transpose() * B * V).norm() <= 1e-12 * (P.transpose() * B * V).norm());
    const Eigen::VectorXd rv = V.transpose() * (fine.velocity_rhs - A * lift);
    const Eigen::VectorXd rp = P.transpose() * (fine.pressure_rhs - B * lift);
    CHECK((cs.velocity_rhs - rv).norm() <= 1e-12 * rv.norm());
    CHECK((cs.pressure_rhs - rp).norm() <= 1e-12 * rp.norm());
}

TEST_CASE("downscaling and coarse divergence")
{
    const FineGrid g({8, 8, 4});
    const CoarsePartition p(g, {4, 4, 4});
    const PermeabilityField k({8, 8, 4}, Eigen::VectorXd::Ones(g.num_cells()));
    const BlockSolvers blocks(p, CellField::Ones(g.num_cells()));
    const MultiscaleSpace space = build_basis(blocks, solve_single_phase(g, k, five_spot(g, 1.0).sources(g))).space;
    const CoarseOperator op(p, space);

    SUBCASE("single basis with coefficient one")
    {
        CoarseSolution cs;
        cs.velocity = Eigen::VectorXd::Zero(op.num_velocity());
        cs.velocity[2] = 1.0;
        cs.pressure = Eigen::VectorXd::Zero(op.num_pressure());
        const Downscaled d = downscale(op, cs);
        CHECK((d.velocity - space.functions[2].to_fine(g.num_faces())).norm() == 0.0);
    }
    SUBCASE("block divergence integrals equal P^T B V c")
    {
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        CoarseSolution cs;
        cs.velocity.resize(op.num_velocity());
        for (auto& v : cs.velocity)
            v = u(rng);
        cs.pressure = Eigen::VectorXd::Zero(op.num_pressure());
        const Downscaled d = downscale(op, cs);
        const CellField div = divergence(g, d.velocity);
        const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), SourceSpec::zero(g));
        const Eigen::VectorXd expected = op.pressure_prolongation().transpose() *
                                         (fine.div * op.velocity_prolongation() * cs.velocity);
        for (int b = 0; b < p.num_blocks(); ++b) {
            double sum = 0.0;
            for (int c : p.block_cells(b))
                sum += div[c] * g.cell_volume();
            CHECK(sum == doctest::Approx(expected[b]).scale(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("near-dependent functions are dropped per edge")
{
    const FineGrid g({8, 4, 4});
    const CoarsePartition p(g, {4, 4, 4});
    const BlockSolvers blocks(p, CellField::Ones(g.num_cells()));
    std::vector<double> trace(16, 1.0 / 16.0);
    MultiscaleSpace space;
    space.append(edge_basis(blocks, 0, trace, BasisKind::offline));
    space.append(edge_basis(blocks, 0, trace, BasisKind::online));
    trace[3] = 0.7;
    space.append(edge_basis(blocks, 0, trace, BasisKind::online));
    const CoarseOperator op(p, space);
    CHECK(op.dropped() == std::vector<int>{1});
    CHECK(op.num_velocity() == 2);
    CHECK(op.kept()[2] == 1);
}

TEST_CASE("coarse solve rejects incompatible data")
{
    const FineGrid g({8, 4, 4});
    const CoarsePartition p(g, {4, 4, 4});
    const PermeabilityField k({8, 4, 4}, Eigen::VectorXd::Ones(g.num_cells()));
    const BlockSolvers blocks(p, CellField::Ones(g.num_cells()));
    std::vector<double> trace(16, 1.0);
    MultiscaleSpace space;
    space.append(edge_basis(blocks, 0, trace, BasisKind::offline));
    SourceSpec s = SourceSpec::zero(g);
    s.rate[0] = 1.0;
    const SaddleSystem fine = assemble(g, k, CellField::Ones(g.num_cells()), s);
    const CoarseOperator op(p, space);
    CHECK_THROWS_AS(solve_coarse(op, assemble_coarse(op, fine)), IncompatibleData);
}
