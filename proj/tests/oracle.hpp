#pragma once

// Independent dense reference computations for the unit tests. Nothing here
// calls the library's assembly or solvers; only grid indexing is shared.

#include "msflow/mesh.hpp"
#include "msflow/fields.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace oracle {

struct DenseSolution {
    Eigen::VectorXd flux;     // indexed by global face id, zero outside the region
    Eigen::VectorXd pressure; // indexed by position in `cells`, zero mean
};

// Mixed problem on a cell set: lumped face mass sum(|V|/2 * res), divergence
// +/- area, prescribed normal flux on every face that leaves the region or
// lies on the domain boundary, and on `designated` faces. Solved as one dense
// bordered KKT system with a mean-zero pressure multiplier.
inline DenseSolution dense_mixed(const msflow::FineGrid& grid, const std::vector<int>& cells,
                                 const Eigen::VectorXd& res, const Eigen::VectorXd& rate,
                                 const Eigen::VectorXd& prescribed, const std::vector<int>& designated = {})
{
    using msflow::Axis;
    const std::set<int> in(cells.begin(), cells.end());
    const std::set<int> fixed(designated.begin(), designated.end());

    // collect faces by walking the six neighbours of every cell
    std::map<int, int> face_index;
    struct FaceInfo {
        int id;
        int lo;
        int hi;
        double area;
    };
    std::vector<FaceInfo> faces;
    const auto n = grid.cells_per_axis();
    const double vol = grid.spacing(Axis::x) * grid.spacing(Axis::y) * grid.spacing(Axis::z);
    for (int c : cells) {
        const auto ijk = grid.cell_ijk(c);
        for (int a = 0; a < 3; ++a) {
            const double area = vol / grid.spacing(static_cast<Axis>(a));
            for (int side = 0; side < 2; ++side) {
                msflow::Index3 pos = ijk;
                pos[a] += side;
                const int id = grid.face(static_cast<Axis>(a), pos);
                if (face_index.count(id))
                    continue;
                msflow::Index3 lo = pos, hi = pos;
                lo[a] -= 1;
                const int lo_cell = lo[a] >= 0 ? lo[0] + n[0] * (lo[1] + n[1] * lo[2]) : -1;
                const int hi_cell = hi[a] < n[a] ? hi[0] + n[0] * (hi[1] + n[1] * hi[2]) : -1;
                face_index[id] = static_cast<int>(faces.size());
                faces.push_back({id, lo_cell, hi_cell, area});
            }
        }
    }
    std::map<int, int> cell_index;
    for (std::size_t i = 0; i < cells.size(); ++i)
        cell_index[cells[i]] = static_cast<int>(i);

    const int nf = static_cast<int>(faces.size());
    const int nc = static_cast<int>(cells.size());
    const int size = nf + nc + 1;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
    for (int i = 0; i < nf; ++i) {
        const auto& f = faces[i];
        const bool lo_in = f.lo >= 0 && in.count(f.lo);
        const bool hi_in = f.hi >= 0 && in.count(f.hi);
        const bool essential = !(lo_in && hi_in) || fixed.count(f.id);
        if (lo_in)
            k(nf + cell_index[f.lo], i) += f.area;
        if (hi_in)
            k(nf + cell_index[f.hi], i) -= f.area;
        if (essential) {
            k(i, i) = 1.0;
            rhs[i] = prescribed[f.id];
            continue;
        }
        k(i, i) = 0.5 * vol * (res[f.lo] + res[f.hi]);
        k(i, nf + cell_index[f.lo]) += f.area;
        k(i, nf + cell_index[f.hi]) -= f.area;
    }
    for (int c = 0; c < nc; ++c) {
        rhs[nf + c] = rate[cells[c]] * vol;
        k(nf + c, size - 1) = 1.0;
        k(size - 1, nf + c) = 1.0;
    }
    const Eigen::VectorXd x = k.fullPivLu().solve(rhs);
    DenseSolution out;
    out.flux = Eigen::VectorXd::Zero(grid.num_faces());
    for (int i = 0; i < nf; ++i)
        out.flux[faces[i].id] = x[i];
    out.pressure = x.segment(nf, nc);
    return out;
}

// Generalized symmetric eigenproblem a x = lambda s x through a Cholesky
// transform and a standard symmetric eigensolver.
struct DenseEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline DenseEigen dense_generalized_eigen(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s)
{
    const Eigen::MatrixXd l = s.llt().matrixL();
    const Eigen::MatrixXd linv = l.inverse();
    const Eigen::MatrixXd c = linv * a * linv.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
    DenseEigen out;
    out.values = es.eigenvalues();
    out.vectors = linv.transpose() * es.eigenvectors();
    return out;
}

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = u(rng);
    return m * m.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

} // namespace oracle
