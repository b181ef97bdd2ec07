#pragma once

// P1 finite-element assembly on a Triangulation and sparse linear solves.
// All element integrals are closed-form (integrands are polynomial).

#include <array>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "thermomag/error.hpp"
#include "thermomag/mesh.hpp"

namespace thermomag {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

enum class Region { all, magnet };

/// Per-node flag; true means the value is constrained to zero.
using DirichletMask = std::vector<std::uint8_t>;

namespace fem {

/// Constant gradients of the three P1 hat functions on element `e`.
inline std::array<Vec2, 3> hat_gradients(const Triangulation& mesh, int e) {
    const auto& t = mesh.elements[e];
    const Vec2& p0 = mesh.nodes[t[0]];
    const Vec2& p1 = mesh.nodes[t[1]];
    const Vec2& p2 = mesh.nodes[t[2]];
    const double two_area = 2.0 * mesh.element_area[e];
    return {Vec2((p1.y() - p2.y()) / two_area, (p2.x() - p1.x()) / two_area),
            Vec2((p2.y() - p0.y()) / two_area, (p0.x() - p2.x()) / two_area),
            Vec2((p0.y() - p1.y()) / two_area, (p1.x() - p0.x()) / two_area)};
}

inline bool in_region(const Triangulation& mesh, int e, Region region) {
    return region == Region::all || mesh.magnet_flag[e] != 0;
}

inline SparseMatrix from_triplets(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& trips) {
    SparseMatrix A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    return A;
}

}  // namespace fem

/// A[i,j] = sum_e coeff_e * int_e grad(phi_i) . grad(phi_j).
inline SparseMatrix assemble_stiffness(const Triangulation& mesh, std::span<const double> coeff) {
    if (coeff.size() != mesh.num_elements()) throw DimensionError("stiffness coefficient size mismatch");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(9 * mesh.num_elements());
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
        if (coeff[e] == 0.0) continue;
        const auto g = fem::hat_gradients(mesh, e);
        const double s = coeff[e] * mesh.element_area[e];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(mesh.elements[e][i], mesh.elements[e][j], s * g[i].dot(g[j]));
    }
    return fem::from_triplets(static_cast<Eigen::Index>(mesh.num_nodes()), trips);
}

inline SparseMatrix assemble_stiffness(const Triangulation& mesh, double coeff = 1.0) {
    const std::vector<double> c(mesh.num_elements(), coeff);
    return assemble_stiffness(mesh, c);
}

/// Consistent P1 mass matrix weighted by a per-element constant.
inline SparseMatrix assemble_weighted_mass(const Triangulation& mesh, std::span<const double> coeff) {
    if (coeff.size() != mesh.num_elements()) throw DimensionError("mass coefficient size mismatch");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(9 * mesh.num_elements());
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
        if (coeff[e] == 0.0) continue;
        const double s = coeff[e] * mesh.element_area[e] / 12.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(mesh.elements[e][i], mesh.elements[e][j], (i == j ? 2.0 : 1.0) * s);
    }
    return fem::from_triplets(static_cast<Eigen::Index>(mesh.num_nodes()), trips);
}

inline SparseMatrix assemble_mass(const Triangulation& mesh, Region region = Region::all) {
    std::vector<double> c(mesh.num_elements());
    for (int e = 0; e < static_cast<int>(c.size()); ++e) c[e] = fem::in_region(mesh, e, region) ? 1.0 : 0.0;
    return assemble_weighted_mass(mesh, c);
}

/// R[i,j] = sum over edges of int_edge phi_i phi_j dS.
inline SparseMatrix assemble_boundary_mass(const Triangulation& mesh, std::span<const BoundaryEdge> edges) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(4 * edges.size());
    for (const auto& ed : edges) {
        const double s = ed.length / 6.0;
        trips.emplace_back(ed.a, ed.a, 2.0 * s);
        trips.emplace_back(ed.b, ed.b, 2.0 * s);
        trips.emplace_back(ed.a, ed.b, s);
        trips.emplace_back(ed.b, ed.a, s);
    }
    return fem::from_triplets(static_cast<Eigen::Index>(mesh.num_nodes()), trips);
}

/// r[j] = int over edges of phi_j dS.
inline Vector assemble_boundary_load(const Triangulation& mesh, std::span<const BoundaryEdge> edges) {
    Vector r = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (const auto& ed : edges) {
        r[ed.a] += 0.5 * ed.length;
        r[ed.b] += 0.5 * ed.length;
    }
    return r;
}

/// b[j] = sum_e value_e * int_e phi_j over the region.
inline Vector assemble_p0_load(const Triangulation& mesh, std::span<const double> values, Region region = Region::all) {
    if (values.size() != mesh.num_elements()) throw DimensionError("P0 load size mismatch");
    Vector b = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
        if (!fem::in_region(mesh, e, region)) continue;
        const double share = values[e] * mesh.element_area[e] / 3.0;
        for (int k = 0; k < 3; ++k) b[mesh.elements[e][k]] += share;
    }
    return b;
}

/// b[j] = sum over magnet elements of area_e * (m_e . grad phi_j). `m` holds one
/// vector per mesh element; entries of non-magnet elements are ignored.
inline Vector assemble_div_load(const Triangulation& mesh, std::span<const Vec2> m) {
    if (m.size() != mesh.num_elements()) throw DimensionError("magnetization field size mismatch");
    Vector b = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
    for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
        if (!mesh.magnet_flag[e]) continue;
        const auto g = fem::hat_gradients(mesh, e);
        for (int k = 0; k < 3; ++k) b[mesh.elements[e][k]] += mesh.element_area[e] * m[e].dot(g[k]);
    }
    return b;
}

inline bool is_symmetric(const SparseMatrix& A, double tol = 0.0) {
    const SparseMatrix At = A.transpose();
    return (A - At).norm() <= tol * A.norm();
}

/// Applies homogeneous Dirichlet constraints by row/column elimination with a
/// unit diagonal.
inline SparseMatrix apply_dirichlet(const SparseMatrix& A, const DirichletMask& mask) {
    if (mask.size() != static_cast<std::size_t>(A.rows())) throw DimensionError("Dirichlet mask size mismatch");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(A.nonZeros()));
    for (int k = 0; k < A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            if (mask[it.row()] || mask[it.col()]) continue;
            trips.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
    return fem::from_triplets(A.rows(), trips);
}

inline DirichletMask mask_from_nodes(std::size_t num_nodes, std::span<const int> nodes) {
    DirichletMask mask(num_nodes, 0);
    for (int i : nodes) mask[static_cast<std::size_t>(i)] = 1;
    return mask;
}

/// Relative residual used by every solve: 1e-10.
inline constexpr double solve_rtol = 1e-10;

/// A factorized (possibly Dirichlet-constrained) system that can be solved
/// repeatedly. Symmetric matrices use LDL^T, others sparse LU.
class FactorizedSystem {
public:
    FactorizedSystem() = default;

    explicit FactorizedSystem(const SparseMatrix& A, std::optional<DirichletMask> mask = std::nullopt)
        : mask_(std::move(mask)) {
        if (A.rows() != A.cols()) throw DimensionError("matrix is not square");
        matrix_ = mask_ ? apply_dirichlet(A, *mask_) : A;
        symmetric_ = is_symmetric(matrix_);
        if (symmetric_) {
            ldlt_.compute(matrix_);
            if (ldlt_.info() != Eigen::Success) throw SolverError("LDL^T factorization failed (singular system)", INFINITY);
        } else {
            lu_.analyzePattern(matrix_);
            lu_.factorize(matrix_);
            if (lu_.info() != Eigen::Success) throw SolverError("LU factorization failed (singular system)", INFINITY);
        }
    }

    Vector solve(const Vector& b) const {
        if (b.size() != matrix_.rows()) throw DimensionError("right-hand side size mismatch");
        Vector rhs = b;
        if (mask_)
            for (Eigen::Index i = 0; i < rhs.size(); ++i)
                if ((*mask_)[i]) rhs[i] = 0.0;
        Vector x = symmetric_ ? Vector(ldlt_.solve(rhs)) : Vector(lu_.solve(rhs));
        if (mask_)
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if ((*mask_)[i]) x[i] = 0.0;
        const double bn = rhs.norm();
        const double res = (matrix_ * x - rhs).norm();
        if (!std::isfinite(res) || res > solve_rtol * bn) {
            // One step of iterative refinement before giving up.
            const Vector r = rhs - matrix_ * x;
            x += symmetric_ ? Vector(ldlt_.solve(r)) : Vector(lu_.solve(r));
            const double res2 = (matrix_ * x - rhs).norm();
            if (!std::isfinite(res2) || res2 > solve_rtol * bn)
                throw SolverError("linear solve did not reach the residual tolerance", bn > 0 ? res2 / bn : res2);
        }
        return x;
    }

    const SparseMatrix& matrix() const { return matrix_; }
    bool symmetric() const { return symmetric_; }

private:
    SparseMatrix matrix_;
    std::optional<DirichletMask> mask_;
    bool symmetric_ = true;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    Eigen::SparseLU<SparseMatrix> lu_;
};

inline Vector solve(const SparseMatrix& A, const Vector& b, std::optional<DirichletMask> mask = std::nullopt) {
    return FactorizedSystem(A, std::move(mask)).solve(b);
}

/// Coordinate text dump, one "row col value" triple per line.
inline void write_matrix_coo(std::ostream& os, const SparseMatrix& A) {
    os.precision(17);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace thermomag
