#pragma once

// Magnetostatic potential on the outer box with homogeneous Dirichlet data:
//   mu0 * int grad u . grad phi = int_magnet m . grad phi.
// The constrained stiffness matrix is factorized once per mesh.

#include <array>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include "thermomag/fem.hpp"
#include "thermomag/mesh.hpp"

namespace thermomag {

/// Nodal P1 values of u_m on the outer mesh, zero on its boundary.
using PotentialField = Vector;

class Magnetostatics {
public:
    Magnetostatics(Triangulation mesh, double mu0)
        : mesh_(std::move(mesh)), mu0_(mu0), magnet_elements_(mesh_.magnet_elements()) {
        if (!(mu0_ > 0.0)) throw Error("mu0 must be positive");
        stiffness_ = assemble_stiffness(mesh_, 1.0);
        for (int e : magnet_elements_) grads_.push_back(fem::hat_gradients(mesh_, e));
        system_ = std::make_shared<FactorizedSystem>(
            mu0_ * stiffness_, mask_from_nodes(mesh_.num_nodes(), mesh_.outer_boundary_nodes));
    }

    const Triangulation& mesh() const { return mesh_; }
    double mu0() const { return mu0_; }
    const std::vector<int>& magnet_elements() const { return magnet_elements_; }
    int num_magnet_elements() const { return static_cast<int>(magnet_elements_.size()); }

    /// `m` holds one vector per magnet element (in `magnet_elements()` order).
    PotentialField solve_potential(std::span<const Vec2> m) const {
        if (static_cast<int>(m.size()) != num_magnet_elements()) throw DimensionError("magnetization size mismatch");
        Vector rhs = Vector::Zero(static_cast<Eigen::Index>(mesh_.num_nodes()));
        for (std::size_t k = 0; k < m.size(); ++k) {
            const int e = magnet_elements_[k];
            for (int j = 0; j < 3; ++j) rhs[mesh_.elements[e][j]] += mesh_.element_area[e] * m[k].dot(grads_[k][j]);
        }
        return system_->solve(rhs);
    }

    /// Same constrained operator with an arbitrary nodal load vector.
    PotentialField solve_load(const Vector& rhs) const {
        if (rhs.size() != static_cast<Eigen::Index>(mesh_.num_nodes())) throw DimensionError("load size mismatch");
        return system_->solve(rhs);
    }

    /// Elementwise-constant grad u on each magnet element.
    std::vector<Vec2> coupling_field(const PotentialField& u) const {
        std::vector<Vec2> out(magnet_elements_.size());
        for (std::size_t k = 0; k < magnet_elements_.size(); ++k) {
            const auto& t = mesh_.elements[magnet_elements_[k]];
            out[k] = u[t[0]] * grads_[k][0] + u[t[1]] * grads_[k][1] + u[t[2]] * grads_[k][2];
        }
        return out;
    }

    /// 1/2 sum_e area_e m_e . grad u|_e
    double energy(const PotentialField& u, std::span<const Vec2> m) const {
        if (static_cast<int>(m.size()) != num_magnet_elements()) throw DimensionError("magnetization size mismatch");
        double s = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            const int e = magnet_elements_[k];
            s += mesh_.element_area[e] * m[k].dot(element_gradient(u, e));
        }
        return 0.5 * s;
    }

    /// 1/2 mu0 int |grad u|^2 over the outer box.
    double field_energy(const PotentialField& u) const { return 0.5 * mu0_ * u.dot(stiffness_ * u); }

    /// <m1, B m2> := int_magnet m1 . grad u_{m2}
    double pairing(std::span<const Vec2> m1, const PotentialField& u2) const { return 2.0 * energy(u2, m1); }

    Vec2 element_gradient(const PotentialField& u, int e) const {
        const auto g = fem::hat_gradients(mesh_, e);
        const auto& t = mesh_.elements[e];
        return u[t[0]] * g[0] + u[t[1]] * g[1] + u[t[2]] * g[2];
    }

    const SparseMatrix& stiffness() const { return stiffness_; }

private:
    Triangulation mesh_;
    double mu0_;
    std::vector<int> magnet_elements_;
    std::vector<std::array<Vec2, 3>> grads_;
    SparseMatrix stiffness_;
    std::shared_ptr<const FactorizedSystem> system_;
};

inline void write_potential_csv(std::ostream& os, const PotentialField& u) {
    os.precision(17);
    os << "node_id,u\n";
    for (Eigen::Index i = 0; i < u.size(); ++i) os << i << ',' << u[i] << '\n';
}

}  // namespace thermomag
