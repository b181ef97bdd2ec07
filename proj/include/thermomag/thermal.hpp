#pragma once

// Implicit enthalpy step on the magnet: P1 in space, backward Euler in time,
// Robin exchange on the magnet boundary, dissipation and thermo-magnetic
// coupling as sources.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <vector>

#include "thermomag/fem.hpp"
#include "thermomag/gibbs_energy.hpp"
#include "thermomag/mesh.hpp"
#include "thermomag/young_measure.hpp"

namespace thermomag {

/// Nodal P1 enthalpy on the magnet mesh, J/m^3.
using EnthalpyField = Vector;

/// Constant-c_v inverse of the enthalpy transform, clamped at w < 0.
inline double theta_of_w(double w, double c_v) { return std::max(w, 0.0) / c_v; }

inline Vector theta_of_w(const EnthalpyField& w, double c_v) {
    Vector t(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) t[i] = theta_of_w(w[i], c_v);
    return t;
}

struct ThermalStepResult {
    EnthalpyField w;
    int clamp_iterations = 0;       // 0 when the linear solve needed no clamping
    double heat_balance_residual = 0.0;  // relative, weak form tested with 1
    double source = 0.0;            // int of dissipation heat
    double coupling = 0.0;          // int Theta(w) a . dlambda/dt
    double boundary_flux = 0.0;     // int_Gamma b (Theta(w) - theta_ext)
};

/// Heat source density delta*_S(eta) + eps |eta|^q at rate eta.
inline double dissipation_heat(const Vec2& eta1, double eta2, const MaterialParams& par) {
    return dissipation_dual(eta1, eta2, yield_set(par)) + par.epsilon * (eta1.squaredNorm() + eta2 * eta2);
}

class ThermalSolver {
public:
    /// `magnet` is the magnet-only mesh; its elements must be ordered like the
    /// moment fields passed to `step`.
    ThermalSolver(Triangulation magnet, MaterialParams params) : mesh_(std::move(magnet)), params_(params) {
        mass_ = assemble_mass(mesh_, Region::all);
        stiffness_ = assemble_stiffness(mesh_, params_.K_cond / params_.c_v);
        boundary_mass_ = assemble_boundary_mass(mesh_, mesh_.magnet_boundary_edges);
        boundary_load_ = assemble_boundary_load(mesh_, mesh_.magnet_boundary_edges);
        ones_ = Vector::Ones(static_cast<Eigen::Index>(mesh_.num_nodes()));
    }

    const Triangulation& mesh() const { return mesh_; }
    const MaterialParams& params() const { return params_; }
    const SparseMatrix& mass() const { return mass_; }

    EnthalpyField uniform(double theta) const { return Vector::Constant(static_cast<Eigen::Index>(mesh_.num_nodes()), params_.c_v * theta); }

    /// Per-element mean of the nodal temperatures.
    std::vector<double> element_temperature(const EnthalpyField& w) const {
        std::vector<double> t(mesh_.num_elements());
        for (std::size_t e = 0; e < t.size(); ++e) {
            double s = 0.0;
            for (int k : mesh_.elements[e]) s += theta_of_w(w[k], params_.c_v);
            t[e] = s / 3.0;
        }
        return t;
    }

    /// int Theta(w) dx / |Omega|
    double mean_temperature(const EnthalpyField& w) const {
        const Vector th = theta_of_w(w, params_.c_v);
        return ones_.dot(mass_ * th) / ones_.dot(mass_ * ones_);
    }

    ThermalStepResult step(const EnthalpyField& w_prev, const MomentField& previous, const MomentField& current,
                           double tau) const {
        const int ne = static_cast<int>(mesh_.num_elements());
        if (w_prev.size() != static_cast<Eigen::Index>(mesh_.num_nodes())) throw DimensionError("enthalpy size mismatch");
        if (previous.num_elements() != ne || current.num_elements() != ne) throw DimensionError("moment field size mismatch");
        if (!(tau > 0.0)) throw Error("time step must be positive");
        const double cv = params_.c_v;
        const double b = params_.b_robin;

        std::vector<double> heat(ne), coupling(ne);
        for (int e = 0; e < ne; ++e) {
            const Vec2 eta1 = (current.m[e] - previous.m[e]) / tau;
            const double eta2 = (current.second[e] - previous.second[e]) / tau;
            heat[e] = dissipation_heat(eta1, eta2, params_);
            coupling[e] = params_.a0 * eta2 / cv;
            // M/tau - C must stay a positively weighted mass matrix.
            if (!(1.0 / tau - coupling[e] > 0.0)) {
                std::ostringstream msg;
                msg << "thermo-magnetic coupling dominates the mass term on element " << e
                    << " (1/tau - a0 dlambda2/(tau c_v) <= 0); reduce the time step";
                throw SolverError(msg.str(), INFINITY);
            }
        }
        const SparseMatrix C = assemble_weighted_mass(mesh_, coupling);
        const Vector S = assemble_p0_load(mesh_, heat);
        const Vector rhs = mass_ * w_prev / tau + b * params_.theta_ext * boundary_load_ + S;
        const SparseMatrix base = mass_ / tau + stiffness_;
        const SparseMatrix theta_part = (b / cv) * boundary_mass_ - C;

        ThermalStepResult out;
        out.w = FactorizedSystem(SparseMatrix(base + theta_part)).solve(rhs);

        auto has_negative = [](const Vector& v) { return (v.array() < 0.0).any(); };
        if (has_negative(out.w)) {
            // Theta(w) = max(w, 0)/c_v: iterate on the set of clamped nodes.
            std::vector<std::uint8_t> active(mesh_.num_nodes(), 1);
            bool settled = false;
            for (int it = 1; it <= 20; ++it) {
                bool changed = false;
                for (Eigen::Index i = 0; i < out.w.size(); ++i) {
                    const std::uint8_t a = out.w[i] >= 0.0 ? 1 : 0;
                    changed |= (a != active[i]);
                    active[i] = a;
                }
                out.clamp_iterations = it;
                if (!changed && it > 1) {
                    settled = true;
                    break;
                }
                SparseMatrix D(out.w.size(), out.w.size());
                D.reserve(Eigen::VectorXi::Constant(out.w.size(), 1));
                for (Eigen::Index i = 0; i < out.w.size(); ++i) D.insert(i, i) = active[i];
                out.w = FactorizedSystem(SparseMatrix(base + theta_part * D)).solve(rhs);
            }
            if (!settled) throw SolverError("clamped enthalpy iteration did not settle in 20 iterations", INFINITY);
        }

        // Weak form tested with phi = 1, relative to the sum of the magnitudes
        // of every term in that identity.
        const Vector wc = out.w.cwiseMax(0.0);
        const double content = ones_.dot(mass_ * out.w) / tau;
        const double content_prev = ones_.dot(mass_ * w_prev) / tau;
        const double outflow = (b / cv) * ones_.dot(boundary_mass_ * wc);
        const double inflow = b * params_.theta_ext * ones_.dot(boundary_load_);
        out.boundary_flux = outflow - inflow;
        out.source = S.sum();
        out.coupling = ones_.dot(C * wc);
        const double residual = (content - content_prev) + outflow - inflow - out.source - out.coupling;
        const double scale = std::abs(content) + std::abs(content_prev) + std::abs(outflow) + std::abs(inflow) +
                             std::abs(out.source) + std::abs(out.coupling);
        out.heat_balance_residual = scale > 0.0 ? residual / scale : 0.0;
        return out;
    }

private:
    Triangulation mesh_;
    MaterialParams params_;
    SparseMatrix mass_;
    SparseMatrix stiffness_;
    SparseMatrix boundary_mass_;
    Vector boundary_load_;
    Vector ones_;
};

/// node_id, w, theta
inline void write_enthalpy_csv(std::ostream& os, const EnthalpyField& w, double c_v) {
    os.precision(17);
    os << "node_id,w,theta\n";
    for (Eigen::Index i = 0; i < w.size(); ++i) os << i << ',' << w[i] << ',' << theta_of_w(w[i], c_v) << '\n';
}

}  // namespace thermomag
