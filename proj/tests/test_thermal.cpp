#include <gtest/gtest.h>

#include <cmath>

#include "thermomag/thermal.hpp"
#include "thermomag/verify.hpp"

using namespace thermomag;

namespace {

SubMesh magnet_mesh() {
    return extract_magnet(build_mesh(Rect{-1.0, 1.0, -0.5, 0.5}, Rect{-1.0 / 9.0, 1.0 / 9.0, -0.25, 0.25}, 4));
}

MomentField constant_moments(int ne, Vec2 m, double l2) {
    MomentField f;
    f.m.assign(ne, m);
    f.second.assign(ne, l2);
    return f;
}

}  // namespace

TEST(Enthalpy, Inverse) {
    EXPECT_DOUBLE_EQ(theta_of_w(420.0 * 1300.0, 420.0), 1300.0);
    EXPECT_EQ(theta_of_w(-5.0, 420.0), 0.0);
    for (double t : {0.0, 1.5, 1100.0, 1388.0, 2000.0}) EXPECT_NEAR(theta_of_w(420.0 * t, 420.0), t, 1e-12 * (1 + t));
}

TEST(ThermalStep, InsulatedIdentity) { EXPECT_LE(verify::insulated_step_deviation(), 1e-10); }

TEST(ThermalStep, RobinRelaxationIsMonotone) {
    const auto sub = magnet_mesh();
    MaterialParams par;
    par.b_robin = 5.0;
    const ThermalSolver solver(sub.mesh, par);
    const int ne = static_cast<int>(sub.mesh.num_elements());
    const auto lam = constant_moments(ne, Vec2(0, 6), 44.0);
    EnthalpyField w = solver.uniform(1300.0);
    double prev = INFINITY;
    for (int k = 0; k < 200; ++k) {
        w = solver.step(w, lam, lam, 0.1).w;
        const double dev = (theta_of_w(w, par.c_v).array() - par.theta_ext).abs().maxCoeff();
        EXPECT_LT(dev, prev) << "step " << k;
        prev = dev;
    }
    EXPECT_LT(prev, 200.0);
}

TEST(ThermalStep, DissipationHeatBalance) {
    const auto sub = magnet_mesh();
    MaterialParams par;
    par.a0 = 1e-300;  // coupling off
    par.b_robin = 0.0;
    const ThermalSolver solver(sub.mesh, par);
    const int ne = static_cast<int>(sub.mesh.num_elements());
    MomentField before = constant_moments(ne, Vec2(0, 6), 44.0), after = before;
    for (int e = 0; e < ne; ++e) {
        after.m[e] = Vec2(0.1 * e, 6.0 - 0.05 * e);
        after.second[e] = 44.0 - 0.01 * e;
    }
    const double tau = 0.1;
    const EnthalpyField w0 = solver.uniform(1300.0);
    const auto res = solver.step(w0, before, after, tau);
    double heat = 0.0, area = 0.0;
    for (int e = 0; e < ne; ++e) {
        const Vec2 eta1 = (after.m[e] - before.m[e]) / tau;
        const double eta2 = (after.second[e] - before.second[e]) / tau;
        const double d = par.H_c * eta1.norm() + par.h_c * std::abs(eta2) + par.epsilon * (eta1.squaredNorm() + eta2 * eta2);
        heat += sub.mesh.element_area[e] * d;
        area += sub.mesh.element_area[e];
    }
    const Vector one = Vector::Ones(w0.size());
    const double gain = one.dot(solver.mass() * (res.w - w0)) / area;
    const double expect = tau * heat / area;
    EXPECT_NEAR(gain, expect, 1e-10 * expect);
    EXPECT_LE(std::abs(res.heat_balance_residual), 1e-12);
}

TEST(ThermalStep, CouplingDominanceIsRejected) {
    const auto sub = magnet_mesh();
    const MaterialParams par;
    const ThermalSolver solver(sub.mesh, par);
    const int ne = static_cast<int>(sub.mesh.num_elements());
    const auto before = constant_moments(ne, Vec2(0, 1), 1.0);
    const auto after = constant_moments(ne, Vec2(0, 1), 1000.0);
    EXPECT_THROW(solver.step(solver.uniform(1300.0), before, after, 0.1), SolverError);
}

TEST(ThermalStep, SizeChecks) {
    const auto sub = magnet_mesh();
    const ThermalSolver solver(sub.mesh, MaterialParams{});
    const auto lam = constant_moments(3, Vec2(0, 1), 1.0);
    EXPECT_THROW(solver.step(solver.uniform(1300.0), lam, lam, 0.1), DimensionError);
    EXPECT_THROW(solver.step(Vector::Zero(4), lam, lam, 0.1), DimensionError);
}
