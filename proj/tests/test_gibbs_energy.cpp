#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "thermomag/gibbs_energy.hpp"
#include "thermomag/verify.hpp"

using namespace thermomag;

TEST(Anisotropy, Examples) {
    MaterialParams par;
    EXPECT_DOUBLE_EQ(anisotropy_phi(Vec2(0, 1), par), 1.0);
    EXPECT_DOUBLE_EQ(anisotropy_phi(Vec2(1, 0), par), 2.0);
    par.easy_axis = EasyAxis::x;
    EXPECT_DOUBLE_EQ(anisotropy_phi(Vec2(1, 0), par), 1.0);
}

TEST(Anisotropy, Even) {
    MaterialParams par;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const Vec2 m(N(rng), N(rng));
        EXPECT_DOUBLE_EQ(anisotropy_phi(m, par), anisotropy_phi(-m, par));
    }
}

TEST(Dissipation, Examples) {
    const YieldSet s{100.0, 1.0};
    EXPECT_DOUBLE_EQ(dissipation_dual(Vec2(3, 4), 2.0, s), 502.0);
    EXPECT_DOUBLE_EQ(dissipation_dual(Vec2::Zero(), 0.0, s), 0.0);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Vec2 a(N(rng), N(rng));
        const double b = N(rng);
        EXPECT_NEAR(dissipation_dual(2 * a, 2 * b, s), 2 * dissipation_dual(a, b, s), 1e-12);
    }
}

namespace {

struct OneElement {
    MaterialParams par;
    AtomSet atoms = build_atom_set(12, three_layers());
    double area = 0.037;
    double p = std::sqrt(44.0);
    StepState state;

    OneElement() {
        state.theta = {1300.0};
        state.field = Vec2(130.0, -20.0);
        state.tau = 0.1;
        WeightField prev(1, atoms.size());
        prev.xi[5] = 0.25;
        prev.xi[17] = 0.75;
        prev.p = {p};
        state.previous = moments(prev, atoms);
    }
    GibbsModel model() const { return GibbsModel(atoms, {area}, nullptr, par); }
};

}  // namespace

TEST(StepObjective, SingleAtomByHand) {
    OneElement c;
    c.par.regularization = 1.0;
    const GibbsModel model = c.model();
    const int i = 2 * 12 + 3;  // outer layer, angle pi/2
    WeightField xi(1, c.atoms.size());
    xi.xi[i] = 1.0;
    xi.p = {c.p};

    const double r = 1.1;
    const double ang = 2.0 * std::numbers::pi * 3 / 12;
    const Vec2 m = c.p * r * Vec2(std::cos(ang), std::sin(ang));
    const double l2 = c.p * c.p * r * r;
    const double tau = c.state.tau;
    const Vec2 eta1 = (m - c.state.previous.m[0]) / tau;
    const double eta2 = (l2 - c.state.previous.second[0]) / tau;
    const double n2 = m.squaredNorm() + l2 * l2;
    const double by_hand = c.area * (m.x() * m.x() + std::pow(m.squaredNorm(), 2) + (1300.0 - 1388.0) * l2 - c.state.field.dot(m) +
                                     tau * n2 * n2 + tau * (100.0 * eta1.norm() + 1.0 * std::abs(eta2)) +
                                     tau * 0.5e-6 * (eta1.squaredNorm() + eta2 * eta2));
    const double F = step_objective(xi, model, c.state);
    EXPECT_NEAR(F, by_hand, 1e-12 * std::abs(by_hand));
}

TEST(StepObjective, RestStateAtCurieTemperature) {
    OneElement c;
    c.par.regularization = 1.0;
    const GibbsModel model = c.model();
    std::mt19937_64 rng(9);
    std::exponential_distribution<double> ex(1.0);
    WeightField xi(1, c.atoms.size());
    double s = 0.0;
    for (double& x : xi.xi) s += (x = ex(rng));
    for (double& x : xi.xi) x /= s;
    xi.p = {c.p};
    StepState st = c.state;
    st.field = Vec2::Zero();
    st.theta = {c.par.theta_c};
    st.previous = moments(xi, c.atoms);

    const auto lam = moments(xi, c.atoms);
    double aniso = 0.0;
    for (int i = 0; i < c.atoms.size(); ++i)
        aniso += xi.xi[i] * anisotropy_phi(c.p * c.atoms.radius[i] * c.atoms.direction[i], c.par);
    const double n2 = lam.m[0].squaredNorm() + lam.second[0] * lam.second[0];
    const double expect = c.area * (aniso + st.tau * n2 * n2);
    EXPECT_NEAR(step_objective(xi, model, st), expect, 1e-12 * expect);
}

TEST(StepObjective, DissipationLinearInCoercivity) {
    OneElement c;
    WeightField xi(1, c.atoms.size());
    xi.xi[0] = 0.6;
    xi.xi[13] = 0.4;
    xi.p = {c.p};
    const GibbsModel m1 = c.model();
    c.par.H_c = 200.0;
    const GibbsModel m2 = c.model();
    const StepProblem p1(m1, xi.p, c.state), p2(m2, xi.p, c.state);
    const auto t1 = p1.terms(xi.xi, 0.0, {}), t2 = p2.terms(xi.xi, 0.0, {});
    const double eta1 = (moments(xi, c.atoms).m[0] - c.state.previous.m[0]).norm();
    EXPECT_NEAR(t2.total() - t1.total(), c.area * 100.0 * eta1, 1e-9 * t1.dissipation);
    EXPECT_DOUBLE_EQ(t2.anisotropy, t1.anisotropy);
    EXPECT_DOUBLE_EQ(t2.zeeman, t1.zeeman);
    EXPECT_DOUBLE_EQ(t2.thermal, t1.thermal);
}

TEST(StepGradient, CentralDifferences) {
    const auto st = verify::gradient_check();
    EXPECT_EQ(st.coordinates, 72);
    EXPECT_LT(st.relative_error, 1e-5);
}

TEST(StepGradient, LinearObjective) {
    OneElement c;
    c.par.b0 = 0.0;
    const GibbsModel model = c.model();
    StepState st = c.state;
    st.incremental = false;
    WeightField xi = init_weights(c.atoms, 1, Uniform{}, c.p);
    const auto g = step_gradient(xi, model, st, 1e-2);
    for (int i = 0; i < c.atoms.size(); ++i) {
        const Vec2 v = c.p * c.atoms.radius[i] * c.atoms.direction[i];
        const double expect = c.area * (v.x() * v.x() + (1300.0 - 1388.0) * v.squaredNorm() - st.field.dot(v));
        EXPECT_NEAR(g[i], expect, 1e-12 * (1.0 + std::abs(expect)));
    }
}

TEST(StepGradient, Errors) {
    OneElement c;
    const GibbsModel model = c.model();
    WeightField xi = init_weights(c.atoms, 1, Uniform{}, c.p);
    EXPECT_THROW(step_gradient(xi, model, c.state, 0.0), Error);
    WeightField wrong(2, c.atoms.size());
    EXPECT_THROW(step_objective(wrong, model, c.state), DimensionError);
}
