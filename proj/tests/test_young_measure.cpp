#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermomag/young_measure.hpp"

using namespace thermomag;

TEST(AtomSet, Sizes) {
    const auto three = three_layers();
    const auto one = middle_sphere();
    EXPECT_EQ(build_atom_set(12, three).size(), 36);
    EXPECT_EQ(build_atom_set(12, one).size(), 12);
}

TEST(AtomSet, EqualAngles) {
    const auto one = middle_sphere();
    const auto a = build_atom_set(4, one);
    const double pi = std::numbers::pi;
    ASSERT_EQ(a.size(), 4);
    EXPECT_DOUBLE_EQ(a.angle[0], 0.0);
    EXPECT_DOUBLE_EQ(a.angle[1], pi / 2);
    EXPECT_DOUBLE_EQ(a.angle[2], pi);
    EXPECT_DOUBLE_EQ(a.angle[3], 3 * pi / 2);
    for (int i = 0; i < a.size(); ++i) {
        EXPECT_GE(a.angle[i], 0.0);
        EXPECT_LT(a.angle[i], 2 * pi);
        EXPECT_GT(a.radius[i], 0.0);
    }
}

TEST(AtomSet, Errors) {
    const std::vector<double> bad{1.0, -1.0};
    const std::vector<double> empty;
    const auto one = middle_sphere();
    EXPECT_THROW(build_atom_set(12, bad), Error);
    EXPECT_THROW(build_atom_set(12, empty), Error);
    EXPECT_THROW(build_atom_set(1, one), Error);
}

TEST(SphereScale, Values) {
    EXPECT_NEAR(p_of_theta(1300.0, 1.0, 1.0, 1388.0, 0.1), std::sqrt(44.0), 1e-12);
    EXPECT_NEAR(p_of_theta(1300.0, 1.0, 1.0, 1388.0, 0.1), 6.63325, 1e-5);
    EXPECT_EQ(p_of_theta(1388.0, 1.0, 1.0, 1388.0, 0.1), 0.1);
    EXPECT_EQ(p_of_theta(1500.0, 1.0, 1.0, 1388.0, 0.1), 0.1);
    EXPECT_NEAR(p_of_theta(1388.0 - 2.0, 1.0, 1.0, 1388.0, 0.1), 1.0, 1e-15);
}

TEST(Moments, SymmetricPair) {
    const auto one = middle_sphere();
    const auto atoms = build_atom_set(2, one);  // angles 0 and pi
    WeightField w(1, 2);
    w.xi = {0.5, 0.5};
    w.p = {1.0};
    const auto m = moments(w, atoms);
    EXPECT_NEAR(m.m[0].norm(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(m.second[0], 1.0);
}

TEST(Moments, SingleAtom) {
    const auto atoms = build_atom_set(12, three_layers());
    WeightField w(1, 36);
    w.xi[2 * 12] = 1.0;  // outer layer, angle 0
    w.p = {2.0};
    const auto m = moments(w, atoms);
    EXPECT_NEAR(m.m[0].x(), 2.2, 1e-14);
    EXPECT_NEAR(m.m[0].y(), 0.0, 1e-14);
    EXPECT_NEAR(m.second[0], 4.84, 1e-13);
}

TEST(Moments, ConvexityBounds) {
    const auto atoms = build_atom_set(12, three_layers());
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> ex(1.0);
    for (int trial = 0; trial < 100; ++trial) {
        WeightField w(1, 36);
        double s = 0.0;
        for (double& x : w.xi) s += (x = ex(rng));
        for (double& x : w.xi) x /= s;
        const double p = 0.1 + 7.0 * trial / 100.0;
        w.p = {p};
        const auto m = moments(w, atoms);
        EXPECT_LE(m.m[0].norm(), p * 1.1 + 1e-12);
        EXPECT_GE(m.second[0], p * p / 1.21 - 1e-12);
        EXPECT_LE(m.second[0], p * p * 1.21 + 1e-12);
    }
}

TEST(InitWeights, Uniform) {
    const auto one = middle_sphere();
    const auto atoms = build_atom_set(12, one);
    const auto w = init_weights(atoms, 3, Uniform{});
    for (double x : w.xi) EXPECT_DOUBLE_EQ(x, 1.0 / 12.0);
    const auto m = moments(w, atoms);
    for (const auto& v : m.m) EXPECT_NEAR(v.norm(), 0.0, 1e-15);
}

TEST(InitWeights, AlignedExactAtom) {
    const auto atoms = build_atom_set(12, three_layers());
    const auto w = init_weights(atoms, 1, Aligned{Vec2(1.0, 0.0)});
    EXPECT_DOUBLE_EQ(w.xi[12], 1.0);  // middle layer, angle 0
    double s = 0.0;
    for (double x : w.xi) s += x;
    EXPECT_DOUBLE_EQ(s, 1.0);
}

TEST(InitWeights, AlignedDirection) {
    const auto one = middle_sphere();
    const auto atoms = build_atom_set(12, one);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 2.0 * std::numbers::pi);
    for (int trial = 0; trial < 50; ++trial) {
        const double a = U(rng);
        const Vec2 d(std::cos(a), std::sin(a));
        const auto m = moments(init_weights(atoms, 1, Aligned{3.0 * d}), atoms);
        const double angle = std::atan2(m.m[0].y(), m.m[0].x());
        EXPECT_NEAR(std::remainder(angle - a, 2.0 * std::numbers::pi), 0.0, 1e-10);
    }
    EXPECT_THROW(init_weights(atoms, 1, Aligned{Vec2::Zero()}), Error);
}

TEST(InitWeights, SimplexPerElement) {
    const auto atoms = build_atom_set(12, three_layers());
    const auto w = init_weights(atoms, 5, Aligned{Vec2(0.2, 1.0)});
    for (int e = 0; e < 5; ++e) {
        double s = 0.0;
        for (double x : w.weights(e)) {
            EXPECT_GE(x, 0.0);
            s += x;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}
