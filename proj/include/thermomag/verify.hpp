#pragma once

// Self-checks shared by `thermomag verify` and the acceptance runner:
// minimizer against an exhaustive oracle, finite-difference gradients,
// magnetostatic identities and convergence rates, thermal identities and
// run-level invariants.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "thermomag/driver.hpp"
#include "thermomag/fem.hpp"
#include "thermomag/gibbs_energy.hpp"
#include "thermomag/magnetostatics.hpp"
#include "thermomag/mesh.hpp"
#include "thermomag/step_minimizer.hpp"
#include "thermomag/thermal.hpp"
#include "thermomag/young_measure.hpp"

namespace thermomag::verify {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

using Report = std::vector<Check>;

inline bool all_passed(const Report& r) {
    return std::all_of(r.begin(), r.end(), [](const Check& c) { return c.passed; });
}

/// Reference parameter set with the single middle sphere of 12 atoms.
inline SimConfig experiment1(int n_atoms = 12) {
    SimConfig c;
    if (n_atoms == 12) {
        c.n_angles = 12;
        c.layers = middle_sphere();
    } else {
        c.n_angles = n_atoms / 3;
        c.layers = three_layers();
    }
    return c;
}

/// Hotter surroundings and a faster Robin exchange.
inline SimConfig experiment2() {
    SimConfig c;
    c.material.theta_ext = 1500.0;
    c.material.b_robin = 0.1;
    return c;
}

namespace detail {

template <class... Args>
std::string str(const Args&... args) {
    std::ostringstream os;
    os.precision(4);
    (os << ... << args);
    return os.str();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Weights on the simplex grid with spacing 1/K.
inline std::vector<double> grid_simplex_point(std::mt19937_64& rng, int n, int K) {
    std::uniform_int_distribution<int> cut(0, K);
    std::vector<int> cuts(n - 1);
    for (int& c : cuts) c = cut(rng);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> x(n);
    int prev = 0;
    for (int i = 0; i < n - 1; ++i) {
        x[i] = static_cast<double>(cuts[i] - prev) / K;
        prev = cuts[i];
    }
    x[n - 1] = static_cast<double>(K - prev) / K;
    return x;
}

inline std::vector<double> interior_simplex_point(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<double> x(n);
    double s = 0.0;
    for (double& v : x) s += (v = u(rng));
    for (double& v : x) v /= s;
    return x;
}

// Degree-4 rule on the reference triangle (barycentric points, weights sum to 1).
struct QuadPoint {
    std::array<double, 3> bary;
    double weight;
};

inline std::array<QuadPoint, 6> dunavant4() {
    constexpr double a1 = 0.445948490915965, b1 = 0.108103018168070, w1 = 0.223381589678011;
    constexpr double a2 = 0.091576213509771, b2 = 0.816847572980459, w2 = 0.109951743655322;
    return {{{{a1, a1, b1}, w1}, {{a1, b1, a1}, w1}, {{b1, a1, a1}, w1},
             {{a2, a2, b2}, w2}, {{a2, b2, a2}, w2}, {{b2, a2, a2}, w2}}};
}

}  // namespace detail

/// Sort-and-threshold projection on hand-checked inputs.
inline Check simplex_projection_examples() {
    Check c{"simplex projection", true, ""};
    auto near = [](const std::vector<double>& a, std::vector<double> b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) > 1e-12) return false;
        return true;
    };
    const std::vector<double> v1{0.5, 0.5, 0.5}, v2{2.0, 0.0, 0.0}, v3{0.2, 0.3, 0.5};
    c.passed = near(project_simplex(v1), {1.0 / 3, 1.0 / 3, 1.0 / 3}) && near(project_simplex(v2), {1.0, 0.0, 0.0}) &&
               near(project_simplex(v3), {0.2, 0.3, 0.5});
    c.detail = c.passed ? "3 examples exact to 1e-12" : "mismatch";
    return c;
}

struct OracleStats {
    int instances = 0;
    int failures = 0;
    double worst_gap = 0.0;  // largest |F_solver - F_oracle| / allowance
    double seconds = 0.0;
};

/// Random one-element instances with three atoms: the projected gradient
/// result must match the grid oracle up to 1e-6 relative plus the Huber
/// smoothing bound tau * area * (H_c + h_c) * mu / 2.
inline OracleStats oracle_agreement(int instances = 20, std::uint64_t seed = 2024, double grid = 1e-3) {
    const auto t0 = std::chrono::steady_clock::now();
    OracleStats st;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int K = static_cast<int>(std::lround(1.0 / grid));
    const std::vector<double> layer{1.0};
    SolverSettings settings;
    for (int i = 0; i < instances; ++i) {
        MaterialParams par;
        par.regularization = (i % 2 == 0) ? 0.0 : 1.0;
        const double area = 0.01 + 0.2 * U(rng);
        const double theta = 1250.0 + 130.0 * U(rng);
        const double p = p_of_theta(theta, par.a0, par.b0, par.theta_c, par.p_par);
        const AtomSet atoms = build_atom_set(3, layer);
        const GibbsModel model(atoms, {area}, nullptr, par);

        StepState state;
        state.theta = {theta};
        state.field = Vec2(600.0 * (U(rng) - 0.5), 200.0 * (U(rng) - 0.5));
        state.tau = 0.05 + 0.2 * U(rng);
        WeightField prev(1, 3);
        prev.xi = detail::grid_simplex_point(rng, 3, K);
        prev.p = {p};
        state.previous = moments(prev, atoms);

        const std::vector<double> pv{p};
        const StepProblem problem(model, pv, state);
        WeightField start = init_weights(atoms, 1, Uniform{}, p);
        const MinimizeResult res = minimize_step(start, problem, settings);
        const double Fs = problem.objective(res.xi.xi);
        const double Fo = brute_force_oracle(problem, grid).objective;
        const double allowance = 1e-6 * (1.0 + std::abs(Fo)) + state.tau * area * (par.H_c + par.h_c) * settings.smoothing / 2.0;
        const double gap = std::abs(Fs - Fo) / allowance;
        st.worst_gap = std::max(st.worst_gap, gap);
        if (gap > 1.0) ++st.failures;
        ++st.instances;
    }
    st.seconds = detail::seconds_since(t0);
    return st;
}

struct GradientStats {
    int coordinates = 0;
    double relative_error = 0.0;  // max |g - g_fd| / max |g|
};

/// Smoothed step gradient against central differences on the two magnet
/// elements of the coarsest mesh, magnetostatics on, 36 atoms.
inline GradientStats gradient_check(std::uint64_t seed = 7, double h = 1e-6) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const SimConfig cfg;
    const Magnetostatics ms(build_mesh(cfg.outer, cfg.magnet, 1), cfg.material.mu0);
    std::vector<double> areas;
    for (int e : ms.magnet_elements()) areas.push_back(ms.mesh().element_area[e]);
    const int ne = static_cast<int>(areas.size());
    const AtomSet atoms = build_atom_set(12, three_layers());
    MaterialParams par;
    par.regularization = 1.0;
    const GibbsModel model(atoms, areas, &ms, par);

    WeightField xi(ne, atoms.size()), prev(ne, atoms.size());
    StepState state;
    for (int e = 0; e < ne; ++e) {
        const double theta = 1280.0 + 80.0 * U(rng);
        state.theta.push_back(theta);
        xi.p[e] = prev.p[e] = p_of_theta(theta, par.a0, par.b0, par.theta_c, par.p_par);
        const auto a = detail::interior_simplex_point(rng, atoms.size());
        const auto b = detail::interior_simplex_point(rng, atoms.size());
        std::copy(a.begin(), a.end(), xi.weights(e).begin());
        std::copy(b.begin(), b.end(), prev.weights(e).begin());
    }
    state.previous = moments(prev, atoms);
    state.field = Vec2(120.0, -40.0);
    state.tau = 0.1;
    const double mu = SolverSettings{}.smoothing;

    const std::vector<double> g = step_gradient(xi, model, state, mu);
    const StepProblem problem(model, xi.p, state);
    std::vector<double> x = xi.xi;
    double err = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = problem.evaluate(x, mu, {});
        x[i] = x0 - h;
        const double fm = problem.evaluate(x, mu, {});
        x[i] = x0;
        err = std::max(err, std::abs(g[i] - (fp - fm) / (2.0 * h)));
        scale = std::max(scale, std::abs(g[i]));
    }
    return {static_cast<int>(x.size()), scale > 0.0 ? err / scale : err};
}

struct MagnetostaticStats {
    double energy_identity = 0.0;  // relative
    double reciprocity = 0.0;      // relative
};

/// Galerkin energy identity and symmetry of the magnetization pairing for
/// random elementwise magnetizations.
inline MagnetostaticStats magnetostatic_identities(std::uint64_t seed = 11) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const SimConfig cfg;
    const Magnetostatics ms(build_mesh(cfg.outer, cfg.magnet, cfg.base_divisions), cfg.material.mu0);
    const int ne = ms.num_magnet_elements();
    std::vector<Vec2> m1(ne), m2(ne);
    for (int e = 0; e < ne; ++e) {
        m1[e] = Vec2(6.0 * U(rng), 6.0 * U(rng));
        m2[e] = Vec2(6.0 * U(rng), 6.0 * U(rng));
    }
    const PotentialField u1 = ms.solve_potential(m1), u2 = ms.solve_potential(m2);
    MagnetostaticStats st;
    const double e1 = ms.energy(u1, m1), f1 = ms.field_energy(u1);
    st.energy_identity = std::abs(e1 - f1) / std::abs(f1);
    const double p12 = ms.pairing(m1, u2), p21 = ms.pairing(m2, u1);
    st.reciprocity = std::abs(p12 - p21) / std::max(std::abs(p12), std::abs(p21));
    return st;
}

struct ConvergenceStats {
    std::vector<double> h, l2, h1;
    std::vector<double> l2_ratio, h1_ratio;
};

/// Manufactured solution u = sin(pi (x+1)/2) sin(pi (y+1/2)) on the default
/// outer box, load -mu0 Laplace u, errors by a degree-4 rule on levels 0..levels.
inline ConvergenceStats magnetostatic_convergence(int levels = 3) {
    const SimConfig cfg;
    const double mu0 = cfg.material.mu0;
    const double pi = std::numbers::pi;
    const double x0 = cfg.outer.xmin, lx = cfg.outer.xmax - cfg.outer.xmin;
    const double y0 = cfg.outer.ymin, ly = cfg.outer.ymax - cfg.outer.ymin;
    const double kx = pi / lx, ky = pi / ly;
    auto exact = [&](const Vec2& p) { return std::sin(kx * (p.x() - x0)) * std::sin(ky * (p.y() - y0)); };
    auto grad = [&](const Vec2& p) {
        return Vec2(kx * std::cos(kx * (p.x() - x0)) * std::sin(ky * (p.y() - y0)),
                    ky * std::sin(kx * (p.x() - x0)) * std::cos(ky * (p.y() - y0)));
    };
    auto load = [&](const Vec2& p) { return mu0 * (kx * kx + ky * ky) * exact(p); };
    const auto rule = detail::dunavant4();

    ConvergenceStats st;
    Triangulation mesh = build_mesh(cfg.outer, cfg.magnet, cfg.base_divisions);
    for (int level = 0; level <= levels; ++level) {
        if (level > 0) mesh = refine_uniform(mesh);
        const Magnetostatics ms(mesh, mu0);
        Vector rhs = Vector::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
        double hmax = 0.0;
        for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
            const auto& t = mesh.elements[e];
            const double area = mesh.element_area[e];
            for (int a = 0; a < 3; ++a)
                hmax = std::max(hmax, (mesh.nodes[t[a]] - mesh.nodes[t[(a + 1) % 3]]).norm());
            for (const auto& q : rule) {
                const Vec2 p = q.bary[0] * mesh.nodes[t[0]] + q.bary[1] * mesh.nodes[t[1]] + q.bary[2] * mesh.nodes[t[2]];
                const double f = load(p);
                for (int a = 0; a < 3; ++a) rhs[t[a]] += area * q.weight * f * q.bary[a];
            }
        }
        const PotentialField uh = ms.solve_load(rhs);
        double l2 = 0.0, h1 = 0.0;
        for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
            const auto& t = mesh.elements[e];
            const double area = mesh.element_area[e];
            const Vec2 gh = ms.element_gradient(uh, e);
            for (const auto& q : rule) {
                const Vec2 p = q.bary[0] * mesh.nodes[t[0]] + q.bary[1] * mesh.nodes[t[1]] + q.bary[2] * mesh.nodes[t[2]];
                const double vh = q.bary[0] * uh[t[0]] + q.bary[1] * uh[t[1]] + q.bary[2] * uh[t[2]];
                l2 += area * q.weight * std::pow(vh - exact(p), 2);
                h1 += area * q.weight * (gh - grad(p)).squaredNorm();
            }
        }
        st.h.push_back(hmax);
        st.l2.push_back(std::sqrt(l2));
        st.h1.push_back(std::sqrt(h1));
        if (level > 0) {
            st.l2_ratio.push_back(st.l2[level - 1] / st.l2[level]);
            st.h1_ratio.push_back(st.h1[level - 1] / st.h1[level]);
        }
    }
    return st;
}

/// Uniform enthalpy, no Robin exchange, no magnetization change: one step
/// must return the input. Returns max relative deviation.
inline double insulated_step_deviation() {
    const SimConfig cfg;
    MaterialParams par = cfg.material;
    par.b_robin = 0.0;
    const SubMesh magnet = extract_magnet(build_mesh(cfg.outer, cfg.magnet, cfg.base_divisions));
    const ThermalSolver solver(magnet.mesh, par);
    const int ne = static_cast<int>(magnet.mesh.num_elements());
    MomentField lambda;
    lambda.m.assign(ne, Vec2(0.3, -2.0));
    lambda.second.assign(ne, 9.0);
    const EnthalpyField w0 = solver.uniform(cfg.theta0);
    const EnthalpyField w1 = solver.step(w0, lambda, lambda, cfg.tau).w;
    return ((w1 - w0).cwiseAbs() / w0.cwiseAbs().maxCoeff()).maxCoeff();
}

struct RunInvariants {
    double worst_heat_balance = 0.0;
    double worst_simplex_sum = 0.0;
    double min_weight = 0.0;
    int dissipation_decreases = 0;
    double min_cycle_dissipation = INFINITY;
    int thermal_violations = 0;
    int first_thermal_violation = -1;
    double worst_thermal_ratio = 0.0;  // residual / tolerance
};

/// Per-step observer collecting simplex data; call `finish` on the series.
class InvariantTracker {
public:
    void observe(const StepView& v) {
        const auto& xi = v.weights;
        for (int e = 0; e < xi.num_elements(); ++e) {
            double s = 0.0;
            for (double x : xi.weights(e)) {
                s += x;
                inv_.min_weight = std::min(inv_.min_weight, x);
            }
            inv_.worst_simplex_sum = std::max(inv_.worst_simplex_sum, std::abs(s - 1.0));
        }
    }

    RunInvariants finish(const TimeSeries& series, int steps_per_cycle) const {
        RunInvariants inv = inv_;
        for (std::size_t k = 0; k < series.size(); ++k) {
            inv.worst_heat_balance = std::max(inv.worst_heat_balance, std::abs(series[k].heat_balance_residual));
            if (k > 0 && series[k].cumulative_dissipation < series[k - 1].cumulative_dissipation) ++inv.dissipation_decreases;
            const BalanceCheck tb = thermal_balance_residual(series, k);
            if (!tb.holds) {
                if (inv.first_thermal_violation < 0) inv.first_thermal_violation = static_cast<int>(k);
                ++inv.thermal_violations;
                inv.worst_thermal_ratio = std::max(inv.worst_thermal_ratio, tb.residual / std::max(tb.tolerance, 1e-300));
            }
        }
        for (std::size_t end = steps_per_cycle; end < series.size(); end += steps_per_cycle)
            inv.min_cycle_dissipation = std::min(inv.min_cycle_dissipation,
                                                 series[end].cumulative_dissipation - series[end - steps_per_cycle].cumulative_dissipation);
        return inv;
    }

private:
    RunInvariants inv_;
};

inline std::string describe(const OracleStats& s) {
    return detail::str(s.instances - s.failures, "/", s.instances, " instances agree, worst gap ", s.worst_gap,
                       " of allowance, ", s.seconds, " s");
}

/// Everything `thermomag verify` runs; `cycles` sets the length of the
/// experiment-1 run used for the balance invariants.
inline Report run_suite(int cycles = 1) {
    Report r;
    r.push_back(simplex_projection_examples());

    const OracleStats oracle = oracle_agreement();
    r.push_back({"oracle agreement", oracle.failures == 0 && oracle.seconds < 60.0, describe(oracle)});

    const GradientStats grad = gradient_check();
    r.push_back({"gradient vs central differences", grad.relative_error < 1e-5,
                 detail::str(grad.coordinates, " coordinates, rel err ", grad.relative_error)});

    const MagnetostaticStats ms = magnetostatic_identities();
    r.push_back({"magnetostatic energy identity", ms.energy_identity <= 1e-9, detail::str("rel ", ms.energy_identity)});
    r.push_back({"magnetostatic reciprocity", ms.reciprocity <= 1e-9, detail::str("rel ", ms.reciprocity)});

    const ConvergenceStats conv = magnetostatic_convergence();
    bool rates = true;
    std::ostringstream rd;
    rd.precision(4);
    rd << "L2 ratios";
    for (double q : conv.l2_ratio) {
        rates &= (q >= 3.0 && q <= 5.0);
        rd << ' ' << q;
    }
    rd << ", H1 ratios";
    for (double q : conv.h1_ratio) {
        rates &= (q >= 1.5 && q <= 2.5);
        rd << ' ' << q;
    }
    r.push_back({"manufactured solution rates", rates, rd.str()});

    const double ins = insulated_step_deviation();
    r.push_back({"insulated thermal step", ins <= 1e-10, detail::str("max rel change ", ins)});

    SimConfig cfg = experiment1();
    cfg.cycles = cycles;
    const Simulation sim(cfg);
    InvariantTracker tracker;
    const RunResult run = sim.run([&](const StepView& v) { tracker.observe(v); });
    const RunInvariants inv = tracker.finish(run.series, cfg.steps_per_cycle());
    r.push_back({"heat balance identity", inv.worst_heat_balance <= 1e-9, detail::str("worst rel ", inv.worst_heat_balance)});
    r.push_back({"simplex constraints", inv.worst_simplex_sum <= 1e-12 && inv.min_weight >= 0.0,
                 detail::str("worst |sum-1| ", inv.worst_simplex_sum, ", min weight ", inv.min_weight)});
    r.push_back({"dissipation nondecreasing", inv.dissipation_decreases == 0 && inv.min_cycle_dissipation > 0.0,
                 detail::str(inv.dissipation_decreases, " decreases, min per-cycle ", inv.min_cycle_dissipation)});
    return r;
}

}  // namespace thermomag::verify
