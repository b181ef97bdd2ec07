#pragma once

// Time loop of the coupled scheme: per step the sphere scale p is set from
// temperature, the weights are re-minimized, and the enthalpy is advanced.
// Energetics diagnostics are accumulated on the fly.

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thermomag/error.hpp"
#include "thermomag/gibbs_energy.hpp"
#include "thermomag/magnetostatics.hpp"
#include "thermomag/mesh.hpp"
#include "thermomag/step_minimizer.hpp"
#include "thermomag/thermal.hpp"
#include "thermomag/young_measure.hpp"

namespace thermomag {

enum class WaveKind { triangular, sinusoidal };

/// h(t) = scale * h_x(t) * direction with h_x periodic of unit amplitude.
struct Waveform {
    WaveKind kind = WaveKind::triangular;
    double period = 10.0;
    double amplitude = 1.0;
    double scale = 300.0;  // 3 H_c
    Vec2 direction = Vec2(1.0, 0.0);
};

/// Scalar profile h_x(t). Triangular: 0 -> A on [0, P/4], A -> -A on
/// [P/4, 3P/4], -A -> 0 on [3P/4, P].
inline double wave_profile(double t, const Waveform& wf) {
    double s = std::fmod(t, wf.period) / wf.period;
    if (s < 0.0) s += 1.0;
    if (wf.kind == WaveKind::sinusoidal) return wf.amplitude * std::sin(2.0 * std::numbers::pi * s);
    if (s < 0.25) return wf.amplitude * 4.0 * s;
    if (s < 0.75) return wf.amplitude * (2.0 - 4.0 * s);
    return wf.amplitude * (4.0 * s - 4.0);
}

inline Vec2 field_at(double t, const Waveform& wf) { return wf.scale * wave_profile(t, wf) * wf.direction; }

enum class InitialWeights { minimized, uniform, aligned };

/// How the sphere scale p of step k is tied to temperature: `lagged` takes
/// Theta(w^{k-1}) once; `implicit` iterates until p matches Theta(w^k).
enum class PUpdate { lagged, implicit };

struct SimConfig {
    Rect outer{-1.0, 1.0, -0.5, 0.5};
    Rect magnet{-1.0 / 9.0, 1.0 / 9.0, -0.25, 0.25};
    int base_divisions = 4;
    int mesh_level = 0;
    int n_angles = 12;
    std::vector<double> layers = three_layers();
    MaterialParams material;
    double theta0 = 1300.0;
    Waveform waveform;
    double tau = 0.1;
    int cycles = 8;
    SolverSettings solver;
    bool magnetostatics = true;
    InitialWeights initial_weights = InitialWeights::minimized;
    Vec2 initial_direction = Vec2(0.0, 1.0);
    PUpdate p_update = PUpdate::implicit;
    double coupling_tolerance = 1e-6;  // K, on the element temperatures fed to p
    int coupling_max_iterations = 30;
    int snapshot_every = 0;  // 0: final state only
    std::string output_dir = "output";

    double t_end() const { return cycles * waveform.period; }
    int steps_per_cycle() const { return static_cast<int>(std::lround(waveform.period / tau)); }
    int num_steps() const { return cycles * steps_per_cycle(); }

    void validate() const {
        if (!outer.valid()) throw ConfigError("outer_box", "needs xmin < xmax and ymin < ymax");
        if (!magnet.valid()) throw ConfigError("magnet_box", "needs xmin < xmax and ymin < ymax");
        if (!outer.strictly_contains(magnet)) throw ConfigError("magnet_box", "must lie strictly inside outer_box");
        if (base_divisions < 1) throw ConfigError("base_divisions", "must be >= 1");
        if (mesh_level < 0 || mesh_level > 6) throw ConfigError("mesh_level", "must lie in [0, 6]");
        if (n_angles < 2) throw ConfigError("n_angles", "must be >= 2");
        if (layers.empty()) throw ConfigError("layers", "must be nonempty");
        for (double r : layers)
            if (!(r > 0.0)) throw ConfigError("layers", "radii must be positive");
        material.validate();
        if (!(theta0 >= 0.0)) throw ConfigError("theta0", "must be nonnegative");
        if (!(waveform.period > 0.0)) throw ConfigError("period", "must be positive");
        if (!(waveform.amplitude >= 0.0)) throw ConfigError("amplitude", "must be nonnegative");
        if (!std::isfinite(waveform.scale)) throw ConfigError("field_scale", "must be finite");
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau", "must be positive");
        const double ratio = waveform.period / tau;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) throw ConfigError("tau", "period / tau must be an integer");
        if (cycles < 1) throw ConfigError("cycles", "must be >= 1");
        if (!(coupling_tolerance > 0.0)) throw ConfigError("coupling_tolerance", "must be positive");
        if (coupling_max_iterations < 1) throw ConfigError("coupling_max_iterations", "must be >= 1");
        if (snapshot_every < 0) throw ConfigError("snapshot_every", "must be >= 0");
        solver.validate();
    }
};

/// One row of the time series.
struct StepRecord {
    int step = 0;
    double t = 0.0;
    double h_x = 0.0;
    double mean_mx = 0.0;
    double mean_my = 0.0;
    double max_abs_m = 0.0;
    double mean_theta = 0.0;
    double max_theta = 0.0;
    double gibbs = 0.0;                 // magnetic Gibbs energy
    double magnetostatic_energy = 0.0;
    double step_dissipation = 0.0;      // tau int [delta*_S + eps/2 |rate|^2]
    double cumulative_dissipation = 0.0;
    double external_work = 0.0;         // sum_j int (h_j - h_{j-1}) . m_j
    double magnetic_residual = 0.0;     // G_k - G_0 - external_work
    double magnetic_residual_alt = 0.0; // G_k - G_0 + external_work
    double thermal_rhs = 0.0;           // cumulative right-hand side of the thermal inequality
    double thermal_residual = 0.0;      // cumulative_dissipation - thermal_rhs
    double heat_balance_residual = 0.0;
    int iterations = 0;           // minimizer iterations, summed over coupling passes
    int coupling_iterations = 0;  // minimize + heat passes taken by the step
    double coupling_residual = 0.0;  // K, max |Theta(w^k) - theta used for p| per element
};

inline constexpr std::array<std::string_view, 21> timeseries_columns{
    "step", "t", "h_x", "mean_mx", "mean_my", "max_abs_m", "mean_theta", "max_theta", "gibbs", "magnetostatic_energy",
    "step_dissipation", "cumulative_dissipation", "external_work", "magnetic_residual", "magnetic_residual_alt",
    "thermal_rhs", "thermal_residual", "heat_balance_residual", "iterations", "coupling_iterations", "coupling_residual"};

using TimeSeries = std::vector<StepRecord>;

struct BalanceCheck {
    double residual = 0.0;
    double tolerance = 0.0;
    bool holds = true;
};

/// G(t_k) - G(0) - sum_j int (h_j - h_{j-1}) . m_j, checked as an inequality
/// (<= tolerance). `alternative` flips the sign of the power term.
inline BalanceCheck magnetic_balance_residual(const TimeSeries& series, std::size_t k, bool alternative = false,
                                              double rel_tol = 1e-6) {
    const auto& r = series.at(k);
    BalanceCheck c;
    c.residual = alternative ? r.magnetic_residual_alt : r.magnetic_residual;
    c.tolerance = rel_tol * std::abs(series.front().gibbs);
    c.holds = c.residual <= c.tolerance;
    return c;
}

/// Cumulative dissipation minus the coupling/regularization work bound;
/// the thermal inequality asks for residual <= tolerance.
inline BalanceCheck thermal_balance_residual(const TimeSeries& series, std::size_t k, double rel_tol = 1e-6) {
    const auto& r = series.at(k);
    BalanceCheck c;
    c.residual = r.thermal_residual;
    c.tolerance = rel_tol * std::max({std::abs(r.cumulative_dissipation), std::abs(r.thermal_rhs), 1e-300});
    c.holds = c.residual <= c.tolerance;
    return c;
}

/// Read-only view handed to step observers.
struct StepView {
    int step;
    double t;
    const WeightField& weights;
    const MomentField& moments;
    const EnthalpyField& enthalpy;
    const std::vector<double>& element_theta;  // temperatures used for p at this step
    const StepRecord& record;
};

struct Snapshot {
    WeightField weights;
    MomentField moments;
    EnthalpyField enthalpy;
    PotentialField potential;
};

struct RunResult {
    TimeSeries series;
    std::vector<std::pair<int, Snapshot>> snapshots;  // (step, state) every `snapshot_every` steps
    Snapshot final_state;
    double wall_seconds = 0.0;
};

class Simulation {
public:
    explicit Simulation(SimConfig config) : config_(std::move(config)) {
        config_.validate();
        mesh_ = refine_uniform(build_mesh(config_.outer, config_.magnet, config_.base_divisions), config_.mesh_level);
        magnet_ = extract_magnet(mesh_);
        atoms_ = build_atom_set(config_.n_angles, config_.layers);
        magnetostatics_ = std::make_unique<Magnetostatics>(mesh_, config_.material.mu0);
        model_ = std::make_unique<GibbsModel>(atoms_, magnet_.mesh.element_area,
                                              config_.magnetostatics ? magnetostatics_.get() : nullptr, config_.material);
        thermal_ = std::make_unique<ThermalSolver>(magnet_.mesh, config_.material);
    }

    const SimConfig& config() const { return config_; }
    const Triangulation& mesh() const { return mesh_; }
    const SubMesh& magnet() const { return magnet_; }
    const AtomSet& atoms() const { return atoms_; }
    const GibbsModel& model() const { return *model_; }
    const ThermalSolver& thermal() const { return *thermal_; }
    const Magnetostatics& magnetostatics() const { return *magnetostatics_; }

    RunResult run(const std::function<void(const StepView&)>& observer = {}) const {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& par = config_.material;
        const int ne = model_->num_elements();
        const double area = model_->total_area();
        const double tau = config_.tau;

        RunResult out;
        EnthalpyField w = thermal_->uniform(config_.theta0);
        std::vector<double> theta_e = thermal_->element_temperature(w);
        std::vector<double> p(ne);
        for (int e = 0; e < ne; ++e) p[e] = p_of_theta(theta_e[e], par.a0, par.b0, par.theta_c, par.p_par);

        WeightField xi = initial_weights(p);
        StepState state0;
        state0.theta = theta_e;
        state0.field = field_at(0.0, config_.waveform);
        state0.tau = tau;
        state0.incremental = false;
        int iters0 = 0;
        if (config_.initial_weights == InitialWeights::minimized) {
            const StepProblem problem(*model_, p, state0);
            const auto res = minimize_checked(xi, problem, 0);
            xi = res.xi;
            iters0 = res.iterations;
        }
        const StepProblem problem0(*model_, p, state0);
        MomentField lambda = problem0.moments(xi.xi);
        const ObjectiveTerms terms0 = problem0.terms(xi.xi, 0.0, {});

        StepRecord rec;
        rec.step = 0;
        rec.t = 0.0;
        rec.h_x = wave_profile(0.0, config_.waveform);
        fill_state(rec, lambda, w, area);
        rec.gibbs = terms0.magnetic_gibbs();
        rec.magnetostatic_energy = terms0.magnetostatic;
        rec.iterations = iters0;
        out.series.push_back(rec);
        auto capture = [&](int k) {
            if (config_.snapshot_every > 0 && k % config_.snapshot_every == 0)
                out.snapshots.emplace_back(k, Snapshot{xi, lambda, w, magnetostatics_->solve_potential(lambda.m)});
        };
        capture(0);
        if (observer) observer(StepView{0, 0.0, xi, lambda, w, theta_e, out.series.back()});

        const double gibbs0 = rec.gibbs;
        Vec2 h_prev = state0.field;
        const int steps = config_.num_steps();
        for (int k = 1; k <= steps; ++k) {
            const double t = k * tau;
            const Vec2 field = field_at(t, config_.waveform);
            theta_e = thermal_->element_temperature(w);
            StepOutcome step;
            int total_iterations = 0;
            if (config_.p_update == PUpdate::lagged) {
                step = advance(k, xi, lambda, w, theta_e, field);
                total_iterations = step.iterations;
                const std::vector<double> next_theta = thermal_->element_temperature(step.heat.w);
                for (int e = 0; e < ne; ++e)
                    step.coupling_residual = std::max(step.coupling_residual, std::abs(next_theta[e] - theta_e[e]));
            } else {
                // Relaxed fixed point on the temperatures that set p. Below
                // the Curie point lambda_2 tracks p^2, and the coupling heat
                // answers a temperature change d with about -g d; damping by
                // 1/(1+g) removes that feedback.
                // If no pass meets the tolerance (first-order layer switches
                // can leave no consistent temperature), the pass with the
                // smallest mismatch is kept and the mismatch is recorded.
                StepOutcome best;
                double best_change = INFINITY;
                double damping = 1.0;
                int passes = 0;
                for (int it = 1; it <= config_.coupling_max_iterations; ++it) {
                    StepOutcome pass = advance(k, it == 1 ? xi : step.weights, lambda, w, theta_e, field);
                    passes = it;
                    total_iterations += pass.iterations;
                    const std::vector<double> next_theta = thermal_->element_temperature(pass.heat.w);
                    double change = 0.0;
                    for (int e = 0; e < ne; ++e) change = std::max(change, std::abs(next_theta[e] - theta_e[e]));
                    pass.coupling_residual = change;
                    const bool settled = change <= config_.coupling_tolerance;
                    if (change < best_change) {
                        best_change = change;
                        best = pass;
                    }
                    step = std::move(pass);
                    if (settled) break;
                    if (it % 10 == 0) damping *= 0.5;
                    for (int e = 0; e < ne; ++e) {
                        const double g = theta_e[e] < par.theta_c ? par.a0 * par.a0 * theta_e[e] / (2.0 * par.b0 * par.c_v) : 0.0;
                        theta_e[e] += damping * (next_theta[e] - theta_e[e]) / (1.0 + g);
                    }
                }
                if (step.coupling_residual > config_.coupling_tolerance) step = std::move(best);
                step.coupling_iterations = passes;
                theta_e = step.state.theta;
            }
            const StepState& state = step.state;
            xi = step.weights;
            MomentField next = std::move(step.moments);
            const ObjectiveTerms& terms = step.terms;
            ThermalStepResult& heat = step.heat;

            StepRecord r;
            r.step = k;
            r.t = t;
            r.h_x = wave_profile(t, config_.waveform);
            fill_state(r, next, heat.w, area);
            r.gibbs = terms.magnetic_gibbs();
            r.magnetostatic_energy = terms.magnetostatic;
            r.step_dissipation = terms.dissipation + terms.viscous;
            const StepRecord& last = out.series.back();
            r.cumulative_dissipation = last.cumulative_dissipation + r.step_dissipation;

            double work = 0.0, thermal_rhs = 0.0;
            const Vec2 dh = state.field - h_prev;
            const auto& areas = model_->areas();
            for (int e = 0; e < ne; ++e) {
                work += areas[e] * dh.dot(next.m[e]);
                const Vec2 d1 = next.m[e] - lambda.m[e];
                const double d2 = next.second[e] - lambda.second[e];
                const double norm2 = next.m[e].squaredNorm() + next.second[e] * next.second[e];
                const double reg = 4.0 * tau * par.regularization * norm2 * (next.m[e].dot(d1) + next.second[e] * d2);
                thermal_rhs -= areas[e] * ((theta_e[e] - par.theta_c) * par.a0 * d2 + reg);
            }
            r.external_work = last.external_work + work;
            r.magnetic_residual = r.gibbs - gibbs0 - r.external_work;
            r.magnetic_residual_alt = r.gibbs - gibbs0 + r.external_work;
            r.thermal_rhs = last.thermal_rhs + thermal_rhs;
            r.thermal_residual = r.cumulative_dissipation - r.thermal_rhs;
            r.heat_balance_residual = heat.heat_balance_residual;
            r.iterations = total_iterations;
            r.coupling_iterations = std::max(step.coupling_iterations, 1);
            r.coupling_residual = step.coupling_residual;
            out.series.push_back(r);

            lambda = std::move(next);
            w = std::move(heat.w);
            h_prev = state.field;
            capture(k);
            if (observer) observer(StepView{k, t, xi, lambda, w, theta_e, out.series.back()});
        }

        out.final_state.weights = xi;
        out.final_state.moments = lambda;
        out.final_state.enthalpy = w;
        out.final_state.potential = magnetostatics_->solve_potential(lambda.m);
        out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

private:
    struct StepOutcome {
        StepState state;
        WeightField weights;
        MomentField moments;
        ObjectiveTerms terms;
        ThermalStepResult heat;
        int iterations = 0;
        int coupling_iterations = 0;
        double coupling_residual = 0.0;
    };

    /// One minimize + heat pass of step k with p set from `theta`.
    StepOutcome advance(int k, const WeightField& start, const MomentField& lambda, const EnthalpyField& w,
                        const std::vector<double>& theta, const Vec2& field) const {
        const auto& par = config_.material;
        StepOutcome o;
        std::vector<double> p(theta.size());
        for (std::size_t e = 0; e < p.size(); ++e) p[e] = p_of_theta(theta[e], par.a0, par.b0, par.theta_c, par.p_par);
        o.state.previous = lambda;
        o.state.theta = theta;
        o.state.field = field;
        o.state.tau = config_.tau;
        const StepProblem problem(*model_, p, o.state);
        WeightField guess = start;
        guess.p = p;
        const MinimizeResult res = minimize_checked(guess, problem, k);
        o.weights = res.xi;
        o.iterations = res.iterations;
        o.moments = problem.moments(o.weights.xi);
        o.terms = problem.terms(o.weights.xi, 0.0, {});
        try {
            o.heat = thermal_->step(w, lambda, o.moments, config_.tau);
        } catch (const Error& err) {
            rethrow_at(err, k);
        }
        return o;
    }

    WeightField initial_weights(const std::vector<double>& p) const {
        const int ne = model_->num_elements();
        WeightField xi = config_.initial_weights == InitialWeights::aligned
                             ? init_weights(atoms_, ne, Aligned{config_.initial_direction})
                             : init_weights(atoms_, ne, Uniform{});
        xi.p = p;
        return xi;
    }

    MinimizeResult minimize_checked(const WeightField& start, const StepProblem& problem, int k) const {
        try {
            return minimize_step(start, problem, config_.solver);
        } catch (const ConvergenceError& err) {
            std::ostringstream msg;
            msg << "step " << k << ": " << err.what() << " (F=" << err.objective() << ", projected gradient=" << err.projected_gradient() << ")";
            throw ConvergenceError(msg.str(), err.last_iterate(), err.objective(), err.projected_gradient(), err.iterations());
        } catch (const Error& err) {
            rethrow_at(err, k);
        }
    }

    [[noreturn]] static void rethrow_at(const Error& err, int k) {
        throw Error("step " + std::to_string(k) + ": " + err.what());
    }

    void fill_state(StepRecord& r, const MomentField& lambda, const EnthalpyField& w, double area) const {
        const auto& areas = model_->areas();
        Vec2 mean = Vec2::Zero();
        double max_m = 0.0;
        for (int e = 0; e < lambda.num_elements(); ++e) {
            mean += areas[e] * lambda.m[e];
            max_m = std::max(max_m, lambda.m[e].norm());
        }
        mean /= area;
        r.mean_mx = mean.x();
        r.mean_my = mean.y();
        r.max_abs_m = max_m;
        r.mean_theta = thermal_->mean_temperature(w);
        r.max_theta = theta_of_w(w.maxCoeff(), config_.material.c_v);
    }

    SimConfig config_;
    Triangulation mesh_;
    SubMesh magnet_;
    AtomSet atoms_;
    std::unique_ptr<Magnetostatics> magnetostatics_;
    std::unique_ptr<GibbsModel> model_;
    std::unique_ptr<ThermalSolver> thermal_;
};

/// Shoelace area of the closed (h_x, mean m_x) curve of cycle `c` (1-based),
/// positive for counterclockwise traversal.
inline double loop_area(const TimeSeries& series, int steps_per_cycle, int c) {
    const std::size_t begin = static_cast<std::size_t>((c - 1) * steps_per_cycle);
    const std::size_t end = begin + static_cast<std::size_t>(steps_per_cycle);
    if (end >= series.size()) throw Error("cycle not contained in the series");
    double a = 0.0;
    for (std::size_t k = begin; k < end; ++k)
        a += series[k].h_x * series[k + 1].mean_mx - series[k + 1].h_x * series[k].mean_mx;
    // Close the curve explicitly (start and end field values coincide).
    a += series[end].h_x * series[begin].mean_mx - series[begin].h_x * series[end].mean_mx;
    return 0.5 * a;
}

/// Mean of mean_theta over the steps of cycle `c` (1-based), end points
/// (k-1)N+1 .. kN.
inline double cycle_mean_theta(const TimeSeries& series, int steps_per_cycle, int c) {
    double s = 0.0;
    for (int k = (c - 1) * steps_per_cycle + 1; k <= c * steps_per_cycle; ++k) s += series.at(k).mean_theta;
    return s / steps_per_cycle;
}

}  // namespace thermomag
