#pragma once

// The time-incremental Gibbs objective over per-element atom weights, with
// moments tied exactly to the weights, and its Huber-smoothed gradient.

#include <cmath>
#include <span>
#include <vector>

#include "thermomag/error.hpp"
#include "thermomag/magnetostatics.hpp"
#include "thermomag/young_measure.hpp"

namespace thermomag {

enum class EasyAxis { x, y };

/// Material and model constants. Defaults are the reference parameter set.
struct MaterialParams {
    double a0 = 1.0;          // thermo-magnetic coupling, J/(K m A^2)
    double b0 = 1.0;          // quartic anisotropy coefficient, J m/A^4
    double theta_c = 1388.0;  // Curie temperature, K
    double H_c = 100.0;       // coercive force, T
    double h_c = 1.0;         // second-moment activation threshold, T m/A
    double epsilon = 1e-6;    // rate-dependent dissipation coefficient
    int q = 2;
    double mu0 = 1.0;
    double c_v = 420.0;       // heat capacity, J/(m^3 K)
    double K_cond = 100.0;    // heat conductivity, W/(m K)
    double b_robin = 0.001;   // Robin heat-transfer coefficient
    double theta_ext = 1100.0;
    double p_par = 0.1;       // sphere scale in the paramagnetic regime
    EasyAxis easy_axis = EasyAxis::y;
    double regularization = 0.0;  // weight of the tau |lambda|^{2q} term; 1 is the full scheme

    void validate() const {
        auto positive = [](double v, const char* key) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(key, "must be positive and finite");
        };
        positive(a0, "a0");
        positive(b0, "b0");
        positive(theta_c, "theta_c");
        positive(H_c, "H_c");
        positive(c_v, "c_v");
        positive(K_cond, "K_cond");
        positive(epsilon, "epsilon");
        positive(p_par, "p_par");
        positive(mu0, "mu0");
        if (!(h_c >= 0.0)) throw ConfigError("h_c", "must be nonnegative");
        if (!(b_robin >= 0.0)) throw ConfigError("b_robin", "must be nonnegative");
        if (!(theta_ext >= 0.0)) throw ConfigError("theta_ext", "must be nonnegative");
        if (!(regularization >= 0.0)) throw ConfigError("regularization", "must be nonnegative");
        if (q != 2) throw ConfigError("q", "only q = 2 is supported");
    }
};

/// S = { |lambda_1| <= H_c, |lambda_2| <= h_c }.
struct YieldSet {
    double H_c = 100.0;
    double h_c = 1.0;
};

inline YieldSet yield_set(const MaterialParams& p) { return {p.H_c, p.h_c}; }

/// phi_poles(m) + b0 |m|^4 with phi_poles = m_1^2 (easy axis y) or m_2^2.
inline double anisotropy_phi(const Vec2& m, const MaterialParams& params) {
    const double poles = params.easy_axis == EasyAxis::y ? m.x() * m.x() : m.y() * m.y();
    const double n2 = m.squaredNorm();
    return poles + params.b0 * n2 * n2;
}

/// Support function of S: H_c |eta_1| + h_c |eta_2|.
inline double dissipation_dual(const Vec2& eta1, double eta2, const YieldSet& yield) {
    return yield.H_c * eta1.norm() + yield.h_c * std::abs(eta2);
}

/// Huber approximation of |x| for x >= 0: quadratic below mu.
inline double huber(double x, double mu) { return x <= mu ? 0.5 * x * x / mu : x - 0.5 * mu; }

/// Everything the incremental problem at step k holds fixed.
struct StepState {
    MomentField previous;       // lambda^{k-1}
    std::vector<double> theta;  // Theta(w^{k-1}) per magnet element, K
    Vec2 field = Vec2::Zero();  // h(k tau)
    double tau = 0.1;
    bool incremental = true;    // false: plain Gibbs energy, no tau-terms
};

/// Breakdown of the objective; `total()` is the minimized quantity.
struct ObjectiveTerms {
    double anisotropy = 0.0;
    double thermal = 0.0;
    double zeeman = 0.0;
    double regularization = 0.0;
    double dissipation = 0.0;  // tau * delta*_S((lambda - lambda_prev) / tau)
    double viscous = 0.0;      // tau * eps/q |(lambda - lambda_prev) / tau|^q
    double magnetostatic = 0.0;

    double total() const { return anisotropy + thermal + zeeman + regularization + dissipation + viscous + magnetostatic; }
    /// Purely magnetic Gibbs energy: anisotropy, Zeeman and stray field.
    double magnetic_gibbs() const { return anisotropy + zeeman + magnetostatic; }
};

/// Static data of the weight-space objective: atoms, element areas, the
/// (optional) magnetostatic solver and the material constants.
class GibbsModel {
public:
    GibbsModel(AtomSet atoms, std::vector<double> areas, const Magnetostatics* magnetostatics, MaterialParams params)
        : atoms_(std::move(atoms)), areas_(std::move(areas)), magnetostatics_(magnetostatics), params_(params) {
        if (magnetostatics_ && magnetostatics_->num_magnet_elements() != static_cast<int>(areas_.size()))
            throw DimensionError("magnetostatic solver and element areas disagree");
    }

    const AtomSet& atoms() const { return atoms_; }
    const std::vector<double>& areas() const { return areas_; }
    const Magnetostatics* magnetostatics() const { return magnetostatics_; }
    const MaterialParams& params() const { return params_; }
    int num_elements() const { return static_cast<int>(areas_.size()); }
    double total_area() const {
        double s = 0.0;
        for (double a : areas_) s += a;
        return s;
    }

private:
    AtomSet atoms_;
    std::vector<double> areas_;
    const Magnetostatics* magnetostatics_;
    MaterialParams params_;
};

/// The objective of one time step with p and the step state frozen; per-atom
/// coefficients are precomputed so repeated evaluations are cheap.
class StepProblem {
public:
    StepProblem(const GibbsModel& model, std::span<const double> p, StepState state)
        : model_(&model), state_(std::move(state)), p_(p.begin(), p.end()) {
        const int ne = model.num_elements();
        const int n = model.atoms().size();
        if (static_cast<int>(p_.size()) != ne) throw DimensionError("p size mismatch");
        if (static_cast<int>(state_.theta.size()) != ne) throw DimensionError("temperature field size mismatch");
        if (state_.incremental && state_.previous.num_elements() != ne) throw DimensionError("previous moments size mismatch");
        if (state_.incremental && !(state_.tau > 0.0)) throw Error("time step must be positive");
        const auto& atoms = model.atoms();
        const auto& par = model.params();
        phi_.resize(static_cast<std::size_t>(ne) * n);
        for (int e = 0; e < ne; ++e)
            for (int i = 0; i < n; ++i)
                phi_[static_cast<std::size_t>(e) * n + i] = anisotropy_phi(p_[e] * atoms.radius[i] * atoms.direction[i], par);
    }

    const GibbsModel& model() const { return *model_; }
    const StepState& state() const { return state_; }
    const std::vector<double>& p() const { return p_; }
    int num_elements() const { return model_->num_elements(); }
    int num_atoms() const { return model_->atoms().size(); }
    std::size_t size() const { return static_cast<std::size_t>(num_elements()) * num_atoms(); }

    MomentField moments(std::span<const double> xi) const {
        MomentField out;
        const int ne = num_elements();
        out.m.resize(ne);
        out.second.resize(ne);
        for (int e = 0; e < ne; ++e) element_moments(element(xi, e), p_[e], model_->atoms(), out.m[e], out.second[e]);
        return out;
    }

    /// Exact (unsmoothed) objective.
    double objective(std::span<const double> xi) const { return terms(xi, 0.0, {}).total(); }

    /// Objective with the two norms of the dissipation smoothed below
    /// `smoothing` (in rate units); gradient written to `grad` when non-empty.
    /// smoothing == 0 evaluates the exact objective (gradient then uses a
    /// subgradient at kinks).
    double evaluate(std::span<const double> xi, double smoothing, std::span<double> grad) const {
        return terms(xi, smoothing, grad).total();
    }

    ObjectiveTerms terms(std::span<const double> xi, double smoothing, std::span<double> grad) const {
        if (xi.size() != size()) throw DimensionError("weight vector size mismatch");
        if (!grad.empty() && grad.size() != size()) throw DimensionError("gradient size mismatch");
        const auto& atoms = model_->atoms();
        const auto& par = model_->params();
        const auto& areas = model_->areas();
        const int ne = num_elements();
        const int n = num_atoms();
        const double tau = state_.tau;
        const bool inc = state_.incremental;

        std::vector<Vec2> m(ne);
        std::vector<double> l2(ne);
        for (int e = 0; e < ne; ++e) element_moments(element(xi, e), p_[e], atoms, m[e], l2[e]);

        ObjectiveTerms t;
        std::vector<Vec2> gu;
        if (const auto* ms = model_->magnetostatics()) {
            const PotentialField u = ms->solve_potential(m);
            gu = ms->coupling_field(u);
            double s = 0.0;
            for (int e = 0; e < ne; ++e) s += areas[e] * m[e].dot(gu[e]);
            t.magnetostatic = 0.5 * s;
        }

        for (int e = 0; e < ne; ++e) {
            const double area = areas[e];
            const auto w = element(xi, e);
            const double* phi = phi_.data() + static_cast<std::size_t>(e) * n;
            double aniso = 0.0;
            for (int i = 0; i < n; ++i) aniso += w[i] * phi[i];
            const double thermal_coeff = (state_.theta[e] - par.theta_c) * par.a0;
            t.anisotropy += area * aniso;
            t.thermal += area * thermal_coeff * l2[e];
            t.zeeman -= area * state_.field.dot(m[e]);

            Vec2 d1 = -state_.field;  // dF/dlambda_1 per unit area
            double d2 = thermal_coeff;
            if (inc) {
                const double norm2 = m[e].squaredNorm() + l2[e] * l2[e];
                t.regularization += area * tau * par.regularization * norm2 * norm2;
                d1 += tau * par.regularization * 4.0 * norm2 * m[e];
                d2 += tau * par.regularization * 4.0 * norm2 * l2[e];

                const Vec2 eta1 = (m[e] - state_.previous.m[e]) / tau;
                const double eta2 = (l2[e] - state_.previous.second[e]) / tau;
                const double n1 = eta1.norm();
                const double n2 = std::abs(eta2);
                if (smoothing > 0.0) {
                    t.dissipation += area * tau * (par.H_c * huber(n1, smoothing) + par.h_c * huber(n2, smoothing));
                    d1 += par.H_c * eta1 / std::max(n1, smoothing);
                    d2 += par.h_c * eta2 / std::max(n2, smoothing);
                } else {
                    t.dissipation += area * tau * (par.H_c * n1 + par.h_c * n2);
                    if (n1 > 0.0) d1 += par.H_c * eta1 / n1;
                    if (n2 > 0.0) d2 += par.h_c * eta2 / n2;
                }
                t.viscous += area * tau * 0.5 * par.epsilon * (eta1.squaredNorm() + eta2 * eta2);
                d1 += par.epsilon * eta1;
                d2 += par.epsilon * eta2;
            }

            if (!grad.empty()) {
                if (!gu.empty()) d1 += gu[e];
                double* g = grad.data() + static_cast<std::size_t>(e) * n;
                const double pe = p_[e];
                for (int i = 0; i < n; ++i) {
                    const double r = atoms.radius[i];
                    g[i] = area * (phi[i] + pe * r * atoms.direction[i].dot(d1) + pe * pe * r * r * d2);
                }
            }
        }
        return t;
    }

private:
    std::span<const double> element(std::span<const double> xi, int e) const {
        const std::size_t n = static_cast<std::size_t>(num_atoms());
        return xi.subspan(static_cast<std::size_t>(e) * n, n);
    }

    const GibbsModel* model_;
    StepState state_;
    std::vector<double> p_;
    std::vector<double> phi_;
};

/// Exact objective of the incremental problem for a weight field.
inline double step_objective(const WeightField& xi, const GibbsModel& model, const StepState& state) {
    if (xi.n_atoms != model.atoms().size() || xi.num_elements() != model.num_elements())
        throw DimensionError("weight field does not match the model");
    return StepProblem(model, xi.p, state).objective(xi.xi);
}

/// Gradient of the Huber-smoothed objective with respect to every weight.
inline std::vector<double> step_gradient(const WeightField& xi, const GibbsModel& model, const StepState& state,
                                         double smoothing) {
    if (!(smoothing > 0.0)) throw Error("smoothing must be positive");
    if (xi.n_atoms != model.atoms().size() || xi.num_elements() != model.num_elements())
        throw DimensionError("weight field does not match the model");
    StepProblem prob(model, xi.p, state);
    std::vector<double> g(prob.size());
    prob.evaluate(xi.xi, smoothing, g);
    return g;
}

}  // namespace thermomag
