#pragma once

// Projected gradient descent with Armijo backtracking over a product of
// probability simplices, plus an exhaustive grid oracle for tiny instances.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "thermomag/error.hpp"
#include "thermomag/gibbs_energy.hpp"

namespace thermomag {

struct SolverSettings {
    int max_iterations = 20000;
    double armijo_shrink = 0.5;
    double armijo_slope = 1e-4;
    double gradient_tolerance = 1e-6;  // on ||xi - P(xi - g)|| relative to 1 + |F|
    double stall_tolerance = 1e-10;    // relative decrease over `stall_window` iterations
    int stall_window = 10;
    double smoothing = 1e-2;           // Huber scale for the dissipation norms (rate units)
    std::ostream* log = nullptr;       // iter,F,projected_grad_norm,step

    void validate() const {
        if (max_iterations < 1) throw ConfigError("max_iterations", "must be >= 1");
        if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) throw ConfigError("armijo_shrink", "must lie in (0,1)");
        if (!(armijo_slope > 0.0 && armijo_slope < 1.0)) throw ConfigError("armijo_slope", "must lie in (0,1)");
        if (!(gradient_tolerance > 0.0)) throw ConfigError("gradient_tolerance", "must be positive");
        if (!(stall_tolerance > 0.0)) throw ConfigError("stall_tolerance", "must be positive");
        if (stall_window < 1) throw ConfigError("stall_window", "must be >= 1");
        if (!(smoothing > 0.0)) throw ConfigError("smoothing", "must be positive");
    }
};

/// Euclidean projection onto { x >= 0, sum x = 1 } (sort and threshold).
inline void project_simplex_inplace(std::span<double> v) {
    const std::size_t n = v.size();
    if (n == 0) return;
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double threshold = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumsum += u[j];
        const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) threshold = t;
    }
    const auto top = std::max_element(v.begin(), v.end()) - v.begin();
    double sum = 0.0;
    for (double& x : v) sum += (x = std::max(x - threshold, 0.0));
    // Large inputs lose the unit sum to cancellation; restore it.
    if (sum > 0.0 && std::abs(sum - 1.0) > 1e-12) {
        for (double& x : v) x /= sum;
    } else if (!(sum > 0.0)) {
        std::fill(v.begin(), v.end(), 0.0);
        v[static_cast<std::size_t>(top)] = 1.0;
    }
}

inline std::vector<double> project_simplex(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    project_simplex_inplace(out);
    return out;
}

struct MinimizeResult {
    WeightField xi;
    double objective = 0.0;  // smoothed objective at xi
    double projected_gradient = 0.0;
    int iterations = 0;
    int evaluations = 0;
};

namespace detail {

inline void project_blocks(std::span<double> x, int block) {
    for (std::size_t off = 0; off < x.size(); off += static_cast<std::size_t>(block))
        project_simplex_inplace(x.subspan(off, static_cast<std::size_t>(block)));
}


}  // namespace detail

/// Minimizes the smoothed step objective from a feasible start. Trial steps
/// use a Barzilai-Borwein length per element block; Armijo backtracking
/// along the projection arc guarantees monotone descent.
inline MinimizeResult minimize_step(const WeightField& start, const StepProblem& problem, const SolverSettings& settings) {
    settings.validate();
    if (start.xi.size() != problem.size() || start.n_atoms != problem.num_atoms())
        throw DimensionError("start weights do not match the step problem");
    const int n = problem.num_atoms();
    const std::size_t dim = problem.size();
    const double mu = settings.smoothing;

    std::vector<double> x = start.xi;
    detail::project_blocks(x, n);
    std::vector<double> g(dim), xn(dim), gn(dim), trial(dim);
    int evals = 1;
    double F = problem.evaluate(x, mu, g);

    auto projected_gradient_norm = [&](const std::vector<double>& xv, const std::vector<double>& gv) {
        for (std::size_t i = 0; i < dim; ++i) trial[i] = xv[i] - gv[i];
        detail::project_blocks(trial, n);
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += (xv[i] - trial[i]) * (xv[i] - trial[i]);
        return std::sqrt(s);
    };

    const int ne = problem.num_elements();
    auto block = [n](int e) { return static_cast<std::size_t>(e) * static_cast<std::size_t>(n); };
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    constexpr double alpha_min = 1e-30;
    // Far beyond this the trial point is a vertex anyway.
    const double alpha_max = gmax > 0.0 ? 1e8 / gmax : 1e8;
    // One step length per element block: elements pinned at the dissipation
    // kink are stiff, the others are nearly linear.
    std::vector<double> alpha(static_cast<std::size_t>(ne), gmax > 0.0 ? 1.0 / gmax : 1.0);

    auto done = [&](double pgn, int iterations) {
        MinimizeResult r;
        r.xi.n_atoms = n;
        r.xi.xi = x;
        r.xi.p = start.p;
        r.objective = F;
        r.projected_gradient = pgn;
        r.iterations = iterations;
        r.evaluations = evals;
        return r;
    };

    std::deque<double> history{F};
    double pg = 0.0;
    for (int it = 0; it < settings.max_iterations; ++it) {
        pg = projected_gradient_norm(x, g);
        if (settings.log) *settings.log << it << ',' << F << ',' << pg << ',' << *std::max_element(alpha.begin(), alpha.end()) << '\n';
        if (pg <= settings.gradient_tolerance * (1.0 + std::abs(F)))
            return done(pg, it);
        if (static_cast<int>(history.size()) > settings.stall_window) {
            if (history.front() - F <= settings.stall_tolerance * (1.0 + std::abs(F))) return done(pg, it);
            history.pop_front();
        }

        double shrink = 1.0;
        double Fn = F;
        bool accepted = false;
        while (shrink >= alpha_min) {
            for (int e = 0; e < ne; ++e) {
                const double a = shrink * alpha[static_cast<std::size_t>(e)];
                for (std::size_t i = block(e); i < block(e + 1); ++i) xn[i] = x[i] - a * g[i];
            }
            detail::project_blocks(xn, n);
            double slope = 0.0;
            for (std::size_t i = 0; i < dim; ++i) slope += g[i] * (xn[i] - x[i]);
            if (!(slope < 0.0)) break;  // no descent direction left at this precision
            Fn = problem.evaluate(xn, mu, gn);
            ++evals;
            if (Fn <= F + settings.armijo_slope * slope) {
                accepted = true;
                break;
            }
            shrink *= settings.armijo_shrink;
        }
        if (!accepted) return done(pg, it);

        for (int e = 0; e < ne; ++e) {
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = block(e); i < block(e + 1); ++i) {
                const double sv = xn[i] - x[i];
                const double yv = gn[i] - g[i];
                ss += sv * sv;
                sy += sv * yv;
            }
            double& a = alpha[static_cast<std::size_t>(e)];
            if (ss > 0.0 && sy > 0.0)
                a = std::clamp(ss / sy, alpha_min, alpha_max);
            else
                a = std::min(alpha_max, 2.0 * shrink * a);
        }
        x.swap(xn);
        g.swap(gn);
        F = Fn;
        history.push_back(F);
    }
    pg = projected_gradient_norm(x, g);
    throw ConvergenceError("step minimization hit the iteration limit", x, F, pg, settings.max_iterations);
}

struct OracleResult {
    std::vector<double> xi;
    double objective = std::numeric_limits<double>::infinity();
    long long evaluations = 0;
};

/// Exhaustive search over the simplex grid with spacing `grid_resolution`
/// (per element), evaluating the exact objective.
inline OracleResult brute_force_oracle(const StepProblem& problem, double grid_resolution) {
    const int ne = problem.num_elements();
    const int n = problem.num_atoms();
    if (ne > 2 || n > 4) throw SizeError("brute-force oracle supports at most 2 elements with N <= 4");
    if (!(grid_resolution > 0.0 && grid_resolution <= 1.0)) throw Error("grid resolution must lie in (0,1]");
    const int K = static_cast<int>(std::lround(1.0 / grid_resolution));

    // Number of compositions of K into n parts: C(K+n-1, n-1).
    double per_element = 1.0;
    for (int j = 1; j < n; ++j) per_element = per_element * (K + j) / j;
    if (std::pow(per_element, ne) > 5e7) throw SizeError("brute-force grid too large");

    std::vector<std::vector<double>> points;
    std::vector<int> parts(n, 0);
    std::function<void(int, int)> rec = [&](int idx, int remaining) {
        if (idx == n - 1) {
            parts[idx] = remaining;
            std::vector<double> pt(n);
            for (int i = 0; i < n; ++i) pt[i] = static_cast<double>(parts[i]) / K;
            points.push_back(std::move(pt));
            return;
        }
        for (int v = remaining; v >= 0; --v) {
            parts[idx] = v;
            rec(idx + 1, remaining - v);
        }
    };
    rec(0, K);

    OracleResult best;
    std::vector<double> x(problem.size());
    std::vector<std::size_t> index(ne, 0);
    while (true) {
        for (int e = 0; e < ne; ++e) std::copy(points[index[e]].begin(), points[index[e]].end(), x.begin() + e * n);
        const double F = problem.objective(x);
        ++best.evaluations;
        if (F < best.objective) {
            best.objective = F;
            best.xi = x;
        }
        int e = 0;
        while (e < ne && ++index[e] == points.size()) index[e++] = 0;
        if (e == ne) break;
    }
    return best;
}

}  // namespace thermomag
