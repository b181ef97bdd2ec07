#pragma once

// Discrete Young measures: per-element convex combinations of Dirac atoms
// placed on spherical layers, scaled by a temperature-dependent radius p.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "thermomag/error.hpp"
#include "thermomag/mesh.hpp"

namespace thermomag {

/// Atom i sits at radius[i] * (cos angle[i], sin angle[i]) before scaling by p.
struct AtomSet {
    std::vector<double> angle;
    std::vector<double> radius;
    std::vector<Vec2> direction;
    int n_angles = 0;

    int size() const { return static_cast<int>(angle.size()); }
    double max_radius() const { return *std::max_element(radius.begin(), radius.end()); }
    double min_radius() const { return *std::min_element(radius.begin(), radius.end()); }
};

/// Layer-major layout: atom index = layer * n_angles + k, angle 2*pi*k/n_angles.
inline AtomSet build_atom_set(int n_angles, std::span<const double> layers) {
    if (n_angles < 2) throw Error("atom set needs at least two angles");
    if (layers.empty()) throw Error("atom set needs at least one layer");
    AtomSet atoms;
    atoms.n_angles = n_angles;
    for (double r : layers) {
        if (!(r > 0.0)) throw Error("layer radii must be positive");
        for (int k = 0; k < n_angles; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / n_angles;
            atoms.angle.push_back(phi);
            atoms.radius.push_back(r);
            atoms.direction.emplace_back(std::cos(phi), std::sin(phi));
        }
    }
    return atoms;
}

inline std::vector<double> three_layers() { return {1.0 / 1.1, 1.0, 1.1}; }
inline std::vector<double> middle_sphere() { return {1.0}; }

/// Sphere scale p(theta): sqrt((theta_c - theta) a0 / (2 b0)) below the Curie
/// temperature, p_par at or above it.
inline double p_of_theta(double theta, double a0, double b0, double theta_c, double p_par) {
    if (theta < theta_c) return std::sqrt((theta_c - theta) * a0 / (2.0 * b0));
    return p_par;
}

/// Convex weights xi[e*N + i] for every magnet element e, plus its scale p[e].
struct WeightField {
    int n_atoms = 0;
    std::vector<double> xi;
    std::vector<double> p;

    WeightField() = default;
    WeightField(int elements, int atoms) : n_atoms(atoms), xi(static_cast<std::size_t>(elements) * atoms, 0.0), p(elements, 1.0) {}

    int num_elements() const { return n_atoms == 0 ? 0 : static_cast<int>(xi.size() / n_atoms); }
    std::span<double> weights(int e) { return {xi.data() + static_cast<std::size_t>(e) * n_atoms, static_cast<std::size_t>(n_atoms)}; }
    std::span<const double> weights(int e) const {
        return {xi.data() + static_cast<std::size_t>(e) * n_atoms, static_cast<std::size_t>(n_atoms)};
    }
};

/// First moment m = lambda_1 and second moment lambda_2 per magnet element.
struct MomentField {
    std::vector<Vec2> m;
    std::vector<double> second;

    int num_elements() const { return static_cast<int>(m.size()); }
};

inline void element_moments(std::span<const double> xi, double p, const AtomSet& atoms, Vec2& m, double& second) {
    Vec2 s = Vec2::Zero();
    double q = 0.0;
    for (int i = 0; i < atoms.size(); ++i) {
        s += xi[i] * atoms.radius[i] * atoms.direction[i];
        q += xi[i] * atoms.radius[i] * atoms.radius[i];
    }
    m = p * s;
    second = p * p * q;
}

/// lambda_1 = p sum xi_i r_i s_i,  lambda_2 = p^2 sum xi_i r_i^2.
inline MomentField moments(const WeightField& xi, const AtomSet& atoms) {
    if (xi.n_atoms != atoms.size()) throw DimensionError("weight field and atom set disagree on N");
    MomentField out;
    const int ne = xi.num_elements();
    out.m.resize(ne);
    out.second.resize(ne);
    for (int e = 0; e < ne; ++e) element_moments(xi.weights(e), xi.p[e], atoms, out.m[e], out.second[e]);
    return out;
}

struct Uniform {};
struct Aligned {
    Vec2 direction;
};
using InitMode = std::variant<Uniform, Aligned>;

/// Uniform weights, or all weight on the two main-sphere atoms bracketing a
/// direction, split so that their first moment points exactly along it.
inline WeightField init_weights(const AtomSet& atoms, int elements, const InitMode& mode, double p = 1.0) {
    const int n = atoms.size();
    WeightField w(elements, n);
    std::fill(w.p.begin(), w.p.end(), p);
    std::vector<double> local(n, 0.0);
    if (std::holds_alternative<Uniform>(mode)) {
        std::fill(local.begin(), local.end(), 1.0 / n);
    } else {
        const Vec2 d = std::get<Aligned>(mode).direction;
        if (!(d.norm() > 0.0)) throw Error("aligned initialization needs a nonzero direction");
        // Main sphere: the layer whose radius is closest to 1.
        const double main_r = *std::min_element(atoms.radius.begin(), atoms.radius.end(), [](double a, double b) {
            return std::abs(a - 1.0) < std::abs(b - 1.0);
        });
        std::vector<int> ring;
        for (int i = 0; i < n; ++i)
            if (atoms.radius[i] == main_r) ring.push_back(i);
        std::sort(ring.begin(), ring.end(), [&](int a, int b) { return atoms.angle[a] < atoms.angle[b]; });

        const double two_pi = 2.0 * std::numbers::pi;
        double alpha = std::atan2(d.y(), d.x());
        if (alpha < 0.0) alpha += two_pi;
        const int nr = static_cast<int>(ring.size());
        int lo = nr - 1;
        for (int k = 0; k < nr; ++k)
            if (atoms.angle[ring[k]] <= alpha) lo = k;
        const int hi = (lo + 1) % nr;
        const double phi_lo = atoms.angle[ring[lo]];
        double phi_hi = atoms.angle[ring[hi]];
        if (phi_hi <= phi_lo) phi_hi += two_pi;
        if (alpha < phi_lo) alpha += two_pi;
        // Weights proportional to sin of the opposite angular gap make
        // w_lo s_lo + w_hi s_hi parallel to d.
        const double a = std::sin(phi_hi - alpha);
        const double b = std::sin(alpha - phi_lo);
        if (b == 0.0) {
            local[ring[lo]] = 1.0;
        } else if (a == 0.0) {
            local[ring[hi]] = 1.0;
        } else {
            local[ring[lo]] = a / (a + b);
            local[ring[hi]] = b / (a + b);
        }
    }
    for (int e = 0; e < elements; ++e) std::copy(local.begin(), local.end(), w.weights(e).begin());
    return w;
}

/// element_id, p, xi_1..xi_N, m_x, m_y, lambda_2
inline void write_weights_csv(std::ostream& os, const WeightField& xi, const AtomSet& atoms) {
    const MomentField mom = moments(xi, atoms);
    os.precision(17);
    os << "element_id,p";
    for (int i = 1; i <= xi.n_atoms; ++i) os << ",xi_" << i;
    os << ",m_x,m_y,lambda2\n";
    for (int e = 0; e < xi.num_elements(); ++e) {
        os << e << ',' << xi.p[e];
        for (double v : xi.weights(e)) os << ',' << v;
        os << ',' << mom.m[e].x() << ',' << mom.m[e].y() << ',' << mom.second[e] << '\n';
    }
}

}  // namespace thermomag
