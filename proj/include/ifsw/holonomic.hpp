#pragma once

// Measures on Omega = X x {0..n-1}: empirical measures of chaos-game orbits,
// holonomic lifts of Markov fixed points, the holonomy defect, the
// disintegration into a marginal and conditional index weights, and the
// average and variational entropies.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "markov.hpp"
#include "system.hpp"

namespace ifsw {

struct Atom {
    Point x;
    int i;
    double w;
};

/// Conditional weights nu_x(i) on one node-centered cell.
struct CellConditional {
    std::size_t cell;
    double mass;
    std::vector<double> nu;
};

class HolonomicMeasure {
public:
    HolonomicMeasure(const Grid& grid, int n, std::vector<Atom> atoms) : grid_(grid), n_(n), atoms_(std::move(atoms)) {
        if (n < 1) throw std::invalid_argument("holonomic measure needs at least one index");
        std::vector<double> mass(grid_.size() * static_cast<std::size_t>(n_), 0.0);
        for (const auto& a : atoms_) {
            if (a.i < 0 || a.i >= n_) throw std::invalid_argument("atom index out of range");
            if (!(a.w >= 0.0)) throw std::invalid_argument("atom weights must be nonnegative");
            const std::size_t c = grid_.cell_of(grid_.clamp(a.x, map_range_tolerance));
            mass[c * static_cast<std::size_t>(n_) + static_cast<std::size_t>(a.i)] += a.w;
        }
        for (std::size_t c = 0; c < grid_.size(); ++c) {
            const auto first = mass.begin() + static_cast<std::ptrdiff_t>(c * static_cast<std::size_t>(n_));
            std::vector<double> nu(first, first + n_);
            double total = 0.0;
            for (double v : nu) total += v;
            if (!(total > 0.0)) continue;
            for (double& v : nu) v /= total;
            cells_.push_back({c, total, std::move(nu)});
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    int dimension() const noexcept { return grid_.dimension(); }
    int n() const noexcept { return n_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    const std::vector<CellConditional>& cells() const noexcept { return cells_; }

    double mass() const {
        double m = 0.0;
        for (const auto& a : atoms_) m += a.w;
        return m;
    }

    /// Projection to X, one particle per atom.
    ParticleMeasure marginal() const {
        std::vector<Particle> ps;
        ps.reserve(atoms_.size());
        for (const auto& a : atoms_) {
            if (!ps.empty() && ps.back().x == a.x)
                ps.back().w += a.w;
            else
                ps.push_back({a.x, a.w});
        }
        return {grid_.dimension(), std::move(ps)};
    }

    const std::string& warning() const noexcept { return warning_; }
    void set_warning(std::string w) { warning_ = std::move(w); }

private:
    Grid grid_;
    int n_;
    std::vector<Atom> atoms_;
    std::vector<CellConditional> cells_;
    std::string warning_;
};

/// (x, i) -> f(tau_i(x)) - f(x), with f interpolated.
class DiscreteDifferential {
public:
    DiscreteDifferential(const MapFamily& maps, GridFunction f) : maps_(&maps), f_(std::move(f)) {
        if (!(f_.grid() == maps.grid())) throw std::invalid_argument("function lives on a different grid");
    }

    double operator()(const Point& x, int i) const {
        const Grid& g = maps_->grid();
        return f_.at(g.stencil(maps_->image(i, x), map_range_tolerance)) - f_.at(g.stencil(x, map_range_tolerance));
    }

private:
    const MapFamily* maps_;
    GridFunction f_;
};

inline DiscreteDifferential discrete_differential(const MapFamily& maps, GridFunction f) {
    return {maps, std::move(f)};
}

/// (1/N) sum_j delta_(x_j, i_j).
inline HolonomicMeasure empirical_holonomic(const Orbit& orbit, const MapFamily& maps) {
    if (orbit.size() < 1) throw std::invalid_argument("empirical_holonomic needs a nonempty orbit");
    const double w = 1.0 / static_cast<double>(orbit.size());
    std::vector<Atom> atoms;
    atoms.reserve(orbit.size());
    for (std::size_t j = 0; j < orbit.size(); ++j) atoms.push_back({orbit.points[j], orbit.indices[j], w});
    return {maps.grid(), maps.size(), std::move(atoms)};
}

/// int [d_x f](i) dmu_hat with f and the maps evaluated exactly.
inline double defect_integral(const HolonomicMeasure& mu, const MapFamily& maps, const TestFunction& f) {
    const int d = maps.dimension();
    double s = 0.0;
    for (const auto& a : mu.atoms()) s += a.w * (f(maps.image(a.i, a.x), d) - f(a.x, d));
    return s;
}

/// max over the dictionary of |int d_x f dmu_hat| / sup|f|.
inline double holonomy_defect(const HolonomicMeasure& mu, const MapFamily& maps, const std::vector<TestFunction>& dict) {
    double worst = 0.0;
    for (const auto& f : dict) {
        const double scale = grid_sup_norm(f, maps.grid());
        if (scale > 0.0) worst = std::max(worst, std::abs(defect_integral(mu, maps, f)) / scale);
    }
    return worst;
}

/// d mu_hat(x, i) = p_i(x) d mu(x). A warning is attached when mu is not
/// close to a fixed point of L_p.
inline HolonomicMeasure holonomic_lift(const NormalizedIFS& nifs, const ParticleMeasure& mu, double fixed_tol = 1e-3) {
    const int n = nifs.size();
    std::vector<Atom> atoms;
    atoms.reserve(mu.size() * static_cast<std::size_t>(n));
    for (const auto& p : mu.particles())
        for (int i = 0; i < n; ++i) atoms.push_back({p.x, i, p.w * nifs.weight(i, p.x)});
    HolonomicMeasure out(nifs.grid(), n, std::move(atoms));
    const double residual = dictionary_residual(nifs, mu, 1.0, default_dictionary(nifs.grid().dimension()));
    if (!(residual <= fixed_tol))
        out.set_warning("measure is not a fixed point of the Markov operator (dictionary residual " +
                        detail::format_number(residual) + ")");
    return out;
}

/// -sum a_i ln a_i with 0 ln 0 = 0.
inline double shannon_entropy(std::span<const double> a) {
    double s = 0.0;
    for (double v : a)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

/// -sum a_i ln b_i over the support of a.
inline double cross_entropy(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("probability vectors differ in length");
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] <= 0.0) continue;
        if (!(b[k] > 0.0)) return std::numeric_limits<double>::infinity();
        s -= a[k] * std::log(b[k]);
    }
    return s;
}

/// -int sum_i nu_x(i) ln nu_x(i) d mu over the nonempty cells.
inline double average_entropy(const HolonomicMeasure& mu) {
    double total = 0.0;
    double mass = 0.0;
    for (const auto& c : mu.cells()) {
        total += c.mass * shannon_entropy(c.nu);
        mass += c.mass;
    }
    return mass > 0.0 ? total / mass : 0.0;
}

struct VariationalBound {
    double value = 0.0;     // min over the dictionary, an upper bound for h_v
    std::size_t argmin = 0;
    std::vector<double> values;
    double lower = 0.0;     // h_a
};

/// min over g in the dictionary of int ln(B_1 g / g) d mu, mu the marginal.
inline VariationalBound variational_entropy_upper(const HolonomicMeasure& mu, const MapFamily& maps,
                                                  std::span<const GridFunction> dictionary) {
    if (dictionary.empty()) throw std::invalid_argument("variational entropy needs a nonempty dictionary");
    for (std::size_t k = 0; k < dictionary.size(); ++k) {
        if (!(dictionary[k].grid() == maps.grid()))
            throw std::invalid_argument("dictionary function " + std::to_string(k) + " lives on a different grid");
        if (!(min_value(dictionary[k]) > 0.0))
            throw std::invalid_argument("dictionary function " + std::to_string(k) + " is not positive on the grid");
    }
    const Grid& g = maps.grid();
    const ParticleMeasure marginal = mu.marginal();
    const double mass = marginal.mass();
    VariationalBound out;
    out.lower = average_entropy(mu);
    for (const auto& fn : dictionary) {
        double s = 0.0;
        for (const auto& p : marginal.particles()) {
            double B = 0.0;
            for (int i = 0; i < maps.size(); ++i) B += fn.at(g.stencil(maps.image(i, p.x), map_range_tolerance));
            s += p.w * std::log(B / fn.at(g.stencil(p.x, map_range_tolerance)));
        }
        out.values.push_back(mass > 0.0 ? s / mass : 0.0);
    }
    const auto best = std::min_element(out.values.begin(), out.values.end());
    out.argmin = static_cast<std::size_t>(best - out.values.begin());
    out.value = *best;
    return out;
}

/// CSV `cell_x1[,cell_x2],mass,nu_0,...,nu_{n-1}`.
inline void write_csv(std::ostream& out, const HolonomicMeasure& mu) {
    const int d = mu.dimension();
    out << (d == 1 ? "cell_x1" : "cell_x1,cell_x2") << ",mass";
    for (int i = 0; i < mu.n(); ++i) out << ",nu_" << i;
    out << '\n';
    for (const auto& c : mu.cells()) {
        detail::write_coords(out, mu.grid().node(c.cell), d);
        out << ',';
        detail::write_number(out, c.mass);
        for (double v : c.nu) {
            out << ',';
            detail::write_number(out, v);
        }
        out << '\n';
    }
}

} // namespace ifsw
