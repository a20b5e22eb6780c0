#pragma once

// Markov operator on particle measures, L_q mu = sum_i (tau_i)_*(q_i mu),
// normalized fixed-point iteration for eigenmeasures and Hutchinson measures,
// and the chaos-game sampler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "expr.hpp"
#include "grid.hpp"
#include "system.hpp"

namespace ifsw {

struct Particle {
    Point x;
    double w;
};

/// Nonnegative weighted point set on X.
class ParticleMeasure {
public:
    ParticleMeasure() = default;
    ParticleMeasure(int dimension, std::vector<Particle> particles) : dim_(dimension), particles_(std::move(particles)) {
        for (const auto& p : particles_)
            if (!(p.w >= 0.0)) throw std::invalid_argument("particle weights must be nonnegative");
    }

    static ParticleMeasure dirac(int dimension, Point x, double mass = 1.0) { return {dimension, {{x, mass}}}; }

    /// Equal weights on every grid node, total mass one.
    static ParticleMeasure uniform_nodes(const Grid& g) {
        std::vector<Particle> ps;
        const double w = 1.0 / static_cast<double>(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) ps.push_back({g.node(k), w});
        return {g.dimension(), std::move(ps)};
    }

    int dimension() const noexcept { return dim_; }
    std::size_t size() const noexcept { return particles_.size(); }
    const std::vector<Particle>& particles() const noexcept { return particles_; }

    double mass() const {
        double m = 0.0;
        for (const auto& p : particles_) m += p.w;
        return m;
    }

    ParticleMeasure scaled(double c) const {
        auto ps = particles_;
        for (auto& p : ps) p.w *= c;
        return {dim_, std::move(ps)};
    }

    ParticleMeasure normalized() const {
        const double m = mass();
        if (!(m > 0.0)) throw std::domain_error("cannot normalize a measure of zero mass");
        auto out = scaled(1.0 / m);
        return out;
    }

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (const auto& p : particles_) s += p.w * f(p.x);
        return s;
    }

    double integrate(const Expr& f) const {
        return integrate([&](const Point& x) {
            return f(std::span<const double>(x.data(), static_cast<std::size_t>(dim_)));
        });
    }

private:
    int dim_ = 1;
    std::vector<Particle> particles_;
};

/// How markov_apply keeps the particle count bounded.
///   none          keep every spawned particle (n-fold growth per step)
///   cell_centroid merge particles per node-centered cell at their mass centroid
///   node_split    spread each particle onto the corners of its grid cell with
///                 the interpolation weights; on node measures this is the exact
///                 transpose of the grid transfer operator
enum class Compaction { none, cell_centroid, node_split };

inline ParticleMeasure compact(const ParticleMeasure& mu, const Grid& g, Compaction mode) {
    if (mode == Compaction::none) return mu;
    const int d = g.dimension();
    std::vector<double> mass(g.size(), 0.0);
    if (mode == Compaction::node_split) {
        for (const auto& p : mu.particles()) {
            const Stencil st = g.stencil(p.x, map_range_tolerance);
            for (int c = 0; c < st.count; ++c) mass[st.node[c]] += p.w * st.weight[c];
        }
        std::vector<Particle> out;
        for (std::size_t k = 0; k < mass.size(); ++k)
            if (mass[k] > 0.0) out.push_back({g.node(k), mass[k]});
        return {d, std::move(out)};
    }
    std::vector<Point> moment(g.size(), Point{0.0, 0.0});
    for (const auto& p : mu.particles()) {
        const std::size_t c = g.cell_of(g.clamp(p.x, map_range_tolerance));
        mass[c] += p.w;
        moment[c][0] += p.w * p.x[0];
        moment[c][1] += p.w * p.x[1];
    }
    std::vector<Particle> out;
    for (std::size_t k = 0; k < mass.size(); ++k)
        if (mass[k] > 0.0) out.push_back({{moment[k][0] / mass[k], moment[k][1] / mass[k]}, mass[k]});
    return {d, std::move(out)};
}

/// Every particle (x, w) spawns (tau_i(x), w q_i(x)); the result is compacted.
template <WeightedSystem S>
ParticleMeasure markov_apply(const S& sys, const ParticleMeasure& mu, Compaction mode = Compaction::node_split) {
    const MapFamily& maps = sys.maps();
    std::vector<Particle> spawned;
    spawned.reserve(mu.size() * static_cast<std::size_t>(maps.size()));
    for (const auto& p : mu.particles())
        for (int i = 0; i < maps.size(); ++i) spawned.push_back({maps.image(i, p.x), p.w * sys.weight(i, p.x)});
    return compact(ParticleMeasure(maps.dimension(), std::move(spawned)), maps.grid(), mode);
}

struct TestFunction {
    std::string name;
    Expr f;

    double operator()(const Point& x, int d) const {
        return f(std::span<const double>(x.data(), static_cast<std::size_t>(d)));
    }
};

/// {1, x1, x1^2, sin(pi x1), cos(pi x1)} plus the x2 analogues when d == 2.
inline std::vector<TestFunction> default_dictionary(int d) {
    std::vector<std::string> src{"1", "x1", "x1^2", "sin(pi*x1)", "cos(pi*x1)"};
    if (d == 2)
        for (const char* s : {"x2", "x2^2", "sin(pi*x2)", "cos(pi*x2)"}) src.emplace_back(s);
    std::vector<TestFunction> out;
    for (const auto& s : src) out.push_back({s, Expr::parse(s, d)});
    return out;
}

/// sup over grid nodes of |f|.
inline double grid_sup_norm(const TestFunction& f, const Grid& g) {
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s = std::max(s, std::abs(f(g.node(k), g.dimension())));
    return s;
}

/// max over the dictionary of |int B f dmu - rho int f dmu| / sup|f|, with
/// B f evaluated pointwise (exact maps, no interpolation of f).
template <WeightedSystem S>
double dictionary_residual(const S& sys, const ParticleMeasure& mu, double rho, const std::vector<TestFunction>& dict) {
    const MapFamily& maps = sys.maps();
    const int d = maps.dimension();
    double worst = 0.0;
    for (const auto& f : dict) {
        double lhs = 0.0;
        double rhs = 0.0;
        for (const auto& p : mu.particles()) {
            double Bf = 0.0;
            for (int i = 0; i < maps.size(); ++i) Bf += sys.weight(i, p.x) * f(maps.image(i, p.x), d);
            lhs += p.w * Bf;
            rhs += p.w * f(p.x, d);
        }
        const double scale = grid_sup_norm(f, maps.grid());
        if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rho * rhs) / scale);
    }
    return worst;
}

/// Probability measure nu with L nu ~ rho nu.
struct EigenMeasure {
    ParticleMeasure nu;
    double rho = 0.0;      // mass of L nu before renormalization
    double residual = 0.0; // dictionary residual at rho
    double lower_bound = 0.0; // n min_i inf q_i
    double upper_bound = 0.0; // n max_i sup q_i
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> rho_history;
    std::string diagnostic;
};

struct MeasureIterationOptions {
    double tol = 1e-10;
    std::size_t max_iter = 20000;
    Compaction compaction = Compaction::node_split;
    std::optional<ParticleMeasure> start; // default: uniform weights on grid nodes
};

namespace detail {

// nu <- L nu / (L nu)(X) until the mass and the dictionary residual stop
// changing by more than tol.
template <WeightedSystem S>
EigenMeasure normalized_iteration(const S& sys, const MeasureIterationOptions& opt, bool conserve_unit_rho) {
    const MapFamily& maps = sys.maps();
    const Grid& g = maps.grid();
    const auto dict = default_dictionary(g.dimension());
    EigenMeasure out;
    out.nu = opt.start ? opt.start->normalized() : ParticleMeasure::uniform_nodes(g);
    double prev_rho = std::numeric_limits<double>::quiet_NaN();
    double prev_res = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        const ParticleMeasure pushed = markov_apply(sys, out.nu, opt.compaction);
        const double mass = pushed.mass();
        if (!(mass > 0.0)) {
            out.diagnostic = "measure lost all mass";
            break;
        }
        out.nu = pushed.scaled(1.0 / mass);
        out.rho = mass;
        out.rho_history.push_back(mass);
        out.residual = dictionary_residual(sys, out.nu, conserve_unit_rho ? 1.0 : mass, dict);
        out.iterations = it;
        if (it > 1 && std::abs(mass - prev_rho) <= opt.tol * mass && std::abs(out.residual - prev_res) <= opt.tol) {
            out.converged = true;
            break;
        }
        prev_rho = mass;
        prev_res = out.residual;
    }
    if (!out.converged && out.diagnostic.empty())
        out.diagnostic = "normalized iteration did not settle within " + std::to_string(opt.max_iter) +
                         " steps (last mass " + detail::format_number(out.rho) + ", residual " + detail::format_number(out.residual) + ")";
    return out;
}

} // namespace detail

/// Normalized iteration nu <- L_q nu / L_q(nu)(X) from the uniform node measure.
template <WeightedSystem S>
EigenMeasure eigen_measure(const S& sys, const MeasureIterationOptions& opt = {}) {
    const MapFamily& maps = sys.maps();
    const std::size_t nodes = maps.grid().size();
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int i = 0; i < maps.size(); ++i)
        for (std::size_t k = 0; k < nodes; ++k) {
            lo = std::min(lo, sys.node_weight(i, k));
            hi = std::max(hi, sys.node_weight(i, k));
        }
    if (!(lo > 0.0)) throw std::invalid_argument("eigen_measure requires strictly positive weights");
    EigenMeasure out = detail::normalized_iteration(sys, opt, false);
    out.lower_bound = maps.size() * lo;
    out.upper_bound = maps.size() * hi;
    return out;
}

/// Fixed probability measure of L_p for a normalized system.
inline EigenMeasure hutchinson_fixed_point(const NormalizedIFS& nifs, const MeasureIterationOptions& opt = {}) {
    if (!(nifs.sum_deviation() <= 1e-6))
        throw std::invalid_argument("hutchinson_fixed_point requires probabilities summing to one");
    EigenMeasure out = detail::normalized_iteration(nifs, opt, true);
    out.lower_bound = out.upper_bound = 1.0;
    return out;
}

/// x_{j+1} = tau_{i_j}(x_j) with i_j drawn with probabilities p_i(x_j).
struct Orbit {
    int dimension = 1;
    std::vector<Point> points; // x_0 .. x_{N-1}
    std::vector<int> indices;  // i_0 .. i_{N-1}
    Point end{};               // x_N = tau_{i_{N-1}}(x_{N-1})

    std::size_t size() const noexcept { return points.size(); }
};

/// Reproducible for a fixed seed: 53-bit doubles from mt19937_64.
template <WeightedSystem S>
Orbit chaos_game(const S& sys, const Point& x0, std::size_t N, std::uint64_t seed) {
    if (N < 1) throw std::invalid_argument("chaos_game needs N >= 1");
    const MapFamily& maps = sys.maps();
    const int n = maps.size();
    std::mt19937_64 rng(seed);
    Orbit orbit;
    orbit.dimension = maps.dimension();
    orbit.points.reserve(N);
    orbit.indices.reserve(N);
    std::vector<double> p(static_cast<std::size_t>(n));
    Point x = x0;
    for (std::size_t j = 0; j < N; ++j) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            p[static_cast<std::size_t>(i)] = std::max(0.0, sys.weight(i, x));
            total += p[static_cast<std::size_t>(i)];
        }
        if (!(total > 0.0)) throw std::domain_error("chaos_game: all probabilities vanish at a visited point");
        const double u = detail::uniform01(rng) * total;
        int pick = n - 1;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += p[static_cast<std::size_t>(i)];
            if (u < acc && p[static_cast<std::size_t>(i)] > 0.0) {
                pick = i;
                break;
            }
        }
        while (p[static_cast<std::size_t>(pick)] == 0.0) --pick;
        orbit.points.push_back(x);
        orbit.indices.push_back(pick);
        x = maps.image(pick, x);
    }
    orbit.end = x;
    return orbit;
}

/// CSV `x1[,x2],weight`.
inline void write_csv(std::ostream& out, const ParticleMeasure& mu) {
    out << detail::coord_header(mu.dimension()) << ",weight\n";
    for (const auto& p : mu.particles()) {
        detail::write_coords(out, p.x, mu.dimension());
        out << ',';
        detail::write_number(out, p.w);
        out << '\n';
    }
}

/// CSV `step,i,x1[,x2]`.
inline void write_csv(std::ostream& out, const Orbit& orbit) {
    out << "step,i," << detail::coord_header(orbit.dimension) << '\n';
    for (std::size_t j = 0; j < orbit.size(); ++j) {
        out << j << ',' << orbit.indices[j] << ',';
        detail::write_coords(out, orbit.points[j], orbit.dimension);
        out << '\n';
    }
}

} // namespace ifsw
