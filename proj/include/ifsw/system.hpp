#pragma once

// Iterated function systems with weights on [0,1]^d: the maps tau_i, the
// weights q_i, potential-induced weights psi o tau_i and normalized systems
// with place-dependent probabilities.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "expr.hpp"
#include "grid.hpp"

namespace ifsw {

inline constexpr double map_range_tolerance = 1e-9;

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The maps tau_0..tau_{n-1} of an IFS, with their node images and
/// interpolation stencils precomputed on a grid.
class MapFamily {
public:
    /// `maps[i][a]` is component a of tau_i.
    MapFamily(Grid grid, std::vector<std::vector<Expr>> maps) : grid_(grid), maps_(std::move(maps)) {
        if (maps_.empty()) throw std::invalid_argument("an IFS needs at least one map");
        const auto d = static_cast<std::size_t>(grid_.dimension());
        for (std::size_t i = 0; i < maps_.size(); ++i) {
            if (maps_[i].size() != d)
                throw std::invalid_argument("map " + std::to_string(i) + " has " + std::to_string(maps_[i].size()) +
                                            " components, expected " + std::to_string(d));
            for (const auto& c : maps_[i])
                if (c.arity() > grid_.dimension())
                    throw std::invalid_argument("map " + std::to_string(i) + " uses a variable beyond x" +
                                                std::to_string(d));
        }
        const std::size_t nodes = grid_.size();
        images_.resize(maps_.size() * nodes);
        stencils_.resize(maps_.size() * nodes);
        for (std::size_t i = 0; i < maps_.size(); ++i) {
            for (std::size_t k = 0; k < nodes; ++k) {
                const std::size_t slot = i * nodes + k;
                Point y = grid_.node(k);
                try {
                    y = image(static_cast<int>(i), grid_.node(k));
                } catch (const DomainError& e) {
                    note("map " + std::to_string(i) + ": " + e.what());
                    y = grid_.node(k);
                }
                double escape = 0.0;
                for (std::size_t a = 0; a < d; ++a) {
                    if (!std::isfinite(y[a])) {
                        escape = std::numeric_limits<double>::infinity();
                        y[a] = 0.0;
                    } else {
                        escape = std::max({escape, -y[a], y[a] - 1.0});
                    }
                }
                max_escape_ = std::max(max_escape_, escape);
                if (escape > map_range_tolerance) {
                    for (std::size_t a = 0; a < d; ++a) y[a] = std::clamp(y[a], 0.0, 1.0);
                } else {
                    y = grid_.clamp(y, map_range_tolerance);
                }
                images_[slot] = y;
                stencils_[slot] = grid_.stencil(y);
            }
        }
    }

    const Grid& grid() const noexcept { return grid_; }
    int size() const noexcept { return static_cast<int>(maps_.size()); }
    int dimension() const noexcept { return grid_.dimension(); }
    const std::vector<Expr>& map(int i) const { return maps_.at(static_cast<std::size_t>(i)); }

    /// Exact image tau_i(x) evaluated from the expressions.
    Point image(int i, const Point& x) const {
        const auto& comp = maps_[static_cast<std::size_t>(i)];
        const std::span<const double> arg(x.data(), static_cast<std::size_t>(grid_.dimension()));
        Point y{0.0, 0.0};
        for (std::size_t a = 0; a < comp.size(); ++a) y[a] = comp[a](arg);
        return y;
    }

    const Point& node_image(int i, std::size_t k) const { return images_[static_cast<std::size_t>(i) * grid_.size() + k]; }
    const Stencil& node_stencil(int i, std::size_t k) const {
        return stencils_[static_cast<std::size_t>(i) * grid_.size() + k];
    }

    /// Largest distance by which a node image left X (before clamping).
    double max_node_escape() const noexcept { return max_escape_; }
    const std::vector<std::string>& construction_issues() const noexcept { return issues_; }

private:
    void note(std::string s) {
        if (issues_.size() < 8) issues_.push_back(std::move(s));
    }

    Grid grid_;
    std::vector<std::vector<Expr>> maps_;
    std::vector<Point> images_;
    std::vector<Stencil> stencils_;
    double max_escape_ = 0.0;
    std::vector<std::string> issues_;
};

/// Anything the transfer and Markov operators can act with.
template <class S>
concept WeightedSystem = requires(const S& s, int i, std::size_t k, Point x) {
    { s.maps() } -> std::same_as<const MapFamily&>;
    { s.weight(i, x) } -> std::convertible_to<double>;
    { s.node_weight(i, k) } -> std::convertible_to<double>;
};

/// IFSw (X, tau, q) with weights given as expressions and cached at nodes.
class WeightedIFS {
public:
    WeightedIFS(std::shared_ptr<const MapFamily> maps, std::vector<Expr> weights)
        : maps_(std::move(maps)), weights_(std::move(weights)) {
        if (static_cast<int>(weights_.size()) != maps_->size())
            throw std::invalid_argument("got " + std::to_string(weights_.size()) + " weights for " +
                                        std::to_string(maps_->size()) + " maps");
        const Grid& g = maps_->grid();
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            if (weights_[i].arity() > g.dimension())
                throw std::invalid_argument("weight " + std::to_string(i) + " uses a variable beyond the dimension");
            const Expr& q = weights_[i];
            node_weights_.push_back(GridFunction::sample(g, [&](std::span<const double> x) {
                try {
                    return q(x);
                } catch (const DomainError&) {
                    return std::numeric_limits<double>::quiet_NaN();
                }
            }));
        }
    }

    WeightedIFS(const Grid& grid, std::vector<std::vector<Expr>> maps, std::vector<Expr> weights)
        : WeightedIFS(std::make_shared<const MapFamily>(grid, std::move(maps)), std::move(weights)) {}

    const MapFamily& maps() const noexcept { return *maps_; }
    const std::shared_ptr<const MapFamily>& map_family() const noexcept { return maps_; }
    const Grid& grid() const noexcept { return maps_->grid(); }
    int size() const noexcept { return maps_->size(); }

    double weight(int i, const Point& x) const {
        return weights_[static_cast<std::size_t>(i)](
            std::span<const double>(x.data(), static_cast<std::size_t>(grid().dimension())));
    }
    double node_weight(int i, std::size_t k) const { return node_weights_[static_cast<std::size_t>(i)][k]; }

    const std::vector<Expr>& weights() const noexcept { return weights_; }
    const GridFunction& weight_function(int i) const { return node_weights_.at(static_cast<std::size_t>(i)); }

    double min_node_weight() const {
        double lo = std::numeric_limits<double>::infinity();
        for (const auto& w : node_weights_)
            for (double v : w.values()) lo = std::min(lo, std::isnan(v) ? -std::numeric_limits<double>::infinity() : v);
        return lo;
    }

    double max_node_weight() const {
        double hi = 0.0;
        for (const auto& w : node_weights_) hi = std::max(hi, max_value(w));
        return hi;
    }

private:
    std::shared_ptr<const MapFamily> maps_;
    std::vector<Expr> weights_;
    std::vector<GridFunction> node_weights_;
};

/// IFSw whose weights are q_i = psi o tau_i for a positive potential psi.
class PotentialIFS : public WeightedIFS {
public:
    PotentialIFS(std::shared_ptr<const MapFamily> maps, Expr psi)
        : WeightedIFS(maps, compose(*maps, psi)), psi_(std::move(psi)) {}

    const Expr& potential() const noexcept { return psi_; }

    double psi(const Point& x) const {
        return psi_(std::span<const double>(x.data(), static_cast<std::size_t>(grid().dimension())));
    }

private:
    static std::vector<Expr> compose(const MapFamily& maps, const Expr& psi) {
        if (psi.arity() > maps.dimension()) throw std::invalid_argument("potential uses a variable beyond the dimension");
        std::vector<Expr> q;
        for (int i = 0; i < maps.size(); ++i) q.push_back(psi.substitute(maps.map(i)));
        return q;
    }

    Expr psi_;
};

/// Place-dependent probabilities p_i stored as grid functions.
class NormalizedIFS {
public:
    NormalizedIFS(std::shared_ptr<const MapFamily> maps, std::vector<GridFunction> p, std::string warning = {})
        : maps_(std::move(maps)), p_(std::move(p)), warning_(std::move(warning)) {
        if (static_cast<int>(p_.size()) != maps_->size()) throw std::invalid_argument("probability count mismatch");
        for (const auto& f : p_)
            if (!(f.grid() == maps_->grid())) throw std::invalid_argument("probabilities live on a different grid");
    }

    /// Uses the weights of `ifs` directly; they must already sum to one.
    static NormalizedIFS from_weights(const WeightedIFS& ifs, double tol = 1e-10) {
        std::vector<GridFunction> p;
        for (int i = 0; i < ifs.size(); ++i) p.push_back(ifs.weight_function(i));
        NormalizedIFS out(ifs.map_family(), std::move(p));
        if (!(out.sum_deviation() <= tol))
            throw std::invalid_argument("weights do not sum to one (deviation " + std::to_string(out.sum_deviation()) + ")");
        if (ifs.min_node_weight() < 0.0) throw std::invalid_argument("weights must be nonnegative");
        return out;
    }

    const MapFamily& maps() const noexcept { return *maps_; }
    const std::shared_ptr<const MapFamily>& map_family() const noexcept { return maps_; }
    const Grid& grid() const noexcept { return maps_->grid(); }
    int size() const noexcept { return maps_->size(); }

    double weight(int i, const Point& x) const { return p_[static_cast<std::size_t>(i)].at(grid().stencil(x, map_range_tolerance)); }
    double node_weight(int i, std::size_t k) const { return p_[static_cast<std::size_t>(i)][k]; }
    const GridFunction& probability(int i) const { return p_.at(static_cast<std::size_t>(i)); }

    /// sup over nodes of |sum_i p_i(x) - 1|.
    double sum_deviation() const {
        double worst = 0.0;
        for (std::size_t k = 0; k < grid().size(); ++k) {
            double s = 0.0;
            for (const auto& f : p_) s += f[k];
            worst = std::max(worst, std::abs(s - 1.0));
        }
        return worst;
    }

    const std::string& warning() const noexcept { return warning_; }

private:
    std::shared_ptr<const MapFamily> maps_;
    std::vector<GridFunction> p_;
    std::string warning_;
};

/// All weights equal to one (the operator B_1).
class UnitWeights {
public:
    explicit UnitWeights(const MapFamily& maps) : maps_(&maps) {}
    const MapFamily& maps() const noexcept { return *maps_; }
    double weight(int, const Point&) const noexcept { return 1.0; }
    double node_weight(int, std::size_t) const noexcept { return 1.0; }

private:
    const MapFamily* maps_;
};

struct ValidationOptions {
    bool allow_nonnegative = false;
    std::size_t random_factor = 10;
    std::uint64_t seed = 20170101;
};

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    std::size_t samples = 0;
    double min_weight = std::numeric_limits<double>::infinity();
    double max_escape = 0.0;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class Visit>
void for_each_sample(const Grid& g, const ValidationOptions& opt, Visit&& visit) {
    for (std::size_t k = 0; k < g.size(); ++k) visit(g.node(k));
    std::mt19937_64 rng(opt.seed);
    const std::size_t extra = opt.random_factor * g.size();
    for (std::size_t s = 0; s < extra; ++s) {
        Point x{uniform01(rng), 0.0};
        if (g.dimension() == 2) x[1] = uniform01(rng);
        visit(x);
    }
}

class IssueLog {
public:
    explicit IssueLog(std::vector<std::string>& sink) : sink_(sink) {}
    void add(const std::string& key, const std::string& msg) {
        auto& c = counts_[key];
        if (c++ < 3) sink_.push_back(msg);
    }
    void flush() {
        for (const auto& [key, c] : counts_)
            if (c > 3) sink_.push_back(key + ": " + std::to_string(c - 3) + " further occurrence(s)");
    }

private:
    std::vector<std::string>& sink_;
    std::map<std::string, std::size_t> counts_;
};

inline std::string describe(const Point& x, int d) {
    std::string s = "(" + format_number(x[0]);
    if (d == 2) s += ", " + format_number(x[1]);
    return s + ")";
}

} // namespace detail

/// Samples every map and weight at the grid nodes plus random_factor * m^d
/// random points and reports escapes from X, nonpositive weights and
/// evaluation failures.
inline ValidationReport validate(const WeightedIFS& ifs, const ValidationOptions& opt = {}) {
    ValidationReport rep;
    const Grid& g = ifs.grid();
    const int d = g.dimension();
    detail::IssueLog errors(rep.errors);
    detail::IssueLog warnings(rep.warnings);
    detail::for_each_sample(g, opt, [&](const Point& x) {
        ++rep.samples;
        for (int i = 0; i < ifs.size(); ++i) {
            const std::string tag = "map " + std::to_string(i);
            try {
                const Point y = ifs.maps().image(i, x);
                for (int a = 0; a < d; ++a) {
                    const double escape = std::max(-y[a], y[a] - 1.0);
                    rep.max_escape = std::max(rep.max_escape, escape);
                    if (!(escape <= map_range_tolerance))
                        errors.add(tag + " escape", tag + " sends " + detail::describe(x, d) + " to " +
                                                        detail::describe(y, d) + ", outside X");
                }
            } catch (const DomainError& e) {
                errors.add(tag + " domain", tag + " at " + detail::describe(x, d) + ": " + e.what());
            }
            const std::string wtag = "weight " + std::to_string(i);
            try {
                const double q = ifs.weight(i, x);
                rep.min_weight = std::min(rep.min_weight, q);
                if (q < 0.0) {
                    errors.add(wtag + " negative", wtag + " is negative (" + detail::format_number(q) + ") at " +
                                                       detail::describe(x, d));
                } else if (q == 0.0) {
                    const std::string msg = wtag + " is zero at " + detail::describe(x, d) + " (weights must be positive)";
                    if (opt.allow_nonnegative) warnings.add(wtag + " zero", msg);
                    else errors.add(wtag + " zero", msg);
                }
            } catch (const DomainError& e) {
                errors.add(wtag + " domain", wtag + " at " + detail::describe(x, d) + ": " + e.what());
            }
        }
    });
    errors.flush();
    warnings.flush();
    rep.valid = rep.errors.empty();
    return rep;
}

/// Throws ValidationError listing the first problems when `ifs` is invalid.
inline void require_valid(const WeightedIFS& ifs, const ValidationOptions& opt = {}) {
    const auto rep = validate(ifs, opt);
    if (rep.valid) return;
    std::string msg = "invalid IFS:";
    for (const auto& e : rep.errors) msg += "\n  " + e;
    throw ValidationError(msg);
}

/// Builds the IFSw with weights psi o tau_i. Rejects a potential that is
/// negative or fails to evaluate on the sampled images; zeros are left for
/// validate() to report as a positivity violation.
inline PotentialIFS from_potential(std::shared_ptr<const MapFamily> maps, const Expr& psi,
                                   const ValidationOptions& opt = {}) {
    const Grid& g = maps->grid();
    const int d = g.dimension();
    std::optional<std::string> problem;
    detail::for_each_sample(g, opt, [&](const Point& x) {
        if (problem) return;
        for (int i = 0; i < maps->size() && !problem; ++i) {
            try {
                Point y = maps->image(i, x);
                for (int a = 0; a < d; ++a) y[a] = std::clamp(y[a], 0.0, 1.0);
                const double v = psi(std::span<const double>(y.data(), static_cast<std::size_t>(d)));
                if (v < 0.0)
                    problem = "potential is negative (" + detail::format_number(v) + ") at " + detail::describe(y, d);
            } catch (const DomainError& e) {
                problem = std::string("potential failed to evaluate: ") + e.what();
            }
        }
    });
    if (problem) throw ValidationError(*problem);
    return PotentialIFS(std::move(maps), psi);
}

inline PotentialIFS from_potential(const Grid& grid, std::vector<std::vector<Expr>> maps, const Expr& psi,
                                   const ValidationOptions& opt = {}) {
    return from_potential(std::make_shared<const MapFamily>(grid, std::move(maps)), psi, opt);
}

/// p_j(x) = q_j(x) h(tau_j x) / (rho h(x)). Sum deviation above 1e-6 is
/// attached as a warning rather than rejected.
inline NormalizedIFS normalize(const WeightedIFS& ifs, const GridFunction& h, double rho) {
    if (!(rho > 0.0)) throw std::invalid_argument("normalization needs rho > 0");
    if (!(h.grid() == ifs.grid())) throw std::invalid_argument("eigenfunction lives on a different grid");
    if (!(min_value(h) > 0.0)) throw std::invalid_argument("normalization needs a strictly positive eigenfunction");
    const MapFamily& maps = ifs.maps();
    const std::size_t nodes = ifs.grid().size();
    std::vector<GridFunction> p;
    for (int j = 0; j < ifs.size(); ++j) {
        std::vector<double> v(nodes);
        for (std::size_t k = 0; k < nodes; ++k)
            v[k] = ifs.node_weight(j, k) * h.at(maps.node_stencil(j, k)) / (rho * h[k]);
        p.emplace_back(ifs.grid(), std::move(v));
    }
    NormalizedIFS probe(ifs.map_family(), p);
    const double deviation = probe.sum_deviation();
    if (deviation <= 1e-6) return probe;
    return NormalizedIFS(ifs.map_family(), std::move(p),
                         "probabilities deviate from summing to one by " + detail::format_number(deviation) +
                             "; (h, rho) is not an accurate eigenpair");
}

/// p_i = q_i / sum_j q_j at every node. For q_i = psi o tau_i this is the
/// normalization with optimal function psi; it needs no eigenfunction.
inline NormalizedIFS pointwise_normalize(const WeightedIFS& ifs) {
    const std::size_t nodes = ifs.grid().size();
    std::vector<std::vector<double>> v(static_cast<std::size_t>(ifs.size()), std::vector<double>(nodes));
    for (std::size_t k = 0; k < nodes; ++k) {
        double total = 0.0;
        for (int i = 0; i < ifs.size(); ++i) total += ifs.node_weight(i, k);
        if (!(total > 0.0)) throw std::invalid_argument("weights vanish at node " + std::to_string(k));
        for (int i = 0; i < ifs.size(); ++i) v[static_cast<std::size_t>(i)][k] = ifs.node_weight(i, k) / total;
    }
    std::vector<GridFunction> p;
    for (auto& col : v) p.emplace_back(ifs.grid(), std::move(col));
    return NormalizedIFS(ifs.map_family(), std::move(p));
}

} // namespace ifsw
