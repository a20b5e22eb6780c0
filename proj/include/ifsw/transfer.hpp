#pragma once

// Transfer operator (B_q f)(x) = sum_i q_i(x) f(tau_i(x)) on grid functions,
// its powers, a grid-free word-sum oracle for B_q^N(1), and two solvers for
// the leading positive eigenpair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "system.hpp"

namespace ifsw {

class EnumerationBudgetError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Leading eigenpair estimate. rho is the midpoint of the Collatz-Wielandt
/// bracket [rho_lower, rho_upper]; h is normalized to sup_norm(h) == 1.
struct EigenPair {
    GridFunction h;
    double rho = 0.0;
    double rho_lower = 0.0;
    double rho_upper = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity(); // sup |B h - rho h| / rho
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> history; // relative bracket gap (power) or level change (discounted)
    std::string diagnostic;

    double relative_gap() const { return (rho_upper - rho_lower) / rho_lower; }
};

template <WeightedSystem S>
GridFunction apply(const S& sys, const GridFunction& f) {
    const MapFamily& maps = sys.maps();
    const Grid& g = maps.grid();
    if (!(f.grid() == g)) throw std::invalid_argument("apply: function lives on a different grid");
    std::vector<double> out(g.size());
    const int n = maps.size();
    detail::parallel_for(out.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += sys.node_weight(i, k) * f.at(maps.node_stencil(i, k));
            out[k] = acc;
        }
    });
    return {g, std::move(out)};
}

/// B_1: every weight equal to one.
inline GridFunction apply_unweighted(const MapFamily& maps, const GridFunction& f) { return apply(UnitWeights(maps), f); }

/// B_q^N(1) by N successive applications. Overflows once rho^N exceeds the
/// double range; log_power_apply stays finite.
template <WeightedSystem S>
GridFunction power_apply(const S& sys, int N) {
    if (N < 1) throw std::invalid_argument("power_apply needs N >= 1");
    GridFunction f = GridFunction::constant(sys.maps().grid(), 1.0);
    for (int step = 0; step < N; ++step) f = apply(sys, f);
    return f;
}

namespace detail {
template <WeightedSystem S>
void require_positive_weights(const S& sys, const char* who) {
    const std::size_t nodes = sys.maps().grid().size();
    for (int i = 0; i < sys.maps().size(); ++i)
        for (std::size_t k = 0; k < nodes; ++k)
            if (!(sys.node_weight(i, k) > 0.0))
                throw std::invalid_argument(std::string(who) + " requires strictly positive weights");
}

// One log-domain step: L -> ln B(exp(L - max L)) + max L.
template <WeightedSystem S>
GridFunction log_step(const S& sys, const GridFunction& L) {
    const double top = max_value(L);
    const GridFunction scaled = transform(L, [top](double v) { return std::exp(v - top); });
    return transform(apply(sys, scaled), [top](double v) { return std::log(v) + top; });
}
} // namespace detail

/// ln B_q^N(1), computed with per-step max subtraction.
template <WeightedSystem S>
GridFunction log_power_apply(const S& sys, int N) {
    if (N < 1) throw std::invalid_argument("log_power_apply needs N >= 1");
    detail::require_positive_weights(sys, "log_power_apply");
    GridFunction L = GridFunction::constant(sys.maps().grid(), 0.0);
    for (int step = 0; step < N; ++step) L = detail::log_step(sys, L);
    return L;
}

/// a_N = (1/N) ln B_q^N(1) for N = 1..N_max; element N-1 holds a_N.
template <WeightedSystem S>
std::vector<GridFunction> log_pressure_sequence(const S& sys, int N_max) {
    if (N_max < 1) throw std::invalid_argument("log_pressure_sequence needs N_max >= 1");
    detail::require_positive_weights(sys, "log_pressure_sequence");
    std::vector<GridFunction> a;
    GridFunction L = GridFunction::constant(sys.maps().grid(), 0.0);
    for (int N = 1; N <= N_max; ++N) {
        L = detail::log_step(sys, L);
        const double inv = 1.0 / N;
        a.push_back(transform(L, [inv](double v) { return v * inv; }));
    }
    return a;
}

/// Sum over all n^N words of prod_j q_{w_j}(x_j), x_0 = x, x_{j+1} = tau_{w_j}(x_j),
/// evaluated from the expressions with no grid involved.
inline double word_sum_oracle(const WeightedIFS& ifs, const Point& x, int N, double budget = 1e7) {
    if (N < 1) throw std::invalid_argument("word_sum_oracle needs N >= 1");
    const int n = ifs.size();
    if (std::pow(static_cast<double>(n), N) > budget)
        throw EnumerationBudgetError(std::to_string(n) + "^" + std::to_string(N) + " words exceed the enumeration budget");
    // Depth-first over words; the partial product is shared by all extensions.
    auto walk = [&](auto&& self, const Point& y, int depth) -> double {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double q = ifs.weight(i, y);
            total += depth + 1 == N ? q : q * self(self, ifs.maps().image(i, y), depth + 1);
        }
        return total;
    };
    return walk(walk, x, 0);
}

namespace detail {
struct Bracket {
    double lower;
    double upper;
};

// Collatz-Wielandt bounds min/max (Bf)(x)/f(x). The upper bound is only
// certified for strictly positive f.
inline Bracket collatz_wielandt(const GridFunction& f, const GridFunction& Bf) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    bool strictly_positive = true;
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f[k] > 0.0) {
            const double r = Bf[k] / f[k];
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        } else {
            strictly_positive = false;
        }
    }
    if (!strictly_positive) hi = std::numeric_limits<double>::infinity();
    return {lo, hi};
}

template <WeightedSystem S>
double eigen_residual(const S& sys, const GridFunction& h, double rho) {
    const GridFunction Bh = apply(sys, h);
    double r = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) r = std::max(r, std::abs(Bh[k] - rho * h[k]));
    return r / (rho * sup_norm(h));
}
} // namespace detail

/// Power iteration f <- B f / sup(B f) from f = 1, stopped when the relative
/// Collatz-Wielandt gap drops below tol. Non-convergence is reported in the
/// result, not thrown: some systems have no positive continuous eigenfunction.
template <WeightedSystem S>
EigenPair eigen_power(const S& sys, double tol = 1e-10, std::size_t max_iter = 1000) {
    detail::require_positive_weights(sys, "eigen_power");
    const Grid& g = sys.maps().grid();
    GridFunction f = GridFunction::constant(g, 1.0);
    EigenPair best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const GridFunction Bf = apply(sys, f);
        const auto [lo, hi] = detail::collatz_wielandt(f, Bf);
        const double gap = (hi - lo) / lo;
        const double scale = sup_norm(Bf);
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            best.diagnostic = "iterate collapsed to zero or overflowed";
            break;
        }
        GridFunction next = transform(Bf, [scale](double v) { return v / scale; });
        best.history.push_back(gap);
        if (gap <= best_gap) {
            best_gap = gap;
            best.h = next;
            best.rho_lower = lo;
            best.rho_upper = hi;
            best.iterations = it;
        }
        if (gap < tol) {
            best.converged = true;
            break;
        }
        f = std::move(next);
    }
    if (best.h.size() == 0) {
        best.h = f;
        best.rho_lower = 0.0;
    }
    best.rho = std::isfinite(best.rho_upper) ? 0.5 * (best.rho_lower + best.rho_upper) : best.rho_lower;
    best.residual = best.rho > 0.0 ? detail::eigen_residual(sys, best.h, best.rho) : std::numeric_limits<double>::infinity();
    if (!best.converged && best.diagnostic.empty())
        best.diagnostic = "no positive eigenfunction found: Collatz-Wielandt gap stayed at " +
                          detail::format_number(best_gap) + " (tolerance " + detail::format_number(tol) + ") after " +
                          std::to_string(best.history.size()) + " iterations";
    return best;
}

/// Discount levels sigma_k with delta_k(t) = sigma_k t.
struct DiscountSchedule {
    std::vector<double> sigma;
    double inner_tol = 1e-12;          // sup-norm change of the normalized iterate
    std::size_t inner_max_iter = 20000;
    double outer_tol = 1e-6;           // change of the normalized fixed point between levels

    /// sigma_k = 1 - 2^-k, k = 1..levels.
    static DiscountSchedule geometric(int levels = 20) {
        DiscountSchedule s;
        for (int k = 1; k <= levels; ++k) s.sigma.push_back(1.0 - std::ldexp(1.0, -k));
        return s;
    }

    void check() const {
        if (sigma.empty()) throw std::invalid_argument("discount schedule is empty");
        for (std::size_t k = 0; k < sigma.size(); ++k) {
            if (!(sigma[k] > 0.0 && sigma[k] < 1.0)) throw std::invalid_argument("discount factors must lie in (0,1)");
            if (k && !(sigma[k] > sigma[k - 1])) throw std::invalid_argument("discount factors must increase strictly");
        }
    }
};

/// Variable-discount scheme: for each level solve
///   w = ln sum_i exp(ln q_i + sigma * w o tau_i),
/// then take h = exp(w - max w) once the normalized fixed points settle.
///
/// The operator T satisfies T(v + c) = T(v) + sigma c for constants c, so the
/// fixed point is w = v + g / (1 - sigma) where v (max v = 0) solves
/// T(v) = v + g. The inner loop iterates v <- T(v) - max T(v), which
/// contracts by sigma in the span seminorm and avoids the 1/(1-sigma)
/// growth of w itself. Off-node values of exp(sigma w) are interpolated, so
/// as sigma -> 1 the scheme solves the same discrete eigenproblem as
/// eigen_power.
template <WeightedSystem S>
EigenPair eigen_discounted(const S& sys, const DiscountSchedule& schedule = DiscountSchedule::geometric()) {
    schedule.check();
    detail::require_positive_weights(sys, "eigen_discounted");
    const MapFamily& maps = sys.maps();
    const Grid& g = maps.grid();
    const int n = maps.size();
    const std::size_t nodes = g.size();

    std::vector<std::vector<double>> log_q(static_cast<std::size_t>(n), std::vector<double>(nodes));
    for (int i = 0; i < n; ++i)
        for (std::size_t k = 0; k < nodes; ++k) log_q[static_cast<std::size_t>(i)][k] = std::log(sys.node_weight(i, k));

    EigenPair out;
    GridFunction v = GridFunction::constant(g, 0.0);
    GridFunction previous;
    bool settled = false;
    bool inner_ok = true;
    for (std::size_t level = 0; level < schedule.sigma.size(); ++level) {
        const double sigma = schedule.sigma[level];
        bool converged_inner = false;
        for (std::size_t it = 0; it < schedule.inner_max_iter; ++it) {
            const GridFunction E = transform(v, [sigma](double x) { return std::exp(sigma * x); });
            std::vector<double> Tv(nodes);
            detail::parallel_for(nodes, [&](std::size_t b, std::size_t e) {
                std::vector<double> t(static_cast<std::size_t>(n));
                for (std::size_t k = b; k < e; ++k) {
                    double top = -std::numeric_limits<double>::infinity();
                    for (int i = 0; i < n; ++i) {
                        t[static_cast<std::size_t>(i)] =
                            log_q[static_cast<std::size_t>(i)][k] + std::log(E.at(maps.node_stencil(i, k)));
                        top = std::max(top, t[static_cast<std::size_t>(i)]);
                    }
                    double acc = 0.0;
                    for (double x : t) acc += std::exp(x - top);
                    Tv[k] = top + std::log(acc);
                }
            });
            const double shift = *std::max_element(Tv.begin(), Tv.end());
            double change = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) {
                Tv[k] -= shift;
                change = std::max(change, std::abs(Tv[k] - v[k]));
            }
            v = GridFunction(g, std::move(Tv));
            ++out.iterations;
            if (change <= schedule.inner_tol) {
                converged_inner = true;
                break;
            }
        }
        if (!converged_inner) {
            inner_ok = false;
            out.diagnostic = "inner fixed-point loop stagnated at discount level " + std::to_string(level + 1) +
                             " (sigma = " + detail::format_number(sigma) + ")";
        }
        if (previous.size()) {
            double change = 0.0;
            for (std::size_t k = 0; k < nodes; ++k) change = std::max(change, std::abs(v[k] - previous[k]));
            out.history.push_back(change);
            if (change < schedule.outer_tol) {
                settled = true;
                break;
            }
        }
        previous = v;
    }
    out.h = transform(v, [](double x) { return std::exp(x); });
    const auto [lo, hi] = detail::collatz_wielandt(out.h, apply(sys, out.h));
    out.rho_lower = lo;
    out.rho_upper = hi;
    out.rho = 0.5 * (lo + hi);
    out.residual = detail::eigen_residual(sys, out.h, out.rho);
    out.converged = inner_ok && settled;
    if (inner_ok && !settled)
        out.diagnostic = "normalized fixed points still moving by " +
                         detail::format_number(out.history.empty() ? 0.0 : out.history.back()) +
                         " at the last discount level (tolerance " + detail::format_number(schedule.outer_tol) + ")";
    return out;
}

struct OptimalFunction {
    GridFunction g;
    double identity_residual = 0.0; // sup |p_j B_1(g) - g o tau_j| / sup g
};

/// g* = psi h: the normalization of the potential system satisfies
/// p_j = g*(tau_j x) / B_1(g*)(x).
inline OptimalFunction optimal_function(const PotentialIFS& pifs, const EigenPair& pair, double max_residual = 1e-6) {
    if (!(pair.residual <= max_residual))
        throw std::invalid_argument("optimal_function: eigenpair residual " + detail::format_number(pair.residual) +
                                    " exceeds " + detail::format_number(max_residual));
    const Grid& grid = pifs.grid();
    std::vector<double> v(grid.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = pifs.psi(grid.node(k)) * pair.h[k];
    OptimalFunction out{GridFunction(grid, std::move(v))};

    const NormalizedIFS p = normalize(pifs, pair.h, pair.rho);
    const GridFunction B1g = apply_unweighted(pifs.maps(), out.g);
    double worst = 0.0;
    for (int j = 0; j < pifs.size(); ++j)
        for (std::size_t k = 0; k < grid.size(); ++k)
            worst = std::max(worst, std::abs(p.node_weight(j, k) * B1g[k] - out.g.at(pifs.maps().node_stencil(j, k))));
    out.identity_residual = worst / sup_norm(out.g);
    return out;
}

} // namespace ifsw
