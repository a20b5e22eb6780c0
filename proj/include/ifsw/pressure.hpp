#pragma once

// Topological pressure P(psi) = ln rho(B_{psi o tau}), equilibrium states
// built from the leading eigenpair, and the forward-difference probe of the
// pressure functional p(phi) = P(exp(phi)).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "holonomic.hpp"
#include "markov.hpp"
#include "system.hpp"
#include "transfer.hpp"

namespace ifsw {

enum class PressureMethod { power, discounted, limit, all };

inline const char* to_string(PressureMethod m) {
    switch (m) {
    case PressureMethod::power: return "power";
    case PressureMethod::discounted: return "discounted";
    case PressureMethod::limit: return "limit";
    case PressureMethod::all: return "all";
    }
    return "?";
}

inline PressureMethod parse_pressure_method(const std::string& s) {
    if (s == "power") return PressureMethod::power;
    if (s == "discounted") return PressureMethod::discounted;
    if (s == "limit") return PressureMethod::limit;
    if (s == "all") return PressureMethod::all;
    throw std::invalid_argument("unknown pressure method '" + s + "' (power, discounted, limit, all)");
}

struct PressureOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1000;
    int N_max = 60;
    DiscountSchedule schedule = DiscountSchedule::geometric();
};

struct LimitInterval {
    int N = 0;
    double inf = 0.0; // min over nodes of a_N
    double sup = 0.0; // max over nodes of a_N
};

struct PressureReport {
    std::string potential;
    PressureMethod method = PressureMethod::power;
    std::optional<EigenPair> power;
    std::optional<EigenPair> discounted;
    std::optional<LimitInterval> limit;
    double value = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::vector<std::string> diagnostics;

    std::optional<double> log_rho_power() const {
        return power ? std::optional<double>(std::log(power->rho)) : std::nullopt;
    }
    std::optional<double> log_rho_discounted() const {
        return discounted ? std::optional<double>(std::log(discounted->rho)) : std::nullopt;
    }
};

template <WeightedSystem S>
LimitInterval limit_interval(const S& sys, int N_max) {
    const GridFunction L = log_power_apply(sys, N_max);
    return {N_max, min_value(L) / N_max, max_value(L) / N_max};
}

/// ln rho by the selected method. Solver failures are recorded in the
/// report (converged == false) rather than thrown.
inline PressureReport pressure(const WeightedIFS& pifs, PressureMethod method = PressureMethod::power,
                               const PressureOptions& opt = {}) {
    if (!(pifs.min_node_weight() > 0.0)) throw std::invalid_argument("pressure requires strictly positive weights");
    PressureReport rep;
    rep.method = method;
    const bool all = method == PressureMethod::all;
    bool ok = true;
    if (all || method == PressureMethod::power) {
        rep.power = eigen_power(pifs, opt.tol, opt.max_iter);
        if (!rep.power->converged) {
            ok = false;
            rep.diagnostics.push_back("power: " + rep.power->diagnostic);
        }
    }
    if (all || method == PressureMethod::discounted) {
        rep.discounted = eigen_discounted(pifs, opt.schedule);
        if (!rep.discounted->converged) {
            ok = false;
            rep.diagnostics.push_back("discounted: " + rep.discounted->diagnostic);
        }
    }
    if (all || method == PressureMethod::limit) rep.limit = limit_interval(pifs, opt.N_max);
    switch (method) {
    case PressureMethod::power:
    case PressureMethod::all: rep.value = std::log(rep.power->rho); break;
    case PressureMethod::discounted: rep.value = std::log(rep.discounted->rho); break;
    case PressureMethod::limit: rep.value = 0.5 * (rep.limit->inf + rep.limit->sup); break;
    }
    rep.converged = ok;
    return rep;
}

inline PressureReport pressure(const PotentialIFS& pifs, PressureMethod method = PressureMethod::power,
                               const PressureOptions& opt = {}) {
    PressureReport rep = pressure(static_cast<const WeightedIFS&>(pifs), method, opt);
    rep.potential = pifs.potential().str();
    return rep;
}

/// Raised when the transfer operator shows no positive eigenfunction, so the
/// normalization chain cannot start.
class NoEigenfunctionError : public std::runtime_error {
public:
    NoEigenfunctionError(const std::string& what, EigenPair attempt, LimitInterval spread)
        : std::runtime_error(what), attempt_(std::move(attempt)), spread_(spread) {}

    const EigenPair& attempt() const noexcept { return attempt_; }
    const LimitInterval& spread() const noexcept { return spread_; }

private:
    EigenPair attempt_;
    LimitInterval spread_;
};

struct EquilibriumOptions {
    double eigen_tol = 1e-10;
    std::size_t max_iter = 1000;
    int N_max = 60;
    double measure_tol = 1e-12;
    std::size_t measure_max_iter = 20000;
    Compaction compaction = Compaction::node_split;
    double gap_tol = 1e-3;
};

struct EquilibriumState {
    EigenPair pair;
    NormalizedIFS p;
    EigenMeasure fixed;     // Hutchinson iteration for p; fixed.nu is the marginal mu
    HolonomicMeasure mu_hat;
    double log_rho = 0.0;
    double h_a = 0.0;
    double energy = 0.0;    // int ln psi dmu
    double gap = 0.0;       // |h_a + energy - ln rho|
    bool within_tolerance = false;

    const ParticleMeasure& mu() const noexcept { return fixed.nu; }
    double value() const noexcept { return h_a + energy; }
};

namespace detail {
inline std::string spread_message(const LimitInterval& s) {
    return "a_N at N = " + std::to_string(s.N) + " ranges over [" + format_number(s.inf) + ", " + format_number(s.sup) +
           "] (spread " + format_number(s.sup - s.inf) + ")";
}
} // namespace detail

/// (h, rho) <- eigen_power, p <- normalize, mu <- Hutchinson fixed point of p,
/// mu_hat <- holonomic lift; then checks h_a(mu_hat) + int ln psi dmu = ln rho.
inline EquilibriumState equilibrium(const PotentialIFS& pifs, const EquilibriumOptions& opt = {}) {
    EigenPair pair = eigen_power(pifs, opt.eigen_tol, opt.max_iter);
    if (!pair.converged || !(min_value(pair.h) > 0.0)) {
        const LimitInterval spread = limit_interval(pifs, opt.N_max);
        throw NoEigenfunctionError("no positive eigenfunction: " + pair.diagnostic + "; " + detail::spread_message(spread),
                                   std::move(pair), spread);
    }
    NormalizedIFS p = normalize(pifs, pair.h, pair.rho);
    MeasureIterationOptions mopt;
    mopt.tol = opt.measure_tol;
    mopt.max_iter = opt.measure_max_iter;
    mopt.compaction = opt.compaction;
    EigenMeasure fixed = hutchinson_fixed_point(p, mopt);
    HolonomicMeasure mu_hat = holonomic_lift(p, fixed.nu);
    const double log_rho = std::log(pair.rho);
    const double h_a = average_entropy(mu_hat);
    const double energy = fixed.nu.integrate([&](const Point& x) { return std::log(pifs.psi(x)); });
    EquilibriumState st{std::move(pair), std::move(p), std::move(fixed), std::move(mu_hat), log_rho, h_a, energy, 0.0, false};
    st.gap = std::abs(h_a + energy - log_rho);
    st.within_tolerance = st.gap <= opt.gap_tol;
    return st;
}

struct ProbeRow {
    std::string eta_id;
    double t;
    double quotient;    // (p(phi + t eta) - p(phi)) / t
    double subgradient; // int eta dmu
    double abs_diff;
};

struct ProbeTrend {
    std::string eta_id;
    double max_discrepancy = 0.0;
    double final_discrepancy = 0.0; // at the smallest t
    bool non_increasing = true;     // discrepancy never grows as t decreases, up to solver noise 2 tol / t
};

struct ProbeResult {
    double base = 0.0; // p(phi)
    std::vector<ProbeRow> rows;
    std::vector<ProbeTrend> trends;
};

struct ProbeOptions {
    double tol = 1e-12;
    std::size_t max_iter = 2000;
};

namespace detail {
inline double log_rho_or_throw(const PotentialIFS& pifs, const ProbeOptions& opt, const std::string& what) {
    const EigenPair pair = eigen_power(pifs, opt.tol, opt.max_iter);
    if (!pair.converged) throw std::runtime_error("pressure solve failed for " + what + ": " + pair.diagnostic);
    return std::log(pair.rho);
}
} // namespace detail

/// For each eta and t: forward quotient of p at phi = ln psi in direction eta
/// against the candidate derivative int eta dmu. Rows are ordered by eta,
/// then by decreasing t.
inline ProbeResult gateaux_probe(const PotentialIFS& pifs, const std::vector<TestFunction>& etas,
                                 std::vector<double> t_values, const ParticleMeasure& mu, const ProbeOptions& opt = {}) {
    if (t_values.empty()) throw std::invalid_argument("gateaux_probe needs at least one t");
    for (double t : t_values)
        if (!(t > 0.0)) throw std::invalid_argument("probe steps t must be positive");
    std::sort(t_values.begin(), t_values.end(), std::greater<>());
    ProbeResult out;
    out.base = detail::log_rho_or_throw(pifs, opt, "the base potential");
    for (const auto& eta : etas) {
        const double sub = mu.integrate(eta.f) / mu.mass();
        ProbeTrend trend{eta.name};
        double previous = std::numeric_limits<double>::infinity();
        for (double t : t_values) {
            const Expr psi_t = pifs.potential() * Expr::call(Op::exp, {Expr::number(t) * eta.f});
            const PotentialIFS perturbed(pifs.map_family(), psi_t);
            const double value = detail::log_rho_or_throw(perturbed, opt, "t = " + detail::format_number(t) + ", eta = " + eta.name);
            const double q = (value - out.base) / t;
            const double diff = std::abs(q - sub);
            out.rows.push_back({eta.name, t, q, sub, diff});
            trend.max_discrepancy = std::max(trend.max_discrepancy, diff);
            if (diff > previous + 2.0 * opt.tol / t) trend.non_increasing = false;
            previous = diff;
            trend.final_discrepancy = diff;
        }
        out.trends.push_back(trend);
    }
    return out;
}

/// CSV `eta_id,t,quotient,subgradient_value,abs_diff`.
inline void write_csv(std::ostream& out, const ProbeResult& probe) {
    out << "eta_id,t,quotient,subgradient_value,abs_diff\n";
    for (const auto& r : probe.rows) {
        out << r.eta_id << ',';
        detail::write_number(out, r.t);
        out << ',';
        detail::write_number(out, r.quotient);
        out << ',';
        detail::write_number(out, r.subgradient);
        out << ',';
        detail::write_number(out, r.abs_diff);
        out << '\n';
    }
}

} // namespace ifsw
