#pragma once

// Batch front-end: load a config, run one command, write a JSON report and
// CSV artifacts. Exit codes: 0 success, 1 configuration error, 2 solver
// non-convergence or failed check.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "holonomic.hpp"
#include "markov.hpp"
#include "pressure.hpp"
#include "transfer.hpp"
#include "verify.hpp"

namespace ifsw::cli {

using ojson = nlohmann::ordered_json;

enum Exit : int { ok = 0, config_error = 1, solver_failure = 2 };

/// Command-line values that replace the corresponding config fields.
struct Overrides {
    std::optional<std::size_t> grid;
    std::optional<double> tol;
    std::optional<int> N_max;
    std::optional<std::size_t> particles;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> method;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"validate", "pressure", "eigen",     "normalize", "equilibrium",
                                            "entropy",  "chaos-game", "verify", "probe"};
    return c;
}

/// --out if given, else $IFSW_OUTPUT_DIR, else ./ifsw-out.
inline std::filesystem::path output_dir(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv("IFSW_OUTPUT_DIR"); env && *env) return env;
    return "ifsw-out";
}

namespace detail {

inline ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

inline ojson system_json(const RunConfig& c) {
    ojson s;
    s["name"] = c.name;
    s["dimension"] = c.dimension;
    s["grid"] = c.grid;
    s["maps"] = c.maps;
    if (c.potential) s["potential"] = *c.potential;
    else s["weights"] = c.weights;
    return s;
}

inline ojson eigen_json(const EigenPair& e) {
    ojson j;
    j["rho"] = number(e.rho);
    j["log_rho"] = number(e.rho > 0 ? std::log(e.rho) : std::nan(""));
    j["rho_lower"] = number(e.rho_lower);
    j["rho_upper"] = number(e.rho_upper);
    j["residual"] = number(e.residual);
    j["converged"] = e.converged;
    j["iterations"] = e.iterations;
    if (!e.diagnostic.empty()) j["diagnostic"] = e.diagnostic;
    return j;
}

inline ojson spread_json(const LimitInterval& s) {
    return ojson{{"N", s.N}, {"inf", number(s.inf)}, {"sup", number(s.sup)}, {"spread", number(s.sup - s.inf)}};
}

inline ojson measure_json(const EigenMeasure& m) {
    ojson j;
    j["rho"] = number(m.rho);
    j["residual"] = number(m.residual);
    j["lower_bound"] = number(m.lower_bound);
    j["upper_bound"] = number(m.upper_bound);
    j["converged"] = m.converged;
    j["iterations"] = m.iterations;
    j["particles"] = m.nu.size();
    if (!m.diagnostic.empty()) j["diagnostic"] = m.diagnostic;
    return j;
}

class Session {
public:
    Session(const RunConfig& c, std::filesystem::path out, std::ostream& log) : c_(c), out_(std::move(out)), log_(log) {}

    template <class T>
    void csv(const std::string& name, const T& value) {
        std::ofstream f(out_ / name);
        if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
        write_csv(f, value);
        artifacts_.push_back(name);
    }

    void csv_with(const std::string& name, const std::function<void(std::ostream&)>& writer) {
        std::ofstream f(out_ / name);
        if (!f) throw std::runtime_error("cannot write " + (out_ / name).string());
        writer(f);
        artifacts_.push_back(name);
    }

    const RunConfig& config() const { return c_; }
    std::ostream& log() { return log_; }
    const std::vector<std::string>& artifacts() const { return artifacts_; }

private:
    const RunConfig& c_;
    std::filesystem::path out_;
    std::ostream& log_;
    std::vector<std::string> artifacts_;
};

struct Outcome {
    int code = ok;
    ojson body;
};

inline void write_probabilities(std::ostream& out, const NormalizedIFS& p) {
    const int d = p.grid().dimension();
    out << ifsw::detail::coord_header(d);
    for (int i = 0; i < p.size(); ++i) out << ",p_" << i;
    out << '\n';
    for (std::size_t k = 0; k < p.grid().size(); ++k) {
        ifsw::detail::write_coords(out, p.grid().node(k), d);
        for (int i = 0; i < p.size(); ++i) {
            out << ',';
            ifsw::detail::write_number(out, p.node_weight(i, k));
        }
        out << '\n';
    }
}

// Equilibrium probabilities when an eigenfunction exists, otherwise q / B_q(1).
struct Normalized {
    std::optional<EigenPair> pair;
    NormalizedIFS p;
    std::string source;
};

inline Normalized normalized_system(const BuiltSystem& sys, const RunConfig& c) {
    const WeightedIFS& ifs = sys.ifs();
    NormalizedIFS pw = pointwise_normalize(ifs);
    if (pw.sum_deviation() <= 1e-10) {
        bool already = true;
        for (int i = 0; i < ifs.size() && already; ++i)
            for (std::size_t k = 0; k < ifs.grid().size() && already; ++k)
                already = std::abs(pw.node_weight(i, k) - ifs.node_weight(i, k)) <= 1e-12;
        if (already) return {std::nullopt, NormalizedIFS::from_weights(ifs), "weights already sum to one"};
    }
    EigenPair pair = eigen_power(ifs, std::min(c.tol, 1e-10), std::max<std::size_t>(c.max_iter, 1000));
    if (pair.converged && min_value(pair.h) > 0.0) {
        NormalizedIFS p = normalize(ifs, pair.h, pair.rho);
        return {std::move(pair), std::move(p), "eigenpair normalization"};
    }
    return {std::move(pair), std::move(pw), "pointwise normalization q / B_q(1) (no positive eigenfunction)"};
}

inline void require_valid_system(const BuiltSystem& sys) {
    const auto& v = sys.validation();
    if (v.valid) return;
    std::string msg = "system failed validation:";
    for (const auto& e : v.errors) msg += "\n  " + e;
    throw ConfigError("maps", msg);
}

inline const PotentialIFS& require_potential(const BuiltSystem& sys, const std::string& command) {
    if (!sys.potential()) throw ConfigError("potential", "command '" + command + "' needs a potential");
    return *sys.potential();
}

inline Outcome cmd_validate(const BuiltSystem& sys, Session&) {
    const auto& v = sys.validation();
    Outcome o;
    o.body["valid"] = v.valid;
    o.body["errors"] = v.errors;
    o.body["warnings"] = v.warnings;
    o.body["samples"] = v.samples;
    o.body["min_weight"] = number(v.min_weight);
    o.body["max_escape"] = number(v.max_escape);
    o.code = v.valid ? ok : config_error;
    return o;
}

inline Outcome cmd_pressure(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    PressureOptions opt;
    opt.tol = c.tol;
    opt.max_iter = c.max_iter;
    opt.N_max = c.N_max;
    opt.schedule = c.schedule();
    PressureMethod method;
    try {
        method = parse_pressure_method(c.method);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("method", e.what());
    }
    const PressureReport rep = sys.potential() ? pressure(*sys.potential(), method, opt) : pressure(sys.ifs(), method, opt);
    Outcome o;
    o.body["method"] = to_string(method);
    o.body["potential"] = rep.potential;
    o.body["value"] = number(rep.value);
    if (rep.power) o.body["power"] = eigen_json(*rep.power);
    if (rep.discounted) o.body["discounted"] = eigen_json(*rep.discounted);
    if (rep.limit) o.body["limit"] = spread_json(*rep.limit);
    o.body["converged"] = rep.converged;
    o.body["diagnostics"] = rep.diagnostics;
    if (rep.power && rep.power->converged && sys.potential()) {
        EquilibriumOptions eo;
        eo.eigen_tol = c.tol;
        eo.max_iter = c.max_iter;
        const EquilibriumState eq = equilibrium(*sys.potential(), eo);
        o.body["equilibrium"] = ojson{{"h_a", number(eq.h_a)}, {"energy", number(eq.energy)}, {"gap", number(eq.gap)}};
    }
    o.code = rep.converged ? ok : solver_failure;
    return o;
}

inline Outcome cmd_eigen(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const EigenPair pair = eigen_power(sys.ifs(), c.tol, c.max_iter);
    Outcome o;
    o.body["eigenfunction"] = eigen_json(pair);
    s.csv("eigenfunction.csv", pair.h);
    MeasureIterationOptions mo;
    mo.tol = c.tol;
    const EigenMeasure em = eigen_measure(sys.ifs(), mo);
    o.body["eigenmeasure"] = measure_json(em);
    s.csv("eigenmeasure.csv", em.nu);
    const bool found = pair.converged && min_value(pair.h) > 0.0;
    if (!found) {
        const LimitInterval spread = limit_interval(sys.ifs(), c.N_max);
        o.body["a_N_spread"] = spread_json(spread);
        o.body["diagnostic"] = pair.diagnostic + "; " + ifsw::detail::spread_message(spread);
        s.log() << "no positive eigenfunction: " << pair.diagnostic << '\n';
    }
    o.code = found && em.converged ? ok : solver_failure;
    return o;
}

inline Outcome cmd_normalize(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const EigenPair pair = eigen_power(sys.ifs(), c.tol, c.max_iter);
    Outcome o;
    o.body["eigenfunction"] = eigen_json(pair);
    if (!pair.converged || !(min_value(pair.h) > 0.0)) {
        o.body["diagnostic"] = pair.diagnostic;
        o.code = solver_failure;
        return o;
    }
    const NormalizedIFS p = normalize(sys.ifs(), pair.h, pair.rho);
    o.body["sum_deviation"] = number(p.sum_deviation());
    if (!p.warning().empty()) o.body["warning"] = p.warning();
    s.csv_with("probabilities.csv", [&](std::ostream& f) { write_probabilities(f, p); });
    if (sys.potential()) {
        const OptimalFunction g = optimal_function(*sys.potential(), pair, 1.0);
        o.body["optimal_function_residual"] = number(g.identity_residual);
        s.csv("optimal_function.csv", g.g);
    }
    return o;
}

inline Outcome cmd_equilibrium(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const PotentialIFS& pot = require_potential(sys, "equilibrium");
    EquilibriumOptions eo;
    eo.eigen_tol = std::min(c.tol, 1e-10);
    eo.max_iter = c.max_iter;
    eo.N_max = c.N_max;
    Outcome o;
    try {
        const EquilibriumState eq = equilibrium(pot, eo);
        o.body["eigenfunction"] = eigen_json(eq.pair);
        o.body["log_rho"] = number(eq.log_rho);
        o.body["h_a"] = number(eq.h_a);
        o.body["energy"] = number(eq.energy);
        o.body["value"] = number(eq.value());
        o.body["gap"] = number(eq.gap);
        o.body["gap_tolerance"] = eo.gap_tol;
        o.body["measure"] = measure_json(eq.fixed);
        o.body["holonomy_defect"] = number(holonomy_defect(eq.mu_hat, sys.maps(), default_dictionary(c.dimension)));
        if (!eq.mu_hat.warning().empty()) o.body["warning"] = eq.mu_hat.warning();
        s.csv("measure.csv", eq.mu());
        s.csv("disintegration.csv", eq.mu_hat);
        o.code = eq.within_tolerance && eq.fixed.converged ? ok : solver_failure;
    } catch (const NoEigenfunctionError& e) {
        o.body["diagnostic"] = e.what();
        o.body["eigenfunction"] = eigen_json(e.attempt());
        o.body["a_N_spread"] = spread_json(e.spread());
        s.log() << e.what() << '\n';
        o.code = solver_failure;
    }
    return o;
}

inline Outcome cmd_entropy(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const Normalized nz = normalized_system(sys, c);
    MeasureIterationOptions mo;
    mo.tol = 1e-12;
    const EigenMeasure fixed = hutchinson_fixed_point(nz.p, mo);
    const HolonomicMeasure lift = holonomic_lift(nz.p, fixed.nu);
    std::vector<GridFunction> dict{GridFunction::constant(sys.grid(), 1.0)};
    std::vector<std::string> names{"1"};
    if (const PotentialIFS* pot = sys.potential()) {
        dict.push_back(GridFunction::sample(sys.grid(), [&](std::span<const double> x) { return pot->potential()(x); }));
        names.push_back("psi");
        if (nz.pair && nz.pair->converged) {
            dict.push_back(optimal_function(*pot, *nz.pair, 1.0).g);
            names.push_back("psi*h");
        }
    }
    const VariationalBound vb = variational_entropy_upper(lift, sys.maps(), dict);
    Outcome o;
    o.body["probabilities"] = nz.source;
    o.body["h_a"] = number(vb.lower);
    o.body["h_v_upper"] = number(vb.value);
    o.body["h_v_interval"] = ojson::array({number(vb.lower), number(vb.value)});
    o.body["argmin"] = names[vb.argmin];
    ojson values = ojson::object();
    for (std::size_t k = 0; k < names.size(); ++k) values[names[k]] = number(vb.values[k]);
    o.body["dictionary_values"] = values;
    o.body["ln_n"] = number(std::log(static_cast<double>(sys.maps().size())));
    o.body["hutchinson"] = measure_json(fixed);
    o.body["holonomy_defect"] = number(holonomy_defect(lift, sys.maps(), default_dictionary(c.dimension)));
    if (!lift.warning().empty()) o.body["warning"] = lift.warning();
    s.csv("disintegration.csv", lift);
    o.code = fixed.converged ? ok : solver_failure;
    return o;
}

inline Outcome cmd_chaos_game(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const Normalized nz = normalized_system(sys, c);
    const Orbit orbit = chaos_game(nz.p, c.start_point(), c.particles, c.seed);
    const HolonomicMeasure emp = empirical_holonomic(orbit, sys.maps());
    Outcome o;
    o.body["probabilities"] = nz.source;
    o.body["steps"] = orbit.size();
    o.body["seed"] = c.seed;
    o.body["mean_x1"] = number(emp.marginal().integrate([](const Point& x) { return x[0]; }));
    if (c.dimension == 2) o.body["mean_x2"] = number(emp.marginal().integrate([](const Point& x) { return x[1]; }));
    o.body["h_a"] = number(average_entropy(emp));
    o.body["holonomy_defect"] = number(holonomy_defect(emp, sys.maps(), default_dictionary(c.dimension)));
    if (const PotentialIFS* pot = sys.potential()) {
        const double energy = emp.marginal().integrate([&](const Point& x) { return std::log(pot->psi(x)); });
        o.body["energy"] = number(energy);
        if (nz.pair && nz.pair->converged) {
            o.body["log_rho"] = number(std::log(nz.pair->rho));
            o.body["gap"] = number(std::abs(average_entropy(emp) + energy - std::log(nz.pair->rho)));
        }
    }
    s.csv("orbit.csv", orbit);
    s.csv("disintegration.csv", emp);
    return o;
}

inline Outcome cmd_probe(const BuiltSystem& sys, Session& s) {
    require_valid_system(sys);
    const RunConfig& c = s.config();
    const PotentialIFS& pot = require_potential(sys, "probe");
    std::vector<TestFunction> etas;
    for (std::size_t k = 0; k < c.probe_eta.size(); ++k) {
        try {
            etas.push_back({c.probe_eta[k], Expr::parse(c.probe_eta[k], c.dimension)});
        } catch (const ParseError& e) {
            throw ConfigError("probe.eta[" + std::to_string(k) + "]", e.what());
        }
    }
    Outcome o;
    try {
        EquilibriumOptions eo;
        eo.max_iter = c.max_iter;
        const EquilibriumState eq = equilibrium(pot, eo);
        const ProbeResult probe = gateaux_probe(pot, etas, c.probe_t, eq.mu());
        o.body["base"] = number(probe.base);
        ojson trends = ojson::array();
        bool good = true;
        for (const auto& t : probe.trends) {
            trends.push_back({{"eta", t.eta_id},
                              {"max_discrepancy", number(t.max_discrepancy)},
                              {"final_discrepancy", number(t.final_discrepancy)},
                              {"non_increasing", t.non_increasing}});
            good = good && t.non_increasing;
        }
        o.body["trends"] = trends;
        s.csv("probe.csv", probe);
        o.code = good ? ok : solver_failure;
    } catch (const NoEigenfunctionError& e) {
        o.body["diagnostic"] = e.what();
        o.code = solver_failure;
    } catch (const std::runtime_error& e) {
        o.body["diagnostic"] = e.what();
        o.code = solver_failure;
    }
    return o;
}

inline Outcome cmd_verify(const BuiltSystem& sys, Session& s) {
    const VerifyResult r = verify(s.config(), sys);
    Outcome o;
    ojson checks = ojson::array();
    for (const auto& ch : r.checks) {
        checks.push_back({{"name", ch.name},
                          {"status", ch.status},
                          {"value", number(ch.value)},
                          {"tolerance", number(ch.tolerance)},
                          {"detail", ch.detail}});
        s.log() << (ch.status == "pass" ? "PASS " : ch.status == "fail" ? "FAIL " : "SKIP ") << ch.name;
        if (!ch.detail.empty()) s.log() << "  (" << ch.detail << ")";
        s.log() << '\n';
    }
    o.body["checks"] = checks;
    o.body["passed"] = r.passed();
    o.code = r.passed() ? ok : solver_failure;
    return o;
}

} // namespace detail

/// Runs `command` on the config at `config_path`; the report goes to
/// `<out>/<command>.json`. Messages go to `log`.
inline int run(const std::string& command, const std::string& config_path, const Overrides& ov,
               const std::filesystem::path& out, std::ostream& log) {
    using namespace detail;
    static const std::map<std::string, Outcome (*)(const BuiltSystem&, Session&)> table{
        {"validate", cmd_validate}, {"pressure", cmd_pressure},       {"eigen", cmd_eigen},
        {"normalize", cmd_normalize}, {"equilibrium", cmd_equilibrium}, {"entropy", cmd_entropy},
        {"chaos-game", cmd_chaos_game}, {"verify", cmd_verify},       {"probe", cmd_probe}};
    const auto it = table.find(command);
    if (it == table.end()) {
        log << "unknown command '" << command << "'\n";
        return config_error;
    }
    RunConfig c;
    try {
        c = load_config(config_path);
        if (ov.grid) {
            if (*ov.grid < 2) throw ConfigError("grid", "needs at least 2 points per axis");
            c.grid = *ov.grid;
        }
        if (ov.tol) c.tol = *ov.tol;
        if (ov.N_max) c.N_max = *ov.N_max;
        if (ov.particles) c.particles = *ov.particles;
        if (ov.seed) c.seed = *ov.seed;
        if (ov.threads) c.threads = *ov.threads;
        if (ov.method) c.method = *ov.method;
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << '\n';
        return config_error;
    }
    set_max_threads(c.threads);
    try {
        std::filesystem::create_directories(out);
        const BuiltSystem sys(c);
        Session session(c, out, log);
        Outcome o = it->second(sys, session);
        ojson report;
        report["command"] = command;
        report["system"] = system_json(c);
        report["parameters"] = {{"tol", c.tol},           {"N_max", c.N_max}, {"particles", c.particles},
                                {"seed", c.seed},         {"levels", c.sigma.empty() ? c.levels : static_cast<int>(c.sigma.size())},
                                {"max_iter", c.max_iter}, {"method", c.method}};
        report["exit_code"] = o.code;
        report["result"] = std::move(o.body);
        report["artifacts"] = session.artifacts();
        std::ofstream f(out / (command + ".json"));
        if (!f) throw std::runtime_error("cannot write report in " + out.string());
        f << report.dump(2) << '\n';
        log << command << ": exit " << o.code << ", report " << (out / (command + ".json")).string() << '\n';
        return o.code;
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return solver_failure;
    }
}

} // namespace ifsw::cli
