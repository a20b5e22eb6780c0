#pragma once

// JSON run configuration: the system description plus solver parameters.

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "expr.hpp"
#include "grid.hpp"
#include "system.hpp"
#include "transfer.hpp"

namespace ifsw {

/// Invalid or unreadable configuration; `field` names the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field.empty() ? message : "config field '" + field + "': " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct RunConfig {
    std::string name;
    int dimension = 1;
    std::size_t grid = 1025;
    std::vector<std::vector<std::string>> maps;
    std::optional<std::string> potential;
    std::vector<std::string> weights;

    double tol = 1e-8;
    int N_max = 60;
    std::size_t particles = 1000000;
    std::uint64_t seed = 42;
    int levels = 20;
    std::vector<double> sigma;          // explicit discount factors; overrides levels
    unsigned threads = 0;
    std::size_t max_iter = 1000;
    bool allow_nonnegative = false;
    std::string method = "all";
    std::vector<double> start;          // chaos-game starting point
    std::vector<std::string> probe_eta{"sin(pi*x1)"};
    std::vector<double> probe_t{1e-2, 1e-3, 1e-4};
    std::vector<double> expected_moments; // optional x1 moments of the Hutchinson measure

    DiscountSchedule schedule() const {
        if (sigma.empty()) return DiscountSchedule::geometric(levels);
        DiscountSchedule s;
        s.sigma = sigma;
        return s;
    }

    Point start_point() const {
        Point x{0.5, 0.5};
        for (std::size_t a = 0; a < start.size() && a < 2; ++a) x[a] = start[a];
        return x;
    }
};

namespace detail {

using json = nlohmann::json;

template <class T>
T get_field(const json& j, const char* key, const T& fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
    }
}

inline std::string expr_text(const json& v, const std::string& field) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return format_number(v.get<double>());
    throw ConfigError(field, "expected an expression string or a number");
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::get_field;
    if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
    static const char* known[] = {"name", "dimension", "grid", "maps", "potential", "weights", "tol", "N_max",
                                  "particles", "seed", "schedule", "threads", "max_iter", "allow_nonnegative",
                                  "method", "start", "probe", "expected_moments", "description"};
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || item.key() == k;
        if (!ok) throw ConfigError(item.key(), "unknown field");
    }
    RunConfig c;
    c.name = get_field<std::string>(j, "name", "");
    c.dimension = get_field<int>(j, "dimension", 1);
    if (c.dimension != 1 && c.dimension != 2) throw ConfigError("dimension", "must be 1 or 2");
    const long long grid = get_field<long long>(j, "grid", 1025);
    if (grid < 2) throw ConfigError("grid", "needs at least 2 points per axis");
    c.grid = static_cast<std::size_t>(grid);

    if (!j.contains("maps") || !j["maps"].is_array() || j["maps"].empty())
        throw ConfigError("maps", "expected a nonempty array of maps");
    for (std::size_t i = 0; i < j["maps"].size(); ++i) {
        const auto& m = j["maps"][i];
        const std::string field = "maps[" + std::to_string(i) + "]";
        std::vector<std::string> comps;
        if (m.is_array()) {
            for (std::size_t a = 0; a < m.size(); ++a) comps.push_back(detail::expr_text(m[a], field + "[" + std::to_string(a) + "]"));
        } else {
            comps.push_back(detail::expr_text(m, field));
        }
        if (static_cast<int>(comps.size()) != c.dimension)
            throw ConfigError(field, "has " + std::to_string(comps.size()) + " components, expected " +
                                         std::to_string(c.dimension));
        c.maps.push_back(std::move(comps));
    }

    const bool has_potential = j.contains("potential");
    const bool has_weights = j.contains("weights");
    if (has_potential == has_weights) throw ConfigError("potential", "give exactly one of 'potential' or 'weights'");
    if (has_potential) c.potential = detail::expr_text(j["potential"], "potential");
    if (has_weights) {
        if (!j["weights"].is_array()) throw ConfigError("weights", "expected an array");
        for (std::size_t i = 0; i < j["weights"].size(); ++i)
            c.weights.push_back(detail::expr_text(j["weights"][i], "weights[" + std::to_string(i) + "]"));
        if (c.weights.size() != c.maps.size())
            throw ConfigError("weights", "has " + std::to_string(c.weights.size()) + " entries for " +
                                             std::to_string(c.maps.size()) + " maps");
    }

    c.tol = get_field<double>(j, "tol", c.tol);
    if (!(c.tol > 0.0)) throw ConfigError("tol", "must be positive");
    c.N_max = get_field<int>(j, "N_max", c.N_max);
    if (c.N_max < 1) throw ConfigError("N_max", "must be at least 1");
    const long long particles = get_field<long long>(j, "particles", static_cast<long long>(c.particles));
    if (particles < 1) throw ConfigError("particles", "must be at least 1");
    c.particles = static_cast<std::size_t>(particles);
    c.seed = get_field<std::uint64_t>(j, "seed", c.seed);
    const long long threads = get_field<long long>(j, "threads", 0);
    if (threads < 0) throw ConfigError("threads", "must be nonnegative");
    c.threads = static_cast<unsigned>(threads);
    const long long max_iter = get_field<long long>(j, "max_iter", static_cast<long long>(c.max_iter));
    if (max_iter < 1) throw ConfigError("max_iter", "must be at least 1");
    c.max_iter = static_cast<std::size_t>(max_iter);
    c.allow_nonnegative = get_field<bool>(j, "allow_nonnegative", false);
    c.method = get_field<std::string>(j, "method", c.method);
    c.start = get_field<std::vector<double>>(j, "start", {});
    if (!c.start.empty() && static_cast<int>(c.start.size()) != c.dimension)
        throw ConfigError("start", "needs " + std::to_string(c.dimension) + " coordinates");
    for (double v : c.start)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("start", "must lie in [0,1]^d");
    c.expected_moments = get_field<std::vector<double>>(j, "expected_moments", {});

    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        if (!s.is_object()) throw ConfigError("schedule", "expected an object with 'levels' or 'sigma'");
        c.levels = get_field<int>(s, "levels", c.levels);
        if (c.levels < 1) throw ConfigError("schedule.levels", "must be at least 1");
        c.sigma = get_field<std::vector<double>>(s, "sigma", {});
        try {
            c.schedule().check();
        } catch (const std::invalid_argument& e) {
            throw ConfigError("schedule", e.what());
        }
    }
    if (j.contains("probe")) {
        const auto& p = j["probe"];
        if (!p.is_object()) throw ConfigError("probe", "expected an object with 'eta' and 't'");
        c.probe_eta = get_field<std::vector<std::string>>(p, "eta", c.probe_eta);
        c.probe_t = get_field<std::vector<double>>(p, "t", c.probe_t);
        for (double t : c.probe_t)
            if (!(t > 0.0)) throw ConfigError("probe.t", "steps must be positive");
    }
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", "'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

/// The IFSw described by a config, parsed and validated.
class BuiltSystem {
public:
    explicit BuiltSystem(const RunConfig& c) : grid_(c.dimension, c.grid) {
        std::vector<std::vector<Expr>> maps;
        for (std::size_t i = 0; i < c.maps.size(); ++i) {
            std::vector<Expr> comps;
            for (std::size_t a = 0; a < c.maps[i].size(); ++a)
                comps.push_back(parse(c.maps[i][a], c.dimension, "maps[" + std::to_string(i) + "][" + std::to_string(a) + "]"));
            maps.push_back(std::move(comps));
        }
        maps_ = std::make_shared<const MapFamily>(grid_, std::move(maps));
        ValidationOptions vopt;
        vopt.allow_nonnegative = c.allow_nonnegative;
        if (c.potential) {
            psi_ = parse(*c.potential, c.dimension, "potential");
            try {
                potential_.emplace(from_potential(maps_, *psi_, vopt));
            } catch (const ValidationError& e) {
                throw ConfigError("potential", e.what());
            }
        } else {
            std::vector<Expr> w;
            for (std::size_t i = 0; i < c.weights.size(); ++i)
                w.push_back(parse(c.weights[i], c.dimension, "weights[" + std::to_string(i) + "]"));
            try {
                weighted_.emplace(maps_, std::move(w));
            } catch (const std::invalid_argument& e) {
                throw ConfigError("weights", e.what());
            }
        }
        report_ = validate(ifs(), vopt);
    }

    const Grid& grid() const noexcept { return grid_; }
    const MapFamily& maps() const noexcept { return *maps_; }
    const std::shared_ptr<const MapFamily>& map_family() const noexcept { return maps_; }
    const WeightedIFS& ifs() const { return potential_ ? static_cast<const WeightedIFS&>(*potential_) : *weighted_; }
    const PotentialIFS* potential() const { return potential_ ? &*potential_ : nullptr; }
    const ValidationReport& validation() const noexcept { return report_; }

private:
    static Expr parse(const std::string& src, int d, const std::string& field) {
        try {
            return Expr::parse(src, d);
        } catch (const ParseError& e) {
            throw ConfigError(field, e.what());
        }
    }

    Grid grid_;
    std::shared_ptr<const MapFamily> maps_;
    std::optional<Expr> psi_;
    std::optional<PotentialIFS> potential_;
    std::optional<WeightedIFS> weighted_;
    ValidationReport report_;
};

} // namespace ifsw
