#ifndef RBISING_IO_HPP
#define RBISING_IO_HPP

// Experiment configuration (TOML), JSON/CSV emission and the JSON forms of
// boundary conditions, contours, reports and polymer systems.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "clusterexp.hpp"
#include "fixtures.hpp"
#include "multiscale.hpp"
#include "stats.hpp"
#include "validators.hpp"

namespace rbising {

using Json = nlohmann::ordered_json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    int N = 1;
    std::vector<int> Ns{1, 2};
    double beta = 1.0, lambda = 1.0;
    int l0 = 5;
    double epsilon = 0.1;
    std::string method = "exact";  // exact | mc

    struct Boundary {
        std::string kind = "plus";  // plus | minus | random | dobrushin | strip | explicit
        uint64_t replica = 0;
        int strip = 4;
        std::vector<int> values;
    } boundary;

    struct Mc {
        long sweeps = 100000, burn_in = 1000;
        int thin = 1, batches = 50;
    } mc;

    struct Caps {
        int enumeration_sites = enumeration_site_cap;
        int transfer_width = 21;
        int cluster_size = cluster_size_cap;
        int contour_length = 100000;
    } caps;

    int replicas = 20;

    struct Frequency {
        std::string experiment = "metastate";  // metastate | basic_est | interface
        std::string center = "plus";           // plus | minus
        double epsilon = 0.2;
        int N_max = 8;
    } frequency;

    struct Llt {
        long n = 10000;
        double delta_exponent = 0.3, tau = M_PI / 2, a = -1, b = 1, slack = 0.1;
        int points = 4001;
    } llt;

    std::string spins;  // contours: plus, mc or explicit (spin_values, row-major)
    std::vector<int> spin_values;
};

namespace detail {
template <class T>
T get_or(const toml::table& t, std::string_view key, T dflt) {
    auto n = t.get(key);
    if (!n) return dflt;
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = n->value<std::string>()) return *v;
    } else if constexpr (std::is_same_v<T, double>) {
        if (auto v = n->value<double>()) return *v;
    } else {
        if (n->is_integer()) return static_cast<T>(*n->value<int64_t>());
    }
    throw ConfigError("wrong type for key '" + std::string(key) + "'");
}

inline std::vector<int> int_list(const toml::table& t, std::string_view key, std::vector<int> dflt) {
    auto n = t.get(key);
    if (!n) return dflt;
    auto* arr = n->as_array();
    if (!arr) throw ConfigError("'" + std::string(key) + "' must be an array of integers");
    std::vector<int> out;
    for (auto& e : *arr) {
        if (!e.is_integer()) throw ConfigError("'" + std::string(key) + "' must be an array of integers");
        out.push_back(static_cast<int>(*e.value<int64_t>()));
    }
    return out;
}

inline void only_keys(const toml::table& t, std::initializer_list<std::string_view> keys, const std::string& where) {
    for (auto& [k, v] : t) {
        bool ok = false;
        for (auto x : keys) ok |= k.str() == x;
        if (!ok) throw ConfigError("unknown key '" + std::string(k.str()) + "' in " + where);
    }
}

inline const toml::table& section(const toml::table& t, std::string_view key) {
    static const toml::table empty;
    auto n = t.get(key);
    if (!n) return empty;
    if (!n->is_table()) throw ConfigError("'" + std::string(key) + "' must be a table");
    return *n->as_table();
}
}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    auto need = [](bool ok, const char* msg) {
        if (!ok) throw ConfigError(msg);
    };
    need(c.N >= 1 && c.N <= Volume::max_half_side, "N out of range");
    need(!c.Ns.empty(), "Ns must not be empty");
    for (int n : c.Ns) need(n >= 1 && n <= Volume::max_half_side, "Ns entries out of range");
    need(c.beta >= 0, "beta must be nonnegative");
    need(c.lambda >= -1 && c.lambda <= 1, "lambda must lie in [-1,1]");
    need(c.l0 >= 2, "l0 must be at least 2");
    need(c.epsilon > 0, "epsilon must be positive");
    need(c.method == "exact" || c.method == "mc", "method must be exact or mc");
    const auto& k = c.boundary.kind;
    need(k == "plus" || k == "minus" || k == "random" || k == "dobrushin" || k == "strip" || k == "explicit",
         "unknown boundary kind");
    need(c.mc.sweeps >= 1 && c.mc.burn_in >= 0 && c.mc.thin >= 1 && c.mc.batches >= 2, "invalid mc schedule");
    need(c.replicas >= 1, "replicas must be positive");
    need(c.caps.enumeration_sites >= 1 && c.caps.enumeration_sites <= enumeration_site_cap,
         "caps.enumeration_sites must lie in [1,25]");
    need(c.caps.transfer_width >= 3 && c.caps.transfer_width <= 23, "caps.transfer_width must lie in [3,23]");
    need(c.caps.cluster_size >= 1 && c.caps.cluster_size <= cluster_size_cap, "caps.cluster_size must lie in [1,12]");
    need(c.caps.contour_length >= 1, "caps.contour_length must be positive");
    const auto& f = c.frequency;
    need(f.experiment == "metastate" || f.experiment == "basic_est" || f.experiment == "interface",
         "frequency.experiment must be metastate, basic_est or interface");
    need(f.center == "plus" || f.center == "minus", "frequency.center must be plus or minus");
    need(f.epsilon > 0 && f.N_max >= 1, "invalid frequency settings");
    need(c.llt.n >= 1 && c.llt.points >= 3 && c.llt.tau > 0 && c.llt.a < c.llt.b, "invalid llt settings");
    need(c.spins.empty() || c.spins == "plus" || c.spins == "mc" || c.spins == "explicit", "spins must be plus, mc or explicit");
}

inline ExperimentConfig parse_config(const toml::table& t) {
    using detail::get_or;
    detail::only_keys(t, {"seed", "N", "Ns", "beta", "lambda", "l0", "epsilon", "method", "replicas", "spins",
                          "spin_values", "boundary", "mc", "caps", "frequency", "llt"},
                      "the top level");
    ExperimentConfig c;
    c.seed = get_or<uint64_t>(t, "seed", c.seed);
    c.N = get_or<int>(t, "N", c.N);
    c.Ns = detail::int_list(t, "Ns", c.Ns);
    c.beta = get_or<double>(t, "beta", c.beta);
    c.lambda = get_or<double>(t, "lambda", c.lambda);
    c.l0 = get_or<int>(t, "l0", c.l0);
    c.epsilon = get_or<double>(t, "epsilon", c.epsilon);
    c.method = get_or<std::string>(t, "method", c.method);
    c.replicas = get_or<int>(t, "replicas", c.replicas);
    c.spins = get_or<std::string>(t, "spins", c.spins);
    c.spin_values = detail::int_list(t, "spin_values", {});

    const auto& b = detail::section(t, "boundary");
    detail::only_keys(b, {"kind", "replica", "strip", "values"}, "[boundary]");
    c.boundary.kind = get_or<std::string>(b, "kind", c.boundary.kind);
    c.boundary.replica = get_or<uint64_t>(b, "replica", c.boundary.replica);
    c.boundary.strip = get_or<int>(b, "strip", c.boundary.strip);
    c.boundary.values = detail::int_list(b, "values", {});

    const auto& m = detail::section(t, "mc");
    detail::only_keys(m, {"sweeps", "burn_in", "thin", "batches"}, "[mc]");
    c.mc.sweeps = get_or<long>(m, "sweeps", c.mc.sweeps);
    c.mc.burn_in = get_or<long>(m, "burn_in", c.mc.burn_in);
    c.mc.thin = get_or<int>(m, "thin", c.mc.thin);
    c.mc.batches = get_or<int>(m, "batches", c.mc.batches);

    const auto& k = detail::section(t, "caps");
    detail::only_keys(k, {"enumeration_sites", "transfer_width", "cluster_size", "contour_length"}, "[caps]");
    c.caps.enumeration_sites = get_or<int>(k, "enumeration_sites", c.caps.enumeration_sites);
    c.caps.transfer_width = get_or<int>(k, "transfer_width", c.caps.transfer_width);
    c.caps.cluster_size = get_or<int>(k, "cluster_size", c.caps.cluster_size);
    c.caps.contour_length = get_or<int>(k, "contour_length", c.caps.contour_length);

    const auto& f = detail::section(t, "frequency");
    detail::only_keys(f, {"experiment", "center", "epsilon", "N_max"}, "[frequency]");
    c.frequency.experiment = get_or<std::string>(f, "experiment", c.frequency.experiment);
    c.frequency.center = get_or<std::string>(f, "center", c.frequency.center);
    c.frequency.epsilon = get_or<double>(f, "epsilon", c.frequency.epsilon);
    c.frequency.N_max = get_or<int>(f, "N_max", c.frequency.N_max);

    const auto& l = detail::section(t, "llt");
    detail::only_keys(l, {"n", "delta_exponent", "tau", "a", "b", "slack", "points"}, "[llt]");
    c.llt.n = get_or<long>(l, "n", c.llt.n);
    c.llt.delta_exponent = get_or<double>(l, "delta_exponent", c.llt.delta_exponent);
    c.llt.tau = get_or<double>(l, "tau", c.llt.tau);
    c.llt.a = get_or<double>(l, "a", c.llt.a);
    c.llt.b = get_or<double>(l, "b", c.llt.b);
    c.llt.slack = get_or<double>(l, "slack", c.llt.slack);
    c.llt.points = get_or<int>(l, "points", c.llt.points);

    validate(c);
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    try {
        return parse_config(toml::parse(text));
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("TOML: ") + std::string(e.description()));
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_string(ss.str());
}

// Resolved configuration, as embedded in every output.  Thread count and
// output directory are run options and stay out of it.
inline Json config_json(const ExperimentConfig& c) {
    Json j;
    j["seed"] = c.seed;
    j["N"] = c.N;
    j["Ns"] = c.Ns;
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["l0"] = c.l0;
    j["epsilon"] = c.epsilon;
    j["method"] = c.method;
    j["replicas"] = c.replicas;
    j["spins"] = c.spins;
    j["spin_values"] = c.spin_values;
    j["boundary"] = {{"kind", c.boundary.kind},
                     {"replica", c.boundary.replica},
                     {"strip", c.boundary.strip},
                     {"values", c.boundary.values}};
    j["mc"] = {{"sweeps", c.mc.sweeps}, {"burn_in", c.mc.burn_in}, {"thin", c.mc.thin}, {"batches", c.mc.batches}};
    j["caps"] = {{"enumeration_sites", c.caps.enumeration_sites},
                 {"transfer_width", c.caps.transfer_width},
                 {"cluster_size", c.caps.cluster_size},
                 {"contour_length", c.caps.contour_length}};
    j["frequency"] = {{"experiment", c.frequency.experiment},
                      {"center", c.frequency.center},
                      {"epsilon", c.frequency.epsilon},
                      {"N_max", c.frequency.N_max}};
    j["llt"] = {{"n", c.llt.n}, {"delta_exponent", c.llt.delta_exponent}, {"tau", c.llt.tau}, {"a", c.llt.a},
                {"b", c.llt.b},  {"slack", c.llt.slack},                   {"points", c.llt.points}};
    return j;
}

// FNV-1a 64 of the compact resolved config.
inline std::string config_hash(const ExperimentConfig& c) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config_json(c).dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

// %.17g round-trips; non-finite values are spelled out.
inline std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline Json num(double x) {
    if (std::isfinite(x)) return x;
    return fmt_double(x);
}

inline Json document(const ExperimentConfig& c, const std::string& command) {
    Json j;
    j["command"] = command;
    j["config_hash"] = config_hash(c);
    j["config"] = config_json(c);
    return j;
}

inline void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& hash, const std::vector<std::string>& columns)
        : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path);
        out_ << "# config_hash=" << hash << '\n';
        row(columns);
    }
    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Domain objects.

inline Json boundary_json(const BoundaryCondition& eta) {
    Json a = Json::array();
    for (auto x : eta.eta) a.push_back(static_cast<int>(x));
    return a;
}

inline BoundaryCondition boundary_from_json(const Json& a, const Volume& v) {
    if (!a.is_array()) throw ConfigError("boundary condition must be an array");
    BoundaryCondition eta;
    for (auto& x : a) {
        if (!x.is_number_integer()) throw ConfigError("boundary spins must be integers");
        eta.eta.push_back(static_cast<int8_t>(x.get<int>()));
    }
    try {
        check_domain(eta, v);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return eta;
}

inline Json spins_json(const SpinConfig& s) {
    Json a = Json::array();
    for (auto x : s.s) a.push_back(static_cast<int>(x));
    return a;
}

inline BoundaryCondition boundary_from_config(const ExperimentConfig& c, const Volume& v) {
    const auto& b = c.boundary;
    if (b.kind == "plus") return BoundaryCondition(v, 1);
    if (b.kind == "minus") return BoundaryCondition(v, -1);
    if (b.kind == "dobrushin") return dobrushin_boundary(v);
    if (b.kind == "random") return RandomBCEnsemble{c.seed}.sample(v, b.replica);
    if (b.kind == "strip") {
        if (b.strip < 0 || b.strip > v.side()) throw ConfigError("boundary.strip exceeds the wall");
        return unbalanced_strip_eta(v, b.strip);
    }
    Json a = Json::array();
    for (int x : b.values) a.push_back(x);
    return boundary_from_json(a, v);
}

inline const char* class_name(ContourClass c) {
    switch (c) {
        case ContourClass::Bulk: return "bulk";
        case ContourClass::SimpleSmall: return "small";
        case ContourClass::CornerSmall: return "corner_small";
        case ContourClass::LargeBoundary: return "large";
    }
    return "?";
}

inline Json dual_bond_json(const DualBond& d) { return Json::array({d.a.X, d.a.Y, d.b.X, d.b.Y}); }

// Dual bonds in doubled coordinates, one pre-contour at a time in curve order.
inline Json contour_json(const Contour& c, const Volume& v) {
    Json j;
    j["class"] = class_name(c.cls);
    j["length"] = c.length();
    Json pres = Json::array();
    for (auto& g : c.pre) {
        Json bonds = Json::array();
        for (int b : g.bonds) bonds.push_back(dual_bond_json(v.dual_bond(b)));
        pres.push_back({{"closed", g.closed}, {"bonds", bonds}});
    }
    j["precontours"] = pres;
    j["boundary"] = c.boundary;
    j["boundary_minus"] = c.boundary_minus;
    j["corners"] = c.corners;
    return j;
}

inline Json margin_json(const Margin& m) {
    return {{"name", m.name}, {"lhs", num(m.lhs)},     {"rhs", num(m.rhs)},
            {"margin", num(m.margin())}, {"ok", m.ok()}, {"cases", m.cases}, {"worst", m.worst}};
}

// Every term is labelled by its slot in the expansion
// log Z = -E(∅) + Σφ_0 + Σ_n Σψ_n + Σ_n Σ_α log Ẑ_{n,α} + Σ_i log Ẑ_{∞,i} + Σψ_∞.
inline Json report_json(const ExpansionReport& r) {
    Json j;
    j["sign"] = r.sign;
    j["levels"] = r.levels;
    j["unbalanced"] = r.unbalanced;
    Json terms = Json::array();
    terms.push_back({{"slot", "vacuum"}, {"value", num(r.vacuum)}});
    terms.push_back({{"slot", "phi_0"}, {"value", num(r.phi0_total)}});
    for (size_t n = 0; n < r.psi.size(); ++n)
        terms.push_back({{"slot", "psi_" + std::to_string(n + 1)}, {"value", num(r.psi[n])}});
    for (auto& a : r.aggregates) {
        Json t;
        t["slot"] = a.order == 0 ? "log_zhat_corner" : "log_zhat_" + std::to_string(a.order);
        t["value"] = num(a.log_zhat);
        if (a.order == 0) t["corner"] = a.corner;
        t["contours"] = a.contours.size();
        t["boundary_size"] = a.boundary_size;
        t["hull_length"] = a.hull_length;
        t["flagged"] = a.flagged;
        terms.push_back(t);
    }
    terms.push_back({{"slot", "psi_infty"}, {"value", num(r.psi_infty)}});
    j["terms"] = terms;
    j["total"] = num(r.total());
    j["flags"] = r.flags;
    j["truncated"] = r.truncated;
    j["residual_bound"] = num(r.residual_bound);
    j["corner"] = {{"collar_bonds", r.corner_collar.size()},
                   {"field_corner", num(r.field_corner)},
                   {"phi0_corner", num(r.phi0_corner)}};
    return j;
}

inline Json schedule_json(const ScaleSchedule& s) {
    Json l = Json::array(), L = Json::array();
    for (double x : s.l) l.push_back(num(x));
    for (size_t n = 1; n < s.L.size(); ++n) L.push_back(num(s.L[n]));
    return {{"l0", s.l0}, {"epsilon", s.epsilon}, {"l", l}, {"L", L}, {"l_infty", num(s.l_infty)}, {"levels", s.levels()}};
}

inline Json aggregate_json(const Aggregate& a) {
    return {{"order", a.order},         {"corner", a.corner},           {"members", a.members},
            {"boundary", a.boundary},   {"hull_length", a.hull_length}, {"domain_size", a.domain.size()},
            {"flagged", a.flagged}};
}

// {"polymers": n, "edges": [[x, y], ...], "weights": [w | [re, im], ...]}
inline PolymerSystem polymer_system_from_json(const Json& j) {
    try {
        int n = j.at("polymers").get<int>();
        std::vector<std::pair<int, int>> edges;
        for (auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("edges must be pairs");
            edges.emplace_back(e[0].get<int>(), e[1].get<int>());
        }
        std::vector<Complex> z;
        for (auto& w : j.at("weights")) {
            if (w.is_array()) {
                if (w.size() != 2) throw ConfigError("complex weights are [re, im]");
                z.emplace_back(w[0].get<double>(), w[1].get<double>());
            } else {
                z.emplace_back(w.get<double>());
            }
        }
        return PolymerSystem::polymer_model(n, edges, std::move(z));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("polymer system JSON: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("polymer system JSON: ") + e.what());
    }
}

inline Json polymer_system_json(const PolymerSystem& s) {
    Json j;
    j["polymers"] = s.size();
    Json edges = Json::array(), w = Json::array();
    for (int x = 0; x < s.size(); ++x) {
        for (int y = x + 1; y < s.size(); ++y)
            if (s.incompatible(x, y)) edges.push_back({x, y});
        w.push_back({s.activity(x).real(), s.activity(x).imag()});
    }
    j["edges"] = edges;
    j["weights"] = w;
    return j;
}

}  // namespace rbising

#endif
