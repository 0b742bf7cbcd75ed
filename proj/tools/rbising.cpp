// rbising: experiment driver.  Every subcommand writes <out-dir>/<name>.json
// (plus a CSV for the per-replica experiments) with the resolved config and
// its hash embedded.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rbising/io.hpp"

namespace fs = std::filesystem;
using namespace rbising;

namespace {

struct Run {
    ExperimentConfig cfg;
    int threads = 1;
    std::string out_dir = ".";
    std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

CouplingParams coupling(const ExperimentConfig& c) { return {c.beta, c.lambda}; }

MetropolisOptions mc_options(const ExperimentConfig& c, uint64_t replica, int start) {
    MetropolisOptions o;
    o.seed = c.seed;
    o.replica = replica;
    o.sweeps = c.mc.sweeps;
    o.burn_in = c.mc.burn_in;
    o.thin = c.mc.thin;
    o.start = start;
    return o;
}

SpinConfig last_sample(const Volume& v, const BoundaryCondition& eta, const ExperimentConfig& c) {
    SpinConfig last;
    metropolis_sampler(v, eta, coupling(c), mc_options(c, c.boundary.replica, lower_energy_start(eta)),
                       [&](long, const SpinConfig& s) { last = s; });
    return last;
}

SpinConfig configured_spins(const Volume& v, const BoundaryCondition& eta, const ExperimentConfig& c) {
    if (c.spins == "plus") return SpinConfig(v, 1);
    if (c.spins == "explicit") {
        SpinConfig s;
        for (int x : c.spin_values) s.s.push_back(static_cast<int8_t>(x));
        try {
            check_domain(s, v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        return s;
    }
    return last_sample(v, eta, c);
}

void check_length_cap(const std::vector<Contour>& cs, const ExperimentConfig& c) {
    for (auto& g : cs)
        if (g.length() > c.caps.contour_length) throw CapExceeded("contour longer than caps.contour_length");
}

// ---------------------------------------------------------------------------

void cmd_simulate(const Run& r) {
    const auto& c = r.cfg;
    Volume v(c.N);
    auto eta = boundary_from_config(c, v);
    auto p = coupling(c);
    Json j = document(c, "simulate");
    j["boundary_condition"] = boundary_json(eta);
    if (c.method == "exact") {
        bool enumerable = v.num_sites() <= c.caps.enumeration_sites;
        bool transfer = v.side() <= c.caps.transfer_width;
        if (!enumerable && !transfer) throw CapExceeded("volume exceeds both the enumeration and transfer caps");
        Json e;
        if (enumerable) {
            e["log_z"] = num(exact_partition(v, eta, p));
            auto cz = constrained_logZ(v, eta, p);
            e["log_z_plus"] = num(cz.plus);
            e["log_z_minus"] = num(cz.minus);
        }
        if (transfer) {
            e["log_z_transfer"] = num(transfer_matrix_logZ(v, eta, p, TransferOptions{c.caps.transfer_width, {}}));
            e["center_plus_probability"] = num(transfer_matrix_plus_probability(v, eta, p, v.site_index(0, 0),
                                                                                 c.caps.transfer_width));
        }
        j["exact"] = e;
    } else {
        double mag = 0, center = 0, energy = 0;
        long n = 0;
        SpinConfig last;
        const int mid = v.site_index(0, 0);
        metropolis_sampler(v, eta, p, mc_options(c, c.boundary.replica, lower_energy_start(eta)),
                           [&](long, const SpinConfig& s) {
                               long m = 0;
                               for (auto x : s.s) m += x;
                               mag += static_cast<double>(m) / v.num_sites();
                               center += s[mid] > 0;
                               energy += hamiltonian(s, eta, v, p);
                               last = s;
                               ++n;
                           });
        j["mc"] = {{"samples", n},
                   {"magnetization", num(mag / n)},
                   {"center_plus_fraction", num(center / n)},
                   {"energy", num(energy / n)},
                   {"last_sample", spins_json(last)}};
    }
    write_json(r.path("simulate.json"), j);
}

void cmd_contours(const Run& r) {
    const auto& c = r.cfg;
    Volume v(c.N);
    auto eta = boundary_from_config(c, v);
    SpinConfig s = configured_spins(v, eta, c);
    auto cs = extract_contours(s, v);
    check_length_cap(cs, c);
    Json j = document(c, "contours");
    j["spins"] = spins_json(s);
    j["exterior_sign"] = constrained_split(s, v);
    j["interface"] = detect_interface(s, v);
    Json arr = Json::array();
    for (auto& g : cs) {
        Json x = contour_json(g, v);
        x["log_weight"] = num(contour_log_weight(g, eta, coupling(c)));
        arr.push_back(x);
    }
    j["contours"] = arr;
    write_json(r.path("contours.json"), j);
}

void cmd_expand(const Run& r) {
    const auto& c = r.cfg;
    if (c.N > 2) throw CapExceeded("the exhaustive expansion needs N <= 2");
    Volume v(c.N);
    auto eta = boundary_from_config(c, v);
    auto p = coupling(c);
    const auto& cat = catalog_for(v);
    auto s = build_schedule(c.l0, c.epsilon, c.N);
    CatalogExpansion ce(cat, s);
    auto cz = constrained_logZ(cat, eta, p);
    Json j = document(c, "expand");
    j["boundary_condition"] = boundary_json(eta);
    j["schedule"] = schedule_json(s);
    Json reps = Json::array();
    for (int sign : {1, -1}) {
        Json x = report_json(ce.expand(eta, p, sign));
        x["log_z_exact"] = num(sign > 0 ? cz.plus : cz.minus);
        reps.push_back(x);
    }
    j["reports"] = reps;
    write_json(r.path("expand.json"), j);
}

void cmd_aggregates(const Run& r) {
    const auto& c = r.cfg;
    Volume v(c.N);
    auto eta = boundary_from_config(c, v);
    auto s = build_schedule(c.l0, c.epsilon, c.N);
    Json j = document(c, "aggregates");
    j["boundary_condition"] = boundary_json(eta);
    j["schedule"] = schedule_json(s);
    AggregateDecomposition dec;
    Json unb = Json::array();
    if (c.N <= 2) {
        // every unbalanced contour of the volume
        j["mode"] = "catalog";
        CatalogExpansion ce(catalog_for(v), s);
        auto ids = ce.unbalanced(eta);
        for (auto id : ids) unb.push_back(id);
        dec = ce.aggregates(ids);
    } else {
        // the unbalanced contours of one configuration
        j["mode"] = "configuration";
        SpinConfig sp = configured_spins(v, eta, c);
        auto cs = extract_contours(sp, v);
        check_length_cap(cs, c);
        std::vector<Contour> u;
        for (auto& g : cs)
            if (!g.is_bulk() && !is_balanced(g, eta, c.l0)) u.push_back(g);
        for (auto& g : u) unb.push_back(contour_json(g, v));
        j["spins"] = spins_json(sp);
        dec = decompose_aggregates(u, s, v);
    }
    j["unbalanced"] = unb;
    Json aggs = Json::array();
    for (auto& a : dec.aggregates) aggs.push_back(aggregate_json(a));
    j["aggregates"] = aggs;
    j["flagged"] = dec.flagged;
    write_json(r.path("aggregates.json"), j);
}

void cmd_freeenergy(const Run& r) {
    const auto& c = r.cfg;
    auto p = coupling(c);
    RandomBCEnsemble ens{c.seed};
    Json j = document(c, "freeenergy");
    CsvWriter csv(r.path("freeenergy.csv"), config_hash(c),
                  {"N", "replica", "method", "F", "error", "antisymmetry", "F_tilde", "F_hat"});
    Json per_n = Json::array();
    for (int N : c.Ns) {
        Volume v(N);
        const bool exact = c.method == "exact";
        if (exact && v.num_sites() > c.caps.enumeration_sites) throw CapExceeded("exact free energy needs |Λ| <= caps");
        struct Row {
            FreeEnergySample s;
            double anti = 0, tilde = 0, hat = 0;
        };
        std::vector<Row> rows(c.replicas);
        std::unique_ptr<CatalogExpansion> ce;
        ScaleSchedule sch = build_schedule(c.l0, c.epsilon, N);
        if (exact) ce = std::make_unique<CatalogExpansion>(catalog_for(v), sch);
        parallel_for(c.replicas, r.threads, [&](int i) {
            auto eta = ens.sample(v, i);
            Row& row = rows[i];
            if (exact) {
                row.s = free_energy_exact(v, eta, p);
                row.s.replica = i;
                row.anti = row.s.value + free_energy_exact(v, eta.flipped(), p).value;
                auto split = corner_split(ce->expand(eta, p, 1), ce->expand(eta.flipped(), p, 1));
                row.tilde = split.F_tilde;
                row.hat = split.F_hat;
            } else {
                row.s = free_energy_mc(v, eta, p, mc_options(c, i, lower_energy_start(eta)), c.mc.batches);
            }
        });
        std::vector<double> vals;
        double worst_anti = 0;
        for (auto& row : rows) {
            csv.row({std::to_string(N), std::to_string(row.s.replica), row.s.method, fmt_double(row.s.value),
                     fmt_double(row.s.error), fmt_double(row.anti), fmt_double(row.tilde), fmt_double(row.hat)});
            if (std::isfinite(row.s.value)) vals.push_back(row.s.value);
            worst_anti = std::max(worst_anti, std::abs(row.anti));
        }
        double mean = 0, var = 0;
        for (double x : vals) mean += x;
        if (!vals.empty()) mean /= static_cast<double>(vals.size());
        for (double x : vals) var += (x - mean) * (x - mean);
        if (vals.size() > 1) var /= static_cast<double>(vals.size() - 1);
        auto w = wilcoxon_signed_rank(vals);
        per_n.push_back({{"N", N},
                         {"finite", vals.size()},
                         {"mean", num(mean)},
                         {"variance", num(var)},
                         {"max_antisymmetry", num(worst_anti)},
                         {"symmetry_p_value", num(w.p_value)}});
    }
    j["summary"] = per_n;
    write_json(r.path("freeenergy.json"), j);
}

void cmd_frequency(const Run& r) {
    const auto& c = r.cfg;
    Json j = document(c, "frequency");
    const auto& f = c.frequency;
    j["experiment"] = f.experiment;
    if (f.experiment == "metastate") {
        FrequencyOptions o{c.beta, c.lambda, f.epsilon, f.N_max, c.replicas, c.seed, c.caps.transfer_width, r.threads};
        auto res = empirical_frequency(o, f.center == "plus" ? BallCenter::PlusProxy : BallCenter::MinusProxy);
        CsvWriter csv(r.path("frequency.csv"), config_hash(c), {"N", "replica", "marginal", "Q"});
        Json finals = Json::array();
        for (auto& cv : res.curves) {
            for (size_t k = 0; k < cv.Q.size(); ++k)
                csv.row({std::to_string(k + 1), std::to_string(cv.replica), fmt_double(cv.marginal[k]), fmt_double(cv.Q[k])});
            finals.push_back(num(cv.Q.back()));
        }
        j["proxy_plus"] = num(res.proxy_plus);
        j["proxy_minus"] = num(res.proxy_minus);
        j["final_Q"] = finals;
        j["abstentions"] = res.abstentions;
    } else if (f.experiment == "basic_est") {
        BasicEstOptions o{c.beta, c.lambda, f.epsilon, c.Ns, c.replicas, c.seed, c.caps.transfer_width, r.threads};
        auto res = basic_est_experiment(o);
        CsvWriter csv(r.path("frequency.csv"), config_hash(c), {"N", "replica", "distance", "far"});
        Json rows = Json::array();
        for (size_t i = 0; i < res.rows.size(); ++i) {
            auto& row = res.rows[i];
            for (size_t k = 0; k < res.distance[i].size(); ++k)
                csv.row({std::to_string(row.N), std::to_string(k), fmt_double(res.distance[i][k]),
                         res.distance[i][k] >= f.epsilon ? "1" : "0"});
            rows.push_back({{"N", row.N},
                            {"replicas", row.replicas},
                            {"far", row.far},
                            {"p_hat", num(row.p_hat)},
                            {"ci", {num(row.ci.lo), num(row.ci.hi)}},
                            {"reference", num(row.reference)}});
        }
        j["proxy_plus"] = num(res.proxy_plus);
        j["proxy_minus"] = num(res.proxy_minus);
        j["rows"] = rows;
        j["trend"] = {{"spearman_rho", num(res.trend.statistic)},
                      {"p_value", num(res.trend.p_value)},
                      {"pointwise_nonincreasing", res.nonincreasing},
                      {"decreasing", res.trend_ok()}};
    } else {
        InterfaceOptions o;
        o.beta = c.beta;
        o.lambda = c.lambda;
        o.Ns = c.Ns;
        o.replicas = c.replicas;
        o.sweeps = c.mc.sweeps;
        o.burn_in = c.mc.burn_in;
        o.seed = c.seed;
        o.threads = r.threads;
        auto res = interface_experiment(o);
        CsvWriter csv(r.path("frequency.csv"), config_hash(c), {"N", "replica", "interface_probability"});
        Json rows = Json::array();
        for (auto& row : res.rows) {
            for (size_t k = 0; k < row.estimate.size(); ++k)
                csv.row({std::to_string(row.N), std::to_string(k), fmt_double(row.estimate[k])});
            rows.push_back({{"N", row.N}, {"median", num(row.median)}, {"dobrushin", num(row.dobrushin)}});
        }
        j["rows"] = rows;
        j["trend"] = {{"spearman_rho", num(res.trend.statistic)},
                      {"p_value", num(res.trend.p_value)},
                      {"medians_nonincreasing", res.nonincreasing},
                      {"decreasing", res.trend_ok()},
                      {"control_ok", res.control_ok()}};
    }
    write_json(r.path("frequency.json"), j);
}

void cmd_lltcheck(const Run& r) {
    const auto& c = r.cfg;
    const auto& l = c.llt;
    auto f = rademacher_fixture(l.n, l.delta_exponent, l.tau, l.a, l.b, l.points);
    auto rep = llt_bound(f.input, f.probability, l.slack);
    Json j = document(c, "lltcheck");
    j["A"] = num(f.input.A);
    j["delta"] = num(f.input.delta);
    j["probability"] = num(f.probability);
    j["premise_i"] = {{"value", num(rep.premise_i)}, {"bound", num(2 * M_PI)}, {"ok", rep.premise_i_ok}};
    j["premise_ii"] = {{"value", num(rep.premise_ii)}, {"ok", rep.premise_ii_ok}};
    j["conclusion"] = {{"value", num(rep.conclusion)}, {"bound", num(rep.conclusion_rhs)}, {"ok", rep.conclusion_ok}};
    j["verdict"] = rep.verdict();
    write_json(r.path("lltcheck.json"), j);
}

// Shipped fixture suite.
void cmd_validate(const Run& r) {
    Json j = document(r.cfg, "validate");
    Json arr = Json::array();
    bool all = true;
    for (auto& m : validation_suite(coupling(r.cfg))) {
        arr.push_back(margin_json(m));
        all = all && m.ok();
    }
    j["margins"] = arr;
    j["all_nonnegative"] = all;
    write_json(r.path("validate.json"), j);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ising model with random boundary conditions: exact oracles, expansions and experiments"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path, out_dir = ".";
    int64_t seed = -1;
    int threads = 1;
    bool exact = false;
    app.add_option("--config", config_path, "TOML experiment config");
    app.add_option("--seed", seed, "master seed, overrides the config");
    app.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 256));
    app.add_option("--out-dir", out_dir, "output directory");
    const std::vector<std::pair<std::string, void (*)(const Run&)>> cmds{
        {"simulate", cmd_simulate},     {"contours", cmd_contours},   {"expand", cmd_expand},
        {"aggregates", cmd_aggregates}, {"freeenergy", cmd_freeenergy}, {"frequency", cmd_frequency},
        {"lltcheck", cmd_lltcheck},     {"validate", cmd_validate}};
    std::vector<CLI::App*> subs;
    for (auto& [name, fn] : cmds) subs.push_back(app.add_subcommand(name));
    subs[0]->add_flag("--exact", exact, "force exact evaluation");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    try {
        Run run;
        run.cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed >= 0) run.cfg.seed = static_cast<uint64_t>(seed);
        if (exact) run.cfg.method = "exact";
        validate(run.cfg);
        run.threads = threads;
        run.out_dir = out_dir;
        fs::create_directories(out_dir);
        for (size_t i = 0; i < cmds.size(); ++i)
            if (subs[i]->parsed()) cmds[i].second(run);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const CapExceeded& e) {
        std::cerr << "cap exceeded: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
