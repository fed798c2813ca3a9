#include "cpsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "cpsim/dynamics.hpp"
#include "cpsim/rng.hpp"

namespace cpsim {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::meanfield: return "meanfield";
        case Mode::simulate: return "simulate";
        case Mode::sweep: return "sweep";
        case Mode::graphical_check: return "graphical-check";
        case Mode::theory_check: return "theory-check";
        case Mode::quasistationary: return "quasistationary";
    }
    return "?";
}

Mode mode_from_string(const std::string& s) {
    if (s == "meanfield") return Mode::meanfield;
    if (s == "simulate") return Mode::simulate;
    if (s == "sweep") return Mode::sweep;
    if (s == "graphical-check") return Mode::graphical_check;
    if (s == "theory-check") return Mode::theory_check;
    if (s == "quasistationary") return Mode::quasistationary;
    throw std::invalid_argument("unknown mode: " + s);
}

double TMaxRule::evaluate(int n) const {
    switch (kind) {
        case Kind::fixed: return T;
        case Kind::log_multiple: return c * std::log(static_cast<double>(n));
        case Kind::exp_cap: return std::min(std::exp(c * n), T_cap);
    }
    return 0;
}

std::vector<int> InitRule::make(int n) const {
    switch (kind) {
        case Kind::full: return init_full(n);
        case Kind::single: return init_single();
        case Kind::fraction: return init_fraction(n, fraction);
    }
    return {};
}

InitRule InitRule::parse(const std::string& text) {
    InitRule rule;
    if (text == "full") {
        rule.kind = Kind::full;
    } else if (text == "single") {
        rule.kind = Kind::single;
    } else if (text.rfind("fraction:", 0) == 0) {
        rule.kind = Kind::fraction;
        rule.fraction = std::stod(text.substr(9));
        if (rule.fraction < 0 || rule.fraction > 1)
            throw std::invalid_argument("init fraction outside [0,1]");
    } else {
        throw std::invalid_argument("unknown init rule: " + text);
    }
    return rule;
}

std::string InitRule::text() const {
    switch (kind) {
        case Kind::full: return "full";
        case Kind::single: return "single";
        case Kind::fraction: {
            std::ostringstream os;
            os << "fraction:" << fraction;
            return os.str();
        }
    }
    return "?";
}

namespace {

void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                         const std::string& path) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.contains(key))
            throw std::invalid_argument("config: unknown key " + path + "." + key);
}

TMaxRule parse_t_max_rule(const nlohmann::json& j) {
    TMaxRule rule;
    const std::string type = j.at("type").get<std::string>();
    if (type == "fixed") {
        reject_unknown_keys(j, {"type", "T"}, "$.t_max_rule");
        rule.kind = TMaxRule::Kind::fixed;
        rule.T = j.at("T").get<double>();
        if (!(rule.T > 0)) throw std::invalid_argument("config: $.t_max_rule.T must be positive");
    } else if (type == "log-multiple") {
        reject_unknown_keys(j, {"type", "c"}, "$.t_max_rule");
        rule.kind = TMaxRule::Kind::log_multiple;
        rule.c = j.at("c").get<double>();
        if (!(rule.c > 0)) throw std::invalid_argument("config: $.t_max_rule.c must be positive");
    } else if (type == "exp-cap") {
        reject_unknown_keys(j, {"type", "c", "T_cap"}, "$.t_max_rule");
        rule.kind = TMaxRule::Kind::exp_cap;
        rule.c = j.at("c").get<double>();
        rule.T_cap = j.at("T_cap").get<double>();
        if (!(rule.c > 0 && rule.T_cap > 0))
            throw std::invalid_argument("config: $.t_max_rule requires positive c and T_cap");
    } else {
        throw std::invalid_argument("config: unknown $.t_max_rule.type " + type);
    }
    return rule;
}

nlohmann::json serialize_t_max_rule(const TMaxRule& rule) {
    switch (rule.kind) {
        case TMaxRule::Kind::fixed: return {{"type", "fixed"}, {"T", rule.T}};
        case TMaxRule::Kind::log_multiple: return {{"type", "log-multiple"}, {"c", rule.c}};
        case TMaxRule::Kind::exp_cap:
            return {{"type", "exp-cap"}, {"c", rule.c}, {"T_cap", rule.T_cap}};
    }
    return {};
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("config: document must be a JSON object");
    reject_unknown_keys(doc,
                        {"mode", "rho_spec", "xi_spec", "lambda_grid", "n_grid", "replicas",
                         "t_max_rule", "master_seed", "env_mode", "env_seeds", "init",
                         "sample_every", "out"},
                        "$");
    ExperimentConfig cfg;
    cfg.mode = mode_from_string(doc.at("mode").get<std::string>());
    cfg.rho_spec = doc.at("rho_spec").get<DistSpec>();
    cfg.xi_spec = doc.at("xi_spec").get<DistSpec>();
    if (auto err = validate_spec(cfg.rho_spec))
        throw std::invalid_argument("config: $.rho_spec: " + *err);
    if (auto err = validate_spec(cfg.xi_spec))
        throw std::invalid_argument("config: $.xi_spec: " + *err);

    cfg.lambda_grid = doc.at("lambda_grid").get<std::vector<double>>();
    if (cfg.lambda_grid.empty()) throw std::invalid_argument("config: $.lambda_grid: empty grid");
    if (!std::is_sorted(cfg.lambda_grid.begin(), cfg.lambda_grid.end()))
        throw std::invalid_argument("config: $.lambda_grid: not sorted");
    cfg.n_grid = doc.at("n_grid").get<std::vector<int>>();
    if (cfg.n_grid.empty()) throw std::invalid_argument("config: $.n_grid: empty grid");
    if (!std::is_sorted(cfg.n_grid.begin(), cfg.n_grid.end()))
        throw std::invalid_argument("config: $.n_grid: not sorted");
    for (int n : cfg.n_grid)
        if (n < 1) throw std::invalid_argument("config: $.n_grid: n must be >= 1");

    cfg.replicas = doc.at("replicas").get<int>();
    if (cfg.replicas < 1) throw std::invalid_argument("config: $.replicas must be >= 1");
    cfg.t_max_rule = parse_t_max_rule(doc.at("t_max_rule"));
    cfg.master_seed = doc.at("master_seed").get<std::uint64_t>();
    cfg.env_mode = env_mode_from_string(doc.value("env_mode", "iid"));
    cfg.env_seeds = doc.value("env_seeds", 1);
    if (cfg.env_seeds < 1) throw std::invalid_argument("config: $.env_seeds must be >= 1");
    cfg.init = InitRule::parse(doc.value("init", "full"));
    if (doc.contains("sample_every") && !doc.at("sample_every").is_null()) {
        cfg.sample_every = doc.at("sample_every").get<double>();
        if (!(*cfg.sample_every > 0))
            throw std::invalid_argument("config: $.sample_every must be positive");
    }
    cfg.out = doc.value("out", "");
    return cfg;
}

nlohmann::json serialize_config(const ExperimentConfig& cfg) {
    nlohmann::json doc;
    doc["mode"] = to_string(cfg.mode);
    doc["rho_spec"] = cfg.rho_spec;
    doc["xi_spec"] = cfg.xi_spec;
    doc["lambda_grid"] = cfg.lambda_grid;
    doc["n_grid"] = cfg.n_grid;
    doc["replicas"] = cfg.replicas;
    doc["t_max_rule"] = serialize_t_max_rule(cfg.t_max_rule);
    doc["master_seed"] = cfg.master_seed;
    doc["env_mode"] = to_string(cfg.env_mode);
    doc["env_seeds"] = cfg.env_seeds;
    doc["init"] = cfg.init.text();
    if (cfg.sample_every) doc["sample_every"] = *cfg.sample_every;
    if (!cfg.out.empty()) doc["out"] = cfg.out;
    return doc;
}

void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || count <= 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, int threads) {
    const std::int64_t n_cells = static_cast<std::int64_t>(cfg.n_grid.size()) *
                                 static_cast<std::int64_t>(cfg.lambda_grid.size()) *
                                 cfg.env_seeds * cfg.replicas;
    std::vector<SweepRow> rows(static_cast<std::size_t>(n_cells));

    // Environments are shared across lambda and replicas: one per (n, env index).
    std::vector<Environment> envs;
    envs.reserve(cfg.n_grid.size() * static_cast<std::size_t>(cfg.env_seeds));
    for (int n : cfg.n_grid)
        for (int e = 0; e < cfg.env_seeds; ++e)
            envs.push_back(Environment::sample(
                cfg.rho_spec, cfg.xi_spec, n,
                derive_seed(cfg.master_seed, StreamDomain::environment,
                            static_cast<std::uint64_t>(e)),
                cfg.env_mode));

    const std::size_t L = cfg.lambda_grid.size();
    const auto E = static_cast<std::size_t>(cfg.env_seeds);
    const auto R = static_cast<std::size_t>(cfg.replicas);

    parallel_for(n_cells, threads, [&](std::int64_t flat) {
        auto idx = static_cast<std::size_t>(flat);
        const std::size_t r = idx % R;
        idx /= R;
        const std::size_t e = idx % E;
        idx /= E;
        const std::size_t l = idx % L;
        const std::size_t ni = idx / L;

        const int n = cfg.n_grid[ni];
        const double lambda = cfg.lambda_grid[l];
        const Environment& env = envs[ni * E + e];
        const double t_max = cfg.t_max_rule.evaluate(n);
        const std::uint64_t replica_seed = derive_seed(cfg.master_seed, StreamDomain::replica,
                                                       static_cast<std::uint64_t>(flat));
        const Outcome outcome =
            run(env, lambda, cfg.init.make(n), t_max, replica_seed, cfg.sample_every);

        SweepRow& row = rows[static_cast<std::size_t>(flat)];
        row.n = n;
        row.lambda = lambda;
        row.env_seed = env.env_seed();
        row.replica = static_cast<int>(r);
        row.replica_seed = replica_seed;
        row.extinction_time = outcome.extinction_time;
        row.capped_at = outcome.capped_at;
        row.event_count = outcome.event_count;
        row.final_count = outcome.final_count;
    });
    return rows;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << "# cpsim-schema v1\n";
    os << "n,lambda,env_seed,replica,replica_seed,extinction_time,capped_at,event_count,"
          "final_count\n";
    for (const SweepRow& row : rows) {
        os << row.n << ',' << format_double(row.lambda) << ',' << row.env_seed << ','
           << row.replica << ',' << row.replica_seed << ','
           << (row.extinction_time ? format_double(*row.extinction_time) : "") << ','
           << (row.capped_at ? format_double(*row.capped_at) : "") << ',' << row.event_count
           << ',' << row.final_count << '\n';
    }
}

LinearFit fit_scaling(std::span<const SweepRow> rows, Regime regime) {
    std::map<int, std::vector<double>> by_n;
    std::vector<std::string> capped_cells;
    for (const SweepRow& row : rows) {
        if (row.capped_at) {
            std::ostringstream cell;
            cell << "(n=" << row.n << ", lambda=" << row.lambda << ", replica=" << row.replica
                 << ")";
            capped_cells.push_back(cell.str());
            continue;
        }
        by_n[row.n].push_back(*row.extinction_time);
    }
    if (regime == Regime::supercritical && !capped_cells.empty()) {
        std::ostringstream msg;
        msg << "fit_scaling: capped observations in supercritical fit:";
        for (std::size_t i = 0; i < std::min<std::size_t>(capped_cells.size(), 8); ++i)
            msg << ' ' << capped_cells[i];
        if (capped_cells.size() > 8) msg << " (+" << capped_cells.size() - 8 << " more)";
        throw std::invalid_argument(msg.str());
    }
    if (by_n.size() < 3) throw std::invalid_argument("fit_scaling: need >= 3 sizes");

    std::vector<double> x, y;
    for (const auto& [n, times] : by_n) {
        if (times.empty()) throw std::invalid_argument("fit_scaling: size with no observations");
        if (regime == Regime::subcritical) {
            x.push_back(std::log(static_cast<double>(n)));
            y.push_back(summarize(times).mean);
        } else {
            x.push_back(static_cast<double>(n));
            y.push_back(std::log(median(times)));
        }
    }
    return least_squares(x, y);
}

QuasiStationaryResult quasi_stationary_estimate(const Environment& env, double lambda,
                                                const ClassProfile& profile, double e_rho,
                                                double t_burn, double t_obs, int replicas,
                                                std::uint64_t master_seed,
                                                std::optional<double> occupancy_a, int threads) {
    if (!(t_obs > 0)) throw std::invalid_argument("quasi_stationary: empty observation window");
    if (t_burn < 0 || replicas < 1)
        throw std::invalid_argument("quasi_stationary: bad parameters");

    const std::size_t k = profile.size();
    const int n = env.n();
    const double window_end = t_burn + t_obs;

    struct ReplicaResult {
        bool survived_burn = false;
        bool died_in_window = false;
        double observed = 0;
        std::vector<double> mean_fraction;
        double occupied = 0;
    };
    std::vector<ReplicaResult> results(static_cast<std::size_t>(replicas));

    parallel_for(replicas, threads, [&](std::int64_t r) {
        ReplicaResult& res = results[static_cast<std::size_t>(r)];
        const std::uint64_t seed =
            derive_seed(master_seed, StreamDomain::replica, static_cast<std::uint64_t>(r));
        Simulation sim(env, lambda, init_full(n), seed, &profile);

        std::vector<double> integral(k, 0.0);
        double occupied_time = 0;
        double death_time = -1;

        while (true) {
            const double t0 = sim.time();
            const auto counts = sim.config().class_counts;
            const auto step = sim.step(window_end);
            const double t1 =
                step.status == Simulation::StepStatus::stepped ? sim.time() : window_end;
            const double lo = std::max(t0, t_burn);
            const double hi = std::min(t1, window_end);
            if (hi > lo) {
                for (std::size_t i = 0; i < k; ++i)
                    integral[i] += static_cast<double>(counts[i]) * (hi - lo);
                if (occupancy_a && in_region(counts, profile, n, lambda, e_rho, *occupancy_a))
                    occupied_time += hi - lo;
            }
            if (step.status != Simulation::StepStatus::stepped) break;
            if (sim.config().count == 0) {
                death_time = sim.time();
                break;
            }
        }

        if (death_time >= 0 && death_time <= t_burn) return;  // no surviving mass here
        res.survived_burn = true;
        res.died_in_window = death_time > t_burn;
        const double obs_end = res.died_in_window ? death_time : window_end;
        res.observed = obs_end - t_burn;
        if (res.observed <= 0) {
            res.survived_burn = false;
            return;
        }
        res.mean_fraction.resize(k);
        for (std::size_t i = 0; i < k; ++i)
            res.mean_fraction[i] = integral[i] / res.observed / (profile.q[i] * n);
        res.occupied = occupied_time / res.observed;
    });

    QuasiStationaryResult out;
    out.replicas = replicas;
    std::vector<std::vector<double>> per_class(k);
    std::vector<double> occupancy_values;
    for (const auto& res : results) {
        if (!res.survived_burn) continue;
        ++out.survived_burn;
        if (res.died_in_window) ++out.died_in_window;
        for (std::size_t i = 0; i < k; ++i) per_class[i].push_back(res.mean_fraction[i]);
        occupancy_values.push_back(res.occupied);
    }
    if (out.survived_burn == 0)
        throw std::runtime_error("quasi_stationary: no surviving mass at t_burn");

    out.fraction.resize(k);
    out.se.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const MeanStats stats = summarize(per_class[i]);
        out.fraction[i] = stats.mean;
        out.se[i] = stats.se;
    }
    if (occupancy_a) out.region_occupancy = summarize(occupancy_values).mean;
    return out;
}

}  // namespace cpsim
