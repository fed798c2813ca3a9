// cpsim command line: exact simulation, mean-field solving and the numerical
// check suites behind one executable. Exit codes: 0 pass, 1 failed verdict,
// 2 configuration error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cpsim/dynamics.hpp"
#include "cpsim/graphical.hpp"
#include "cpsim/harness.hpp"
#include "cpsim/meanfield.hpp"
#include "cpsim/theory.hpp"

namespace {

using nlohmann::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

cpsim::DistSpec parse_spec_text(const std::string& text, const char* what) {
    try {
        cpsim::DistSpec spec = json::parse(text).get<cpsim::DistSpec>();
        cpsim::validate_spec_or_throw(spec);
        return spec;
    } catch (const std::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config parse: ") + e.what());
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    return out;
}

struct SpecOptions {
    std::string rho_text = R"({"kind":"constant","values":[1.0],"role":"edge-weight"})";
    std::string xi_text = R"({"kind":"constant","values":[1.0],"role":"recovery-rate"})";

    void attach(CLI::App* cmd) {
        cmd->add_option("--rho", rho_text, "edge-weight law as inline DistSpec JSON");
        cmd->add_option("--xi", xi_text, "recovery-rate law as inline DistSpec JSON");
    }
    cpsim::DistSpec rho() const { return parse_spec_text(rho_text, "--rho"); }
    cpsim::DistSpec xi() const { return parse_spec_text(xi_text, "--xi"); }
};

int cmd_meanfield(const SpecOptions& specs, double lambda, double tol,
                  const std::string& trajectory_out, double f0, double dt, double t_end) {
    const cpsim::DistSpec rho = specs.rho();
    const cpsim::DistSpec xi = specs.xi();
    const cpsim::MeanFieldSolution sol = cpsim::solve_mean_field(lambda, rho, xi, tol);

    json doc;
    doc["lambda"] = sol.lambda;
    doc["lambda_c"] = sol.lambda_c;
    doc["e_rho"] = sol.e_rho;
    doc["x_star"] = sol.x_star ? json(*sol.x_star) : json(nullptr);
    doc["f_star"] = sol.f_star ? json(*sol.f_star) : json(nullptr);
    std::cout << doc.dump(2) << "\n";

    if (!trajectory_out.empty()) {
        const cpsim::ClassProfile profile = cpsim::ClassProfile::from_spec(xi);
        std::vector<double> start(profile.size(), f0);
        const auto traj =
            cpsim::integrate_mean_field(lambda, profile, sol.e_rho, start, dt, t_end);
        auto out = open_out(trajectory_out);
        out << "t";
        for (std::size_t i = 0; i < profile.size(); ++i) out << ",f_" << i + 1;
        out << "\n";
        char buf[40];
        for (std::size_t s = 0; s < traj.times.size(); ++s) {
            std::snprintf(buf, sizeof buf, "%.17g", traj.times[s]);
            out << buf;
            for (double v : traj.f[s]) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            out << "\n";
        }
    }
    return 0;
}

int cmd_simulate(const SpecOptions& specs, int n, double lambda, double t_max, int replicas,
                 std::uint64_t seed, const std::string& init_text,
                 std::optional<double> sample_every, const std::string& out_path,
                 const std::string& env_mode, int threads) {
    cpsim::ExperimentConfig cfg;
    cfg.mode = cpsim::Mode::simulate;
    cfg.rho_spec = specs.rho();
    cfg.xi_spec = specs.xi();
    cfg.lambda_grid = {lambda};
    cfg.n_grid = {n};
    cfg.replicas = replicas;
    cfg.t_max_rule = {cpsim::TMaxRule::Kind::fixed, t_max, 0, 0};
    cfg.master_seed = seed;
    cfg.env_mode = cpsim::env_mode_from_string(env_mode);
    cfg.init = cpsim::InitRule::parse(init_text);
    cfg.sample_every = sample_every;

    const auto rows = cpsim::run_sweep(cfg, threads);
    if (out_path.empty()) {
        cpsim::write_sweep_csv(std::cout, rows);
    } else {
        auto out = open_out(out_path);
        cpsim::write_sweep_csv(out, rows);
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_override, int threads) {
    if (config_path.empty()) throw ConfigError("sweep requires --config");
    const cpsim::ExperimentConfig cfg = cpsim::parse_config(load_config_file(config_path));
    const auto rows = cpsim::run_sweep(cfg, threads);
    const std::string path = out_override.empty() ? cfg.out : out_override;
    if (path.empty()) {
        cpsim::write_sweep_csv(std::cout, rows);
    } else {
        auto out = open_out(path);
        cpsim::write_sweep_csv(out, rows);
    }
    return 0;
}

int cmd_graphical_check(const SpecOptions& specs, int n, double lambda, double horizon,
                        int realizations, int samples, std::uint64_t seed,
                        const std::string& env_mode) {
    const cpsim::Environment env =
        cpsim::Environment::sample(specs.rho(), specs.xi(), n, cpsim::mix64(seed),
                                   cpsim::env_mode_from_string(env_mode));
    bool all_ok = true;
    cpsim::RandomStream pick(cpsim::derive_seed(seed, cpsim::StreamDomain::graphical, 99));

    // Additivity and monotonicity: exact set identities on each realization.
    int additivity_fail = 0, monotonicity_fail = 0;
    for (int r = 0; r < realizations; ++r) {
        const auto real = cpsim::sample_realization(env, lambda, horizon,
                                                    static_cast<std::uint64_t>(r) + seed);
        std::vector<int> a, b;
        for (int v = 0; v < n; ++v) {
            const auto coin = pick.below(3);
            if (coin == 0) a.push_back(v);
            if (coin <= 1) b.push_back(v);  // a subset of b
        }
        const double t = horizon / 2;
        if (!cpsim::check_additivity(real, a, t)) ++additivity_fail;
        const auto ea = cpsim::evolve(real, a, t);
        const auto eb = cpsim::evolve(real, b, t);
        if (!std::includes(eb.begin(), eb.end(), ea.begin(), ea.end())) ++monotonicity_fail;
    }
    std::cout << (additivity_fail == 0 ? "[PASS]" : "[FAIL]") << " additivity: " << additivity_fail
              << "/" << realizations << " violations\n";
    std::cout << (monotonicity_fail == 0 ? "[PASS]" : "[FAIL]") << " monotonicity: "
              << monotonicity_fail << "/" << realizations << " violations\n";
    all_ok = all_ok && additivity_fail == 0 && monotonicity_fail == 0;

    // Distributional coupling of |evolve| against the dynamics count at t.
    const double t_check = horizon / 2;
    const auto init = cpsim::init_full(n);
    std::vector<double> graphical_counts(static_cast<std::size_t>(samples));
    std::vector<double> dynamics_counts(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        const auto real = cpsim::sample_realization(
            env, lambda, t_check, cpsim::derive_seed(seed, cpsim::StreamDomain::graphical,
                                                     static_cast<std::uint64_t>(s)));
        graphical_counts[static_cast<std::size_t>(s)] =
            static_cast<double>(cpsim::evolve(real, init, t_check).size());
        const auto outcome = cpsim::run(env, lambda, init, t_check,
                                        cpsim::derive_seed(seed, cpsim::StreamDomain::replica,
                                                           static_cast<std::uint64_t>(s)));
        dynamics_counts[static_cast<std::size_t>(s)] = outcome.final_count;
    }
    const auto g = cpsim::summarize(graphical_counts);
    const auto d = cpsim::summarize(dynamics_counts);
    const double gap = std::abs(g.mean - d.mean);
    const double combined = std::sqrt(g.se * g.se + d.se * d.se);
    const bool coupled = gap <= 4 * combined;
    std::cout << (coupled ? "[PASS]" : "[FAIL]") << " distributional coupling: |"
              << g.mean << " - " << d.mean << "| = " << gap << " vs 4*se = " << 4 * combined
              << "\n";
    all_ok = all_ok && coupled;
    return all_ok ? 0 : 1;
}

int cmd_theory_check(const SpecOptions& specs, const std::string& lemma, int n, double lambda,
                     double a, double b, double phi, int m, double epsilon, double theta,
                     int walks, int samples, double delta, double horizon,
                     const std::string& out_path, std::uint64_t seed) {
    std::ostringstream csv;
    csv << "lemma,estimate,stderr,bound,verdict\n";
    bool ok = true;

    if (lemma == "4.6") {
        const int m_lo = static_cast<int>(std::ceil(2 * std::log(n)));
        const int m_hi = static_cast<int>(std::ceil(6 * std::log(n)));
        for (int mm : {m_lo, (m_lo + m_hi) / 2, m_hi}) {
            const auto est = cpsim::srw_range_estimate(n, mm, phi, walks, seed);
            const double gap = std::abs(est.value - phi);
            const bool pass = gap < 0.02;
            ok = ok && pass;
            csv << "4.6(m=" << mm << ")," << est.value << ',' << est.se << ',' << phi << ','
                << (pass ? "pass" : "fail") << '\n';
            std::cout << (pass ? "[PASS]" : "[FAIL]") << " lemma 4.6 m=" << mm
                      << ": estimate " << est.value << " vs " << phi << "\n";
        }
    } else if (lemma == "coupon") {
        const auto rep = cpsim::coupon_bound_check(n, m, epsilon, theta, walks, seed);
        ok = rep.holds;
        csv << "coupon," << rep.lhs << ',' << rep.lhs_se << ',' << rep.rhs << ','
            << (rep.holds ? "pass" : "fail") << '\n';
        std::cout << (rep.holds ? "[PASS]" : "[FAIL]") << " coupon bound: LHS " << rep.lhs
                  << " <= RHS " << rep.rhs << " + 3se\n";
    } else if (lemma == "drift") {
        const cpsim::DistSpec xi = specs.xi();
        const cpsim::ClassProfile profile = cpsim::ClassProfile::from_spec(xi);
        const auto bounds = cpsim::theta_bounds(a, b, lambda, profile, specs.rho());
        const cpsim::Environment env = cpsim::Environment::sample(
            specs.rho(), xi, n, cpsim::mix64(seed), cpsim::EnvMode::stratified);
        const auto report = cpsim::empirical_drift_check(env, bounds, samples, seed);
        ok = report.ok();
        for (std::size_t i = 0; i < report.classes.size(); ++i) {
            const auto& cls = report.classes[i];
            csv << "drift(class=" << i << ")," << cls.d_max_over_n << ",0," << cls.alpha_minus
                << ',' << (cls.d_violations == 0 && !cls.violated ? "pass" : "fail") << '\n';
            std::cout << (cls.d_violations == 0 && !cls.violated ? "[PASS]" : "[FAIL]")
                      << " drift class " << i << ": d/n max " << cls.d_max_over_n << " <= alpha- "
                      << cls.alpha_minus << "; bracket [" << cls.bracket_lo << ", "
                      << cls.bracket_hi << "] vs alpha+ " << cls.alpha_plus
                      << (cls.inconclusive ? " (inconclusive)" : "") << "\n";
        }
    } else if (lemma == "walk") {
        const cpsim::DistSpec xi = specs.xi();
        const cpsim::ClassProfile profile = cpsim::ClassProfile::from_spec(xi);
        const auto bounds = cpsim::theta_bounds(a, b, lambda, profile, specs.rho());
        const auto z0 = cpsim::region_floor_point(profile, n, lambda, bounds.e_rho, delta);
        const auto rep =
            cpsim::simulate_dominating_walk(bounds, n, z0, delta, horizon, walks, seed);
        csv << "walk," << rep.outside_probability << ',' << rep.se << ",,"
            << "pass" << '\n';
        std::cout << "[PASS] dominating walk: P(outside at T=" << horizon << ") = "
                  << rep.outside_probability << " +- " << rep.se << "\n";
    } else {
        throw ConfigError("unknown --lemma (use 4.6 | coupon | drift | walk)");
    }

    if (!out_path.empty()) {
        auto out = open_out(out_path);
        out << csv.str();
    }
    return ok ? 0 : 1;
}

int cmd_quasistationary(const SpecOptions& specs, int n, double lambda, double t_burn,
                        double t_obs, int replicas, std::uint64_t seed, int threads) {
    const cpsim::DistSpec rho = specs.rho();
    const cpsim::DistSpec xi = specs.xi();
    const cpsim::ClassProfile profile = cpsim::ClassProfile::from_spec(xi);
    const cpsim::MeanFieldSolution sol = cpsim::solve_mean_field(lambda, rho, xi);
    if (!sol.x_star) throw ConfigError("quasistationary requires lambda > lambda_c");

    const cpsim::Environment env =
        cpsim::Environment::sample(rho, xi, n, cpsim::mix64(seed), cpsim::EnvMode::stratified);
    const auto result = cpsim::quasi_stationary_estimate(env, lambda, profile, sol.e_rho, t_burn,
                                                         t_obs, replicas, seed,
                                                         *sol.x_star / 2, threads);
    json doc;
    doc["lambda"] = lambda;
    doc["lambda_c"] = sol.lambda_c;
    doc["x_star"] = *sol.x_star;
    doc["f_star"] = *sol.f_star;
    doc["fraction"] = result.fraction;
    doc["stderr"] = result.se;
    doc["survived_burn"] = result.survived_burn;
    doc["died_in_window"] = result.died_in_window;
    doc["region_occupancy"] = *result.region_occupancy;
    std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contact process with random recovery rates and edge weights on complete graphs"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string out_path;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--out", out_path, "output path");
    app.add_option("--threads", threads, "worker threads")->capture_default_str();

    SpecOptions specs;

    auto* mf = app.add_subcommand("meanfield", "lambda_c, fixed point and stable proportions");
    double mf_lambda = 2.0, mf_tol = 1e-12, mf_f0 = 0.9, mf_dt = 1e-3, mf_T = 50;
    std::string mf_traj;
    specs.attach(mf);
    mf->add_option("--lambda", mf_lambda, "infection rate")->capture_default_str();
    mf->add_option("--tol", mf_tol, "bisection tolerance")->capture_default_str();
    mf->add_option("--trajectory", mf_traj, "also integrate and write CSV here");
    mf->add_option("--f0", mf_f0, "initial proportion for the trajectory")->capture_default_str();
    mf->add_option("--dt", mf_dt, "integration step")->capture_default_str();
    mf->add_option("--t-max", mf_T, "integration horizon")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "replica runs of the exact chain");
    int sim_n = 100, sim_replicas = 1;
    double sim_lambda = 1.0, sim_t_max = 100.0;
    double sim_sample_every = 0;
    std::string sim_init = "full", sim_env_mode = "iid";
    specs.attach(sim);
    sim->add_option("--n", sim_n, "vertex count")->capture_default_str();
    sim->add_option("--lambda", sim_lambda, "infection rate")->capture_default_str();
    sim->add_option("--t-max", sim_t_max, "horizon")->capture_default_str();
    sim->add_option("--replicas", sim_replicas, "replica count")->capture_default_str();
    sim->add_option("--init", sim_init, "full | single | fraction:x")->capture_default_str();
    sim->add_option("--sample-every", sim_sample_every, "time series grid (0 = off)");
    sim->add_option("--env-mode", sim_env_mode, "iid | stratified")->capture_default_str();

    auto* sweep = app.add_subcommand("sweep", "lambda x n experiment grid from a config file");
    std::string sweep_config;
    sweep->add_option("--config", sweep_config, "ExperimentConfig JSON path")->required();

    auto* gc = app.add_subcommand("graphical-check", "coupling construction test suites");
    int gc_n = 20, gc_realizations = 100, gc_samples = 2000;
    double gc_lambda = 2.0, gc_horizon = 5.0;
    std::string gc_env_mode = "iid";
    specs.attach(gc);
    gc->add_option("--n", gc_n)->capture_default_str();
    gc->add_option("--lambda", gc_lambda)->capture_default_str();
    gc->add_option("--horizon", gc_horizon)->capture_default_str();
    gc->add_option("--realizations", gc_realizations)->capture_default_str();
    gc->add_option("--samples", gc_samples, "coupling sample count")->capture_default_str();
    gc->add_option("--env-mode", gc_env_mode)->capture_default_str();

    auto* tc = app.add_subcommand("theory-check", "quantitative lemma checks");
    std::string tc_lemma = "4.6";
    int tc_n = 10000, tc_m = 30, tc_walks = 10000, tc_samples = 200;
    double tc_lambda = 2.0, tc_a = 0.1, tc_b = 0.105, tc_phi = 0.5, tc_epsilon = 0.3,
           tc_theta = 2.0, tc_delta = 0.5, tc_horizon = 1.0;
    specs.attach(tc);
    tc->add_option("--lemma", tc_lemma, "4.6 | coupon | drift | walk")->capture_default_str();
    tc->add_option("--n", tc_n)->capture_default_str();
    tc->add_option("--lambda", tc_lambda)->capture_default_str();
    tc->add_option("--a", tc_a)->capture_default_str();
    tc->add_option("--b", tc_b)->capture_default_str();
    tc->add_option("--phi", tc_phi)->capture_default_str();
    tc->add_option("--m", tc_m)->capture_default_str();
    tc->add_option("--epsilon", tc_epsilon)->capture_default_str();
    tc->add_option("--theta", tc_theta)->capture_default_str();
    tc->add_option("--walks", tc_walks)->capture_default_str();
    tc->add_option("--samples", tc_samples)->capture_default_str();
    tc->add_option("--delta", tc_delta)->capture_default_str();
    tc->add_option("--horizon", tc_horizon)->capture_default_str();

    auto* qs = app.add_subcommand("quasistationary", "metastable proportions vs f*");
    int qs_n = 2000, qs_replicas = 16;
    double qs_lambda = 2.0, qs_burn = 10.0, qs_obs = 20.0;
    specs.attach(qs);
    qs->add_option("--n", qs_n)->capture_default_str();
    qs->add_option("--lambda", qs_lambda)->capture_default_str();
    qs->add_option("--t-burn", qs_burn)->capture_default_str();
    qs->add_option("--t-obs", qs_obs)->capture_default_str();
    qs->add_option("--replicas", qs_replicas)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (mf->parsed())
            return cmd_meanfield(specs, mf_lambda, mf_tol, mf_traj.empty() ? out_path : mf_traj,
                                 mf_f0, mf_dt, mf_T);
        if (sim->parsed())
            return cmd_simulate(specs, sim_n, sim_lambda, sim_t_max, sim_replicas, seed, sim_init,
                                sim_sample_every > 0 ? std::optional(sim_sample_every)
                                                     : std::nullopt,
                                out_path, sim_env_mode, threads);
        if (sweep->parsed()) return cmd_sweep(sweep_config, out_path, threads);
        if (gc->parsed())
            return cmd_graphical_check(specs, gc_n, gc_lambda, gc_horizon, gc_realizations,
                                       gc_samples, seed, gc_env_mode);
        if (tc->parsed())
            return cmd_theory_check(specs, tc_lemma, tc_n, tc_lambda, tc_a, tc_b, tc_phi, tc_m,
                                    tc_epsilon, tc_theta, tc_walks, tc_samples, tc_delta,
                                    tc_horizon, out_path, seed);
        if (qs->parsed())
            return cmd_quasistationary(specs, qs_n, qs_lambda, qs_burn, qs_obs, qs_replicas, seed,
                                       threads);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
