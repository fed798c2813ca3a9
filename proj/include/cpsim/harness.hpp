#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cpsim/dist_spec.hpp"
#include "cpsim/environment.hpp"
#include "cpsim/stats.hpp"

namespace cpsim {

enum class Mode { meanfield, simulate, sweep, graphical_check, theory_check, quasistationary };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

/// Horizon rule per cell: fixed T, c*log(n), or min(exp(c*n), T_cap).
struct TMaxRule {
    enum class Kind { fixed, log_multiple, exp_cap };
    Kind kind = Kind::fixed;
    double T = 0;
    double c = 0;
    double T_cap = 0;

    double evaluate(int n) const;
};

struct InitRule {
    enum class Kind { full, single, fraction };
    Kind kind = Kind::full;
    double fraction = 0;

    std::vector<int> make(int n) const;
    static InitRule parse(const std::string& text);  // "full" | "single" | "fraction:x"
    std::string text() const;
};

struct ExperimentConfig {
    Mode mode = Mode::sweep;
    DistSpec rho_spec;
    DistSpec xi_spec;
    std::vector<double> lambda_grid;
    std::vector<int> n_grid;
    int replicas = 1;
    TMaxRule t_max_rule;
    std::uint64_t master_seed = 0;
    EnvMode env_mode = EnvMode::iid;
    int env_seeds = 1;  // 1 = quenched (one fixed environment per n); >1 = annealed averaging
    InitRule init;
    std::optional<double> sample_every;
    std::string out;
};

/// Strict parse: unknown keys are rejected with their JSON path; all invariants
/// (sorted non-empty grids, replicas >= 1, specs valid) are enforced.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json serialize_config(const ExperimentConfig& config);

struct SweepRow {
    int n = 0;
    double lambda = 0;
    std::uint64_t env_seed = 0;
    int replica = 0;
    std::uint64_t replica_seed = 0;
    std::optional<double> extinction_time;
    std::optional<double> capped_at;
    std::uint64_t event_count = 0;
    int final_count = 0;
};

/// One row per (n, lambda, env_seed, replica), in that order; a pure function of
/// the config document regardless of thread count.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, int threads = 1);

void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows);

enum class Regime { subcritical, supercritical };

/// Subcritical: mean extinction time per n against log n (capped replicas are
/// excluded from the means). Supercritical: log median extinction time against
/// n; any capped observation is an error naming the offending cells.
LinearFit fit_scaling(std::span<const SweepRow> rows, Regime regime);

struct QuasiStationaryResult {
    std::vector<double> fraction;  // time-averaged A(i)/(q_i n), survivors at t_burn
    std::vector<double> se;
    int replicas = 0;
    int survived_burn = 0;
    int died_in_window = 0;
    std::optional<double> region_occupancy;  // fraction of observed time in the lower region
};

/// Time-averaged per-class infected fractions over [t_burn, t_burn + t_obs],
/// conditioned on survival at t_burn; replicas dying inside the window
/// contribute until death and are counted separately. When occupancy_a is set,
/// also reports the fraction of observed time the class counts spend in the
/// lower region of level a (thresholds use e_rho, the mean of the edge-weight law).
QuasiStationaryResult quasi_stationary_estimate(const Environment& env, double lambda,
                                                const ClassProfile& profile, double e_rho,
                                                double t_burn, double t_obs, int replicas,
                                                std::uint64_t master_seed,
                                                std::optional<double> occupancy_a = std::nullopt,
                                                int threads = 1);

/// Runs fn(0..count-1) across a small worker pool. Results must be written to
/// per-index slots so scheduling cannot change any output.
void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& fn);

}  // namespace cpsim
