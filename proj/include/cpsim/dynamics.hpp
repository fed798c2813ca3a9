#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cpsim/dist_spec.hpp"
#include "cpsim/environment.hpp"
#include "cpsim/rng.hpp"

namespace cpsim {

/// Infection state with cached infected count and, when a class profile is
/// attached, the per-class infected counts A(j).
struct Configuration {
    std::vector<std::uint8_t> infected;
    int count = 0;
    std::vector<std::int64_t> class_counts;  // empty when no profile attached
};

/// Binary-indexed cumulative structure over per-vertex flip rates. Supports
/// point updates, O(n) rebuild from a raw rate array, and prefix-sum search in
/// O(log n). A draw landing exactly on a cumulative boundary maps to the lower
/// index; zero-rate vertices are kept but never selected.
class RateTable {
public:
    explicit RateTable(std::vector<double> rates);

    int size() const { return static_cast<int>(raw_.size()); }
    double rate(int i) const { return raw_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& rates() const { return raw_; }
    /// Direct access for bulk edits; call rebuild() before the next query.
    std::vector<double>& mutable_rates() { return raw_; }
    double total() const;

    void set(int i, double value);
    void add(int i, double delta);
    void rebuild();                           // from current raw rates
    void rebuild(std::vector<double> rates);  // replace raw rates wholesale

    /// Smallest vertex i whose cumulative rate reaches r; requires 0 < r <= total().
    int sample(double r) const;

private:
    std::vector<double> raw_;
    std::vector<double> tree_;  // 1-based Fenwick array
    int top_bit_ = 0;
};

struct TrajectorySample {
    double t = 0;
    int count = 0;
    std::vector<std::int64_t> class_counts;
};

struct Outcome {
    std::optional<double> extinction_time;  // exact jump time of the last recovery
    std::optional<double> capped_at;        // horizon, when still alive at t_max
    std::uint64_t event_count = 0;
    std::uint64_t replica_seed = 0;
    int final_count = 0;
    std::vector<TrajectorySample> samples;
};

/// Exact flip rate of vertex i: xi(i) when infected, else
/// (lambda/n) * sum_{j != i} rho(i,j) * eta(j).
double vertex_rate(const Environment& env, const Configuration& config, double lambda, int i);

/// Exact per-class infected counts A(j); every xi value must belong to the profile.
std::vector<std::int64_t> class_counts(const Environment& env, const Configuration& config,
                                       const ClassProfile& profile);

/// Event-driven simulation of one replica of the continuous-time chain. A single
/// instance is strictly sequential; independent replicas sharing one read-only
/// Environment may run concurrently.
class Simulation {
public:
    enum class StepStatus { stepped, extinct, capped };
    struct StepResult {
        StepStatus status;
        double dt = 0;
        int vertex = -1;
    };

    Simulation(const Environment& env, double lambda, std::span<const int> init,
               std::uint64_t replica_seed, const ClassProfile* profile = nullptr);

    /// One transition of the generator: waiting time ~ exponential(total rate),
    /// vertex chosen proportionally to its rate, state and rate table updated.
    /// Returns extinct (no time advance) when nothing is infected. An event that
    /// would land beyond t_limit is not executed and capped is returned instead;
    /// after a capped result the simulation must not be resumed with a larger limit.
    StepResult step(double t_limit = std::numeric_limits<double>::infinity());

    double time() const { return time_; }
    const Configuration& config() const { return config_; }
    double total_rate() const { return table_.total(); }
    double cached_rate(int i) const { return table_.rate(i); }
    std::uint64_t event_count() const { return event_count_; }
    std::uint64_t replica_seed() const { return replica_seed_; }

    /// Rates recomputed from scratch, for consistency checks against the
    /// incrementally maintained table.
    std::vector<double> recompute_rates() const;

private:
    void flip(int v);
    void exact_rebuild();

    const Environment& env_;
    double lambda_;
    const ClassProfile* profile_;
    std::uint64_t replica_seed_;
    RandomStream rng_;
    Configuration config_;
    RateTable table_;
    double time_ = 0;
    std::uint64_t event_count_ = 0;
    std::uint64_t events_since_rebuild_ = 0;
};

/// Runs one replica until extinction or t_max. When sample_every is set, the
/// outcome carries the time series (t, count, A(1..k)) on that grid, following
/// the right-continuous convention, up to extinction or the horizon.
Outcome run(const Environment& env, double lambda, std::span<const int> init, double t_max,
            std::uint64_t replica_seed, std::optional<double> sample_every = std::nullopt,
            const ClassProfile* profile = nullptr);

std::vector<int> init_full(int n);
std::vector<int> init_single();
/// The first round(x*n) vertices (deterministic; vertices are exchangeable under iid sampling).
std::vector<int> init_fraction(int n, double x);

/// Expected extinction time from init, via the linear system -Q T = 1 over all
/// 2^n - 1 transient configurations with exact rates. Refuses n > 12.
double exact_extinction_oracle(const Environment& env, double lambda, std::span<const int> init);

/// lambda*a*e_rho / (y + lambda*a*e_rho): the class-i occupancy level of x = a.
double occupancy_threshold(double lambda, double a, double e_rho, double y);

/// g(a): componentwise ceiling of the class thresholds, the smallest point of
/// the lower region under the partial order.
std::vector<std::int64_t> region_floor_point(const ClassProfile& profile, int n, double lambda,
                                             double e_rho, double a);

/// With b: counts lie in the box [threshold(a), threshold(b)] per class (closed
/// inequalities on A(i)/(q_i n)). Without b: the lower bound only.
bool in_region(std::span<const std::int64_t> counts, const ClassProfile& profile, int n,
               double lambda, double e_rho, double a, std::optional<double> b = std::nullopt);

}  // namespace cpsim
