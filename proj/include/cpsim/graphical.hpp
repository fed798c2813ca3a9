#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpsim/environment.hpp"

namespace cpsim {

/// A directed infection arrow: at time t, vertex `from` infects `to` if live.
struct Arrow {
    double t = 0;
    int from = -1;
    int to = -1;
};

/// One realization of the space-time construction on [0, T]: per-vertex Poisson
/// recovery marks of rate xi(i), and for every ordered pair (i, j) an independent
/// arrow process of rate (lambda/n) * rho(i, j). Immutable once finalized; all
/// queries are read-only.
struct GraphicalRealization {
    int n = 0;
    double horizon = 0;
    std::vector<std::vector<double>> recovery_marks;  // per vertex, strictly increasing
    std::vector<Arrow> arrows;                        // time-sorted after finalize()

    // Merged deterministic event order: by (time, recovery-before-arrow, vertex).
    // Simultaneous timestamps have probability zero; the fixed order only matters
    // if floats ever collide.
    struct Event {
        double t;
        int kind;  // 0 = recovery mark on vertex a, 1 = arrow a -> b
        int a;
        int b;
    };
    std::vector<Event> events;

    /// Builds the merged event order and the per-vertex indices used by queries.
    /// Must be called after any direct edit of marks/arrows (tests build
    /// realizations by hand).
    void finalize();

    // Per-vertex positions into `events`, built by finalize().
    std::vector<std::vector<int>> mark_positions;
    std::vector<std::vector<int>> arrow_positions;  // outgoing, carries event index
};

GraphicalRealization sample_realization(const Environment& env, double lambda, double T,
                                        std::uint64_t seed);

/// State reached from the initial set at time t <= horizon: one chronological
/// sweep over the merged events maintaining the live set. A recovery mark at
/// (i, s) removes i; an arrow (i -> j, s) adds j when i is live. Returns the
/// sorted live vertex list.
std::vector<int> evolve(const GraphicalRealization& real, std::span<const int> initial, double t);

/// Whether an infection path runs from (i, 0) to (j, t). Computed by an
/// independent reachability search over per-vertex liveness segments rather than
/// the sweep; agreement with evolve() is a tested property.
bool infection_path_exists(const GraphicalRealization& real, int i, int j, double t);

/// Exact set identity evolve(A, t) == union over i in A of evolve({i}, t) on
/// this single shared realization.
bool check_additivity(const GraphicalRealization& real, std::span<const int> initial, double t);

/// The same realization restricted to [0, new_horizon].
GraphicalRealization truncate(const GraphicalRealization& real, double new_horizon);

}  // namespace cpsim
