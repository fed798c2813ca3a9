#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cpsim/dist_spec.hpp"
#include "cpsim/environment.hpp"
#include "cpsim/rng.hpp"

namespace cpsim {

/// Per-class asymptotic drift-rate densities and the constants sandwiched
/// strictly between them. theta_plus/theta_minus equals (a/b)*h(a) for every
/// class; construction fails when that ratio is not above 1.
struct DriftBounds {
    double a = 0, b = 0, lambda = 0, e_rho = 0;
    ClassProfile profile;
    std::vector<double> theta_minus, theta_plus;
    std::vector<double> alpha_minus, alpha_plus;  // 1/3 and 2/3 points of (theta-, theta+)
};

/// theta_i^- = y_i * (lambda*b*Erho / (y_i + lambda*b*Erho)) * q_i,
/// theta_i^+ = lambda * q_i * (y_i / (y_i + lambda*b*Erho)) * E[lambda*a*Erho/(xi+lambda*a*Erho)] * Erho.
/// Requires 0 < a < b; throws when theta+ <= theta- (the (a,b) pair is unusable).
DriftBounds theta_bounds(double a, double b, double lambda, const ClassProfile& profile,
                         const DistSpec& rho_spec);

struct DriftClassReport {
    double alpha_minus = 0, alpha_plus = 0;
    double d_max_over_n = 0;       // max over sampled configurations of y_i A(i) / n
    int d_violations = 0;          // samples with d_i/n > alpha_i^-
    double bracket_lo = 0;         // lower bound on b_i(A)/n (smallest-edges sum)
    double bracket_hi = 0;         // upper bound on b_i(A)/n (best random disjoint pair)
    bool upper_confirmed = false;  // alpha_i^+ <= bracket_lo
    bool inconclusive = false;     // bracket straddles alpha_i^+
    bool violated = false;         // bracket_hi < alpha_i^+
};

struct DriftReport {
    std::vector<DriftClassReport> classes;
    int samples = 0;
    int inconclusive_count() const;
    bool ok() const;  // no d-violations and no violated upper bounds
};

/// Samples configurations with class counts inside the (a, b) box of a
/// stratified environment, checks d_i(A) = y_i A(i) against alpha_i^- n, and
/// brackets the subset-sum infimum b_i(A): below by the sum of the |E||F|
/// smallest edge weights, above by the best of `pair_draws` random disjoint
/// (E, F) pairs of the prescribed sizes. Both bounds collapse for constant rho.
DriftReport empirical_drift_check(const Environment& env, const DriftBounds& bounds, int samples,
                                  std::uint64_t seed, int pair_draws = 1000);

/// Range R_m of a simple random walk on the complete graph: the number of
/// distinct vertices among S_0..S_{m-1}.
int srw_range_sample(int n, int m, RandomStream& rng);

struct RangeEstimate {
    double value = 0;  // (mean of phi^{R_m})^{1/m}
    double se = 0;     // delta-method standard error
};

RangeEstimate srw_range_estimate(int n, int m, double phi, int walks, std::uint64_t seed);

/// Exact distribution of R_m by enumeration over all walks; P(R_m = j) at index j.
/// Guarded to small n and m.
std::vector<double> srw_range_exact_distribution(int n, int m);

struct CouponReport {
    double lhs = 0;     // Monte Carlo P(R_m <= m(1-epsilon))
    double lhs_se = 0;
    double rhs = 0;     // exp(-theta m epsilon) / (1 - m e^theta (1-eps)/(n-1))^{m(1-eps)}
    bool holds = false; // lhs <= rhs + 3 * lhs_se
};

/// Requires m(1-epsilon) e^theta < n-1, else throws "bound vacuous".
CouponReport coupon_bound_check(int n, int m, double epsilon, double theta, int walks,
                                std::uint64_t seed);

/// First step index at which the walk range reaches j distinct vertices.
int tau_range_sample(int n, int j, RandomStream& rng);

/// Sum of `terms` iid geometric variables with P(W = k) = p^{k-1}(1-p), k >= 1.
double geometric_sum_sample(double p, int terms, RandomStream& rng);

struct WalkReport {
    double outside_probability = 0;  // P(Z_T outside the delta lower region)
    double se = 0;
    int replicas = 0;
};

/// Independent per-class birth-death walks: coordinate i jumps +1 at rate
/// alpha_i^+ n and -1 at rate alpha_i^- n. Estimates the probability that the
/// state at the horizon T has left the lower region of level delta.
WalkReport simulate_dominating_walk(const DriftBounds& bounds, int n,
                                    std::span<const std::int64_t> z0, double delta, double T,
                                    int replicas, std::uint64_t seed);

}  // namespace cpsim
