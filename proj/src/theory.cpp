#include "cpsim/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cpsim/dynamics.hpp"
#include "cpsim/stats.hpp"

namespace cpsim {

DriftBounds theta_bounds(double a, double b, double lambda, const ClassProfile& profile,
                         const DistSpec& rho_spec) {
    if (!(0 < a && a < b)) throw std::invalid_argument("theta_bounds: requires 0 < a < b");
    if (auto err = validate_profile(profile))
        throw std::invalid_argument("theta_bounds: " + *err);

    DriftBounds out;
    out.a = a;
    out.b = b;
    out.lambda = lambda;
    out.e_rho = expectation_identity(rho_spec);
    out.profile = profile;

    // s = E[lambda a Erho / (xi + lambda a Erho)] = a * h(a), taken over the class law.
    double s = 0;
    for (std::size_t j = 0; j < profile.size(); ++j)
        s += profile.q[j] * lambda * a * out.e_rho / (profile.y[j] + lambda * a * out.e_rho);

    const std::size_t k = profile.size();
    out.theta_minus.resize(k);
    out.theta_plus.resize(k);
    out.alpha_minus.resize(k);
    out.alpha_plus.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double y = profile.y[i];
        const double q = profile.q[i];
        const double denom = y + lambda * b * out.e_rho;
        out.theta_minus[i] = y * (lambda * b * out.e_rho / denom) * q;
        out.theta_plus[i] = lambda * q * (y / denom) * s * out.e_rho;
        if (!(out.theta_plus[i] > out.theta_minus[i]))
            throw std::invalid_argument(
                "theta_bounds: theta+ <= theta- (pick a, b with (a/b) h(a) > 1)");
        const double gap = out.theta_plus[i] - out.theta_minus[i];
        out.alpha_minus[i] = out.theta_minus[i] + gap / 3.0;
        out.alpha_plus[i] = out.theta_minus[i] + 2.0 * gap / 3.0;
    }
    return out;
}

int DriftReport::inconclusive_count() const {
    int c = 0;
    for (const auto& cls : classes) c += cls.inconclusive ? 1 : 0;
    return c;
}

bool DriftReport::ok() const {
    for (const auto& cls : classes)
        if (cls.d_violations > 0 || cls.violated) return false;
    return true;
}

DriftReport empirical_drift_check(const Environment& env, const DriftBounds& bounds, int samples,
                                  std::uint64_t seed, int pair_draws) {
    if (env.mode() != EnvMode::stratified)
        throw std::invalid_argument("empirical_drift_check: requires a stratified environment");
    const ClassProfile& profile = bounds.profile;
    const std::size_t k = profile.size();
    const int n = env.n();

    // Class membership and sizes S_n(i).
    std::vector<std::vector<int>> members(k);
    for (int v = 0; v < n; ++v) {
        const int c = profile.class_of(env.xi(v));
        if (c < 0) throw std::invalid_argument("empirical_drift_check: vertex rate not in profile");
        members[static_cast<std::size_t>(c)].push_back(v);
    }

    // |E| and |F|_i from the region thresholds and the realized class sizes.
    double e_size_real = 0;
    for (std::size_t j = 0; j < k; ++j)
        e_size_real += occupancy_threshold(bounds.lambda, bounds.a, bounds.e_rho, profile.y[j]) *
                       static_cast<double>(members[j].size());
    const auto e_size = static_cast<std::size_t>(e_size_real);

    DriftReport report;
    report.samples = samples;
    report.classes.resize(k);

    // Sorted edge weights once; prefix sums give the smallest-|E||F| lower bound.
    std::vector<double> sorted_weights = env.rho_upper_triangle();
    std::sort(sorted_weights.begin(), sorted_weights.end());
    std::vector<double> prefix(sorted_weights.size() + 1, 0.0);
    for (std::size_t i = 0; i < sorted_weights.size(); ++i)
        prefix[i + 1] = prefix[i] + sorted_weights[i];

    RandomStream rng(derive_seed(seed, StreamDomain::theory, 0));
    std::vector<int> shuffled(static_cast<std::size_t>(n));
    std::iota(shuffled.begin(), shuffled.end(), 0);

    for (std::size_t i = 0; i < k; ++i) {
        auto& cls = report.classes[i];
        cls.alpha_minus = bounds.alpha_minus[i];
        cls.alpha_plus = bounds.alpha_plus[i];

        const double f_size_real =
            profile.y[i] / (profile.y[i] + bounds.lambda * bounds.b * bounds.e_rho) *
            static_cast<double>(members[i].size());
        const auto f_size = static_cast<std::size_t>(f_size_real);
        if (e_size + f_size > static_cast<std::size_t>(n))
            throw std::invalid_argument("empirical_drift_check: |E| + |F| exceeds n");
        const std::size_t pairs = e_size * f_size;
        if (pairs > sorted_weights.size())
            throw std::invalid_argument("empirical_drift_check: |E||F| exceeds edge count");
        cls.bracket_lo = bounds.lambda / n * prefix[pairs] / n;

        double best = std::numeric_limits<double>::infinity();
        for (int d = 0; d < pair_draws; ++d) {
            // Random disjoint (E, F) of the prescribed sizes via a partial shuffle.
            const std::size_t need = e_size + f_size;
            for (std::size_t pos = 0; pos < need; ++pos) {
                const std::size_t pick =
                    pos + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(
                              static_cast<std::size_t>(n) - pos)));
                std::swap(shuffled[pos], shuffled[pick]);
            }
            double sum = 0;
            for (std::size_t e = 0; e < e_size; ++e)
                for (std::size_t f = 0; f < f_size; ++f)
                    sum += env.rho(shuffled[e], shuffled[e_size + f]);
            best = std::min(best, bounds.lambda / n * sum / n);
        }
        cls.bracket_hi = best;

        cls.upper_confirmed = cls.alpha_plus <= cls.bracket_lo;
        cls.violated = cls.bracket_hi < cls.alpha_plus;
        cls.inconclusive = !cls.upper_confirmed && !cls.violated;
    }

    // Sampled configurations with class counts in the (a, b) box; d_i(A) = y_i A(i).
    for (int s = 0; s < samples; ++s) {
        for (std::size_t i = 0; i < k; ++i) {
            const double qn = profile.q[i] * n;
            const auto lo = static_cast<std::int64_t>(std::ceil(
                occupancy_threshold(bounds.lambda, bounds.a, bounds.e_rho, profile.y[i]) * qn));
            const auto hi = static_cast<std::int64_t>(std::floor(
                occupancy_threshold(bounds.lambda, bounds.b, bounds.e_rho, profile.y[i]) * qn));
            if (hi < lo)
                throw std::invalid_argument(
                    "empirical_drift_check: empty count box at this n; increase n or widen (a,b)");
            const auto count = lo + static_cast<std::int64_t>(
                                        rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
            const double d_over_n = profile.y[i] * static_cast<double>(count) / n;
            auto& cls = report.classes[i];
            cls.d_max_over_n = std::max(cls.d_max_over_n, d_over_n);
            if (d_over_n > cls.alpha_minus) ++cls.d_violations;
        }
    }
    return report;
}

int srw_range_sample(int n, int m, RandomStream& rng) {
    // Walk on the complete graph: each step uniform over the n-1 other vertices.
    // m is small in every use here, so a linear membership scan beats hashing.
    std::vector<int> visited;
    visited.reserve(static_cast<std::size_t>(m));
    int current = 0;
    visited.push_back(0);
    int range = 1;
    for (int step = 1; step < m; ++step) {
        auto next = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
        if (next >= current) ++next;
        current = next;
        if (std::find(visited.begin(), visited.end(), current) == visited.end()) {
            visited.push_back(current);
            ++range;
        }
    }
    return range;
}

RangeEstimate srw_range_estimate(int n, int m, double phi, int walks, std::uint64_t seed) {
    if (!(phi > 0 && phi < 1)) throw std::invalid_argument("srw_range_estimate: phi in (0,1)");
    if (m < 1 || n < 2 || walks < 1)
        throw std::invalid_argument("srw_range_estimate: bad parameters");
    RandomStream rng(derive_seed(seed, StreamDomain::theory, 1));
    std::vector<double> values(static_cast<std::size_t>(walks));
    for (int w = 0; w < walks; ++w)
        values[static_cast<std::size_t>(w)] =
            std::pow(phi, static_cast<double>(srw_range_sample(n, m, rng)));
    const MeanStats stats = summarize(values);
    RangeEstimate est;
    est.value = std::pow(stats.mean, 1.0 / m);
    // Delta method through g(u) = u^{1/m}.
    est.se = stats.se / m * std::pow(stats.mean, 1.0 / m - 1.0);
    return est;
}

namespace {

void enumerate_walks(int n, int steps_left, int current, std::uint32_t visited, double prob,
                     std::vector<double>& dist) {
    if (steps_left == 0) {
        dist[static_cast<std::size_t>(std::popcount(visited))] += prob;
        return;
    }
    for (int next = 0; next < n; ++next) {
        if (next == current) continue;
        enumerate_walks(n, steps_left - 1, next, visited | (1u << next), prob / (n - 1), dist);
    }
}

}  // namespace

std::vector<double> srw_range_exact_distribution(int n, int m) {
    if (n < 2 || n > 16 || m < 1 || m > 12)
        throw std::invalid_argument("srw_range_exact_distribution: enumeration guard");
    std::vector<double> dist(static_cast<std::size_t>(std::min(n, m)) + 1, 0.0);
    enumerate_walks(n, m - 1, 0, 1u, 1.0, dist);
    return dist;
}

CouponReport coupon_bound_check(int n, int m, double epsilon, double theta, int walks,
                                std::uint64_t seed) {
    if (!(epsilon > 0 && epsilon < 1))
        throw std::invalid_argument("coupon_bound_check: epsilon in (0,1)");
    const double cut = m * (1.0 - epsilon);
    if (!(cut * std::exp(theta) < n - 1))
        throw std::invalid_argument("coupon_bound_check: bound vacuous (m(1-eps) e^theta >= n-1)");

    RandomStream rng(derive_seed(seed, StreamDomain::theory, 2));
    int hits = 0;
    for (int w = 0; w < walks; ++w)
        if (srw_range_sample(n, m, rng) <= cut) ++hits;

    CouponReport rep;
    rep.lhs = static_cast<double>(hits) / walks;
    rep.lhs_se = proportion_se(rep.lhs, static_cast<std::size_t>(walks));
    rep.rhs = std::exp(-theta * m * epsilon) /
              std::pow(1.0 - cut * std::exp(theta) / (n - 1), cut);
    rep.holds = rep.lhs <= rep.rhs + 3.0 * rep.lhs_se;
    return rep;
}

int tau_range_sample(int n, int j, RandomStream& rng) {
    if (j < 1) return 0;
    std::vector<int> visited;
    visited.reserve(static_cast<std::size_t>(j));
    int current = 0;
    visited.push_back(0);
    int range = 1;
    int steps = 1;  // R_1 = 1 after observing S_0
    while (range < j) {
        auto next = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
        if (next >= current) ++next;
        current = next;
        if (std::find(visited.begin(), visited.end(), current) == visited.end()) {
            visited.push_back(current);
            ++range;
        }
        ++steps;
    }
    return steps;
}

double geometric_sum_sample(double p, int terms, RandomStream& rng) {
    if (!(p >= 0 && p < 1)) throw std::invalid_argument("geometric_sum_sample: p in [0,1)");
    double sum = 0;
    const double log_p = std::log(p);
    for (int l = 0; l < terms; ++l) {
        if (p == 0) {
            sum += 1;
        } else {
            // W = 1 + floor(log(U)/log(p)) has P(W = k) = p^{k-1}(1-p).
            sum += 1.0 + std::floor(std::log(rng.uniform_open01()) / log_p);
        }
    }
    return sum;
}

WalkReport simulate_dominating_walk(const DriftBounds& bounds, int n,
                                    std::span<const std::int64_t> z0, double delta, double T,
                                    int replicas, std::uint64_t seed) {
    const std::size_t k = bounds.profile.size();
    if (z0.size() != k) throw std::invalid_argument("simulate_dominating_walk: z0 size mismatch");
    if (T < 0 || replicas < 1)
        throw std::invalid_argument("simulate_dominating_walk: bad parameters");

    std::vector<double> thresholds(k);
    for (std::size_t i = 0; i < k; ++i)
        thresholds[i] = occupancy_threshold(bounds.lambda, delta, bounds.e_rho,
                                            bounds.profile.y[i]) *
                        bounds.profile.q[i] * n;

    std::vector<double> rates(2 * k);
    double total = 0;
    for (std::size_t i = 0; i < k; ++i) {
        rates[2 * i] = bounds.alpha_plus[i] * n;
        rates[2 * i + 1] = bounds.alpha_minus[i] * n;
        total += rates[2 * i] + rates[2 * i + 1];
    }

    int outside = 0;
    for (int r = 0; r < replicas; ++r) {
        RandomStream rng(derive_seed(seed, StreamDomain::theory,
                                     0x1000 + static_cast<std::uint64_t>(r)));
        std::vector<std::int64_t> z(z0.begin(), z0.end());
        double t = total > 0 ? rng.exponential(total) : std::numeric_limits<double>::infinity();
        while (t <= T) {
            double pick = rng.uniform_open01() * total;
            std::size_t idx = 0;
            while (idx + 1 < rates.size() && pick > rates[idx]) {
                pick -= rates[idx];
                ++idx;
            }
            z[idx / 2] += (idx % 2 == 0) ? 1 : -1;
            t += rng.exponential(total);
        }
        for (std::size_t i = 0; i < k; ++i)
            if (static_cast<double>(z[i]) < thresholds[i]) {
                ++outside;
                break;
            }
    }

    WalkReport rep;
    rep.replicas = replicas;
    rep.outside_probability = static_cast<double>(outside) / replicas;
    rep.se = proportion_se(rep.outside_probability, static_cast<std::size_t>(replicas));
    return rep;
}

}  // namespace cpsim
