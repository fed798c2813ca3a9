#include "cpsim/dynamics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace cpsim {

RateTable::RateTable(std::vector<double> rates) { rebuild(std::move(rates)); }

void RateTable::rebuild(std::vector<double> rates) {
    raw_ = std::move(rates);
    tree_.assign(raw_.size() + 1, 0.0);
    rebuild();
}

void RateTable::rebuild() {
    const int n = size();
    for (int i = 1; i <= n; ++i) tree_[static_cast<std::size_t>(i)] = raw_[static_cast<std::size_t>(i - 1)];
    for (int i = 1; i <= n; ++i) {
        const int parent = i + (i & -i);
        if (parent <= n) tree_[static_cast<std::size_t>(parent)] += tree_[static_cast<std::size_t>(i)];
    }
    top_bit_ = n > 0 ? std::bit_floor(static_cast<unsigned>(n)) : 0;
}

double RateTable::total() const {
    double t = 0;
    for (int i = size(); i > 0; i -= i & -i) t += tree_[static_cast<std::size_t>(i)];
    return t;
}

void RateTable::set(int i, double value) {
    add(i, value - raw_[static_cast<std::size_t>(i)]);
}

void RateTable::add(int i, double delta) {
    raw_[static_cast<std::size_t>(i)] += delta;
    for (int j = i + 1; j <= size(); j += j & -j) tree_[static_cast<std::size_t>(j)] += delta;
}

int RateTable::sample(double r) const {
    int pos = 0;
    double rem = r;
    for (int bit = top_bit_; bit > 0; bit >>= 1) {
        const int next = pos + bit;
        if (next <= size() && tree_[static_cast<std::size_t>(next)] < rem) {
            pos = next;
            rem -= tree_[static_cast<std::size_t>(next)];
        }
    }
    pos = std::min(pos, size() - 1);
    if (raw_[static_cast<std::size_t>(pos)] <= 0) {
        // Floating-point boundary: move to the nearest vertex with positive rate.
        int i = pos;
        while (i >= 0 && raw_[static_cast<std::size_t>(i)] <= 0) --i;
        if (i < 0) {
            i = pos;
            while (i < size() && raw_[static_cast<std::size_t>(i)] <= 0) ++i;
        }
        pos = std::min(i, size() - 1);
    }
    return pos;
}

double vertex_rate(const Environment& env, const Configuration& config, double lambda, int i) {
    const int n = env.n();
    if (i < 0 || i >= n) throw std::out_of_range("vertex_rate: vertex index");
    if (config.infected[static_cast<std::size_t>(i)]) return env.xi(i);
    double s = 0;
    for (int j = 0; j < n; ++j)
        if (j != i && config.infected[static_cast<std::size_t>(j)]) s += env.rho(i, j);
    return lambda / n * s;
}

std::vector<std::int64_t> class_counts(const Environment& env, const Configuration& config,
                                       const ClassProfile& profile) {
    std::vector<std::int64_t> counts(profile.size(), 0);
    for (int i = 0; i < env.n(); ++i) {
        if (!config.infected[static_cast<std::size_t>(i)]) continue;
        const int c = profile.class_of(env.xi(i));
        if (c < 0) throw std::invalid_argument("class_counts: vertex rate not in profile");
        ++counts[static_cast<std::size_t>(c)];
    }
    return counts;
}

namespace {

std::vector<double> rates_from_scratch(const Environment& env, const Configuration& config,
                                       double lambda) {
    const int n = env.n();
    std::vector<double> rates(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        if (config.infected[static_cast<std::size_t>(i)]) {
            rates[static_cast<std::size_t>(i)] = env.xi(i);
        } else {
            double s = 0;
            for (int j = 0; j < n; ++j)
                if (config.infected[static_cast<std::size_t>(j)]) s += env.rho(i, j);
            rates[static_cast<std::size_t>(i)] = lambda / n * s;
        }
    }
    return rates;
}

constexpr std::uint64_t kExactRebuildPeriod = 1ULL << 16;

}  // namespace

Simulation::Simulation(const Environment& env, double lambda, std::span<const int> init,
                       std::uint64_t replica_seed, const ClassProfile* profile)
    : env_(env),
      lambda_(lambda),
      profile_(profile),
      replica_seed_(replica_seed),
      rng_(replica_seed),
      table_({}) {
    if (!(lambda >= 0)) throw std::invalid_argument("Simulation: lambda must be >= 0");
    const int n = env.n();
    config_.infected.assign(static_cast<std::size_t>(n), 0);
    for (int v : init) {
        if (v < 0 || v >= n) throw std::out_of_range("Simulation: init vertex out of range");
        if (!config_.infected[static_cast<std::size_t>(v)]) {
            config_.infected[static_cast<std::size_t>(v)] = 1;
            ++config_.count;
        }
    }
    if (profile_) config_.class_counts = class_counts(env_, config_, *profile_);
    table_.rebuild(rates_from_scratch(env_, config_, lambda_));
}

Simulation::StepResult Simulation::step(double t_limit) {
    if (config_.count == 0) return {StepStatus::extinct, 0.0, -1};
    const double total = table_.total();
    const double dt = rng_.exponential(total);
    if (time_ + dt > t_limit) return {StepStatus::capped, dt, -1};
    const int v = table_.sample(rng_.uniform_open01() * total);
    time_ += dt;
    ++event_count_;
    flip(v);
    if (++events_since_rebuild_ >= kExactRebuildPeriod) exact_rebuild();
    return {StepStatus::stepped, dt, v};
}

void Simulation::flip(int v) {
    const int n = env_.n();
    auto& inf = config_.infected;
    const double scale = lambda_ / n;
    const bool was_infected = inf[static_cast<std::size_t>(v)] != 0;

    inf[static_cast<std::size_t>(v)] = was_infected ? 0 : 1;
    config_.count += was_infected ? -1 : 1;
    if (profile_) {
        const int c = profile_->class_of(env_.xi(v));
        if (c < 0) throw std::invalid_argument("Simulation: vertex rate not in profile");
        config_.class_counts[static_cast<std::size_t>(c)] += was_infected ? -1 : 1;
    }

    // New rate of v on its opposite branch.
    double rv;
    if (was_infected) {
        double s = 0;
        for (int j = 0; j < n; ++j)
            if (inf[static_cast<std::size_t>(j)]) s += env_.rho(v, j);
        rv = scale * s;
    } else {
        rv = env_.xi(v);
    }

    // Every currently-healthy vertex gains or loses (lambda/n) * rho(u, v).
    const int healthy = n - config_.count;
    const bool dense_update = healthy + 1 >= n / 4;
    if (dense_update) {
        auto& raw = table_.mutable_rates();
        raw[static_cast<std::size_t>(v)] = rv;
        for (int u = 0; u < n; ++u) {
            if (u == v || inf[static_cast<std::size_t>(u)]) continue;
            double r = raw[static_cast<std::size_t>(u)] +
                       (was_infected ? -scale * env_.rho(u, v) : scale * env_.rho(u, v));
            raw[static_cast<std::size_t>(u)] = r > 0 ? r : 0.0;
        }
        table_.rebuild();
    } else {
        table_.set(v, rv);
        for (int u = 0; u < n; ++u) {
            if (u == v || inf[static_cast<std::size_t>(u)]) continue;
            double r = table_.rate(u) +
                       (was_infected ? -scale * env_.rho(u, v) : scale * env_.rho(u, v));
            table_.set(u, r > 0 ? r : 0.0);
        }
    }
}

void Simulation::exact_rebuild() {
    table_.rebuild(rates_from_scratch(env_, config_, lambda_));
    events_since_rebuild_ = 0;
}

std::vector<double> Simulation::recompute_rates() const {
    return rates_from_scratch(env_, config_, lambda_);
}

Outcome run(const Environment& env, double lambda, std::span<const int> init, double t_max,
            std::uint64_t replica_seed, std::optional<double> sample_every,
            const ClassProfile* profile) {
    if (!(t_max > 0)) throw std::invalid_argument("run: t_max must be positive");
    if (sample_every && !(*sample_every > 0))
        throw std::invalid_argument("run: sample_every must be positive");
    Simulation sim(env, lambda, init, replica_seed, profile);

    Outcome out;
    out.replica_seed = replica_seed;

    // Grid times k * sample_every; a sample at s carries the state holding on
    // [s, next event), i.e. the right-continuous value.
    std::uint64_t sample_k = 0;
    auto sample_time = [&] { return static_cast<double>(sample_k) * *sample_every; };
    auto emit = [&](double t, bool inclusive, int count,
                    const std::vector<std::int64_t>& cc) {
        if (!sample_every) return;
        const double limit = inclusive ? t * (1 + 1e-12) + 1e-300 : t;
        while (sample_time() < limit) {
            out.samples.push_back({sample_time(), count, cc});
            ++sample_k;
        }
    };

    if (sim.config().count == 0) {
        emit(0, true, 0, sim.config().class_counts);
        out.extinction_time = 0;
        return out;
    }

    while (true) {
        int count0 = 0;
        std::vector<std::int64_t> cc0;
        if (sample_every) {
            count0 = sim.config().count;
            cc0 = sim.config().class_counts;
        }
        const auto res = sim.step(t_max);
        if (res.status == Simulation::StepStatus::capped) {
            emit(t_max, true, count0, cc0);
            out.capped_at = t_max;
            break;
        }
        emit(sim.time(), false, count0, cc0);
        if (sim.config().count == 0) {
            out.extinction_time = sim.time();
            break;
        }
    }
    out.event_count = sim.event_count();
    out.final_count = sim.config().count;
    return out;
}

std::vector<int> init_full(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

std::vector<int> init_single() { return {0}; }

std::vector<int> init_fraction(int n, double x) {
    if (x < 0 || x > 1) throw std::invalid_argument("init_fraction: x outside [0,1]");
    const int k = static_cast<int>(std::lround(x * n));
    std::vector<int> v(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

double exact_extinction_oracle(const Environment& env, double lambda,
                               std::span<const int> init) {
    const int n = env.n();
    if (n > 12) throw std::invalid_argument("exact_extinction_oracle: n > 12 refused");

    std::uint32_t init_mask = 0;
    for (int v : init) {
        if (v < 0 || v >= n) throw std::out_of_range("exact_extinction_oracle: init vertex");
        init_mask |= 1u << v;
    }
    if (init_mask == 0) return 0.0;

    const std::uint32_t n_states = (1u << n) - 1;  // nonempty configurations
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_states, n_states);
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n_states);

    for (std::uint32_t s = 1; s <= n_states; ++s) {
        const auto row = static_cast<Eigen::Index>(s - 1);
        for (int i = 0; i < n; ++i) {
            double rate;
            if (s & (1u << i)) {
                rate = env.xi(i);
            } else {
                double sum = 0;
                for (int j = 0; j < n; ++j)
                    if (s & (1u << j)) sum += env.rho(i, j);
                rate = lambda / n * sum;
            }
            if (rate <= 0) continue;
            A(row, row) += rate;
            const std::uint32_t s2 = s ^ (1u << i);
            if (s2 != 0) A(row, static_cast<Eigen::Index>(s2 - 1)) -= rate;
        }
    }

    const Eigen::VectorXd expected = A.partialPivLu().solve(rhs);
    return expected(static_cast<Eigen::Index>(init_mask - 1));
}

double occupancy_threshold(double lambda, double a, double e_rho, double y) {
    const double m = lambda * a * e_rho;
    return m / (y + m);
}

std::vector<std::int64_t> region_floor_point(const ClassProfile& profile, int n, double lambda,
                                             double e_rho, double a) {
    std::vector<std::int64_t> g(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i)
        g[i] = static_cast<std::int64_t>(
            std::ceil(occupancy_threshold(lambda, a, e_rho, profile.y[i]) * profile.q[i] * n));
    return g;
}

bool in_region(std::span<const std::int64_t> counts, const ClassProfile& profile, int n,
               double lambda, double e_rho, double a, std::optional<double> b) {
    if (!(a > 0)) throw std::invalid_argument("in_region: a must be positive");
    if (b && !(a < *b)) throw std::invalid_argument("in_region: requires a < b");
    if (counts.size() != profile.size())
        throw std::invalid_argument("in_region: counts size mismatch");
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double share = static_cast<double>(counts[i]) / (profile.q[i] * n);
        if (share < occupancy_threshold(lambda, a, e_rho, profile.y[i])) return false;
        if (b && share > occupancy_threshold(lambda, *b, e_rho, profile.y[i])) return false;
    }
    return true;
}

}  // namespace cpsim
