#include "cpsim/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpsim {

std::string to_string(EnvMode mode) { return mode == EnvMode::iid ? "iid" : "stratified"; }

EnvMode env_mode_from_string(const std::string& s) {
    if (s == "iid") return EnvMode::iid;
    if (s == "stratified") return EnvMode::stratified;
    throw std::invalid_argument("unknown env mode: " + s);
}

Environment Environment::sample(const DistSpec& rho_spec, const DistSpec& xi_spec, int n,
                                std::uint64_t env_seed, EnvMode mode) {
    if (n < 1) throw std::invalid_argument("Environment: n must be >= 1");
    validate_spec_or_throw(rho_spec);
    validate_spec_or_throw(xi_spec);
    if (rho_spec.role != DistRole::edge_weight)
        throw std::invalid_argument("Environment: rho_spec must have edge-weight role");
    if (xi_spec.role != DistRole::recovery_rate)
        throw std::invalid_argument("Environment: xi_spec must have recovery-rate role");
    if (mode == EnvMode::stratified && !xi_spec.is_finite())
        throw std::invalid_argument("Environment: stratified mode requires a finite xi law");

    Environment env;
    env.n_ = n;
    env.env_seed_ = env_seed;
    env.mode_ = mode;

    const auto un = static_cast<std::size_t>(n);
    env.xi_.resize(un);
    if (mode == EnvMode::iid) {
        RandomStream xi_rng(derive_seed(env_seed, StreamDomain::environment_xi, 0));
        for (std::size_t i = 0; i < un; ++i) env.xi_[i] = sample_value(xi_spec, xi_rng);
    } else {
        const ClassProfile profile = ClassProfile::from_spec(xi_spec);
        const std::size_t k = profile.size();
        std::vector<long> counts(k);
        long total = 0;
        for (std::size_t c = 0; c < k; ++c) {
            counts[c] = std::lround(profile.q[c] * n);
            total += counts[c];
        }
        const std::size_t biggest = static_cast<std::size_t>(
            std::max_element(profile.q.begin(), profile.q.end()) - profile.q.begin());
        counts[biggest] += n - total;
        if (counts[biggest] < 0)
            throw std::invalid_argument("Environment: stratified class sizes infeasible at this n");
        std::vector<double> labels;
        labels.reserve(un);
        for (std::size_t c = 0; c < k; ++c)
            labels.insert(labels.end(), static_cast<std::size_t>(counts[c]), profile.y[c]);
        RandomStream lbl_rng(derive_seed(env_seed, StreamDomain::environment_lbl, 0));
        for (std::size_t i = un; i > 1; --i)
            std::swap(labels[i - 1], labels[lbl_rng.below(i)]);
        env.xi_ = std::move(labels);
    }

    env.rho_tri_.resize(un * (un - 1) / 2);
    RandomStream rho_rng(derive_seed(env_seed, StreamDomain::environment_rho, 0));
    std::size_t idx = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) env.rho_tri_[idx++] = sample_value(rho_spec, rho_rng);

    return env;
}

}  // namespace cpsim
