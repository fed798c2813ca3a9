#pragma once

#include <cstdint>
#include <vector>

#include "cpsim/dist_spec.hpp"

namespace cpsim {

enum class EnvMode { iid, stratified };

std::string to_string(EnvMode mode);
EnvMode env_mode_from_string(const std::string& s);

/// One quenched sample of the random environment: n recovery rates and the
/// symmetric edge-weight table (upper triangle stored, diagonal never used).
/// Immutable after sampling; safe to share read-only across replicas.
class Environment {
public:
    /// Deterministic function of (specs, n, env_seed, mode). The xi values and the
    /// upper-triangle rho values are drawn from separate derived streams. In
    /// stratified mode class i receives exactly round(q_i*n) vertices, with the
    /// integrality remainder assigned to the class of largest q_i, and the labels
    /// are then shuffled by the seed.
    static Environment sample(const DistSpec& rho_spec, const DistSpec& xi_spec, int n,
                              std::uint64_t env_seed, EnvMode mode);

    int n() const { return n_; }
    double xi(int i) const { return xi_[static_cast<std::size_t>(i)]; }
    double rho(int i, int j) const {
        if (i > j) std::swap(i, j);
        return rho_tri_[tri_index(i, j)];
    }
    std::uint64_t env_seed() const { return env_seed_; }
    EnvMode mode() const { return mode_; }

    const std::vector<double>& xi_values() const { return xi_; }
    const std::vector<double>& rho_upper_triangle() const { return rho_tri_; }

private:
    std::size_t tri_index(int i, int j) const {
        // row-major upper triangle, 0 <= i < j < n
        const auto ii = static_cast<std::size_t>(i);
        const auto jj = static_cast<std::size_t>(j);
        const auto nn = static_cast<std::size_t>(n_);
        return ii * nn - ii * (ii + 1) / 2 + (jj - ii - 1);
    }

    int n_ = 0;
    std::uint64_t env_seed_ = 0;
    EnvMode mode_ = EnvMode::iid;
    std::vector<double> xi_;
    std::vector<double> rho_tri_;
};

}  // namespace cpsim
