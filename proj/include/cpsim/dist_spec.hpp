#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cpsim/rng.hpp"

namespace cpsim {

enum class DistKind { constant, two_point, finite_discrete, uniform_interval };
enum class DistRole { edge_weight, recovery_rate };

std::string to_string(DistKind kind);
std::string to_string(DistRole role);

/// Finite description of the law of an edge weight rho (support in [0,1]) or a
/// recovery rate xi (support in [1,M]). Uniform intervals are half-open (lo, hi]
/// so that ceiling discretization produces exact atom masses.
struct DistSpec {
    DistKind kind = DistKind::constant;
    DistRole role = DistRole::edge_weight;
    std::vector<double> values;  // atoms, finite kinds only
    std::vector<double> probs;   // atom masses, finite kinds only
    double lo = 0;               // uniform_interval only
    double hi = 0;

    static DistSpec constant(double value, DistRole role);
    static DistSpec two_point(double v0, double v1, double p0, DistRole role);
    static DistSpec finite(std::vector<double> values, std::vector<double> probs, DistRole role);
    static DistSpec uniform(double lo, double hi, DistRole role);

    bool is_finite() const { return kind != DistKind::uniform_interval; }
    double min_support() const;
    double max_support() const;
};

/// Checks all DistSpec invariants; returns the first violated invariant by name,
/// or nullopt when the spec is valid. For recovery rates the upper bound M
/// defaults to the spec's own (finite) supremum; pass an explicit M to tighten.
std::optional<std::string> validate_spec(
    const DistSpec& spec, double xi_bound = std::numeric_limits<double>::infinity());

void validate_spec_or_throw(const DistSpec& spec,
                            double xi_bound = std::numeric_limits<double>::infinity());

double expectation_identity(const DistSpec& spec);

/// E[1/xi]; recovery-rate role only.
double expectation_reciprocal(const DistSpec& spec);

/// E[lambda*e_rho / (xi + lambda*x*e_rho)]; recovery-rate role only.
double expectation_resolvent(const DistSpec& spec, double x, double lambda, double e_rho);

/// Push-forward of a recovery-rate law under xi -> ceil(xi*m)/m. The result is
/// finite-discrete, dominates the input, and its mean is within 1/m of the input mean.
DistSpec discretize(const DistSpec& spec, int m);

double sample_value(const DistSpec& spec, RandomStream& rng);

void to_json(nlohmann::json& j, const DistSpec& spec);
void from_json(const nlohmann::json& j, DistSpec& spec);

/// The class decomposition {y_i, q_i} of a finite recovery-rate law, with the
/// rates sorted strictly increasing and equal atoms merged.
struct ClassProfile {
    std::vector<double> y;
    std::vector<double> q;

    std::size_t size() const { return y.size(); }
    static ClassProfile from_spec(const DistSpec& xi_spec);
    /// Index of the class whose rate equals value exactly; -1 if absent.
    int class_of(double value) const;
};

std::optional<std::string> validate_profile(const ClassProfile& profile);

}  // namespace cpsim
