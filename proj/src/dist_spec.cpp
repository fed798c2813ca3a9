#include "cpsim/dist_spec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cpsim {

namespace {
constexpr double kProbTol = 1e-12;
}

std::string to_string(DistKind kind) {
    switch (kind) {
        case DistKind::constant: return "constant";
        case DistKind::two_point: return "two-point";
        case DistKind::finite_discrete: return "finite-discrete";
        case DistKind::uniform_interval: return "uniform-interval";
    }
    return "?";
}

std::string to_string(DistRole role) {
    return role == DistRole::edge_weight ? "edge-weight" : "recovery-rate";
}

DistSpec DistSpec::constant(double value, DistRole role) {
    DistSpec s;
    s.kind = DistKind::constant;
    s.role = role;
    s.values = {value};
    s.probs = {1.0};
    return s;
}

DistSpec DistSpec::two_point(double v0, double v1, double p0, DistRole role) {
    DistSpec s;
    s.kind = DistKind::two_point;
    s.role = role;
    s.values = {v0, v1};
    s.probs = {p0, 1.0 - p0};
    return s;
}

DistSpec DistSpec::finite(std::vector<double> values, std::vector<double> probs, DistRole role) {
    DistSpec s;
    s.kind = DistKind::finite_discrete;
    s.role = role;
    s.values = std::move(values);
    s.probs = std::move(probs);
    return s;
}

DistSpec DistSpec::uniform(double lo, double hi, DistRole role) {
    DistSpec s;
    s.kind = DistKind::uniform_interval;
    s.role = role;
    s.lo = lo;
    s.hi = hi;
    return s;
}

double DistSpec::min_support() const {
    if (!is_finite()) return lo;  // infimum; support is (lo, hi]
    return *std::min_element(values.begin(), values.end());
}

double DistSpec::max_support() const {
    if (!is_finite()) return hi;
    return *std::max_element(values.begin(), values.end());
}

std::optional<std::string> validate_spec(const DistSpec& spec, double xi_bound) {
    if (spec.is_finite()) {
        const std::size_t expected =
            spec.kind == DistKind::constant ? 1 : (spec.kind == DistKind::two_point ? 2 : 0);
        if (expected != 0 && spec.values.size() != expected)
            return to_string(spec.kind) + " kind requires " + std::to_string(expected) + " atoms";
        if (spec.values.empty()) return "no atoms";
        if (spec.values.size() != spec.probs.size()) return "values/probs length mismatch";
        double mass = 0;
        for (double p : spec.probs) {
            if (p < 0) return "negative prob";
            mass += p;
        }
        if (std::abs(mass - 1.0) > kProbTol) return "probs sum != 1";
        for (std::size_t i = 0; i < spec.values.size(); ++i)
            for (std::size_t j = i + 1; j < spec.values.size(); ++j)
                if (spec.values[i] == spec.values[j]) return "duplicate atom values";
    } else {
        if (!(spec.lo < spec.hi)) return "uniform-interval requires lo < hi";
    }

    if (spec.role == DistRole::edge_weight) {
        if (spec.min_support() < 0 || spec.max_support() > 1)
            return "edge-weight support not within [0,1]";
        if (spec.is_finite()) {
            double positive_mass = 0;
            for (std::size_t i = 0; i < spec.values.size(); ++i)
                if (spec.values[i] > 0) positive_mass += spec.probs[i];
            if (positive_mass <= 0) return "P(rho>0)=0";
        }
        // A half-open (lo, hi] interval inside [0,1] always carries positive mass above 0.
    } else {
        if (spec.is_finite()) {
            if (spec.min_support() < 1) return "recovery-rate support below 1";
        } else {
            if (spec.lo < 1) return "recovery-rate support below 1";
        }
        if (spec.max_support() > xi_bound) return "recovery-rate support above M";
    }
    return std::nullopt;
}

void validate_spec_or_throw(const DistSpec& spec, double xi_bound) {
    if (auto err = validate_spec(spec, xi_bound))
        throw std::invalid_argument("invalid DistSpec: " + *err);
}

namespace {

void require_recovery_role(const DistSpec& spec, const char* what) {
    if (spec.role != DistRole::recovery_rate)
        throw std::invalid_argument(std::string(what) + " transform requires recovery-rate role");
}

}  // namespace

double expectation_identity(const DistSpec& spec) {
    if (spec.is_finite()) {
        double e = 0;
        for (std::size_t i = 0; i < spec.values.size(); ++i) e += spec.probs[i] * spec.values[i];
        return e;
    }
    return 0.5 * (spec.lo + spec.hi);
}

double expectation_reciprocal(const DistSpec& spec) {
    require_recovery_role(spec, "reciprocal");
    if (spec.is_finite()) {
        double e = 0;
        for (std::size_t i = 0; i < spec.values.size(); ++i) e += spec.probs[i] / spec.values[i];
        return e;
    }
    return std::log(spec.hi / spec.lo) / (spec.hi - spec.lo);
}

double expectation_resolvent(const DistSpec& spec, double x, double lambda, double e_rho) {
    require_recovery_role(spec, "resolvent");
    const double shift = lambda * x * e_rho;
    const double scale = lambda * e_rho;
    if (spec.is_finite()) {
        double e = 0;
        for (std::size_t i = 0; i < spec.values.size(); ++i)
            e += spec.probs[i] * scale / (spec.values[i] + shift);
        return e;
    }
    return scale * std::log((spec.hi + shift) / (spec.lo + shift)) / (spec.hi - spec.lo);
}

DistSpec discretize(const DistSpec& spec, int m) {
    if (spec.role != DistRole::recovery_rate)
        throw std::invalid_argument("discretize requires recovery-rate role");
    if (m <= 0) throw std::invalid_argument("discretize: m must be positive");
    const double md = static_cast<double>(m);

    std::map<double, double> atoms;  // grid value -> mass, ordered
    if (spec.is_finite()) {
        for (std::size_t i = 0; i < spec.values.size(); ++i)
            atoms[std::ceil(spec.values[i] * md) / md] += spec.probs[i];
    } else {
        // Preimage of grid point j/m inside (lo, hi] is (max(lo,(j-1)/m), min(hi,j/m)].
        const auto j_min = static_cast<long long>(std::floor(spec.lo * md)) + 1;
        const auto j_max = static_cast<long long>(std::ceil(spec.hi * md));
        const double width = spec.hi - spec.lo;
        for (long long j = j_min; j <= j_max; ++j) {
            const double left = std::max(spec.lo, static_cast<double>(j - 1) / md);
            const double right = std::min(spec.hi, static_cast<double>(j) / md);
            if (right > left) atoms[static_cast<double>(j) / md] += (right - left) / width;
        }
    }

    DistSpec out;
    out.kind = DistKind::finite_discrete;
    out.role = DistRole::recovery_rate;
    for (const auto& [v, p] : atoms) {
        out.values.push_back(v);
        out.probs.push_back(p);
    }
    return out;
}

double sample_value(const DistSpec& spec, RandomStream& rng) {
    if (spec.is_finite()) {
        const double u = rng.uniform01();
        double acc = 0;
        for (std::size_t i = 0; i < spec.values.size(); ++i) {
            acc += spec.probs[i];
            if (u < acc) return spec.values[i];
        }
        return spec.values.back();
    }
    return spec.lo + (spec.hi - spec.lo) * rng.uniform_open01();
}

void to_json(nlohmann::json& j, const DistSpec& spec) {
    j = nlohmann::json{{"kind", to_string(spec.kind)}, {"role", to_string(spec.role)}};
    if (spec.is_finite()) {
        j["values"] = spec.values;
        j["probs"] = spec.probs;
    } else {
        j["lo"] = spec.lo;
        j["hi"] = spec.hi;
    }
}

void from_json(const nlohmann::json& j, DistSpec& spec) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant")
        spec.kind = DistKind::constant;
    else if (kind == "two-point")
        spec.kind = DistKind::two_point;
    else if (kind == "finite-discrete")
        spec.kind = DistKind::finite_discrete;
    else if (kind == "uniform-interval")
        spec.kind = DistKind::uniform_interval;
    else
        throw std::invalid_argument("unknown DistSpec kind: " + kind);

    const std::string role = j.at("role").get<std::string>();
    if (role == "edge-weight")
        spec.role = DistRole::edge_weight;
    else if (role == "recovery-rate")
        spec.role = DistRole::recovery_rate;
    else
        throw std::invalid_argument("unknown DistSpec role: " + role);

    spec.values.clear();
    spec.probs.clear();
    spec.lo = spec.hi = 0;
    if (spec.kind == DistKind::uniform_interval) {
        spec.lo = j.at("lo").get<double>();
        spec.hi = j.at("hi").get<double>();
    } else {
        spec.values = j.at("values").get<std::vector<double>>();
        if (j.contains("probs"))
            spec.probs = j.at("probs").get<std::vector<double>>();
        else if (spec.kind == DistKind::constant)
            spec.probs = {1.0};
        else
            throw std::invalid_argument("DistSpec: probs required for finite kinds");
    }
}

ClassProfile ClassProfile::from_spec(const DistSpec& xi_spec) {
    if (!xi_spec.is_finite())
        throw std::invalid_argument("ClassProfile requires a finite recovery-rate law");
    if (xi_spec.role != DistRole::recovery_rate)
        throw std::invalid_argument("ClassProfile requires recovery-rate role");
    std::map<double, double> atoms;
    for (std::size_t i = 0; i < xi_spec.values.size(); ++i)
        atoms[xi_spec.values[i]] += xi_spec.probs[i];
    ClassProfile p;
    for (const auto& [v, q] : atoms) {
        p.y.push_back(v);
        p.q.push_back(q);
    }
    return p;
}

int ClassProfile::class_of(double value) const {
    auto it = std::lower_bound(y.begin(), y.end(), value);
    if (it != y.end() && *it == value) return static_cast<int>(it - y.begin());
    return -1;
}

std::optional<std::string> validate_profile(const ClassProfile& profile) {
    if (profile.y.empty()) return "profile has no classes";
    if (profile.y.size() != profile.q.size()) return "y/q length mismatch";
    double mass = 0;
    for (double q : profile.q) {
        if (q < 0) return "negative class probability";
        mass += q;
    }
    if (std::abs(mass - 1.0) > kProbTol) return "class probs sum != 1";
    for (std::size_t i = 1; i < profile.y.size(); ++i)
        if (!(profile.y[i - 1] < profile.y[i])) return "class rates not strictly increasing";
    return std::nullopt;
}

}  // namespace cpsim
