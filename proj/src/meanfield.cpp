#include "cpsim/meanfield.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cpsim {

double critical_lambda(const DistSpec& rho_spec, const DistSpec& xi_spec) {
    validate_spec_or_throw(rho_spec);
    validate_spec_or_throw(xi_spec);
    const double e_rho = expectation_identity(rho_spec);
    if (e_rho <= 0) throw std::invalid_argument("critical_lambda: E[rho] = 0");
    return 1.0 / (e_rho * expectation_reciprocal(xi_spec));
}

double h_value(double x, double lambda, const DistSpec& rho_spec, const DistSpec& xi_spec) {
    if (!(x > 0)) throw std::invalid_argument("h_value: x must be positive");
    if (!(lambda > 0)) throw std::invalid_argument("h_value: lambda must be positive");
    return expectation_resolvent(xi_spec, x, lambda, expectation_identity(rho_spec));
}

double solve_x_star(double lambda, const DistSpec& rho_spec, const DistSpec& xi_spec,
                    double tol) {
    const double lambda_c = critical_lambda(rho_spec, xi_spec);
    if (!(lambda > lambda_c))
        throw std::invalid_argument("solve_x_star: no positive fixed point (lambda <= lambda_c)");

    // h is strictly decreasing with h(0+) > 1, so bracket [lo, hi] with
    // h(lo) > 1 > h(hi) and bisect. Doubling always terminates since h -> 0.
    double lo = 0;
    double hi = 1;
    while (h_value(hi, lambda, rho_spec, xi_spec) >= 1.0) hi *= 2;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (h_value(mid, lambda, rho_spec, xi_spec) > 1.0)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    // Polish with a few extra bisections if the residual has not met tol yet.
    for (int it = 0; it < 128 && std::abs(h_value(x, lambda, rho_spec, xi_spec) - 1.0) > tol;
         ++it) {
        if (h_value(x, lambda, rho_spec, xi_spec) > 1.0)
            lo = x;
        else
            hi = x;
        x = 0.5 * (lo + hi);
    }
    return x;
}

std::vector<double> stable_proportion(double lambda, double x, const ClassProfile& profile,
                                      double e_rho) {
    if (!(x > 0)) throw std::invalid_argument("stable_proportion: x must be positive");
    std::vector<double> f(profile.size());
    const double m = lambda * x * e_rho;
    for (std::size_t i = 0; i < profile.size(); ++i) f[i] = m / (profile.y[i] + m);
    return f;
}

MeanFieldSolution solve_mean_field(double lambda, const DistSpec& rho_spec,
                                   const DistSpec& xi_spec, double tol) {
    MeanFieldSolution sol;
    sol.lambda = lambda;
    sol.lambda_c = critical_lambda(rho_spec, xi_spec);
    sol.e_rho = expectation_identity(rho_spec);
    if (lambda > sol.lambda_c) {
        sol.x_star = solve_x_star(lambda, rho_spec, xi_spec, tol);
        if (xi_spec.is_finite())
            sol.f_star =
                stable_proportion(lambda, *sol.x_star, ClassProfile::from_spec(xi_spec), sol.e_rho);
    }
    return sol;
}

namespace {

void derivative(double lambda, const ClassProfile& profile, double e_rho,
                const std::vector<double>& f, std::vector<double>& df) {
    double x = 0;
    for (std::size_t j = 0; j < profile.size(); ++j) x += f[j] * profile.q[j];
    for (std::size_t i = 0; i < profile.size(); ++i)
        df[i] = -profile.y[i] * f[i] + lambda * e_rho * (1.0 - f[i]) * x;
}

}  // namespace

ProportionTrajectory integrate_mean_field(double lambda, const ClassProfile& profile,
                                          double e_rho, const std::vector<double>& f0, double dt,
                                          double t_end) {
    if (auto err = validate_profile(profile))
        throw std::invalid_argument("integrate_mean_field: " + *err);
    if (f0.size() != profile.size())
        throw std::invalid_argument("integrate_mean_field: f0 size mismatch");
    for (double v : f0)
        if (v < 0 || v > 1) throw std::invalid_argument("integrate_mean_field: f0 outside [0,1]");
    if (!(dt > 0)) throw std::invalid_argument("integrate_mean_field: dt must be positive");
    if (t_end < 0) throw std::invalid_argument("integrate_mean_field: negative horizon");

    const std::size_t k = profile.size();
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-12));

    ProportionTrajectory traj;
    traj.times.reserve(steps + 1);
    traj.f.reserve(steps + 1);
    traj.times.push_back(0);
    traj.f.push_back(f0);

    std::vector<double> f = f0, k1(k), k2(k), k3(k), k4(k), tmp(k);
    for (std::size_t s = 0; s < steps; ++s) {
        const double h = std::min(dt, t_end - traj.times.back());
        derivative(lambda, profile, e_rho, f, k1);
        for (std::size_t i = 0; i < k; ++i) tmp[i] = f[i] + 0.5 * h * k1[i];
        derivative(lambda, profile, e_rho, tmp, k2);
        for (std::size_t i = 0; i < k; ++i) tmp[i] = f[i] + 0.5 * h * k2[i];
        derivative(lambda, profile, e_rho, tmp, k3);
        for (std::size_t i = 0; i < k; ++i) tmp[i] = f[i] + h * k3[i];
        derivative(lambda, profile, e_rho, tmp, k4);
        for (std::size_t i = 0; i < k; ++i)
            f[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);

        for (double v : f) {
            if (!(v >= 0.0 && v <= 1.0)) {
                std::ostringstream msg;
                msg << "integrate_mean_field: step size " << dt
                    << " leaves [0,1] at t=" << traj.times.back() + h << "; retry with dt <= "
                    << dt / 4;
                throw std::invalid_argument(msg.str());
            }
        }
        traj.times.push_back(traj.times.back() + h);
        traj.f.push_back(f);
    }
    return traj;
}

}  // namespace cpsim
