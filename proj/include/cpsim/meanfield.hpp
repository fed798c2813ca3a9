#pragma once

#include <optional>
#include <vector>

#include "cpsim/dist_spec.hpp"

namespace cpsim {

/// Critical infection rate 1 / (E[rho] * E[1/xi]).
double critical_lambda(const DistSpec& rho_spec, const DistSpec& xi_spec);

/// h(x) = E[lambda*E[rho] / (xi + lambda*x*E[rho])], strictly decreasing on (0, inf)
/// with h(0+) = lambda*E[rho]*E[1/xi] and h(inf) = 0; the root of h(x)=1 is x*.
double h_value(double x, double lambda, const DistSpec& rho_spec, const DistSpec& xi_spec);

/// Unique positive root of h(x) = 1 by bisection; requires lambda > critical_lambda.
/// The result satisfies |h(x) - 1| <= tol with final bracket width <= tol.
double solve_x_star(double lambda, const DistSpec& rho_spec, const DistSpec& xi_spec,
                    double tol = 1e-12);

/// Per-class infected proportions f(i) = lambda*x*e_rho / (y_i + lambda*x*e_rho).
std::vector<double> stable_proportion(double lambda, double x, const ClassProfile& profile,
                                      double e_rho);

struct MeanFieldSolution {
    double lambda = 0;
    double lambda_c = 0;
    double e_rho = 0;
    std::optional<double> x_star;                 // present iff lambda > lambda_c
    std::optional<std::vector<double>> f_star;    // present iff x_star set and xi law finite
};

MeanFieldSolution solve_mean_field(double lambda, const DistSpec& rho_spec,
                                   const DistSpec& xi_spec, double tol = 1e-12);

struct ProportionTrajectory {
    std::vector<double> times;            // starts at 0, increasing
    std::vector<std::vector<double>> f;   // f[step][class], each value in [0,1]
};

/// Fixed-step classical fourth-order integration of
///   d/dt f_t(i) = -y_i f_t(i) + lambda*e_rho*(1 - f_t(i)) * sum_j f_t(j) q_j.
/// Throws when the step size is too large to keep the trajectory inside [0,1],
/// reporting a suggested smaller dt.
ProportionTrajectory integrate_mean_field(double lambda, const ClassProfile& profile,
                                          double e_rho, const std::vector<double>& f0, double dt,
                                          double t_end);

}  // namespace cpsim
