#ifndef TSNET_TSCALC_HPP
#define TSNET_TSCALC_HPP

#include <cmath>
#include <utility>

#include "errors.hpp"
#include "timescale.hpp"

namespace tsnet {

/// Circle addition on the regressive group: p + q + mu*p*q.
inline double circle_plus(double p, double q, double mu) { return p + q + mu * p * q; }

/// Circle inverse: -p / (1 + mu*p).  1 + mu*(circle_minus(p)) equals
/// 1/(1 + mu*p), so the inverse of a positive p stays positively
/// regressive.
inline double circle_minus(double p, double mu) {
    double d = 1.0 + mu * p;
    if (std::abs(d) < 1e-12) throw NotRegressive("1 + mu*p vanishes");
    return -p / d;
}

/// Cylinder transformation: log(1 + h*z)/h for h > 0, z for h = 0.
/// Restricted to the real branch; near-singular arguments are rejected.
inline double cylinder(double h, double z) {
    if (h == 0.0) return z;
    double d = 1.0 + h * z;
    if (d < 1e-12) throw NotRegressive("1 + h*z not positive in cylinder transformation");
    return std::log(d) / h;
}

/**
 * Delta integral over a grid: composite trapezoid on dense
 * sub-intervals plus the exact jump term mu(t)*f(t) at every
 * right-scattered node before the window end.  On pure lattices this
 * is the exact finite sum.
 */
template <typename F>
double delta_integral(const Grid& grid, F&& f) {
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        if (grid.mu[k] > 0.0) {
            sum += grid.mu[k] * f(grid.nodes[k]);
        } else {
            double h = grid.nodes[k + 1] - grid.nodes[k];
            sum += 0.5 * h * (f(grid.nodes[k]) + f(grid.nodes[k + 1]));
        }
    }
    return sum;
}

/**
 * Generalized exponential e_p(t,s) = exp(integral of the cylinder
 * transform of p from s to t).  For t < s the reciprocal identity is
 * used so the integration grid keeps its canonical orientation.
 */
template <typename P>
double exp_fn(const TimeScale& ts, P&& p, double t, double s, double h_grid) {
    if (!ts.contains(t)) throw NotInTimeScale(t);
    if (!ts.contains(s)) throw NotInTimeScale(s);
    if (std::abs(t - s) <= TimeScale::snap_tol * std::max(1.0, std::abs(t))) return 1.0;
    if (t < s) return 1.0 / exp_fn(ts, p, s, t, h_grid);
    Grid g = build_grid(ts, s, t, h_grid);
    double integral = delta_integral(g, [&](double tau) { return cylinder(ts.graininess(tau), p(tau)); });
    return std::exp(integral);
}

/// Certified upper bound for e_{circle_minus(a)}(t,s) when a > 0:
/// exp(-a (t-s) / (1 + mu_bar a)).
inline double decay_bound(double a, double mu_bar, double t, double s) {
    return std::exp(-a * (t - s) / (1.0 + mu_bar * a));
}

} // namespace tsnet

#endif
