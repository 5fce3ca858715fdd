#ifndef TSNET_SOLVER_HPP
#define TSNET_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "timescale.hpp"
#include "tscalc.hpp"

namespace tsnet {

/// Vector-valued function stored on a grid.  Sampling snaps to exact
/// nodes, interpolates linearly inside dense runs, and clamps outside
/// the grid (off-grid reads only occur left of a truncated lookback
/// window, where the value is exponentially damped anyway).
struct GridFunction {
    Grid grid;
    std::vector<std::vector<double>> values;  // values[k] is the state at nodes[k]

    int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& v : values)
            for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }

    /// Sup norm restricted to nodes with t >= t_from.
    double sup_norm_from(double t_from) const {
        double m = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (grid.nodes[k] < t_from - 1e-9) continue;
            for (double x : values[k]) m = std::max(m, std::abs(x));
        }
        return m;
    }

    std::vector<double> sample(double t) const {
        if (t <= grid.front()) return values.front();
        if (t >= grid.back()) return values.back();
        auto it = std::lower_bound(grid.nodes.begin(), grid.nodes.end(), t);
        std::size_t k = it - grid.nodes.begin();
        double tol = 1e-9 * std::max(1.0, std::abs(t));
        if (std::abs(grid.nodes[k] - t) <= tol) return values[k];
        if (k > 0 && std::abs(grid.nodes[k - 1] - t) <= tol) return values[k - 1];
        // strictly between nodes k-1 and k: only legal inside a dense run
        double t0 = grid.nodes[k - 1], t1 = grid.nodes[k];
        double w = (t - t0) / (t1 - t0);
        std::vector<double> out(values[k - 1].size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0 - w) * values[k - 1][i] + w * values[k][i];
        return out;
    }

    void to_csv(std::ostream& os) const {
        os << "t,mu";
        for (int i = 1; i <= dim(); ++i) os << ",x_" << i;
        os << "\n";
        for (std::size_t k = 0; k < grid.size(); ++k) {
            os << grid.nodes[k] << "," << grid.mu[k];
            for (double x : values[k]) os << "," << x;
            os << "\n";
        }
    }
};

/// Forward solution of the dynamics together with the initial data it
/// started from.
struct Trajectory {
    Grid grid;             // [t0, t_end] on the scale
    std::vector<std::vector<double>> states;
    GridFunction history;  // initial data on [-gamma_max, t0]

    void to_csv(std::ostream& os) const {
        GridFunction g{grid, states};
        g.to_csv(os);
    }
};

namespace detail {

/// Lookback horizon making the discarded convolution tail <= tail_tol:
/// T = (1 + mu_bar c) / c * ln(F_sup / (tail_tol * c)) for the slowest
/// decay rate c.
inline double lookback_horizon(double c_lo, double mu_bar, double F_sup, double tail_tol,
                               double max_lookback = 1e5) {
    if (!(c_lo > 0.0)) throw NonpositiveDecay("lookback horizon needs a positive decay rate");
    if (F_sup <= tail_tol * c_lo) return 0.0;
    double T = (1.0 + mu_bar * c_lo) / c_lo * std::log(F_sup / (tail_tol * c_lo));
    if (T > max_lookback)
        throw TailBoundUnachievable("required lookback " + std::to_string(T) +
                                    " exceeds maximum " + std::to_string(max_lookback));
    return T;
}

/**
 * One forward pass of the variation-of-constants recursion for
 * x^Delta = -c x + F along a grid, from x(front) = x0.  Scattered
 * steps are the exact discrete dynamics; dense steps use the
 * trapezoidal exponential integrator
 *   E = exp(-h (c_k + c_{k+1}) / 2),  x <- E x + (h/2)(E F_k + F_{k+1}).
 * Throws when a scattered step loses positive regressivity.
 */
template <typename CFn, typename FFn>
std::vector<double> convolve_forward(const Grid& g, CFn&& c_of, FFn&& F_of, double x0,
                                     std::vector<double>* out_per_node = nullptr) {
    double x = x0;
    if (out_per_node) {
        out_per_node->clear();
        out_per_node->reserve(g.size());
        out_per_node->push_back(x);
    }
    double Fk = F_of(g.nodes[0]), ck = c_of(g.nodes[0]);
    for (std::size_t k = 0; k + 1 < g.size(); ++k) {
        double tn = g.nodes[k + 1];
        double Fn = F_of(tn), cn = c_of(tn);
        if (g.mu[k] > 0.0) {
            double fac = 1.0 - g.mu[k] * ck;
            if (fac <= 0.0) throw NotRegressive("1 - mu*c not positive at t = " +
                                                std::to_string(g.nodes[k]));
            x = fac * x + g.mu[k] * Fk;
        } else {
            double h = tn - g.nodes[k];
            double E = std::exp(-0.5 * h * (ck + cn));
            x = E * x + 0.5 * h * (E * Fk + Fn);
        }
        if (out_per_node) out_per_node->push_back(x);
        Fk = Fn;
        ck = cn;
    }
    return {x};
}

} // namespace detail

/**
 * Bounded solution of x_i^Delta = -c_i x_i + F_i at a single time t:
 * the dichotomy convolution integral of e_{-c_i}(t, sigma(s)) F_i(s)
 * over (-infinity, t], truncated at a certified horizon.
 */
template <typename F>
std::vector<double> dichotomy_solution(const TimeScale& ts, const std::vector<Expr>& c, F&& rhs,
                                       double t, double tail_tol, double h_grid,
                                       double max_lookback = 1e5) {
    if (!ts.contains(t)) throw NotInTimeScale(t);
    int n = static_cast<int>(c.size());
    // probe window to estimate the decay floor and the forcing sup
    double probe_len = std::max(10.0, 10.0 * ts.translation_unit());
    Grid probe = build_grid(ts, ts.floor_member(t - probe_len), t, h_grid);
    std::vector<double> c_lo(n, std::numeric_limits<double>::infinity());
    double F_sup = 0.0;
    for (double s : probe.nodes) {
        for (int i = 0; i < n; ++i) c_lo[i] = std::min(c_lo[i], c[i].eval(s));
        F_sup = std::max(F_sup, max_norm(rhs(s)));
    }
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double T = detail::lookback_horizon(c_lo[i], ts.mu_bar(), F_sup, tail_tol, max_lookback);
        if (T == 0.0) continue;
        double start = ts.floor_member(t - T);
        Grid g = build_grid(ts, start, t, h_grid);
        out[i] = detail::convolve_forward(
            g, [&](double s) { return c[i].eval(s); },
            [&](double s) { return rhs(s)[i]; }, 0.0)[0];
    }
    return out;
}

/// Right-hand side of the network dynamics with the state read from a
/// grid function (current value and delayed values alike).
inline std::vector<double> rhs_from_gridfunction(const CnnModel& m, const GridFunction& phi,
                                                 double t) {
    std::vector<double> cur = phi.sample(t);
    std::vector<double> out(m.n);
    for (int i = 0; i < m.n; ++i) {
        double s = -m.c[i].eval(t) * cur[i] + m.I[i].eval(t);
        for (int j = 0; j < m.n; ++j) {
            s += m.a[i][j].eval(t) * m.act[j].f.eval(cur[j]);
            s += m.b[i][j].eval(t) * m.act[j].f.eval(phi.sample(t - m.gamma[i][j])[j]);
        }
        out[i] = s;
    }
    return out;
}

/**
 * Solution operator Phi: builds the forcing
 *   F_i(s) = sum_j a_ij f_j(phi_j(s)) + sum_j b_ij f_j(phi_j(s - gamma_ij)) + I_i(s)
 * from the current iterate and convolves it against the dichotomy
 * kernel in one forward pass per component.  Input and output live on
 * the same grid; nodes deeper than the lookback horizon from the left
 * edge carry the full tail accuracy.
 */
inline GridFunction phi_map(const CnnModel& m, const GridFunction& phi, double tail_tol) {
    (void)tail_tol;  // accuracy is set by the grid's left extension
    const Grid& g = phi.grid;
    if (phi.values.size() != g.size()) throw ConfigError("grid function shape mismatch");

    // precompute the forcing at every node
    std::vector<std::vector<double>> F(g.size(), std::vector<double>(m.n));
    for (std::size_t k = 0; k < g.size(); ++k) {
        double t = g.nodes[k];
        const std::vector<double>& cur = phi.values[k];
        for (int i = 0; i < m.n; ++i) {
            double s = m.I[i].eval(t);
            for (int j = 0; j < m.n; ++j) {
                s += m.a[i][j].eval(t) * m.act[j].f.eval(cur[j]);
                double delayed = m.gamma[i][j] == 0.0 ? cur[j]
                                                      : phi.sample(t - m.gamma[i][j])[j];
                s += m.b[i][j].eval(t) * m.act[j].f.eval(delayed);
            }
            F[k][i] = s;
        }
    }

    GridFunction out;
    out.grid = g;
    out.values.assign(g.size(), std::vector<double>(m.n, 0.0));
    for (int i = 0; i < m.n; ++i) {
        std::vector<double> per_node;
        std::size_t idx = 0;
        detail::convolve_forward(
            g, [&](double t) { return m.c[i].eval(t); },
            [&](double t) {
                // nodes are visited in order; advance the cursor
                while (idx + 1 < g.size() && g.nodes[idx] < t - 1e-12) ++idx;
                return F[idx][i];
            },
            0.0, &per_node);
        for (std::size_t k = 0; k < g.size(); ++k) out.values[k][i] = per_node[k];
    }
    return out;
}

struct FixedPointResult {
    GridFunction solution;   // restricted to the reporting window
    GridFunction extended;   // full internal grid including left context
    double report_from = 0.0;
    int iterations = 0;
    double final_delta = 0.0;
    double posterior_bound = 0.0;  // delta * rho / (1 - rho)
    double rho = 0.0;
    double lookback = 0.0;

    nlohmann::json to_json() const {
        return {{"iterations", iterations},
                {"final_delta", final_delta},
                {"posterior_bound", posterior_bound},
                {"rho", rho},
                {"lookback", lookback},
                {"sup_norm", solution.sup_norm()}};
    }
};

/**
 * Banach iteration for the bounded solution: phi_{k+1} = Phi(phi_k)
 * from phi_0 = 0 on a grid extended left of [a,b] by the lookback
 * horizon plus the largest delay.  Convergence is measured on [a,b].
 */
inline FixedPointResult fixed_point(const CnnModel& m, const HypothesisReport& rep, double a,
                                    double b, double fp_tol, int max_iter, double tail_tol,
                                    double h_grid) {
    FixedPointResult res;
    res.rho = rep.rho();
    if (res.rho >= 1.0) throw NotContractive(res.rho);

    double F_sup = 0.0;
    for (int i = 0; i < m.n; ++i) F_sup = std::max(F_sup, rep.eta[i] + rep.I_sup[i]);
    double c_min = rep.min_c_lo();
    res.lookback = detail::lookback_horizon(c_min, m.ts.mu_bar(), F_sup, tail_tol);
    double a_ext = m.ts.floor_member(a - res.lookback - m.max_delay());
    if (a_ext >= a) a_ext = m.ts.floor_member(a - std::max(1.0, m.ts.translation_unit()));

    Grid g = build_grid(m.ts, a_ext, m.ts.floor_member(b), h_grid);
    GridFunction phi;
    phi.grid = g;
    phi.values.assign(g.size(), std::vector<double>(m.n, 0.0));

    res.report_from = m.ts.ceil_member(a);
    for (int it = 1; it <= max_iter; ++it) {
        GridFunction next = phi_map(m, phi, tail_tol);
        double delta = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g.nodes[k] < res.report_from - 1e-9) continue;
            for (int i = 0; i < m.n; ++i)
                delta = std::max(delta, std::abs(next.values[k][i] - phi.values[k][i]));
        }
        phi = std::move(next);
        res.iterations = it;
        res.final_delta = delta;
        if (delta < fp_tol) break;
        if (it == max_iter) throw MaxIterExceeded(max_iter, delta);
    }
    res.posterior_bound = res.final_delta * res.rho / (1.0 - res.rho);
    res.extended = phi;

    // restriction to the reporting window
    res.solution.grid.h_grid = g.h_grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.nodes[k] < res.report_from - 1e-9) continue;
        res.solution.grid.nodes.push_back(g.nodes[k]);
        res.solution.grid.mu.push_back(g.mu[k]);
        res.solution.values.push_back(phi.values[k]);
    }
    return res;
}

namespace detail {

/// Cubic Lagrange interpolation on the four stored samples nearest t;
/// degrades to linear near the edges.  Exact at nodes.
inline double interp_past(const std::vector<double>& ts_arr,
                          const std::vector<std::vector<double>>& xs, int j, double t) {
    std::size_t n = ts_arr.size();
    auto it = std::lower_bound(ts_arr.begin(), ts_arr.end(), t);
    std::size_t k = it - ts_arr.begin();
    double tol = 1e-9 * std::max(1.0, std::abs(t));
    if (k < n && std::abs(ts_arr[k] - t) <= tol) return xs[k][j];
    if (k > 0 && std::abs(ts_arr[k - 1] - t) <= tol) return xs[k - 1][j];
    if (k == 0) return xs.front()[j];
    if (k >= n) return xs.back()[j];
    std::size_t lo = (k >= 2) ? k - 2 : 0;
    std::size_t hi = std::min(n, lo + 4);
    lo = (hi >= 4) ? hi - 4 : 0;
    double acc = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
        double w = 1.0;
        for (std::size_t q = lo; q < hi; ++q)
            if (q != p) w *= (t - ts_arr[q]) / (ts_arr[p] - ts_arr[q]);
        acc += w * xs[p][j];
    }
    return acc;
}

} // namespace detail

/**
 * Forward integration of the delayed dynamics from initial data on
 * [-gamma_max, t0].  Scattered nodes advance by the exact discrete
 * step x(sigma(t)) = x(t) + mu(t) RHS(t); dense runs use classic
 * fourth-order steps with delayed values read from the stored past by
 * cubic interpolation.  Zero delays read the current stage state.
 */
inline Trajectory simulate(const CnnModel& m, const GridFunction& history, double t_end,
                           double h_grid) {
    m.validate();
    double gmax = m.max_delay();
    double t0 = history.grid.back();
    if (!m.ts.contains(t0)) throw NotInTimeScale(t0);
    if (gmax > 0.0 && history.grid.front() > t0 - gmax + 1e-9)
        throw HistoryIncomplete("history must cover [" + std::to_string(t0 - gmax) + ", " +
                                std::to_string(t0) + "]");
    if (!(t_end > t0)) throw EmptyWindow("t_end must exceed the history right endpoint");

    Trajectory traj;
    traj.history = history;
    traj.grid = build_grid(m.ts, t0, m.ts.floor_member(t_end), h_grid);

    // past samples: history nodes strictly before t0, then the states
    std::vector<double> past_t;
    std::vector<std::vector<double>> past_x;
    for (std::size_t k = 0; k < history.grid.size(); ++k) {
        if (history.grid.nodes[k] >= t0 - 1e-12) break;
        past_t.push_back(history.grid.nodes[k]);
        past_x.push_back(history.values[k]);
    }

    auto delayed = [&](double t, int j) -> double {
        if (past_t.empty() || t < past_t.front() - 1e-9)
            throw DelayedLookupMiss("delayed argument t = " + std::to_string(t) +
                                    " precedes the history window");
        return detail::interp_past(past_t, past_x, j, t);
    };
    auto rhs = [&](double t, const std::vector<double>& x) {
        std::vector<double> out(m.n);
        for (int i = 0; i < m.n; ++i) {
            double s = -m.c[i].eval(t) * x[i] + m.I[i].eval(t);
            for (int j = 0; j < m.n; ++j) {
                s += m.a[i][j].eval(t) * m.act[j].f.eval(x[j]);
                double dv = m.gamma[i][j] == 0.0 ? x[j] : delayed(t - m.gamma[i][j], j);
                s += m.b[i][j].eval(t) * m.act[j].f.eval(dv);
            }
            out[i] = s;
        }
        return out;
    };

    std::vector<double> x = history.values.back();
    traj.states.push_back(x);
    past_t.push_back(traj.grid.nodes[0]);
    past_x.push_back(x);

    for (std::size_t k = 0; k + 1 < traj.grid.size(); ++k) {
        double t = traj.grid.nodes[k];
        double mu = traj.grid.mu[k];
        if (mu > 0.0) {
            std::vector<double> f = rhs(t, x);
            for (int i = 0; i < m.n; ++i) x[i] += mu * f[i];
        } else {
            double h = traj.grid.nodes[k + 1] - t;
            std::vector<double> k1 = rhs(t, x);
            std::vector<double> y(m.n);
            for (int i = 0; i < m.n; ++i) y[i] = x[i] + 0.5 * h * k1[i];
            std::vector<double> k2 = rhs(t + 0.5 * h, y);
            for (int i = 0; i < m.n; ++i) y[i] = x[i] + 0.5 * h * k2[i];
            std::vector<double> k3 = rhs(t + 0.5 * h, y);
            for (int i = 0; i < m.n; ++i) y[i] = x[i] + h * k3[i];
            std::vector<double> k4 = rhs(t + h, y);
            for (int i = 0; i < m.n; ++i)
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        traj.states.push_back(x);
        past_t.push_back(traj.grid.nodes[k + 1]);
        past_x.push_back(x);
    }
    return traj;
}

struct DecayReport {
    std::vector<double> t, diff, bound, ratio;
    double psi_norm = 0.0;
    double worst_ratio = 0.0;
    std::size_t violations = 0;
    bool pass = false;

    void to_csv(std::ostream& os) const {
        os << "t,diff,bound,ratio\n";
        for (std::size_t k = 0; k < t.size(); ++k)
            os << t[k] << "," << diff[k] << "," << bound[k] << "," << ratio[k] << "\n";
    }

    nlohmann::json to_json() const {
        return {{"psi_norm", psi_norm},
                {"worst_ratio", worst_ratio},
                {"violations", violations},
                {"pass", pass}};
    }
};

/**
 * Checks the exponential envelope
 *   ||x(t) - x*(t)|| <= M e_{circle_minus(lambda)}(t, t0) ||psi||_inf
 * node by node.  The exponential factor is accumulated incrementally:
 * a scattered step multiplies by 1/(1 + mu lambda), a dense step by
 * exp(-lambda h); both are exact for constant lambda.
 */
inline DecayReport verify_decay(const Trajectory& x, const Trajectory& x_star,
                                const StabilityCertificate& cert) {
    const Grid& g = x.grid;
    if (g.size() != x_star.grid.size()) throw GridMismatch("trajectory grids differ in size");
    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::abs(g.nodes[k] - x_star.grid.nodes[k]) > 1e-9)
            throw GridMismatch("trajectory grids differ at node " + std::to_string(k));
    if (x.history.grid.size() != x_star.history.grid.size())
        throw GridMismatch("history grids differ");

    DecayReport rep;
    for (std::size_t k = 0; k < x.history.grid.size(); ++k) {
        for (std::size_t i = 0; i < x.history.values[k].size(); ++i)
            rep.psi_norm = std::max(
                rep.psi_norm, std::abs(x.history.values[k][i] - x_star.history.values[k][i]));
    }

    double efac = 1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (k > 0) {
            double step = g.nodes[k] - g.nodes[k - 1];
            if (g.mu[k - 1] > 0.0)
                efac /= 1.0 + g.mu[k - 1] * cert.lambda;
            else
                efac *= std::exp(-cert.lambda * step);
        }
        double d = 0.0;
        for (std::size_t i = 0; i < x.states[k].size(); ++i)
            d = std::max(d, std::abs(x.states[k][i] - x_star.states[k][i]));
        double b = cert.M * efac * rep.psi_norm;
        double r = b == 0.0 ? (d == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : d / b;
        rep.t.push_back(g.nodes[k]);
        rep.diff.push_back(d);
        rep.bound.push_back(b);
        rep.ratio.push_back(r);
        rep.worst_ratio = std::max(rep.worst_ratio, r);
        if (r > 1.0 + 1e-9) ++rep.violations;
    }
    rep.pass = rep.violations == 0;
    return rep;
}

} // namespace tsnet

#endif
