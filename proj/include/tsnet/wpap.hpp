#ifndef TSNET_WPAP_HPP
#define TSNET_WPAP_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expr.hpp"
#include "timescale.hpp"
#include "tscalc.hpp"

namespace tsnet {

/// A positive weight function of t with a cached lower-bound estimate
/// over a diagnostic window.
class Weight {
public:
    explicit Weight(Expr e) : expr_(std::move(e)) {}

    double eval(double t) const {
        double v = expr_.eval(t);
        if (!(v > 0.0))
            throw NonpositiveWeight("weight is not positive at t = " + std::to_string(t));
        return v;
    }

    const Expr& expr() const { return expr_; }

    /// inf estimate over a window; positive value certifies the
    /// lower-bound condition of the U_infinity class on that window.
    double u0_estimate(const TimeScale& ts, double a, double b, double h_grid) const {
        Grid g = build_grid(ts, ts.ceil_member(a), ts.floor_member(b), h_grid);
        auto [hi, lo] = sup_inf_estimate(expr_, g);
        (void)hi;
        return lo;
    }

    /// Max translate ratio u(t+s)/u(t) sampled at the window edges for
    /// each shift; flags weights whose translates explode.
    double max_translate_ratio(double s, double a, double b) const {
        double r1 = eval(a + s) / eval(a);
        double r2 = eval(b + s) / eval(b);
        return std::max(r1, r2);
    }

private:
    Expr expr_;
};

using VectorFn = std::function<std::vector<double>(double)>;

inline double max_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Weighted window mass u(Q_r) with Q_r = [tbar - r, tbar + r] on the
/// scale, tbar the least nonnegative element.
inline double weight_mass(const TimeScale& ts, const Weight& u, double r, double h_grid) {
    if (!(r > 0.0) || !ts.in_translation_set(r)) throw NotInTranslationSet(r);
    double tbar = ts.least_nonnegative();
    Grid g = build_grid(ts, tbar - r, tbar + r, h_grid);
    return delta_integral(g, [&](double t) { return u.eval(t); });
}

/// Weighted ergodic mean of ||g||_inf over Q_r.
inline double ergodic_mean(const TimeScale& ts, const Weight& u, const VectorFn& g, double r,
                           double h_grid) {
    if (!(r > 0.0) || !ts.in_translation_set(r)) throw NotInTranslationSet(r);
    double tbar = ts.least_nonnegative();
    Grid grid = build_grid(ts, tbar - r, tbar + r, h_grid);
    double mass = delta_integral(grid, [&](double t) { return u.eval(t); });
    double num = delta_integral(grid, [&](double t) { return max_norm(g(t)) * u.eval(t); });
    return num / mass;
}

struct ErgodicReport {
    enum class Verdict { Vanishing, NonVanishing, Inconclusive };

    std::vector<double> radii;
    std::vector<double> masses;
    std::vector<double> means;
    double trend_slope = 0.0;
    Verdict verdict = Verdict::Inconclusive;
    double vanish_tol = 1e-3;

    static const char* verdict_name(Verdict v) {
        switch (v) {
            case Verdict::Vanishing: return "vanishing";
            case Verdict::NonVanishing: return "non-vanishing";
            case Verdict::Inconclusive: return "inconclusive";
        }
        return "?";
    }

    void to_csv(std::ostream& os) const {
        os << "r,mass,mean\n";
        for (std::size_t i = 0; i < radii.size(); ++i)
            os << radii[i] << "," << masses[i] << "," << means[i] << "\n";
    }

    nlohmann::json to_json() const {
        return {{"verdict", verdict_name(verdict)},
                {"trend_slope", trend_slope},
                {"vanish_tol", vanish_tol},
                {"radii", radii},
                {"masses", masses},
                {"means", means}};
    }
};

namespace detail {

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

} // namespace detail

/**
 * Finite-radius trend diagnostic for membership of g in the
 * vanishing-mean class.  The limit r -> infinity is operationalized by
 * thresholds: "vanishing" needs monotone decrease over the last half of
 * the radii plus a small final mean; "non-vanishing" needs a clearly
 * positive final mean with a flat trend.
 */
inline ErgodicReport pap0_diagnostic(const TimeScale& ts, const Weight& u, const VectorFn& g,
                                     const std::vector<double>& radii, double h_grid,
                                     double vanish_tol = 1e-3) {
    ErgodicReport rep;
    rep.vanish_tol = vanish_tol;
    for (double r : radii) {
        rep.radii.push_back(r);
        rep.masses.push_back(weight_mass(ts, u, r, h_grid));
        rep.means.push_back(ergodic_mean(ts, u, g, r, h_grid));
    }

    bool all_positive = true;
    for (double m : rep.means)
        if (m <= 0.0) all_positive = false;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
        xs.push_back(all_positive ? std::log(rep.radii[i]) : rep.radii[i]);
        ys.push_back(all_positive ? std::log(rep.means[i]) : rep.means[i]);
    }
    rep.trend_slope = detail::least_squares_slope(xs, ys);

    std::size_t half = rep.means.size() / 2;
    bool decreasing = true;
    for (std::size_t i = half; i + 1 < rep.means.size(); ++i)
        if (rep.means[i + 1] > rep.means[i]) decreasing = false;
    double final_mean = rep.means.empty() ? 0.0 : rep.means.back();

    if (decreasing && final_mean < vanish_tol)
        rep.verdict = ErgodicReport::Verdict::Vanishing;
    else if (final_mean > 10.0 * vanish_tol && rep.trend_slope >= -0.05)
        rep.verdict = ErgodicReport::Verdict::NonVanishing;
    else
        rep.verdict = ErgodicReport::Verdict::Inconclusive;
    return rep;
}

struct TranslationProbe {
    ErgodicReport original;
    ErgodicReport shifted;
    double final_mean_ratio = 0.0;
};

/// Diagnostics for g and its translate g(. - tau); a vanishing verdict
/// for both is numerical evidence for translation invariance of the
/// vanishing-mean class.
inline TranslationProbe translation_invariance_probe(const TimeScale& ts, const Weight& u,
                                                     const VectorFn& g, double tau,
                                                     const std::vector<double>& radii,
                                                     double h_grid, double vanish_tol = 1e-3) {
    if (!ts.in_translation_set(tau)) throw NotInTranslationSet(tau);
    TranslationProbe probe;
    probe.original = pap0_diagnostic(ts, u, g, radii, h_grid, vanish_tol);
    VectorFn shifted = [g, tau](double t) { return g(t - tau); };
    probe.shifted = pap0_diagnostic(ts, u, shifted, radii, h_grid, vanish_tol);
    double a = probe.original.means.back();
    double b = probe.shifted.means.back();
    probe.final_mean_ratio = a == 0.0 ? (b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity())
                                      : b / a;
    return probe;
}

/**
 * Residual diagnostic for Lipschitz composition: the mean of
 * f(phi1 + phi2) - f(phi1), both translated by tau, must vanish at a
 * rate bounded by the Lipschitz constant times the mean of |phi2|.
 */
inline ErgodicReport lipschitz_composition_probe(const Expr& f, const Expr& phi1, const Expr& phi2,
                                                 double tau, const TimeScale& ts, const Weight& u,
                                                 const std::vector<double>& radii, double h_grid,
                                                 double vanish_tol = 1e-3) {
    if (!ts.in_translation_set(tau)) throw NotInTranslationSet(tau);
    VectorFn residual = [&f, &phi1, &phi2, tau](double t) {
        double p1 = phi1.eval(t - tau);
        double p2 = phi2.eval(t - tau);
        return std::vector<double>{f.eval(p1 + p2) - f.eval(p1)};
    };
    return pap0_diagnostic(ts, u, residual, radii, h_grid, vanish_tol);
}

} // namespace tsnet

#endif
