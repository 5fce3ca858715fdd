#ifndef TSNET_MODEL_HPP
#define TSNET_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "expr.hpp"
#include "timescale.hpp"
#include "tscalc.hpp"
#include "wpap.hpp"

namespace tsnet {

struct Activation {
    Expr f;             // function of x
    double lipschitz;   // alpha_j
    double f0;          // f(0)
};

/**
 * A delayed cellular network instance on a time scale:
 *   x_i^Delta = -c_i(t) x_i + sum_j a_ij(t) f_j(x_j(t))
 *             + sum_j b_ij(t) f_j(x_j(t - gamma_ij)) + I_i(t).
 * Delays must lie in the translation lattice so delayed arguments stay
 * on the scale.
 */
struct CnnModel {
    int n = 0;
    TimeScale ts = TimeScale::reals();
    std::vector<Expr> c;                     // decay rates, functions of t
    std::vector<std::vector<Expr>> a, b;     // n x n connection weights
    std::vector<Expr> I;                     // external inputs
    std::vector<std::vector<double>> gamma;  // n x n nonnegative delays
    std::vector<Activation> act;

    double max_delay() const {
        double g = 0.0;
        for (const auto& row : gamma)
            for (double v : row) g = std::max(g, v);
        return g;
    }

    void validate() const {
        auto dim_ok = [&](std::size_t s) { return s == static_cast<std::size_t>(n); };
        if (n <= 0 || !dim_ok(c.size()) || !dim_ok(I.size()) || !dim_ok(a.size()) ||
            !dim_ok(b.size()) || !dim_ok(gamma.size()) || !dim_ok(act.size()))
            throw ConfigError("model arrays inconsistent with n");
        for (int i = 0; i < n; ++i)
            if (!dim_ok(a[i].size()) || !dim_ok(b[i].size()) || !dim_ok(gamma[i].size()))
                throw ConfigError("model matrix rows inconsistent with n");
        for (const auto& row : gamma)
            for (double g : row) {
                if (g < 0.0) throw ConfigError("delays must be nonnegative");
                if (!ts.in_translation_set(g)) throw NotInTranslationSet(g);
            }
    }
};

struct HypothesisReport {
    // per-i constants
    std::vector<double> c_lo, c_hi, I_sup, eta, Pi;
    std::vector<std::vector<double>> a_sup, b_sup;
    double L = 0.0, r0 = 1.0;
    // margins: r0 - max(eta_i/c_lo_i) - L and min(c_lo) - max(Pi)
    double margin_radius = 0.0, margin_contraction = 0.0;
    bool h1 = false, h2 = false, h3 = false, h4 = false, h5 = false;
    // the paper's literal (H5) uses min over Pi; both forms are reported
    bool h5_paper_form = false;
    double window_a = 0.0, window_b = 0.0, h_grid = 0.0;
    bool pattern_exact = true;  // false when any sup/inf fell back to sampling
    std::string failure_note;

    bool all_pass() const { return h1 && h2 && h3 && h4 && h5; }

    double max_eta_over_c() const {
        double m = 0.0;
        for (std::size_t i = 0; i < eta.size(); ++i) m = std::max(m, eta[i] / c_lo[i]);
        return m;
    }
    double min_c_lo() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : c_lo) m = std::min(m, v);
        return m;
    }
    double max_Pi() const {
        double m = 0.0;
        for (double v : Pi) m = std::max(m, v);
        return m;
    }
    /// Contraction factor of the solution operator.
    double rho() const {
        double m = 0.0;
        for (std::size_t i = 0; i < Pi.size(); ++i) m = std::max(m, Pi[i] / c_lo[i]);
        return m;
    }

    nlohmann::json to_json() const {
        return {{"c_inf", c_lo},         {"c_sup", c_hi},
                {"I_sup", I_sup},        {"a_sup", a_sup},
                {"b_sup", b_sup},        {"eta", eta},
                {"Pi", Pi},              {"L", L},
                {"r0", r0},              {"margin_radius", margin_radius},
                {"margin_contraction", margin_contraction},
                {"H1", h1},              {"H2", h2},
                {"H3", h3},              {"H4", h4},
                {"H5", h5},              {"H5_paper_form", h5_paper_form},
                {"window", {window_a, window_b}},
                {"h_grid", h_grid},      {"pattern_exact", pattern_exact},
                {"note", failure_note}};
    }

    std::string render_text() const {
        std::ostringstream os;
        os.precision(12);
        auto line = [&](const char* name, bool ok, const std::string& detail) {
            os << "  " << name << ": " << (ok ? "pass" : "FAIL") << "  " << detail << "\n";
        };
        os << "hypothesis report (window [" << window_a << ", " << window_b << "], h_grid "
           << h_grid << (pattern_exact ? ", pattern sups" : ", sampled sups") << ")\n";
        for (std::size_t i = 0; i < c_lo.size(); ++i)
            os << "  i=" << i + 1 << ": c_inf=" << c_lo[i] << " c_sup=" << c_hi[i]
               << " I_sup=" << I_sup[i] << " eta=" << eta[i] << " Pi=" << Pi[i] << "\n";
        os << "  L=" << L << " r0=" << r0 << "\n";
        line("H1 (Lipschitz activations)", h1, "");
        line("H2 (bounded coefficients)", h2, "");
        line("H3 (positive regressive decay, delays in Pi)", h3, "");
        line("H4 (bounded inputs)", h4, "");
        line("H5 (radius + contraction)", h5,
             "max(eta/c_inf)+L=" + std::to_string(max_eta_over_c() + L) +
                 " <= r0, max(Pi)=" + std::to_string(max_Pi()) +
                 " < min(c_inf)=" + std::to_string(min_c_lo()));
        if (!failure_note.empty()) os << "  note: " << failure_note << "\n";
        return os.str();
    }
};

struct StabilityCertificate {
    double lambda = 0.0;   // certified decay rate, circle_minus(lambda) positively regressive
    double M = 1.0;        // overshoot constant
    std::vector<double> eps;  // per-i roots of H_i
    double mu_bar = 0.0;
    double gamma_max = 0.0;
    bool zero_coupling = false;

    nlohmann::json to_json() const {
        return {{"lambda", lambda}, {"M", M},      {"eps", eps},
                {"mu_bar", mu_bar}, {"gamma", gamma_max}, {"zero_coupling", zero_coupling}};
    }
};

namespace detail {

/// sup/inf of an expression, preferring the exact affine-in-trig
/// pattern and falling back to window sampling.
inline std::pair<double, double> sup_inf(const Expr& e, const Grid& window_grid,
                                         bool use_pattern, bool* exact) {
    if (use_pattern) {
        if (auto r = e.analytic_range()) return {r->second, r->first};  // (hi, lo) -> (sup, inf)
    }
    if (exact) *exact = false;
    auto [hi, lo] = sup_inf_estimate(e, window_grid);
    return {hi, lo};
}

inline double sup_abs(const Expr& e, const Grid& window_grid, bool use_pattern, bool* exact) {
    auto [hi, lo] = sup_inf(e, window_grid, use_pattern, exact);
    return std::max(std::abs(hi), std::abs(lo));
}

} // namespace detail

/**
 * Derived hypothesis constants: per-i inf/sup of the decay rates, sup
 * of inputs and connection weights, and the aggregates eta_i, Pi_i, L.
 */
inline HypothesisReport derived_constants(const CnnModel& m, double r0, double window_a,
                                          double window_b, double h_grid,
                                          bool use_pattern = true) {
    m.validate();
    HypothesisReport rep;
    rep.r0 = r0;
    rep.window_a = window_a;
    rep.window_b = window_b;
    rep.h_grid = h_grid;

    Grid wg = build_grid(m.ts, m.ts.ceil_member(window_a), m.ts.floor_member(window_b), h_grid);

    for (int i = 0; i < m.n; ++i) {
        auto [chi, clo] = detail::sup_inf(m.c[i], wg, use_pattern, &rep.pattern_exact);
        rep.c_lo.push_back(clo);
        rep.c_hi.push_back(chi);
        if (!(clo > 0.0))
            throw NonpositiveDecay("inf of c_" + std::to_string(i + 1) + " is not positive");
        rep.I_sup.push_back(detail::sup_abs(m.I[i], wg, use_pattern, &rep.pattern_exact));
    }
    rep.a_sup.assign(m.n, std::vector<double>(m.n, 0.0));
    rep.b_sup.assign(m.n, std::vector<double>(m.n, 0.0));
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j) {
            rep.a_sup[i][j] = detail::sup_abs(m.a[i][j], wg, use_pattern, &rep.pattern_exact);
            rep.b_sup[i][j] = detail::sup_abs(m.b[i][j], wg, use_pattern, &rep.pattern_exact);
        }

    for (int i = 0; i < m.n; ++i) {
        double eta = 0.0, Pi = 0.0;
        for (int j = 0; j < m.n; ++j) {
            double w = rep.a_sup[i][j] + rep.b_sup[i][j];
            eta += w * (std::abs(m.act[j].f0) + m.act[j].lipschitz * r0);
            Pi += w * m.act[j].lipschitz;
        }
        rep.eta.push_back(eta);
        rep.Pi.push_back(Pi);
        rep.L = std::max(rep.L, rep.I_sup[i] / rep.c_lo[i]);
    }
    rep.margin_radius = r0 - rep.max_eta_over_c() - rep.L;
    rep.margin_contraction = rep.min_c_lo() - rep.max_Pi();
    return rep;
}

/**
 * Full hypothesis check.  H1 is a sampled Lipschitz test on a probe
 * lattice; H3 additionally requires positive regressivity of -c_i at
 * every window node; H5 uses the per-i contraction condition
 * max Pi_i < min c_inf_i (the paper's literal min-form is reported
 * alongside).
 */
inline HypothesisReport check_hypotheses(const CnnModel& m, double r0, double window_a,
                                         double window_b, double h_grid,
                                         bool use_pattern = true) {
    HypothesisReport rep = derived_constants(m, r0, window_a, window_b, h_grid, use_pattern);

    // H1: |f(x) - f(y)| <= alpha |x - y| on a probe lattice
    rep.h1 = true;
    const int probe_n = 41;
    double lo = -r0 - 1.0, hi = r0 + 1.0;
    for (int j = 0; j < m.n && rep.h1; ++j) {
        for (int p = 0; p < probe_n && rep.h1; ++p)
            for (int q = p + 1; q < probe_n; ++q) {
                double x = lo + (hi - lo) * p / (probe_n - 1);
                double y = lo + (hi - lo) * q / (probe_n - 1);
                double d = std::abs(m.act[j].f.eval(x) - m.act[j].f.eval(y));
                if (d > m.act[j].lipschitz * std::abs(x - y) * (1.0 + 1e-9)) {
                    rep.h1 = false;
                    rep.failure_note = "H1: activation " + std::to_string(j + 1) +
                                       " violates its Lipschitz constant";
                    break;
                }
            }
    }

    // H2: coefficients evaluate and stay finite on the window
    rep.h2 = true;
    try {
        for (double v : rep.c_lo)
            if (!std::isfinite(v)) rep.h2 = false;
        for (const auto& row : rep.a_sup)
            for (double v : row)
                if (!std::isfinite(v)) rep.h2 = false;
        for (const auto& row : rep.b_sup)
            for (double v : row)
                if (!std::isfinite(v)) rep.h2 = false;
    } catch (const DomainError&) {
        rep.h2 = false;
    }

    // H3: positive decay inf, -c_i positively regressive, delays in Pi
    rep.h3 = true;
    Grid wg = build_grid(m.ts, m.ts.ceil_member(window_a), m.ts.floor_member(window_b), h_grid);
    for (int i = 0; i < m.n && rep.h3; ++i) {
        if (!(rep.c_lo[i] > 0.0)) rep.h3 = false;
        for (std::size_t k = 0; k < wg.size(); ++k) {
            if (1.0 - wg.mu[k] * m.c[i].eval(wg.nodes[k]) <= 0.0) {
                rep.h3 = false;
                rep.failure_note = "H3: -c_" + std::to_string(i + 1) +
                                   " not positively regressive at t = " +
                                   std::to_string(wg.nodes[k]);
                break;
            }
        }
    }
    for (const auto& row : m.gamma)
        for (double g : row)
            if (!m.ts.in_translation_set(g)) rep.h3 = false;

    // H4: inputs finite on the window (the vanishing-mean diagnostic is
    // separate evidence, not part of the boolean)
    rep.h4 = true;
    for (double v : rep.I_sup)
        if (!std::isfinite(v)) rep.h4 = false;

    rep.h5 = (rep.margin_radius >= 0.0) && (rep.margin_contraction > 0.0);
    double min_Pi = *std::min_element(rep.Pi.begin(), rep.Pi.end());
    rep.h5_paper_form = (rep.margin_radius >= 0.0) && (min_Pi < rep.min_c_lo());
    return rep;
}

/**
 * Exponential-stability certificate: per-i roots eps_i of
 *   H_i(eps) = c_inf_i - eps - sum_j alpha_j (a_sup_ij e^{eps mu_bar}
 *              + b_sup_ij e^{eps (gamma + mu_bar)}),
 * located by bisection (H_i is strictly decreasing, H_i(0) = c_inf_i -
 * Pi_i), lambda = safety_factor * min eps_i and overshoot
 * M = max_i c_inf_i / Pi_i.
 */
inline StabilityCertificate stability_certificate(const CnnModel& m, const HypothesisReport& rep,
                                                  double safety_factor = 0.5) {
    StabilityCertificate cert;
    cert.mu_bar = m.ts.mu_bar();
    cert.gamma_max = m.max_delay();

    auto H = [&](int i, double eps) {
        double s = 0.0;
        for (int j = 0; j < m.n; ++j)
            s += m.act[j].lipschitz * (rep.a_sup[i][j] * std::exp(eps * cert.mu_bar) +
                                       rep.b_sup[i][j] *
                                           std::exp(eps * (cert.gamma_max + cert.mu_bar)));
        return rep.c_lo[i] - eps - s;
    };

    for (int i = 0; i < m.n; ++i) {
        if (H(i, 0.0) <= 0.0)
            throw CertificateUnavailable("H_" + std::to_string(i + 1) +
                                         "(0) <= 0: contraction condition fails");
        double lo = 0.0, hi = rep.c_lo[i];
        if (H(i, hi) > 0.0) {
            cert.eps.push_back(hi);  // uncoupled row: root sits at c_inf_i
            continue;
        }
        while (hi - lo > 1e-10) {
            double mid = 0.5 * (lo + hi);
            (H(i, mid) > 0.0 ? lo : hi) = mid;
        }
        cert.eps.push_back(0.5 * (lo + hi));
    }

    double eps_min = *std::min_element(cert.eps.begin(), cert.eps.end());
    cert.lambda = safety_factor * eps_min;

    double M = 0.0;
    bool any_coupling = false;
    for (int i = 0; i < m.n; ++i) {
        if (rep.Pi[i] > 0.0) {
            any_coupling = true;
            M = std::max(M, rep.c_lo[i] / rep.Pi[i]);
        }
    }
    if (!any_coupling) {
        cert.zero_coupling = true;
        cert.M = 1.0 + 1e-9;
    } else {
        cert.M = M;
    }
    return cert;
}

} // namespace tsnet

#endif
