#ifndef TSNET_TIMESCALE_HPP
#define TSNET_TIMESCALE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace tsnet {

/**
 * A closed subset of the reals from a finite-descriptor family:
 * the whole real line, a uniform lattice h*Z + offset, or a periodic
 * union of closed cells repeated with period p.  All three carry a
 * nontrivial translation lattice, so jump operators commute with the
 * admissible shifts and the generalized exponential is exactly
 * computable.
 */
class TimeScale {
public:
    enum class Kind { Reals, UniformLattice, PeriodicUnion };

    /// Absolute snap tolerance for membership at cell endpoints.
    static constexpr double snap_tol = 1e-12;

    static TimeScale reals() { return TimeScale(Kind::Reals, 0.0, 0.0, {}); }

    static TimeScale uniform_lattice(double h, double offset = 0.0) {
        if (!(h > 0.0)) throw ConfigError("lattice step must be positive");
        return TimeScale(Kind::UniformLattice, h, offset, {});
    }

    /// Cells are closed intervals [a_i, b_i] inside [0, p), disjoint,
    /// ordered, with a_0 = 0 (canonical form).
    static TimeScale periodic_union(double period, std::vector<std::array<double, 2>> cells) {
        if (!(period > 0.0)) throw ConfigError("period must be positive");
        if (cells.empty()) throw ConfigError("periodic union needs at least one cell");
        if (std::abs(cells.front()[0]) > snap_tol)
            throw ConfigError("first cell must start at 0");
        double prev_end = -1.0;
        for (const auto& c : cells) {
            if (c[0] > c[1]) throw ConfigError("cell start exceeds cell end");
            if (c[0] <= prev_end) throw ConfigError("cells must be disjoint and ordered");
            if (c[1] >= period) throw ConfigError("cells must lie inside [0, period)");
            prev_end = c[1];
        }
        cells.front()[0] = 0.0;
        return TimeScale(Kind::PeriodicUnion, period, 0.0, std::move(cells));
    }

    Kind kind() const { return kind_; }
    double step() const { return param_; }
    double offset() const { return offset_; }
    double period() const { return param_; }
    const std::vector<std::array<double, 2>>& cells() const { return cells_; }

    bool contains(double t) const {
        switch (kind_) {
            case Kind::Reals:
                return true;
            case Kind::UniformLattice: {
                double k = std::round((t - offset_) / param_);
                return std::abs(t - (offset_ + k * param_)) <= snap_tol;
            }
            case Kind::PeriodicUnion: {
                double frac = wrap(t);
                for (const auto& c : cells_)
                    if (frac >= c[0] - snap_tol && frac <= c[1] + snap_tol) return true;
                return false;
            }
        }
        return false;
    }

    /// Forward jump operator: least element strictly above t when t is
    /// right-scattered, t itself when right-dense.
    double sigma(double t) const {
        require_member(t);
        switch (kind_) {
            case Kind::Reals:
                return t;
            case Kind::UniformLattice:
                return snap_lattice(t) + param_;
            case Kind::PeriodicUnion: {
                double base = t - wrap(t);
                double frac = wrap(t);
                for (std::size_t i = 0; i < cells_.size(); ++i) {
                    const auto& c = cells_[i];
                    if (frac >= c[0] - snap_tol && frac < c[1] - snap_tol) return t;  // interior
                    if (std::abs(frac - c[1]) <= snap_tol) {
                        // right endpoint of a cell: jump to the next cell start
                        if (i + 1 < cells_.size()) return base + cells_[i + 1][0];
                        return base + param_;  // wrap to the next period (a_0 = 0)
                    }
                }
                throw NotInTimeScale(t);
            }
        }
        throw NotInTimeScale(t);
    }

    /// Graininess mu(t) = sigma(t) - t.
    double graininess(double t) const {
        double s = sigma(t);
        double m = s - t;
        return m <= snap_tol ? 0.0 : m;
    }

    /// sup of graininess over the whole scale (finite for every
    /// supported family).
    double mu_bar() const {
        switch (kind_) {
            case Kind::Reals:
                return 0.0;
            case Kind::UniformLattice:
                return param_;
            case Kind::PeriodicUnion: {
                double gap = param_ - cells_.back()[1];  // wrap gap to next period
                for (std::size_t i = 0; i + 1 < cells_.size(); ++i)
                    gap = std::max(gap, cells_[i + 1][0] - cells_[i][1]);
                return gap;
            }
        }
        return 0.0;
    }

    /// Membership in the translation lattice Pi.
    bool in_translation_set(double tau) const {
        switch (kind_) {
            case Kind::Reals:
                return true;
            case Kind::UniformLattice: {
                double k = std::round(tau / param_);
                return std::abs(tau - k * param_) <= snap_tol;
            }
            case Kind::PeriodicUnion: {
                double k = std::round(tau / param_);
                return std::abs(tau - k * param_) <= snap_tol;
            }
        }
        return false;
    }

    /// Generator of Pi: 0 means "all reals" (dense lattice).
    double translation_unit() const {
        switch (kind_) {
            case Kind::Reals: return 0.0;
            case Kind::UniformLattice: return param_;
            case Kind::PeriodicUnion: return param_;
        }
        return 0.0;
    }

    /// Greatest member <= x.
    double floor_member(double x) const {
        switch (kind_) {
            case Kind::Reals:
                return x;
            case Kind::UniformLattice:
                return offset_ + std::floor((x - offset_ + snap_tol) / param_) * param_;
            case Kind::PeriodicUnion: {
                double base = param_ * std::floor(x / param_);
                double frac = x - base;
                for (auto it = cells_.rbegin(); it != cells_.rend(); ++it) {
                    if (frac >= (*it)[0] - snap_tol) return base + std::min(frac, (*it)[1]);
                }
                return base - param_ + cells_.back()[1];
            }
        }
        return x;
    }

    /// Least member >= x.
    double ceil_member(double x) const {
        switch (kind_) {
            case Kind::Reals:
                return x;
            case Kind::UniformLattice:
                return offset_ + std::ceil((x - offset_ - snap_tol) / param_) * param_;
            case Kind::PeriodicUnion: {
                double base = param_ * std::floor(x / param_);
                double frac = x - base;
                for (const auto& c : cells_) {
                    if (frac <= c[1] + snap_tol) return base + std::max(frac, c[0]);
                }
                return base + param_;  // first cell of the next period starts at 0
            }
        }
        return x;
    }

    /// min of [0, infinity) intersected with the scale.
    double least_nonnegative() const { return ceil_member(0.0); }

    nlohmann::json to_json() const {
        switch (kind_) {
            case Kind::Reals:
                return {{"kind", "reals"}};
            case Kind::UniformLattice:
                return {{"kind", "lattice"}, {"h", param_}, {"offset", offset_}};
            case Kind::PeriodicUnion: {
                nlohmann::json cells = nlohmann::json::array();
                for (const auto& c : cells_) cells.push_back({c[0], c[1]});
                return {{"kind", "periodic_union"}, {"period", param_}, {"cells", cells}};
            }
        }
        return {};
    }

    static TimeScale from_json(const nlohmann::json& j) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "reals") return reals();
        if (kind == "lattice")
            return uniform_lattice(j.at("h").get<double>(), j.value("offset", 0.0));
        if (kind == "periodic_union") {
            std::vector<std::array<double, 2>> cells;
            for (const auto& c : j.at("cells"))
                cells.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
            return periodic_union(j.at("period").get<double>(), std::move(cells));
        }
        throw ConfigError("unknown time scale kind: " + kind);
    }

    bool operator==(const TimeScale& o) const {
        return kind_ == o.kind_ && param_ == o.param_ && offset_ == o.offset_ && cells_ == o.cells_;
    }

private:
    TimeScale(Kind k, double param, double offset, std::vector<std::array<double, 2>> cells)
        : kind_(k), param_(param), offset_(offset), cells_(std::move(cells)) {}

    void require_member(double t) const {
        if (!contains(t)) throw NotInTimeScale(t);
    }

    double snap_lattice(double t) const {
        double k = std::round((t - offset_) / param_);
        return offset_ + k * param_;
    }

    // Position of t inside its period, in [0, p).  Snaps values within
    // tolerance of p down to avoid a spurious extra period.
    double wrap(double t) const {
        double frac = t - param_ * std::floor(t / param_);
        if (frac >= param_ - snap_tol) frac = 0.0;
        if (frac < 0.0) frac = 0.0;
        return frac;
    }

    Kind kind_;
    double param_;   // lattice step or period; unused for Reals
    double offset_;  // lattice offset
    std::vector<std::array<double, 2>> cells_;
};

/**
 * Ordered discretization of a window [a,b] of a time scale.  Every
 * right-scattered point of the window is a node; right-dense runs are
 * subdivided with step <= h_grid.  `mu[k]` is the graininess of the
 * parent scale at nodes[k].
 */
struct Grid {
    std::vector<double> nodes;
    std::vector<double> mu;
    double h_grid = 0.0;

    std::size_t size() const { return nodes.size(); }
    double front() const { return nodes.front(); }
    double back() const { return nodes.back(); }

    /// Index of the node closest to t, if within tolerance.
    long find_node(double t, double tol = 1e-9) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), t - tol);
        if (it == nodes.end()) return -1;
        if (std::abs(*it - t) <= tol * std::max(1.0, std::abs(t))) return it - nodes.begin();
        return -1;
    }
};

inline Grid build_grid(const TimeScale& ts, double a, double b, double h_grid) {
    if (!(h_grid > 0.0)) throw ConfigError("h_grid must be positive");
    if (!ts.contains(a)) throw NotInTimeScale(a);
    if (!ts.contains(b)) throw NotInTimeScale(b);
    if (!(a < b)) throw EmptyWindow("window [a,b] must satisfy a < b");

    Grid g;
    g.h_grid = h_grid;
    double t = a;
    const double end_tol = TimeScale::snap_tol * std::max(1.0, std::abs(b));
    while (t < b - end_tol) {
        double m = ts.graininess(t);
        if (m > 0.0) {
            g.nodes.push_back(t);
            g.mu.push_back(m);
            t = ts.sigma(t);
        } else {
            // dense run: up to the end of the containing cell or b
            double run_end = b;
            if (ts.kind() == TimeScale::Kind::PeriodicUnion) {
                double base = ts.period() * std::floor(t / ts.period());
                double frac = t - base;
                for (const auto& c : ts.cells()) {
                    if (frac >= c[0] - TimeScale::snap_tol && frac < c[1] - TimeScale::snap_tol) {
                        run_end = std::min(b, base + c[1]);
                        break;
                    }
                }
            }
            int nsub = std::max(1, static_cast<int>(std::ceil((run_end - t) / h_grid - 1e-12)));
            double step = (run_end - t) / nsub;
            for (int i = 0; i < nsub; ++i) {
                g.nodes.push_back(t + i * step);
                g.mu.push_back(0.0);
            }
            t = run_end;
        }
    }
    g.nodes.push_back(b);
    g.mu.push_back(ts.graininess(b));
    if (g.size() < 2) throw EmptyWindow("window contains at most one point");
    return g;
}

} // namespace tsnet

#endif
