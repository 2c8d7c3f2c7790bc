#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "potential.hpp"
#include "units.hpp"

namespace qtraj {

// One real solution psi and psi' on a grid, with what it solves.
struct SolutionSamples {
    Grid grid;
    double energy = 0.0;
    PotentialSpec spec = PotentialSpec::free();
    UnitSystem units;
    std::vector<double> value;
    std::vector<double> deriv;
    std::vector<double> q;  // (2m/hbar^2)(V - E) at the nodes, psi'' = q psi
};

struct SolutionPair {
    Grid grid;
    double energy = 0.0;
    SolutionSamples sol1, sol2;
    double wronskian = 0.0;

    double wronskian_at(std::size_t i) const {
        return sol1.value[i] * sol2.deriv[i] - sol1.deriv[i] * sol2.value[i];
    }
    double max_wronskian_drift() const {
        double d = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            d = std::max(d, std::abs(wronskian_at(i) - wronskian) / std::abs(wronskian));
        return d;
    }
};

namespace detail {

inline std::vector<double> q_samples(const PotentialSpec& spec, double E, const Grid& g,
                                     const UnitSystem& u) {
    std::vector<double> q(g.size());
    const double kappa = u.kappa(), h2 = g.spacing() * g.spacing();
    for (std::size_t i = 0; i < g.size(); ++i) {
        double v = potential_value(spec, g[i], u);
        if (!std::isfinite(v))
            throw Error(ErrorKind::integration, "schrodinger", "integrate_schrodinger",
                        "non-finite potential value", g[i]);
        q[i] = kappa * (v - E);
        if (h2 * q[i] / 12.0 >= 1.0)
            throw Error(ErrorKind::integration, "schrodinger", "integrate_schrodinger",
                        "grid too coarse for the local wave number (Numerov unstable)", g[i]);
    }
    return q;
}

// Numerov recurrence a_{n+1} psi_{n+1} = 2 b_n psi_n - a_{n-1} psi_{n-1}, stepping by dir.
// psi[i0] and psi[i0+dir] must be set. When rescale is true the sweep renormalizes
// instead of overflowing (node counting only).
inline void numerov_sweep(const std::vector<double>& q, double h, std::vector<double>& psi,
                          std::ptrdiff_t i0, int dir, std::ptrdiff_t i_end, const Grid& g,
                          bool rescale) {
    const double c = h * h / 12.0;
    for (std::ptrdiff_t n = i0 + dir; n != i_end; n += dir) {
        std::ptrdiff_t np = n + dir, nm = n - dir;
        double val = (2.0 * (1.0 + 5.0 * c * q[n]) * psi[n] - (1.0 - c * q[nm]) * psi[nm]) /
                     (1.0 - c * q[np]);
        psi[np] = val;
        if (!std::isfinite(val) || std::abs(val) > 1e250) {
            if (!rescale || !std::isfinite(val))
                throw Error(ErrorKind::integration, "schrodinger", "integrate_schrodinger",
                            "overflow in classically forbidden growth", g[static_cast<std::size_t>(np)]);
            double s = 1.0 / std::abs(val);
            for (std::ptrdiff_t k = i0; k != np + dir; k += dir) psi[k] *= s;
        }
    }
}

// psi at i0 + dir from psi_0, psi'_0 by solving the Numerov step together with the
// one-sided relation  h psi'_0 = psi_1 - psi_0 - h^2 (7 g_0 + 6 g_1 - g_2)/24,  g = q psi.
inline double first_step(const std::vector<double>& q, double h, std::ptrdiff_t i0, int dir,
                         double psi0, double dpsi0) {
    const double hs = dir * h, h2 = h * h;
    const double q0 = q[i0], q1 = q[i0 + dir], q2 = q[i0 + 2 * dir];
    // [A11 A12; A21 A22] (psi1, psi2) = (r1, r2)
    double A11 = 1.0 - h2 * 6.0 * q1 / 24.0, A12 = h2 * q2 / 24.0;
    double r1 = hs * dpsi0 + psi0 * (1.0 + 7.0 * h2 * q0 / 24.0);
    double A21 = -2.0 * (1.0 + 5.0 * h2 * q1 / 12.0), A22 = 1.0 - h2 * q2 / 12.0;
    double r2 = -(1.0 - h2 * q0 / 12.0) * psi0;
    double det = A11 * A22 - A12 * A21;
    return (r1 * A22 - A12 * r2) / det;
}

// psi' from Numerov values: interior companion formula, one-sided at the ends. O(h^4).
inline std::vector<double> derivatives(const std::vector<double>& psi, const std::vector<double>& q,
                                       double h) {
    const std::size_t n = psi.size();
    std::vector<double> d(n);
    const double c = h * h / 6.0;
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = ((1.0 - c * q[i + 1]) * psi[i + 1] - (1.0 - c * q[i - 1]) * psi[i - 1]) / (2.0 * h);
    auto g = [&](std::size_t i) { return q[i] * psi[i]; };
    d[0] = (psi[1] - psi[0]) / h - h * (7.0 * g(0) + 6.0 * g(1) - g(2)) / 24.0;
    d[n - 1] = (psi[n - 1] - psi[n - 2]) / h + h * (7.0 * g(n - 1) + 6.0 * g(n - 2) - g(n - 3)) / 24.0;
    return d;
}

}  // namespace detail

// Integrates psi'' = (2m/hbar^2)(V - E) psi with (psi, psi') imposed at grid index `anchor`
// (default x_min), sweeping outward in both directions.
inline SolutionSamples integrate_schrodinger(const PotentialSpec& spec, double E, const Grid& grid,
                                             double init_value, double init_deriv,
                                             const UnitSystem& units = {}, std::size_t anchor = 0) {
    units.validate();
    if (init_value == 0.0 && init_deriv == 0.0)
        throw Error(ErrorKind::config, "schrodinger", "integrate_schrodinger",
                    "initial conditions are both zero");
    if (anchor >= grid.size())
        throw Error(ErrorKind::config, "schrodinger", "integrate_schrodinger", "anchor outside grid");
    if (anchor != 0 && anchor + 1 != grid.size() && (anchor < 2 || anchor + 3 > grid.size()))
        throw Error(ErrorKind::config, "schrodinger", "integrate_schrodinger",
                    "anchor must be an end point or at least two nodes from the ends");
    SolutionSamples s;
    s.grid = grid;
    s.energy = E;
    s.spec = spec;
    s.units = units;
    s.q = detail::q_samples(spec, E, grid, units);
    const double h = grid.spacing();
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
    const auto a = static_cast<std::ptrdiff_t>(anchor);
    s.value.assign(grid.size(), 0.0);
    s.value[anchor] = init_value;
    if (a + 2 < n) {
        s.value[a + 1] = detail::first_step(s.q, h, a, +1, init_value, init_deriv);
        detail::numerov_sweep(s.q, h, s.value, a, +1, n - 1, grid, false);
    }
    if (a >= 2) {
        s.value[a - 1] = detail::first_step(s.q, h, a, -1, init_value, init_deriv);
        detail::numerov_sweep(s.q, h, s.value, a, -1, 0, grid, false);
    }
    s.deriv = detail::derivatives(s.value, s.q, h);
    s.deriv[anchor] = init_deriv;
    return s;
}

inline SolutionPair pair_from_samples(SolutionSamples sol1, SolutionSamples sol2,
                                      const char* op = "make_pair", double drift_limit = 1e-6) {
    if (sol1.grid.size() != sol2.grid.size() || sol1.grid.x_min() != sol2.grid.x_min() ||
        sol1.grid.x_max() != sol2.grid.x_max())
        throw Error(ErrorKind::config, "schrodinger", op, "solutions live on different grids");
    SolutionPair p;
    p.grid = sol1.grid;
    p.energy = sol1.energy;
    p.sol1 = std::move(sol1);
    p.sol2 = std::move(sol2);
    double scale = 0.0, wsum = 0.0;
    const std::size_t n = p.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
        scale = std::max(scale, std::abs(p.sol1.value[i] * p.sol2.deriv[i]) +
                                    std::abs(p.sol1.deriv[i] * p.sol2.value[i]));
        wsum += p.wronskian_at(i);
    }
    p.wronskian = wsum / static_cast<double>(n);
    if (!(std::abs(p.wronskian) > 1e-12 * scale))
        throw Error(ErrorKind::parameter, "schrodinger", op,
                    "solutions are linearly dependent (zero Wronskian)");
    double drift = p.max_wronskian_drift();
    if (drift > drift_limit)
        throw Error(ErrorKind::integration, "schrodinger", op,
                    "Wronskian drift " + io::fmt(drift) + " exceeds tolerance; use a finer grid");
    return p;
}

// Two solutions from (1,0) and (0,1) at the anchor; sol2 is scaled so W = target.
inline SolutionPair make_pair(const PotentialSpec& spec, double E, const Grid& grid,
                              const UnitSystem& units, double target_wronskian,
                              std::size_t anchor = 0) {
    if (target_wronskian == 0.0 || !std::isfinite(target_wronskian))
        throw Error(ErrorKind::config, "schrodinger", "make_pair", "target Wronskian must be nonzero");
    auto s1 = integrate_schrodinger(spec, E, grid, 1.0, 0.0, units, anchor);
    auto s2 = integrate_schrodinger(spec, E, grid, 0.0, target_wronskian, units, anchor);
    auto p = pair_from_samples(std::move(s1), std::move(s2));
    p.wronskian = target_wronskian;
    double drift = p.max_wronskian_drift();
    if (drift > 1e-6)
        throw Error(ErrorKind::integration, "schrodinger", "make_pair",
                    "Wronskian drift " + io::fmt(drift) + " exceeds tolerance; use a finer grid");
    return p;
}

// Strict sign changes between consecutive samples; zeros inherit the previous sign.
inline std::size_t count_nodes(const std::vector<double>& v) {
    std::size_t nodes = 0;
    int last = 0;
    for (double x : v) {
        int s = x > 0 ? 1 : (x < 0 ? -1 : 0);
        if (s == 0) continue;
        if (last != 0 && s != last) ++nodes;
        last = s;
    }
    return nodes;
}

namespace detail {

// Dirichlet solution from one end, renormalized on the fly.
inline std::vector<double> dirichlet_sweep(const std::vector<double>& q, const Grid& g, bool from_left,
                                           std::size_t stop) {
    const auto n = static_cast<std::ptrdiff_t>(g.size());
    std::vector<double> psi(g.size(), 0.0);
    std::ptrdiff_t i0 = from_left ? 0 : n - 1;
    int dir = from_left ? 1 : -1;
    psi[i0] = 0.0;
    psi[i0 + dir] = g.spacing();
    auto end = static_cast<std::ptrdiff_t>(stop);
    if (end != i0 + dir) numerov_sweep(q, g.spacing(), psi, i0, dir, end, g, true);
    return psi;
}

inline std::size_t sturm_count(const PotentialSpec& spec, double E, const Grid& g, const UnitSystem& u) {
    auto q = q_samples(spec, E, g, u);
    auto psi = dirichlet_sweep(q, g, true, g.size() - 1);
    psi[0] = 0.0;
    return count_nodes(psi);
}

struct Shot {
    std::vector<double> left, right, q;
    std::size_t match = 0;
};

inline std::size_t matching_index(const std::vector<double>& q) {
    std::size_t best = 3;
    for (std::size_t i = 3; i + 4 < q.size(); ++i)
        if (std::abs(q[i]) < std::abs(q[best])) best = i;
    return best;
}

inline Shot shoot(const PotentialSpec& spec, double E, const Grid& g, const UnitSystem& u) {
    Shot s;
    s.q = q_samples(spec, E, g, u);
    s.match = matching_index(s.q);
    s.left = dirichlet_sweep(s.q, g, true, s.match + 2);
    s.right = dirichlet_sweep(s.q, g, false, s.match - 2);
    return s;
}

// sin of the phase-plane angle between left and right solutions at the matching point;
// its sign is that of W(left, right), independent of the matching point.
inline double mismatch(const Shot& s, double h) {
    const std::size_t m = s.match;
    const double c = h * h / 6.0;
    auto d = [&](const std::vector<double>& p) {
        return ((1.0 - c * s.q[m + 1]) * p[m + 1] - (1.0 - c * s.q[m - 1]) * p[m - 1]) / (2.0 * h);
    };
    double L = s.left[m], dL = d(s.left), R = s.right[m], dR = d(s.right);
    return (L * dR - dL * R) / (std::hypot(L, dL) * std::hypot(R, dR));
}

}  // namespace detail

// First n_max bound-state energies by node-count bracketing and mismatch bisection.
inline std::vector<double> find_bound_energies(const PotentialSpec& spec, const Grid& grid,
                                               const UnitSystem& units, std::size_t n_max) {
    units.validate();
    if (n_max < 1)
        throw Error(ErrorKind::config, "schrodinger", "find_bound_energies", "n_max must be >= 1");
    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) vmin = std::min(vmin, potential_value(spec, grid[i], units));
    const double vtop = std::max(potential_value(spec, grid.x_min(), units),
                                 potential_value(spec, grid.x_max(), units));
    auto window = [&] { return "[" + io::fmt(vmin) + ", " + io::fmt(vtop) + "]"; };
    if (!(vtop > vmin))
        throw Error(ErrorKind::search, "schrodinger", "find_bound_energies",
                    "potential not confining on grid; energy window " + window() + " is empty");
    if (detail::sturm_count(spec, vtop, grid, units) < n_max)
        throw Error(ErrorKind::search, "schrodinger", "find_bound_energies",
                    "fewer than n_max bound states inside energy window " + window());
    const double h = grid.spacing();
    std::vector<double> out;
    double lo_floor = vmin;
    for (std::size_t n = 0; n < n_max; ++n) {
        double lo = lo_floor, hi = vtop;
        // smallest E whose Dirichlet solution has n+1 interior nodes
        for (int it = 0; it < 200 && hi - lo > 1e-9 * std::max(1.0, std::abs(hi)); ++it) {
            double mid = 0.5 * (lo + hi);
            if (detail::sturm_count(spec, mid, grid, units) >= n + 1)
                hi = mid;
            else
                lo = mid;
        }
        double glo = detail::mismatch(detail::shoot(spec, lo, grid, units), h);
        double ghi = detail::mismatch(detail::shoot(spec, hi, grid, units), h);
        if (glo * ghi < 0.0) {
            for (int it = 0; it < 100 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::abs(hi) + 1e-300; ++it) {
                double mid = 0.5 * (lo + hi);
                double gm = detail::mismatch(detail::shoot(spec, mid, grid, units), h);
                if (gm == 0.0) { lo = hi = mid; break; }
                if ((gm < 0.0) == (glo < 0.0)) { lo = mid; glo = gm; } else hi = mid;
            }
        }
        double e = 0.5 * (lo + hi);
        out.push_back(e);
        lo_floor = e;
    }
    return out;
}

// Physical bound solution at a known eigenvalue: inward shots matched at the turning
// region, unit L2 norm, positive where it first becomes appreciable.
inline SolutionSamples bound_state_solution(const PotentialSpec& spec, double E, const Grid& grid,
                                            const UnitSystem& units) {
    auto shot = detail::shoot(spec, E, grid, units);
    const std::size_t m = shot.match, n = grid.size();
    if (shot.right[m] == 0.0 || shot.left[m] == 0.0)
        throw Error(ErrorKind::search, "schrodinger", "bound_state_solution",
                    "solution vanishes at the matching point", grid[m]);
    double scale = shot.left[m] / shot.right[m];
    SolutionSamples s;
    s.grid = grid;
    s.energy = E;
    s.spec = spec;
    s.units = units;
    s.q = shot.q;
    s.value.assign(n, 0.0);
    for (std::size_t i = 0; i <= m; ++i) s.value[i] = shot.left[i];
    for (std::size_t i = m + 1; i < n; ++i) s.value[i] = scale * shot.right[i];
    // derivative of each branch from its own values around the match
    std::vector<double> d = detail::derivatives(s.value, s.q, grid.spacing());
    const double c = grid.spacing() * grid.spacing() / 6.0, h = grid.spacing();
    d[m] = ((1.0 - c * s.q[m + 1]) * shot.left[m + 1] - (1.0 - c * s.q[m - 1]) * shot.left[m - 1]) / (2.0 * h);
    s.deriv = std::move(d);
    double norm = 0.0, vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        norm += s.value[i] * s.value[i] * (i == 0 || i + 1 == n ? 0.5 : 1.0);
        vmax = std::max(vmax, std::abs(s.value[i]));
    }
    norm = std::sqrt(norm * h);
    double sign = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        if (std::abs(s.value[i]) > 1e-3 * vmax) {
            sign = s.value[i] > 0 ? 1.0 : -1.0;
            break;
        }
    for (std::size_t i = 0; i < n; ++i) {
        s.value[i] *= sign / norm;
        s.deriv[i] *= sign / norm;
    }
    return s;
}

inline void write_pair_csv(std::ostream& os, const SolutionPair& p) {
    os << "x,theta1,dtheta1,theta2,dtheta2\n";
    for (std::size_t i = 0; i < p.grid.size(); ++i)
        io::write_row(os, {p.grid[i], p.sol1.value[i], p.sol1.deriv[i], p.sol2.value[i], p.sol2.deriv[i]});
}

}  // namespace qtraj
