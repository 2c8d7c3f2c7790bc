#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "reduced_action.hpp"
#include "schrodinger.hpp"

namespace qtraj {

// theta = phi Int dx/phi^2 through the start point x_s = argmax|phi|, i.e. theta(x_s) = 0 and
// theta'(x_s) = 1/phi(x_s), so W(phi, theta) = 1. Integrated as a Schrodinger solution anchored
// at x_s (it grows outward in both directions, which keeps the sweep stable).
inline SolutionSamples partner_solution(const SolutionSamples& phys) {
    const Grid& g = phys.grid;
    const std::size_t n = g.size();
    double vmax = 0, dmax = 0;
    std::size_t is = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(phys.value[i]) > vmax) { vmax = std::abs(phys.value[i]); is = i; }
        dmax = std::max(dmax, std::abs(phys.deriv[i]));
    }
    if (vmax == 0.0)
        throw Error(ErrorKind::parameter, "quantization", "partner_solution", "physical solution vanishes");
    for (std::size_t i : {std::size_t{0}, n - 1}) {
        bool zero = std::abs(phys.value[i]) < 1e-8 * vmax;
        if (zero && std::abs(phys.deriv[i]) > 1e-6 * dmax)
            throw Error(ErrorKind::domain, "quantization", "partner_solution",
                        "physical solution has a node at the grid boundary", g[i]);
    }
    if (is < 2 || is + 3 > n)
        throw Error(ErrorKind::domain, "quantization", "partner_solution",
                    "maximum of the physical solution too close to the boundary", g[is]);
    return integrate_schrodinger(phys.spec, phys.energy, g, 0.0, 1.0 / phys.value[is], phys.units, is);
}

struct BoundStateRecord {
    std::size_t index = 0;
    double energy = 0;
    SolutionSamples physical, partner;
    std::size_t node_count_phys = 0, node_count_partner = 0;

    SolutionPair pair() const { return pair_from_samples(physical, partner, "bound_state_record"); }
};

inline BoundStateRecord bound_state_record(const SolutionSamples& phys, std::size_t index) {
    BoundStateRecord r;
    r.index = index;
    r.energy = phys.energy;
    r.physical = phys;
    r.partner = partner_solution(phys);
    r.node_count_phys = count_nodes(phys.value);
    r.node_count_partner = count_nodes(r.partner.value);
    if (r.node_count_partner != r.node_count_phys + 1)
        throw Error(ErrorKind::integration, "quantization", "partner_solution",
                    "partner node count " + std::to_string(r.node_count_partner) + " is not physical count + 1 (" +
                        std::to_string(r.node_count_phys) + ")");
    return r;
}

inline BoundStateRecord bound_state_record(const PotentialSpec& spec, const Grid& grid, const UnitSystem& units,
                                           std::size_t index) {
    auto e = find_bound_energies(spec, grid, units, index + 1);
    return bound_state_record(bound_state_solution(spec, e[index], grid, units), index);
}

struct ActionVariable {
    double J = 0, J_over_h = 0;
    double tail = 0;  // estimated contribution beyond the grid, already included in J
};

// J = 2 Int P dx (Simpson on the nodes) plus tails from P ~ hbar det W / (b^2 theta^2)
inline ActionVariable action_variable(const SolutionPair& pair, const MicrostateParams& params) {
    ReducedActionField f(PairBasis::sampled(pair), params);
    const auto& P = f.p_samples();
    const std::size_t n = P.size();
    const double h = pair.grid.spacing();
    double sum = 0;
    std::size_t last = (n - 1) % 2 == 0 ? n - 1 : n - 2;  // Simpson on an even number of cells
    for (std::size_t i = 0; i + 2 <= last; i += 2) sum += h / 3.0 * (P[i] + 4.0 * P[i + 1] + P[i + 2]);
    if (last != n - 1) sum += 0.5 * h * (P[n - 2] + P[n - 1]);
    // Int_X^inf dx/phi2^2 = |phi1/phi2| / W(phi1,phi2) when phi2 dominates at the end
    double tail = 0;
    for (std::size_t i : {std::size_t{0}, n - 1}) {
        auto c = combine(PairBasis::sampled(pair).at_node(i), params.matrix());
        double big = std::max(std::abs(c.p1), std::abs(c.p2)), small = std::min(std::abs(c.p1), std::abs(c.p2));
        tail += f.units().hbar * small / big;
    }
    double sgn = sum >= 0 ? 1.0 : -1.0;
    ActionVariable a;
    a.tail = tail;
    a.J = 2.0 * (sum + sgn * tail);
    a.J_over_h = std::abs(a.J) / f.units().planck();
    if (tail > 1e-4 * std::abs(sum))
        throw Error(ErrorKind::domain, "quantization", "action_variable",
                    "grid too narrow: tail estimate " + io::fmt(tail / std::abs(sum)) + " relative");
    return a;
}

inline ActionVariable action_variable(const BoundStateRecord& r, const MicrostateParams& params) {
    return action_variable(r.pair(), params);
}

// (b, c) = (1,0), (2,1), (3,-1), (4,2), (5,-2), ... with a = 1 + c^2/(4b), i.e. a - c^2/4b = 1
inline std::vector<MicrostateParams> enumerate_microstates(const BoundStateRecord&, std::size_t count) {
    if (count < 2) throw Error(ErrorKind::config, "quantization", "enumerate_microstates", "need count >= 2");
    std::vector<MicrostateParams> out;
    for (std::size_t k = 0; k < count; ++k) {
        double b = static_cast<double>(k + 1);
        double c = k == 0 ? 0.0 : (k % 2 == 1 ? 1.0 : -1.0) * static_cast<double>((k + 1) / 2);
        out.push_back(MicrostateParams::floyd(1.0 + c * c / (4.0 * b), b, c));
    }
    return out;
}

// Unbound psi = alpha phi + beta theta fixes Floyd's set: a = |alpha|^2, b = |beta|^2,
// c = 2 Re(conj(alpha) beta), and sqrt(ab - c^2/4) = |Im(conj(alpha) beta)|. The sign of that
// imaginary part is the direction of motion (orientation). Unique up to the common scale.
inline std::vector<MicrostateParams> enumerate_microstates(std::complex<double> alpha, std::complex<double> beta) {
    std::complex<double> z = std::conj(alpha) * beta;
    if (std::abs(z.imag()) <= 1e-14 * std::norm(alpha) + 1e-300 || beta == 0.0)
        throw Error(ErrorKind::parameter, "quantization", "enumerate_microstates",
                    "psi is real up to a phase: not an unbound (current-carrying) state");
    return {MicrostateParams::floyd(std::norm(alpha), std::norm(beta), 2.0 * z.real(), z.imag() > 0 ? 1 : -1)};
}

struct Distinctness {
    double p_gap = 0, psi_gap = 0;
};

namespace detail {

inline std::vector<std::complex<double>> normalized_wave(const ReducedActionField& f, std::complex<double> alpha,
                                                         std::complex<double> beta, std::size_t ref) {
    const Grid& g = f.grid();
    std::vector<std::complex<double>> psi(g.size());
    double norm = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        psi[i] = reconstruct_wavefunction(f, alpha, beta, g[i]);
        norm += std::norm(psi[i]);
    }
    std::complex<double> phase = std::abs(psi[ref]) > 0 ? std::conj(psi[ref]) / std::abs(psi[ref]) : 1.0;
    for (auto& v : psi) v *= phase / std::sqrt(norm * g.spacing());
    return psi;
}

}  // namespace detail

// max|P1 - P2| and max discrepancy of the two normalized reconstructions (global phase removed).
// For bound states (alpha, beta) = (1/2, 1/2) reconstructs phi1 of each field.
inline Distinctness microstate_distinctness(const ReducedActionField& f1, const ReducedActionField& f2,
                                            std::complex<double> alpha = 0.5, std::complex<double> beta = 0.5) {
    const Grid &g1 = f1.grid(), &g2 = f2.grid();
    if (g1.size() != g2.size() || g1.x_min() != g2.x_min() || g1.x_max() != g2.x_max())
        throw Error(ErrorKind::config, "quantization", "microstate_distinctness", "fields on different grids");
    if (f1.energy() != f2.energy())
        throw Error(ErrorKind::config, "quantization", "microstate_distinctness", "fields at different energies");
    Distinctness d;
    std::size_t ref = 0;
    double best = -1;
    for (std::size_t i = 0; i < g1.size(); ++i) {
        d.p_gap = std::max(d.p_gap, std::abs(f1.p_samples()[i] - f2.p_samples()[i]));
        auto v = std::abs(reconstruct_wavefunction(f1, alpha, beta, g1[i]));
        if (v > best) { best = v; ref = i; }
    }
    auto a = detail::normalized_wave(f1, alpha, beta, ref), b = detail::normalized_wave(f2, alpha, beta, ref);
    for (std::size_t i = 0; i < a.size(); ++i) d.psi_gap = std::max(d.psi_gap, std::abs(a[i] - b[i]));
    return d;
}

inline nlohmann::json quantization_report(const BoundStateRecord& r, const MicrostateParams& params) {
    auto a = action_variable(r, params);
    return {{"state_index", r.index},         {"energy", r.energy},
            {"J_over_h", a.J_over_h},         {"node_phys", r.node_count_phys},
            {"node_partner", r.node_count_partner}, {"params", params.to_json()}};
}

}  // namespace qtraj
