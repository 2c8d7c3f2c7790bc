#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include <json.hpp>

#include "error.hpp"
#include "io.hpp"

namespace qtraj {

// (phi1, phi2) = M (theta1, theta2)
struct Mat2 {
    double m11 = 1, m12 = 0, m21 = 0, m22 = 1;
    double det() const { return m11 * m22 - m12 * m21; }
};

struct MuNu {
    double mu = 0.0, nu = 0.0;
};

// Floyd's constants; orientation is his +/- choice of Wronskian sign
struct Floyd {
    double a = 1.0, b = 1.0, c = 0.0;
    int orientation = 1;
    double disc() const { return a * b - 0.25 * c * c; }
};

struct MicrostateParams {
    std::variant<MuNu, Floyd> form;

    static MicrostateParams mu_nu(double mu, double nu) { return {MuNu{mu, nu}}; }
    static MicrostateParams floyd(double a, double b, double c, int orientation = 1) {
        return {Floyd{a, b, c, orientation}};
    }

    bool is_floyd() const { return std::holds_alternative<Floyd>(form); }
    const MuNu& as_mu_nu() const { return std::get<MuNu>(form); }
    const Floyd& as_floyd() const { return std::get<Floyd>(form); }

    void validate(const char* op = "params") const {
        if (auto* p = std::get_if<MuNu>(&form)) {
            if (!std::isfinite(p->mu) || !std::isfinite(p->nu))
                throw Error(ErrorKind::parameter, "reduced_action", op, "mu, nu must be finite");
            if (std::abs(p->mu * p->nu - 1.0) < 1e-12)
                throw Error(ErrorKind::parameter, "reduced_action", op,
                            "mu*nu = 1 makes phi1 and phi2 dependent");
        } else {
            const auto& f = std::get<Floyd>(form);
            if (!std::isfinite(f.a) || !std::isfinite(f.b) || !std::isfinite(f.c))
                throw Error(ErrorKind::parameter, "reduced_action", op, "a, b, c must be finite");
            if (!(f.a > 0.0) || !(f.b > 0.0))
                throw Error(ErrorKind::parameter, "reduced_action", op, "Floyd form needs a > 0 and b > 0");
            if (!(f.disc() > 0.0))
                throw Error(ErrorKind::parameter, "reduced_action", op, "Floyd form needs ab - c^2/4 > 0");
            if (f.orientation != 1 && f.orientation != -1)
                throw Error(ErrorKind::parameter, "reduced_action", op, "orientation must be +1 or -1");
        }
    }

    // mu_nu: phi1 = nu th1 + th2, phi2 = th1 + mu th2.
    // floyd: phi1 = D th1, phi2 = (c/2) th1 + b th2 with D = sqrt(ab - c^2/4), so that
    // phi1^2 + phi2^2 = b (a th1^2 + b th2^2 + c th1 th2) and S0 = hbar atan((b th2/th1 + c/2)/D).
    // orientation -1 swaps rows, flipping the sign of det and hence of P.
    Mat2 matrix() const {
        if (auto* p = std::get_if<MuNu>(&form)) return {p->nu, 1.0, 1.0, p->mu};
        const auto& f = std::get<Floyd>(form);
        double d = std::sqrt(f.disc());
        if (f.orientation > 0) return {d, 0.0, 0.5 * f.c, f.b};
        return {0.5 * f.c, f.b, d, 0.0};
    }

    nlohmann::json to_json() const {
        if (auto* p = std::get_if<MuNu>(&form)) return {{"form", "mu_nu"}, {"mu", p->mu}, {"nu", p->nu}};
        const auto& f = std::get<Floyd>(form);
        return {{"form", "floyd"}, {"a", f.a}, {"b", f.b}, {"c", f.c}, {"orientation", f.orientation}};
    }

    static MicrostateParams from_json(const nlohmann::json& j) {
        try {
            std::string form = j.at("form").get<std::string>();
            MicrostateParams p;
            if (form == "mu_nu")
                p = mu_nu(j.at("mu").get<double>(), j.at("nu").get<double>());
            else if (form == "floyd")
                p = floyd(j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>(),
                          j.value("orientation", 1));
            else
                throw Error(ErrorKind::config, "reduced_action", "params_json", "unknown form " + form);
            p.validate("params_json");
            return p;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::config, "reduced_action", "params_json", e.what());
        }
    }
};

// Converts to the other form, preserving P(x) pointwise for any pair.
// P depends on M only through det(M) and the quadratic form M^T M (up to a common scale).
inline MicrostateParams params_convert(const MicrostateParams& p) {
    p.validate("params_convert");
    if (auto* mn = std::get_if<MuNu>(&p.form)) {
        double a = mn->nu * mn->nu + 1.0, b = 1.0 + mn->mu * mn->mu, c = 2.0 * (mn->nu + mn->mu);
        int o = mn->mu * mn->nu - 1.0 > 0 ? 1 : -1;
        return MicrostateParams::floyd(a, b, c, o);
    }
    const auto& f = p.as_floyd();
    const double s = f.orientation, D = std::sqrt(f.disc());
    // need nu^2 + 1 = L a, mu^2 + 1 = L b, nu + mu = L c/2, mu nu - 1 = s L D
    if (f.c == 0.0) {
        if (s < 0 && std::abs(f.a - f.b) <= 1e-12 * std::max(f.a, f.b))
            return MicrostateParams::mu_nu(0.0, 0.0);
        throw Error(ErrorKind::conversion, "reduced_action", "params_convert",
                    "Floyd set with c = 0 is representable in the mu_nu form only for a = b and orientation -1");
    }
    const double L = 4.0 * (f.a + f.b + 2.0 * s * D) / (f.c * f.c);
    const double nu0 = std::sqrt(std::max(0.0, L * f.a - 1.0)), mu0 = std::sqrt(std::max(0.0, L * f.b - 1.0));
    double best = std::numeric_limits<double>::infinity(), bmu = 0, bnu = 0;
    for (double sn : {1.0, -1.0})
        for (double sm : {1.0, -1.0}) {
            double nu = sn * nu0, mu = sm * mu0;
            double err = std::abs(nu + mu - 0.5 * L * f.c) + std::abs(mu * nu - 1.0 - s * L * D);
            if (err < best) { best = err; bmu = mu; bnu = nu; }
        }
    auto out = MicrostateParams::mu_nu(bmu, bnu);
    if (std::abs(bmu * bnu - 1.0) < 1e-12)
        throw Error(ErrorKind::conversion, "reduced_action", "params_convert", "converted set is degenerate");
    return out;
}

}  // namespace qtraj
