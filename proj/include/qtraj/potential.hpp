#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "units.hpp"

namespace qtraj {

// Natural cubic spline on a strictly increasing abscissa.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw Error(ErrorKind::config, "schrodinger", "tabulated", "table needs at least 2 rows");
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
                throw Error(ErrorKind::config, "schrodinger", "tabulated", "non-finite table entry", x_[i]);
            if (i > 0 && !(x_[i] > x_[i - 1]))
                throw Error(ErrorKind::config, "schrodinger", "tabulated",
                            "table abscissae must be strictly increasing", x_[i]);
        }
        m_.assign(n, 0.0);
        if (n < 3) return;
        // tridiagonal solve for second derivatives, natural ends
        std::vector<double> c(n, 0.0), d(n, 0.0);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
            double a = hl / 6.0, b = (hl + hr) / 3.0, cc = hr / 6.0;
            double r = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
            double denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (r - a * d[i - 1]) / denom;
        }
        for (std::size_t i = n - 2; i >= 1; --i) {
            m_[i] = d[i] - c[i] * m_[i + 1];
            if (i == 1) break;
        }
    }

    double front() const { return x_.front(); }
    double back() const { return x_.back(); }

    // value and first two derivatives
    void eval(double x, double& v, double& dv, double& d2v) const {
        std::size_t i = locate(x);
        double h = x_[i + 1] - x_[i];
        double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        v = a * y_[i] + b * y_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
        dv = (y_[i + 1] - y_[i]) / h + (-(3 * a * a - 1) * m_[i] + (3 * b * b - 1) * m_[i + 1]) * h / 6.0;
        d2v = a * m_[i] + b * m_[i + 1];
    }

    // exact node value when x hits a node (avoids rounding in the cubic)
    bool node_value(double x, double& v) const {
        auto it = std::lower_bound(x_.begin(), x_.end(), x);
        if (it != x_.end() && *it == x) {
            v = y_[static_cast<std::size_t>(it - x_.begin())];
            return true;
        }
        return false;
    }

private:
    std::size_t locate(double x) const {
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
        return std::min(i, x_.size() - 2);
    }

    std::vector<double> x_, y_, m_;
};

struct PotentialSpec;

namespace potential {
struct Free {};
struct Linear { double slope = 0.0; };
struct Harmonic { double omega = 1.0; };
struct Tabulated { std::shared_ptr<const CubicSpline> table; };
struct RadialEffective {
    std::shared_ptr<const PotentialSpec> inner;
    double lambda = 0.0;
};
// (m^2 - 1/4) hbar^2 / (2 m sin^2 theta), the polar equation written as 1-D Schrodinger form
struct PolarEffective { int m_ell = 0; };
}  // namespace potential

struct PotentialSpec {
    std::variant<potential::Free, potential::Linear, potential::Harmonic, potential::Tabulated,
                 potential::RadialEffective, potential::PolarEffective>
        kind;

    static PotentialSpec free() { return {potential::Free{}}; }
    static PotentialSpec linear(double g) { return {potential::Linear{g}}; }
    static PotentialSpec harmonic(double omega) {
        if (!(omega > 0.0) || !std::isfinite(omega))
            throw Error(ErrorKind::config, "schrodinger", "potential", "harmonic requires omega > 0");
        return {potential::Harmonic{omega}};
    }
    static PotentialSpec tabulated(std::vector<double> x, std::vector<double> v) {
        return {potential::Tabulated{std::make_shared<const CubicSpline>(std::move(x), std::move(v))}};
    }
    static PotentialSpec radial_effective(const PotentialSpec& inner, double lambda) {
        return {potential::RadialEffective{std::make_shared<const PotentialSpec>(inner), lambda}};
    }
    static PotentialSpec polar_effective(int m_ell) { return {potential::PolarEffective{m_ell}}; }

    bool is_free() const { return std::holds_alternative<potential::Free>(kind); }

    std::string name() const {
        switch (kind.index()) {
            case 0: return "free";
            case 1: return "linear";
            case 2: return "harmonic";
            case 3: return "tabulated";
            case 4: return "radial_effective";
            default: return "polar_effective";
        }
    }
};

struct PotentialJet {
    double v = 0.0, dv = 0.0, d2v = 0.0;
};

inline PotentialJet potential_jet(const PotentialSpec& spec, double x, const UnitSystem& u) {
    struct Visitor {
        double x;
        const UnitSystem& u;
        PotentialJet operator()(const potential::Free&) const { return {}; }
        PotentialJet operator()(const potential::Linear& p) const { return {p.slope * x, p.slope, 0.0}; }
        PotentialJet operator()(const potential::Harmonic& p) const {
            double k = u.mass * p.omega * p.omega;
            return {0.5 * k * x * x, k * x, k};
        }
        PotentialJet operator()(const potential::Tabulated& p) const {
            const auto& t = *p.table;
            if (x < t.front() || x > t.back())
                throw Error(ErrorKind::domain, "schrodinger", "potential_value",
                            "position outside tabulated domain", x);
            PotentialJet j;
            t.eval(x, j.v, j.dv, j.d2v);
            t.node_value(x, j.v);
            return j;
        }
        PotentialJet operator()(const potential::RadialEffective& p) const {
            if (!(x > 0.0))
                throw Error(ErrorKind::domain, "schrodinger", "potential_value",
                            "radial effective potential needs r > 0", x);
            PotentialJet j = potential_jet(*p.inner, x, u);
            double c = p.lambda * u.hbar * u.hbar / (2.0 * u.mass);
            j.v += c / (x * x);
            j.dv += -2.0 * c / (x * x * x);
            j.d2v += 6.0 * c / (x * x * x * x);
            return j;
        }
        PotentialJet operator()(const potential::PolarEffective& p) const {
            double s = std::sin(x);
            if (!(s > 0.0))
                throw Error(ErrorKind::domain, "schrodinger", "potential_value",
                            "polar effective potential needs sin(theta) > 0", x);
            double cst = std::cos(x);
            double c = (static_cast<double>(p.m_ell) * p.m_ell - 0.25) * u.hbar * u.hbar / (2.0 * u.mass);
            double s2 = s * s;
            // d/dt sin^-2 = -2 cos/sin^3, d2/dt2 sin^-2 = (6 cos^2 + 2 sin^2)/sin^4
            return {c / s2, -2.0 * c * cst / (s2 * s), c * (6.0 * cst * cst + 2.0 * s2) / (s2 * s2)};
        }
    };
    return std::visit(Visitor{x, u}, spec.kind);
}

inline double potential_value(const PotentialSpec& spec, double x, const UnitSystem& u = {}) {
    return potential_jet(spec, x, u).v;
}

// Reads a "x,v" CSV into a tabulated spec.
inline PotentialSpec read_tabulated_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "schrodinger", "read_tabulated", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw Error(ErrorKind::config, "schrodinger", "read_tabulated", "empty file " + path);
    auto strip = [](std::string s) {
        s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
        return s;
    };
    if (strip(line) != "x,v")
        throw Error(ErrorKind::config, "schrodinger", "read_tabulated", "expected header \"x,v\" in " + path);
    std::vector<double> xs, vs;
    while (std::getline(in, line)) {
        line = strip(line);
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error(ErrorKind::config, "schrodinger", "read_tabulated", "malformed row: " + line);
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw Error(ErrorKind::config, "schrodinger", "read_tabulated", "malformed row: " + line);
        }
    }
    return PotentialSpec::tabulated(std::move(xs), std::move(vs));
}

}  // namespace qtraj
