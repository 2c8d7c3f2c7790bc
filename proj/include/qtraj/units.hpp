#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "error.hpp"

namespace qtraj {

struct UnitSystem {
    double hbar = 1.0;
    double mass = 1.0;

    void validate(const char* module = "schrodinger") const {
        if (!(hbar > 0.0) || !std::isfinite(hbar))
            throw Error(ErrorKind::config, module, "units", "hbar must be positive and finite");
        if (!(mass > 0.0) || !std::isfinite(mass))
            throw Error(ErrorKind::config, module, "units", "mass must be positive and finite");
    }
    // 2m/hbar^2, the coefficient in psi'' = (2m/hbar^2)(V - E) psi
    double kappa() const { return 2.0 * mass / (hbar * hbar); }
    double planck() const { return 2.0 * std::numbers::pi * hbar; }
};

// Uniform grid x_i = x_min + i*h, i = 0..n-1.
class Grid {
public:
    Grid() = default;
    Grid(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max), n_(n) {
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min))
            throw Error(ErrorKind::config, "schrodinger", "grid", "grid requires x_min < x_max");
        if (n < 9)
            throw Error(ErrorKind::config, "schrodinger", "grid", "grid needs at least 9 points");
        h_ = (x_max - x_min) / static_cast<double>(n - 1);
    }

    static Grid with_spacing(double x_min, double x_max, double h) {
        auto n = static_cast<std::size_t>(std::llround((x_max - x_min) / h)) + 1;
        return Grid(x_min, x_max, n);
    }

    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double spacing() const { return h_; }
    std::size_t size() const { return n_; }
    double operator[](std::size_t i) const {
        return i + 1 == n_ ? x_max_ : x_min_ + static_cast<double>(i) * h_;
    }
    bool contains(double x) const { return x >= x_min_ && x <= x_max_; }

    std::size_t nearest(double x) const {
        double s = std::round((x - x_min_) / h_);
        if (s < 0) return 0;
        if (s > static_cast<double>(n_ - 1)) return n_ - 1;
        return static_cast<std::size_t>(s);
    }
    // index i with x in [x_i, x_{i+1}], clamped to valid cells
    std::size_t cell(double x) const {
        double s = std::floor((x - x_min_) / h_);
        if (s < 0) return 0;
        if (s > static_cast<double>(n_ - 2)) return n_ - 2;
        return static_cast<std::size_t>(s);
    }

    std::vector<double> points() const {
        std::vector<double> xs(n_);
        for (std::size_t i = 0; i < n_; ++i) xs[i] = (*this)[i];
        return xs;
    }

private:
    double x_min_ = 0.0, x_max_ = 1.0, h_ = 1.0;
    std::size_t n_ = 0;
};

}  // namespace qtraj
