#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "error.hpp"

namespace qtraj {

struct QuadResult {
    double value = 0, error = 0;
};

// Adaptive Gauss-Kronrod on `pieces` equal subintervals (keeps oscillatory integrands resolved).
inline QuadResult integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13,
                            int pieces = 1) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    pieces = std::max(pieces, 1);
    QuadResult r;
    double h = (b - a) / pieces;
    for (int k = 0; k < pieces; ++k) {
        double lo = a + k * h, hi = k + 1 == pieces ? b : a + (k + 1) * h;
        double err = 0;
        r.value += GK::integrate(f, lo, hi, 15, tol, &err);
        r.error += err;
    }
    if (!std::isfinite(r.value))
        throw Error(ErrorKind::integration, "dynamics", "quadrature", "non-finite integral");
    return r;
}

}  // namespace qtraj
