#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>

#include "error.hpp"

namespace qtraj {

// Centered fourth-order stencils on a uniform grid; need index-3 .. index+3.
template <class T>
struct Derivs3 {
    T d1, d2, d3;
};

template <class T>
Derivs3<T> central_derivs(std::span<const T> f, std::size_t i, double h) {
    if (i < 3 || i + 3 >= f.size())
        throw Error(ErrorKind::domain, "reduced_action", "schwarzian", "need 3 samples on each side");
    const T fm3 = f[i - 3], fm2 = f[i - 2], fm1 = f[i - 1], f0 = f[i], fp1 = f[i + 1], fp2 = f[i + 2],
            fp3 = f[i + 3];
    Derivs3<T> d;
    d.d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    d.d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    d.d3 = (fm3 - 8.0 * fm2 + 13.0 * fm1 - 13.0 * fp1 + 8.0 * fp2 - fp3) / (8.0 * h * h * h);
    return d;
}

// Bracket {T, x} = (3/2)(T''/T')^2 - T'''/T'. This is minus the standard Schwarzian.
template <class T>
T schwarzian_from_derivs(const Derivs3<T>& d) {
    if (std::abs(d.d1) < 1e-12)
        throw Error(ErrorKind::singularity, "reduced_action", "schwarzian", "first derivative vanishes");
    T r = d.d2 / d.d1;
    return 1.5 * r * r - d.d3 / d.d1;
}

template <class T>
T schwarzian(std::span<const T> f, std::size_t i, double h) {
    return schwarzian_from_derivs(central_derivs<T>(f, i, h));
}

}  // namespace qtraj
