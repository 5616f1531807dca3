#pragma once

// Shared helpers for the test suites: a deterministic RNG and independent
// reference implementations (oracles) kept away from the library code paths
// they check.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "oscflat/beam.hpp"

namespace testutil {

/// splitmix64-based deterministic RNG; independent of the library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t x = (state_ += 0x9e3779b97f4a7c15ull);
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
    /// uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    /// uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// normalized 4-component amplitude vector
    std::array<double, 4> unit_psi() {
        std::array<double, 4> v;
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (auto& x : v) {
                x = uniform(-1.0, 1.0);
                n2 += x * x;
            }
        } while (n2 < 1e-12);
        const double inv = 1.0 / std::sqrt(n2);
        for (auto& x : v) x *= inv;
        return v;
    }

private:
    std::uint64_t state_;
};

using C = std::complex<double>;
using Mat2 = std::array<C, 4>;  // row-major [m00 m01; m10 m11]

inline Mat2 matmul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

/// exp(M) by scaling-and-squaring on the Taylor series; an implementation
/// route independent of the closed-form rotation used by the library.
inline Mat2 expm(const Mat2& m) {
    double norm = 0.0;
    for (const auto& x : m) norm = std::max(norm, std::abs(x));
    int squarings = 0;
    Mat2 a = m;
    while (norm > 0.25) {
        for (auto& x : a) x *= 0.5;
        norm *= 0.5;
        ++squarings;
    }
    Mat2 sum{C(1), C(0), C(0), C(1)};
    Mat2 term{C(1), C(0), C(0), C(1)};
    for (int k = 1; k <= 24; ++k) {
        term = matmul(term, a);
        for (auto& x : term) x /= static_cast<double>(k);
        for (int i = 0; i < 4; ++i) sum[i] += term[i];
    }
    for (int s = 0; s < squarings; ++s) sum = matmul(sum, sum);
    return sum;
}

/// exp(-i H dl) applied to psi, via the series exponential.
inline std::array<double, 4> evolve_expm(const oscflat::Ham2& h, double dl,
                                         const std::array<double, 4>& psi) {
    const C i(0.0, 1.0);
    const Mat2 m{-i * dl * C(h.h11), -i * dl * C(h.h12_re, h.h12_im),
                 -i * dl * C(h.h12_re, -h.h12_im), -i * dl * C(-h.h11)};
    const Mat2 u = expm(m);
    const C a(psi[0], psi[1]), b(psi[2], psi[3]);
    const C na = u[0] * a + u[1] * b;
    const C nb = u[2] * a + u[3] * b;
    return {na.real(), na.imag(), nb.real(), nb.imag()};
}

/// Two-level vacuum survival probability: 1 - sin^2(2 theta) sin^2(lambda l).
inline double vacuum_survival(double delta, double theta_mix, double l) {
    const double s2 = std::sin(2.0 * theta_mix);
    const double s = std::sin(0.5 * delta * l);
    return 1.0 - s2 * s2 * s * s;
}

inline double ulp_distance(double a, double b) {
    if (a == b) return 0.0;
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / (scale * 2.220446049250313e-16);
}

}  // namespace testutil
