#pragma once

// Small numeric utilities shared across the library: vector helpers,
// bracketing/bisection root finding, a counter-based RNG for reproducible
// parallel draws, and a 64-bit FNV-1a hash for config fingerprints.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace etclab {

using Vec = std::vector<double>;

/// Dense row-major matrix, just large enough for plant g(x) blocks.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<std::size_t>(r) * c, 0.0);
    }
    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// ||v||^p with the common p=2 path kept exact (no pow round-trip).
inline double norm_pow(std::span<const double> v, double p) {
    const double n = norm2(v);
    if (p == 2.0) return n * n;
    if (p == 1.0) return n;
    return std::pow(n, p);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

struct BisectOptions {
    double rel_tol = 1e-12;
    int max_iter = 200;
};

/// Bisection on a sign change of f over [lo, hi]; requires f(lo) <= 0 <= f(hi).
/// Returns the lower end of the final bracket, so f(result) <= 0 holds in
/// exact arithmetic.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     BisectOptions opt = {}) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo > 0.0 || fhi < 0.0) throw std::invalid_argument("bisect: bracket does not straddle a root");
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    for (int i = 0; i < opt.max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm <= 0.0)
            lo = mid;
        else
            hi = mid;
        const double scale = std::max(std::abs(lo), 1e-300);
        if ((hi - lo) / scale <= opt.rel_tol) break;
    }
    return lo;
}

/// Expands hi geometrically from `start` until pred(hi) holds (predicate is
/// assumed monotone in hi). Returns the bracket [last-false, first-true].
inline std::pair<double, double> expand_bracket(const std::function<bool(double)>& pred,
                                                double start, double cap = 1e12) {
    double lo = 0.0;
    double hi = start;
    while (!pred(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > cap) throw std::runtime_error("expand_bracket: no sign change below cap");
    }
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// Counter-based RNG (random access by index, stable across platforms)
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// Uniform draw in (0,1), never exactly 0 or 1.
inline double uniform01(std::uint64_t key, std::uint64_t index) {
    const std::uint64_t bits = splitmix64(mix_keys(key, index));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two indexed uniforms. Deterministic for
/// a given (key, index) pair regardless of call order, which keeps parallel
/// Monte-Carlo runs reproducible.
inline double gaussian(std::uint64_t key, std::uint64_t index) {
    const double u1 = uniform01(key, 2 * index);
    const double u2 = uniform01(key, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace etclab
