#pragma once

// Benchmark plant: a Lur'e system (double integrator in feedback with a
// sector-bounded piecewise-linear spring H) under the state feedback
// u = -xi2. Ships with a closed-form Lyapunov certificate.

#include <cmath>
#include <stdexcept>

#include "etclab/certificate.hpp"
#include "etclab/classk.hpp"
#include "etclab/plant.hpp"

namespace etclab {

/// Piecewise-linear sector nonlinearity: H(r) = 2r inside [-h*, h*],
/// slope-1 continuation outside. Satisfies r^2 <= r H(r) <= 2 r^2.
inline double lure_sector(double r, double h_star) {
    if (std::abs(r) <= h_star) return 2.0 * r;
    return r > 0.0 ? h_star + r : -h_star + r;
}

/// Integral of the sector function from 0 to x (even in x).
inline double lure_sector_integral(double x, double h_star) {
    const double a = std::abs(x);
    if (a <= h_star) return a * a;
    return 0.5 * a * a + h_star * a - 0.5 * h_star * h_star;
}

inline ControlAffinePlant lure_plant(double h_star) {
    if (h_star < 0.0) throw std::invalid_argument("lure_plant: h_star must be >= 0");
    ControlAffinePlant p;
    p.state_dim = 2;
    p.input_dim = 1;
    p.disturbance_dim = 1;
    p.output_dim = 1;
    p.f = [h_star](const Vec& xi, const Vec& d, Vec& out) {
        out.resize(2);
        out[0] = xi[1];
        out[1] = -lure_sector(xi[0], h_star) + (d.empty() ? 0.0 : d[0]);
    };
    p.g = [](const Vec&, Mat& out) {
        out.resize(2, 1);
        out(0, 0) = 0.0;
        out(1, 0) = 1.0;
    };
    p.gamma = [](const Vec& xi, Vec& out) {
        out.resize(1);
        out[0] = -xi[1];
    };
    p.h = [](const Vec& xi, const Vec&, Vec& out) {
        out.resize(1);
        out[0] = xi[0];
    };
    p.declared_lipschitz = LipschitzCoefficients{3.0, 1.0, 1.0};
    return p;
}

/// Largest eigenvalue of a symmetric 2x2 matrix [[a, b], [b, c]].
inline double sym2x2_max_eig(double a, double b, double c) {
    const double tr = a + c;
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
    return 0.5 * (tr + disc);
}

inline double sym2x2_min_eig(double a, double b, double c) {
    const double tr = a + c;
    const double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
    return 0.5 * (tr - disc);
}

struct LureCertificate {
    CertificateConstants constants;
    LyapunovPair lyapunov;
};

/// Closed-form certificate for the Lur'e benchmark (p = 2).
///
///   Vs = (u1/2) xi' P xi + 2 u1 * integral(H, 0, xi1),  P = [1 1; 1 2]
///   Vc = Vs / (u1 (1 - n2))
///
/// Derived coefficients:
///   c1 = u1/2, c2 = c3 = 5 u1,
///   cbar1 = (u1/2) max_eig([5 1; 1 2]),        cbar2 = cbar1 / (u1 (1-n2)),
///   cbar3 = (||P|| + 4) / (1 - n2),
///   mu^2  = (1/(1-n2)) (1/(4 n1) + 1/n2).
///
/// Note the gain level is stored as mu = sqrt(mu^2); the squared value is
/// what the closed form produces.
inline LureCertificate lure_certificate(double upsilon1, double n1, double n2, double sigma,
                                        double mu_d, double lambda, double h_star) {
    if (!(n1 > 0.0)) throw std::invalid_argument("lure_certificate: n1 must be > 0");
    if (!(n2 > 0.0 && n2 < 1.0)) throw std::invalid_argument("lure_certificate: n2 must be in (0,1)");
    if (!(upsilon1 > 0.0)) throw std::invalid_argument("lure_certificate: upsilon1 must be > 0");

    CertificateConstants c;
    c.c1 = 0.5 * upsilon1;
    c.c2 = 5.0 * upsilon1;
    c.c3 = 5.0 * upsilon1;
    const double lmax_bound = sym2x2_max_eig(5.0, 1.0, 2.0);  // Vs <= (u1/2) xi' [5 1;1 2] xi
    const double p_norm = sym2x2_max_eig(1.0, 1.0, 2.0);      // spectral norm of P
    c.cbar1 = 0.5 * upsilon1 * lmax_bound;
    c.cbar2 = c.cbar1 / (upsilon1 * (1.0 - n2));
    c.cbar3 = (p_norm + 4.0) / (1.0 - n2);
    const double mu_sq = (1.0 / (1.0 - n2)) * (1.0 / (4.0 * n1) + 1.0 / n2);
    c.p = 2.0;
    c.mu = std::sqrt(mu_sq);
    c.mu_d = mu_d;
    c.sigma = sigma;
    c.lambda = lambda;

    LyapunovPair lyap;
    const double vc_scale = 1.0 / (upsilon1 * (1.0 - n2));
    lyap.V_s = [upsilon1, h_star](const Vec& xi) {
        const double quad = xi[0] * xi[0] + 2.0 * xi[0] * xi[1] + 2.0 * xi[1] * xi[1];
        return upsilon1 * (0.5 * quad + 2.0 * lure_sector_integral(xi[0], h_star));
    };
    lyap.V_c = [V_s = lyap.V_s, vc_scale](const Vec& xi) { return vc_scale * V_s(xi); };
    lyap.grad_V_c = [h_star, n2](const Vec& xi, Vec& out) {
        out.resize(2);
        const double inv = 1.0 / (1.0 - n2);
        out[0] = inv * (xi[0] + xi[1] + 2.0 * lure_sector(xi[0], h_star));
        out[1] = inv * (xi[0] + 2.0 * xi[1]);
    };

    return LureCertificate{make_certificate(c), std::move(lyap)};
}

/// Quadratic class-K lower bound on Vs + lambda Vc for the Lur'e certificate,
/// from the minimum eigenvalue of the quadratic part (the sector integral is
/// nonnegative and is dropped).
inline ClassK lure_level_lower_bound(double upsilon1, double n2, double lambda) {
    const double lmin = sym2x2_min_eig(1.0, 1.0, 2.0);
    const double coef = 0.5 * upsilon1 * lmin * (1.0 + lambda / (upsilon1 * (1.0 - n2)));
    return ClassK::power(coef, 2.0);
}

}  // namespace etclab
