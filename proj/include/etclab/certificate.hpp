#pragma once

// Lyapunov certificate for the event-triggered design.
//
// A certificate bundles the ISS/storage inequality coefficients
//
//   (i)   dVs . f_s  <= -c1 ||xi||^p + c2 ||eps||^p + c3 ||d||^p
//   (ii)  dVc . f_c  <=  mu^p ||d||^p - ||z||^p
//   (iii) Vs <= cbar1 ||xi||^p,  Vc <= cbar2 ||xi||^p,
//         ||dVc|| <= cbar3 ||xi||^(p-1)
//
// together with the performance targets (mu, mu_d), the decay split sigma,
// and the scaling factor lambda applied to Vc in the trigger function.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "etclab/plant.hpp"

namespace etclab {

struct LambdaInterval {
    double lower = 0.0;
    double upper = 0.0;

    bool empty() const { return !(lower < upper); }
    bool contains(double x) const { return !empty() && x > lower && x < upper; }
};

struct CertificateConstants {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0;
    double cbar1 = 0.0, cbar2 = 0.0, cbar3 = 0.0;
    double mu = 0.0;      ///< continuous-time gain level
    double mu_d = 0.0;    ///< target event-based gain level (> mu)
    double p = 2.0;       ///< norm exponent, >= 1 (analytic bounds need p > 1)
    double sigma = 0.0;   ///< decay fraction in (0,1)
    double lambda = 0.0;  ///< Vc scaling: V_{c,lambda} = lambda * Vc

    bool validated = false;  ///< true only when built through make_certificate

    /// Hoelder conjugate q = p/(p-1); undefined at p = 1.
    double q() const {
        if (!(p > 1.0)) throw std::domain_error("CertificateConstants: q undefined for p <= 1");
        return p / (p - 1.0);
    }

    double mu_pow() const { return std::pow(mu, p); }
    double mud_pow() const { return std::pow(mu_d, p); }

    /// nu = c1 (1 - sigma) / (cbar1 + cbar2); always recomputed from the
    /// current fields so it can never go stale.
    double nu() const { return c1 * (1.0 - sigma) / (cbar1 + cbar2); }
};

/// Admissible interval for lambda: both decay and gain margins must stay
/// positive. Throws if mu_d <= mu (no gain headroom to trade).
inline LambdaInterval lambda_range(const CertificateConstants& c) {
    if (!(c.mu_d > c.mu))
        throw std::domain_error("lambda_range: mu_d must exceed mu (infeasible target)");
    const double q = c.q();
    LambdaInterval iv;
    iv.lower = c.c3 / (c.mud_pow() - c.mu_pow());
    iv.upper = std::pow(c.c1 * c.sigma * q, 1.0 / q) / c.cbar3;
    return iv;
}

namespace detail {

inline void check_certificate(const CertificateConstants& c) {
    auto pos = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument(std::string("CertificateConstants: ") + name + " must be positive");
    };
    pos(c.c1, "c1");
    pos(c.c2, "c2");
    pos(c.c3, "c3");
    pos(c.cbar1, "cbar1");
    pos(c.cbar2, "cbar2");
    pos(c.cbar3, "cbar3");
    pos(c.mu, "mu");
    pos(c.mu_d, "mu_d");
    pos(c.lambda, "lambda");
    if (!(c.sigma > 0.0 && c.sigma < 1.0))
        throw std::invalid_argument("CertificateConstants: sigma must lie in (0,1)");
    if (!(c.p >= 1.0)) throw std::invalid_argument("CertificateConstants: p must be >= 1");
    if (!(c.mu_d > c.mu))
        throw std::domain_error("CertificateConstants: mu_d must exceed mu (infeasible target)");
    const LambdaInterval iv = lambda_range(c);  // rejects p == 1 via q()
    if (iv.empty())
        throw std::domain_error("CertificateConstants: admissible lambda interval is empty");
    if (!iv.contains(c.lambda))
        throw std::domain_error("CertificateConstants: lambda outside the admissible interval");
}

}  // namespace detail

/// Validated constructor: enforces every structural invariant. The plain
/// aggregate remains available as an explicitly unchecked escape hatch for
/// experimentation; downstream reports carry the flag.
inline CertificateConstants make_certificate(CertificateConstants c) {
    detail::check_certificate(c);
    c.validated = true;
    return c;
}

/// Re-runs validation without throwing; used after transforms.
inline bool certificate_valid(const CertificateConstants& c) {
    try {
        detail::check_certificate(c);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

/// Rescales the storage function Vs by upsilon > 0: {c1, c2, c3, cbar1} scale,
/// {cbar2, cbar3, mu} do not. lambda is left untouched, so the result may sit
/// outside the admissible interval; the validated flag is recomputed.
inline CertificateConstants scale_Vs(const CertificateConstants& c, double upsilon) {
    if (!(upsilon > 0.0)) throw std::domain_error("scale_Vs: upsilon must be > 0");
    CertificateConstants out = c;
    out.c1 *= upsilon;
    out.c2 *= upsilon;
    out.c3 *= upsilon;
    out.cbar1 *= upsilon;
    out.validated = c.validated && certificate_valid(out);
    return out;
}

// ---------------------------------------------------------------------------
// Lyapunov function handles
// ---------------------------------------------------------------------------

struct LyapunovPair {
    std::function<double(const Vec&)> V_s;
    std::function<double(const Vec&)> V_c;
    std::function<void(const Vec&, Vec&)> grad_V_c;

    double V_total(const Vec& xi, double lambda) const { return V_s(xi) + lambda * V_c(xi); }
};

// ---------------------------------------------------------------------------
// Sampled certificate verification
// ---------------------------------------------------------------------------

struct ProbePoint {
    Vec xi;
    Vec eps;
    Vec d;
};

/// Worst-case residuals of the three certificate inequalities over a probe
/// set; residual <= 0 means the inequality held at every probe.
struct AssumptionCheckReport {
    double residual_iss = -std::numeric_limits<double>::infinity();       // (i)
    double residual_gain = -std::numeric_limits<double>::infinity();      // (ii)
    double residual_vs_bound = -std::numeric_limits<double>::infinity();  // (iii) Vs
    double residual_vc_bound = -std::numeric_limits<double>::infinity();  // (iii) Vc
    double residual_grad_bound = -std::numeric_limits<double>::infinity();// (iii) gradient

    bool all_satisfied(double tol = 0.0) const {
        return residual_iss <= tol && residual_gain <= tol && residual_vs_bound <= tol &&
               residual_vc_bound <= tol && residual_grad_bound <= tol;
    }
};

/// Numeric spot-check of the certificate inequalities at the given probes.
/// (i) is evaluated through a central finite difference of Vs along the
/// sampled vector field, since no Vs gradient is carried; (ii) uses the
/// supplied Vc gradient.
inline AssumptionCheckReport verify_assumptions_sampled(const ControlAffinePlant& plant,
                                                        const CertificateConstants& c,
                                                        const LyapunovPair& lyap,
                                                        const std::vector<ProbePoint>& probes) {
    AssumptionCheckReport rep;
    const int n = plant.state_dim;
    Vec fs(n), fc(n), tmp(n), u(plant.input_dim), grad(n), z(plant.output_dim);
    Vec xp(n), xm(n);
    Vec zero_eps(n, 0.0);
    Mat gm;

    for (const auto& pr : probes) {
        if (static_cast<int>(pr.xi.size()) != n || static_cast<int>(pr.eps.size()) != n)
            throw std::invalid_argument("verify_assumptions_sampled: probe dimension mismatch");
        if (!all_finite(pr.xi) || !all_finite(pr.eps) || !all_finite(pr.d))
            throw std::invalid_argument("verify_assumptions_sampled: probe not finite");

        const double nx = norm_pow(pr.xi, c.p);
        const double ne = norm_pow(pr.eps, c.p);
        const double nd = norm_pow(pr.d, c.p);

        // (i): directional derivative of Vs along f_s via central differences
        plant.f_sampled(pr.xi, pr.eps, pr.d, fs, tmp, u, gm);
        const double fn = norm2(fs);
        double dVs_fs = 0.0;
        if (fn > 0.0) {
            const double step = 1e-6 * (1.0 + norm2(pr.xi));
            for (int i = 0; i < n; ++i) {
                xp[i] = pr.xi[i] + step * fs[i] / fn;
                xm[i] = pr.xi[i] - step * fs[i] / fn;
            }
            dVs_fs = fn * (lyap.V_s(xp) - lyap.V_s(xm)) / (2.0 * step);
        }
        rep.residual_iss = std::max(rep.residual_iss, dVs_fs + c.c1 * nx - c.c2 * ne - c.c3 * nd);

        // (ii): gradient form along the continuous closed loop
        plant.f_sampled(pr.xi, zero_eps, pr.d, fc, tmp, u, gm);
        lyap.grad_V_c(pr.xi, grad);
        plant.h(pr.xi, pr.d, z);
        const double dVc_fc = dot(grad, fc);
        rep.residual_gain =
            std::max(rep.residual_gain, dVc_fc - c.mu_pow() * nd + norm_pow(z, c.p));

        // (iii): upper bounds
        rep.residual_vs_bound = std::max(rep.residual_vs_bound, lyap.V_s(pr.xi) - c.cbar1 * nx);
        rep.residual_vc_bound = std::max(rep.residual_vc_bound, lyap.V_c(pr.xi) - c.cbar2 * nx);
        const double nx_pm1 = c.p == 2.0 ? norm2(pr.xi) : std::pow(norm2(pr.xi), c.p - 1.0);
        rep.residual_grad_bound =
            std::max(rep.residual_grad_bound, norm2(grad) - c.cbar3 * nx_pm1);
    }
    return rep;
}

}  // namespace etclab
