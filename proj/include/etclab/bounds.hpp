#pragma once

// Analytic guarantees for the event-triggered loop: the error-growth envelope
// psi, the dwell times tau1/tau3/tau_hat, the inter-event lower bound
// tau_star / tau_m, the trajectory bound rho_bar, the error-energy gains
// (a, b), and the inter-event enlargement design.

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "etclab/certificate.hpp"
#include "etclab/classk.hpp"
#include "etclab/plant.hpp"

namespace etclab {

/// A nonnegative time that may be unbounded. Infinity is an explicit state,
/// never a float sentinel.
struct TimeBound {
    bool finite = true;
    double seconds = 0.0;

    static TimeBound unbounded() { return {false, std::numeric_limits<double>::infinity()}; }
    static TimeBound of(double s) { return {true, s}; }

    double value_or_inf() const { return finite ? seconds : std::numeric_limits<double>::infinity(); }
};

inline TimeBound min(TimeBound a, TimeBound b) {
    if (!a.finite) return b;
    if (!b.finite) return a;
    return a.seconds <= b.seconds ? a : b;
}

// ---------------------------------------------------------------------------
// psi: the sampled-error growth envelope
// ---------------------------------------------------------------------------

/// psi(t, l2) = 2^(2p) (p-1)^(p-1) / (l2^p p^p)
///              * (e^(l2 p t / (2(p-1))) - 1)^(p-1) * (e^(l2 p t / 2) - 1)
///
/// Strictly increasing in t with psi(0) = 0. Only p > 1 is supported; the
/// exponent structure degenerates at p = 1 and no limit form is provided.
inline double psi(double t, double lambda2, double p) {
    if (!(p > 1.0)) throw std::domain_error("psi: exponent p must be > 1");
    if (!(lambda2 > 0.0)) throw std::domain_error("psi: lambda2 must be > 0");
    if (t < 0.0) throw std::domain_error("psi: t must be >= 0");
    const double coef = std::pow(2.0, 2.0 * p) * std::pow(p - 1.0, p - 1.0) /
                        (std::pow(lambda2, p) * std::pow(p, p));
    const double e1 = std::expm1(lambda2 * p * t / (2.0 * (p - 1.0)));
    const double e2 = std::expm1(lambda2 * p * t / 2.0);
    return coef * std::pow(e1, p - 1.0) * e2;
}

// ---------------------------------------------------------------------------
// Margin quantities
// ---------------------------------------------------------------------------

inline double margin_B1(const CertificateConstants& c) {
    return c.c1 * c.sigma - std::pow(c.cbar3 * c.lambda, c.q()) / c.q();
}

inline double margin_B3(const CertificateConstants& c) {
    return c.lambda * (c.mud_pow() - c.mu_pow()) - c.c3;
}

inline double margin_c(const CertificateConstants& c, const LipschitzCoefficients& lip) {
    return c.c2 + std::pow(lip.lambda2, c.p) / c.p;
}

/// Largest t with lambda_i^p psi(t) < B_i / c, found by bracketing plus
/// bisection (the lower bracket end is returned, so the strict inequality
/// survives). lambda_i = 0 gives the unbounded marker.
inline TimeBound tau_i(double lambda_i, double B_i, double c_coef, double lambda2, double p) {
    if (!(B_i > 0.0))
        throw std::domain_error("tau_i: margin B_i must be positive (certificate infeasible)");
    if (lambda_i < 0.0) throw std::domain_error("tau_i: lambda_i must be >= 0");
    if (lambda_i == 0.0) return TimeBound::unbounded();
    const double target = B_i / c_coef / std::pow(lambda_i, p);
    auto above = [&](double t) {
        const double v = psi(t, lambda2, p);
        return !std::isfinite(v) || v >= target;
    };
    const auto [lo, hi] = expand_bracket(above, 1e-6, 1e9);
    const double root = bisect([&](double t) { return psi(t, lambda2, p) - target; }, lo, hi);
    return TimeBound::of(root);
}

/// tau_hat = min(tau1, tau3).
inline TimeBound tau_hat(const CertificateConstants& c, const LipschitzCoefficients& lip) {
    const double cc = margin_c(c, lip);
    const TimeBound t1 = tau_i(lip.lambda1, margin_B1(c), cc, lip.lambda2, c.p);
    const TimeBound t3 = tau_i(lip.lambda3, margin_B3(c), cc, lip.lambda2, c.p);
    return min(t1, t3);
}

// ---------------------------------------------------------------------------
// tau_star: inter-event time as a function of the trigger level chi
// ---------------------------------------------------------------------------

namespace detail {
/// Relative branch tolerance on |kappa m1 - 2 lambda2|.
inline bool kappa_critical(double kappa, double lambda2, double m1) {
    return std::abs(kappa * m1 - 2.0 * lambda2) <= 1e-9 * 2.0 * lambda2;
}
}  // namespace detail

/// Time for the normalized error level chi to grow from 0 to the given value:
///
///   tau*(chi) = ln((kappa + l2 chi) / (kappa (1 + m1 chi / 2))) / (l2 - m1 kappa / 2)
///
/// with the removable singularity at kappa = 2 l2 / m1 handled explicitly as
/// m1 chi / (l2 (2 + m1 chi)). The general branch is written in log1p form,
/// which is continuous through the switch.
inline double tau_star(double chi, double kappa, double lambda2, double m1) {
    if (chi < 0.0) throw std::domain_error("tau_star: chi must be >= 0");
    if (!(kappa > 0.0) || !(lambda2 > 0.0) || !(m1 > 0.0))
        throw std::domain_error("tau_star: kappa, lambda2, m1 must be > 0");
    if (chi == 0.0) return 0.0;
    if (detail::kappa_critical(kappa, lambda2, m1)) return m1 * chi / (lambda2 * (2.0 + m1 * chi));
    const double gap = lambda2 - 0.5 * m1 * kappa;
    return std::log1p(chi * gap / (kappa * (1.0 + 0.5 * m1 * chi))) / gap;
}

/// Supremum of tau_star over chi. tau_star is strictly increasing in chi
/// (d tau*/d chi = 2 / ((kappa + l2 chi)(2 + m1 chi)) > 0), so the supremum
/// is the chi -> infinity limit, which is finite for every kappa > 0.
inline double tau_star_max(double kappa, double lambda2, double m1) {
    if (!(kappa > 0.0) || !(lambda2 > 0.0) || !(m1 > 0.0))
        throw std::domain_error("tau_star_max: kappa, lambda2, m1 must be > 0");
    if (detail::kappa_critical(kappa, lambda2, m1)) return 1.0 / lambda2;
    const double gap = lambda2 - 0.5 * m1 * kappa;
    return std::log(2.0 * lambda2 / (m1 * kappa)) / gap;
}

// ---------------------------------------------------------------------------
// Full bounds report
// ---------------------------------------------------------------------------

/// Trigger gains the analytic bounds depend on.
struct TriggerGains {
    double k2 = 0.0;
    double delta_bar = 0.0;
};

struct BoundsReport {
    double B1 = 0.0;
    double B3 = 0.0;
    double c = 0.0;
    TimeBound tau1;
    TimeBound tau3;
    TimeBound tau_hat;
    double m1 = 0.0;
    double m2 = 0.0;                      ///< 0 when k2 * delta_bar = 0
    std::optional<double> kappa;          ///< absent when the guarantee degenerates
    std::optional<double> tau_star_1;     ///< tau*(1)
    std::optional<TimeBound> tau_m;       ///< min(tau*(1), tau_hat); absent = no guarantee
    double a = 0.0;
    double b = 0.0;
    double rho_bar = std::numeric_limits<double>::quiet_NaN();
    double epsilon_bound = 0.0;           ///< disturbance sup-norm used for kappa
    double lambda2_used = 0.0;            ///< Lipschitz lambda2 the report was built with
    bool degenerate_m2 = false;           ///< k2 * delta_bar = 0 under disturbance
    bool unchecked_certificate = false;

    /// Analytic minimum inter-event time usable as a gap threshold; 0 when
    /// the guarantee degenerates.
    double miet_or_zero() const {
        if (!tau_m) return 0.0;
        return tau_m->finite ? tau_m->seconds : std::numeric_limits<double>::infinity();
    }
};

/// Error-energy gains (a, b) = (lambda1^p, lambda3^p) * psi(tau_hat). Their
/// products with c must respect the margins: a c < B1 (up to round-off at the
/// binding dwell), b c <= B3.
inline std::pair<double, double> error_integral_gains(const CertificateConstants& c,
                                                      const LipschitzCoefficients& lip,
                                                      TimeBound th) {
    if (!th.finite)
        throw std::domain_error("error_integral_gains: tau_hat must be finite");
    if (!(th.seconds > 0.0)) throw std::domain_error("error_integral_gains: tau_hat must be > 0");
    const double ps = psi(th.seconds, lip.lambda2, c.p);
    const double a = std::pow(lip.lambda1, c.p) * ps;
    const double b = std::pow(lip.lambda3, c.p) * ps;
    const double cc = margin_c(c, lip);
    const double tol = 1e-9;  // float headroom for the binding equality case
    if (!(a * cc <= margin_B1(c) * (1.0 + tol)) || !(b * cc <= margin_B3(c) * (1.0 + tol)))
        throw std::logic_error(
            "error_integral_gains: (a, b) inconsistent with margins; tau_hat was not produced "
            "by this library");
    return {a, b};
}

/// Populates the analytic report: margins, dwell times, MIET, error gains.
/// epsilon_bound is the disturbance sup-norm the separation guarantee is
/// conditioned on. When k2 * delta_bar = 0 and epsilon_bound > 0 the MIET
/// guarantee degenerates and tau_m is reported as absent rather than a number.
inline BoundsReport miet(const CertificateConstants& cert, const LipschitzCoefficients& lip,
                         const TriggerGains& gains, double epsilon_bound) {
    lip.validate();
    if (gains.k2 < 0.0 || gains.delta_bar < 0.0)
        throw std::invalid_argument("miet: gains must be >= 0");
    if (epsilon_bound < 0.0) throw std::invalid_argument("miet: epsilon_bound must be >= 0");

    BoundsReport r;
    r.unchecked_certificate = !cert.validated;
    r.B1 = margin_B1(cert);
    r.B3 = margin_B3(cert);
    r.c = margin_c(cert, lip);
    if (!(r.B1 > 0.0) || !(r.B3 > 0.0))
        throw std::domain_error("miet: margins B1/B3 not positive (lambda infeasible)");
    r.epsilon_bound = epsilon_bound;
    r.lambda2_used = lip.lambda2;

    r.tau1 = tau_i(lip.lambda1, r.B1, r.c, lip.lambda2, cert.p);
    r.tau3 = tau_i(lip.lambda3, r.B3, r.c, lip.lambda2, cert.p);
    r.tau_hat = min(r.tau1, r.tau3);

    r.m1 = std::pow(r.B1 / r.c, 1.0 / cert.p);
    const double k2db = gains.k2 * gains.delta_bar;
    r.m2 = k2db > 0.0 ? std::pow(k2db / r.c, 1.0 / cert.p) : 0.0;

    if (r.m2 == 0.0 && epsilon_bound > 0.0) {
        // A vanishing constant floor gives no robust separation under
        // disturbance; refuse to output a positive MIET.
        r.degenerate_m2 = true;
    } else {
        double kap = lip.lambda1 > 0.0 ? 2.0 * lip.lambda1 / r.m1 : 0.0;
        if (epsilon_bound > 0.0)
            kap = std::max(kap, 2.0 * lip.lambda3 * epsilon_bound / r.m2);
        if (kap > 0.0) {
            r.kappa = kap;
            r.tau_star_1 = tau_star(1.0, kap, lip.lambda2, r.m1);
            r.tau_m = min(TimeBound::of(*r.tau_star_1), r.tau_hat);
        } else {
            // no growth at all: separation limited only by tau_hat
            r.tau_m = r.tau_hat;
        }
    }

    if (r.tau_hat.finite) {
        const auto [a, b] = error_integral_gains(cert, lip, r.tau_hat);
        r.a = a;
        r.b = b;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Trajectory bound
// ---------------------------------------------------------------------------

/// Radius of the ball trajectories stay in: inverts a class-K lower bound of
/// Vs + V_{c,lambda} at the level reachable from xi0 under the given
/// disturbance and trigger budgets. Over-approximates the sublevel-set max.
inline double rho_bar(const CertificateConstants& cert, const LyapunovPair& lyap, const Vec& xi0,
                      double d_inf_bound, double phi2_sup, double theta2, double theta3,
                      const ClassK& lower_bound_fn, double k2) {
    if (lower_bound_fn.is_zero())
        throw std::domain_error("rho_bar: lower bound function must be strictly increasing");
    // monotonicity probe
    double prev = 0.0;
    for (int i = 1; i <= 64; ++i) {
        const double v = lower_bound_fn(static_cast<double>(i));
        if (!(v > prev)) throw std::domain_error("rho_bar: lower bound function not increasing");
        prev = v;
    }
    const double level = lyap.V_total(xi0, cert.lambda) +
                         (cert.lambda * cert.mud_pow() * std::pow(d_inf_bound, cert.p) +
                          k2 * phi2_sup) /
                             cert.nu() +
                         theta2 + theta3;
    if (level <= 0.0) return 0.0;
    return lower_bound_fn.inverse(level);
}

// ---------------------------------------------------------------------------
// Inter-event enlargement design
// ---------------------------------------------------------------------------

struct EnlargementDesign {
    double chi_circ = 1.0;   ///< trigger level realizing the requested floor
    double tau_circ = 0.0;   ///< requested inter-event floor
    double T_circ = 0.0;     ///< horizon the floor is guaranteed on
    double chi_star = 1.0;
    double delta_star = 0.0; ///< enlarged constant threshold, >= delta_bar
};

/// Designs the enlarged threshold delta* so that inter-event times are at
/// least tau_circ for events up to T_circ. Inverts tau*(chi) = tau_circ by
/// bisection (tau* is strictly increasing), then inflates by the trajectory
/// bound: chi* = chi + (m1/m2) rho_bar (chi - 1), delta* = chi*^2 delta_bar.
inline EnlargementDesign enlargement_design(const BoundsReport& r, double tau_circ, double T_circ,
                                            double delta_bar) {
    if (!(T_circ > 0.0)) throw std::invalid_argument("enlargement_design: T_circ must be > 0");
    if (tau_circ < 0.0) throw std::invalid_argument("enlargement_design: tau_circ must be >= 0");
    if (!(delta_bar > 0.0)) throw std::invalid_argument("enlargement_design: delta_bar must be > 0");
    if (!r.kappa || !r.tau_star_1 || r.m2 <= 0.0)
        throw std::domain_error("enlargement_design: report lacks a separation guarantee");
    if (!std::isfinite(r.rho_bar))
        throw std::domain_error("enlargement_design: report lacks rho_bar");

    const double kap = *r.kappa;
    const double lambda2_eff = r.lambda2_used;

    const double sup = tau_star_max(kap, lambda2_eff, r.m1);
    if (tau_circ > sup)
        throw std::domain_error("enlargement_design: tau_circ exceeds the achievable supremum");

    EnlargementDesign d;
    d.tau_circ = tau_circ;
    d.T_circ = T_circ;

    if (tau_circ <= *r.tau_star_1) {
        d.chi_circ = 1.0;  // the base design already meets the floor
    } else {
        auto reach = [&](double chi) { return tau_star(chi, kap, lambda2_eff, r.m1) >= tau_circ; };
        const auto [lo, hi] = expand_bracket(reach, 2.0, 1e15);
        d.chi_circ = bisect(
            [&](double chi) { return tau_star(chi, kap, lambda2_eff, r.m1) - tau_circ; },
            std::max(lo, 1.0), hi);
        // the lower bracket end undershoots the floor; nudge to the upper end
        // so tau*(chi_circ) >= tau_circ holds
        while (tau_star(d.chi_circ, kap, lambda2_eff, r.m1) < tau_circ) d.chi_circ = std::nextafter(d.chi_circ, hi);
    }
    d.chi_star = d.chi_circ + (r.m1 / r.m2) * r.rho_bar * (d.chi_circ - 1.0);
    d.delta_star = d.chi_star * d.chi_star * delta_bar;
    return d;
}

// ---------------------------------------------------------------------------
// Lipschitz coefficient estimation
// ---------------------------------------------------------------------------

/// Monte-Carlo lower estimate of the coefficients in
/// ||f_s(x,e,d) - f_s(x~,e~,d~)|| <= l1 ||x-x~|| + l2 ||e-e~|| + l3 ||d-d~||
/// on the ball of radius rho. Each coefficient is probed by varying one
/// argument at a time over random pairs plus short directional steps. This is
/// a sampled estimate, not a certified bound; plants that declare
/// coefficients should prefer those.
inline LipschitzCoefficients lipschitz_estimate(const ControlAffinePlant& plant, double rho,
                                                double d_inf, int samples,
                                                std::uint64_t seed = 0x11ce5) {
    const int n = plant.state_dim;
    const int nd = std::max(plant.disturbance_dim, 1);
    Vec x(n), x2(n), e(n), e2(n), d(nd), d2(nd);
    Vec fa(n), fb(n), tmp(n), u(plant.input_dim), diff(n);
    Mat gm;
    std::uint64_t ctr = 0;
    auto draw_ball = [&](Vec& out, double radius) {
        double s2 = 0.0;
        for (auto& v : out) {
            v = gaussian(seed, ctr++);
            s2 += v * v;
        }
        const double r = radius * std::pow(uniform01(seed, ctr++), 1.0 / out.size());
        const double nrm = std::sqrt(s2);
        if (nrm > 0.0)
            for (auto& v : out) v *= r / nrm;
    };
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    for (int s = 0; s < samples; ++s) {
        draw_ball(x, rho);
        draw_ball(e, rho);
        draw_ball(d, d_inf);
        // vary the state
        draw_ball(x2, rho);
        if (s % 2 == 1) {  // short directional step from x
            const double t = 1e-4 * rho;
            const double nrm = std::max(norm2(x2), 1e-300);
            for (int i = 0; i < n; ++i) x2[i] = x[i] + t * x2[i] / nrm;
        }
        plant.f_sampled(x, e, d, fa, tmp, u, gm);
        plant.f_sampled(x2, e, d, fb, tmp, u, gm);
        for (int i = 0; i < n; ++i) diff[i] = fa[i] - fb[i];
        double den = 0.0;
        for (int i = 0; i < n; ++i) den += (x[i] - x2[i]) * (x[i] - x2[i]);
        if (den > 0.0) l1 = std::max(l1, norm2(diff) / std::sqrt(den));
        // vary the error
        draw_ball(e2, rho);
        plant.f_sampled(x, e2, d, fb, tmp, u, gm);
        for (int i = 0; i < n; ++i) diff[i] = fa[i] - fb[i];
        den = 0.0;
        for (int i = 0; i < n; ++i) den += (e[i] - e2[i]) * (e[i] - e2[i]);
        if (den > 0.0) l2 = std::max(l2, norm2(diff) / std::sqrt(den));
        // vary the disturbance
        if (d_inf > 0.0) {
            draw_ball(d2, d_inf);
            plant.f_sampled(x, e, d2, fb, tmp, u, gm);
            for (int i = 0; i < n; ++i) diff[i] = fa[i] - fb[i];
            den = 0.0;
            for (int i = 0; i < nd; ++i) den += (d[i] - d2[i]) * (d[i] - d2[i]);
            if (den > 0.0) l3 = std::max(l3, norm2(diff) / std::sqrt(den));
        }
    }
    return LipschitzCoefficients{l1, l2, l3};
}

}  // namespace etclab
