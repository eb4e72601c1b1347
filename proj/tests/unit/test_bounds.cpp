#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "etclab/bounds.hpp"
#include "etclab/lure.hpp"

using namespace etclab;
using Catch::Approx;

namespace {

LureCertificate benchmark_certificate() {
    return lure_certificate(3.6e-3, 1.0, 0.47, 0.99, 5.0, 4.7e-3, 0.3);
}

LipschitzCoefficients benchmark_lipschitz() { return {3.0, 1.0, 1.0}; }

/// Quadrature oracle for psi: 2^p Q(t) P(t) with
///   Q(t) = (int_0^t exp(l2 q (t - s) / 2) ds)^(p/q),
///   P(t) = int_0^t exp(l2 p s / 2) ds,
/// evaluated by composite Simpson's rule.
double psi_quadrature(double t, double l2, double p) {
    const double q = p / (p - 1.0);
    auto simpson = [&](auto f, double a, double b, int n) {
        if (n % 2 == 1) ++n;
        const double h = (b - a) / n;
        double s = f(a) + f(b);
        for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
        return s * h / 3.0;
    };
    const double Qint = simpson([&](double s) { return std::exp(0.5 * l2 * q * (t - s)); }, 0.0, t, 4000);
    const double P = simpson([&](double s) { return std::exp(0.5 * l2 * p * s); }, 0.0, t, 4000);
    return std::pow(2.0, p) * std::pow(Qint, p / q) * P;
}

}  // namespace

TEST_CASE("psi closed form") {
    SECTION("psi(0) = 0") {
        CHECK(psi(0.0, 1.0, 2.0) == 0.0);
        CHECK(psi(0.0, 3.7, 1.5) == 0.0);
    }

    SECTION("p = 2, lambda2 = 1 collapses to 4 (e^t - 1)^2") {
        CHECK(psi(std::log(2.0), 1.0, 2.0) == Approx(4.0));
        for (double t : {0.01, 0.3, 1.2}) {
            const double e = std::expm1(t);
            CHECK(psi(t, 1.0, 2.0) == Approx(4.0 * e * e).epsilon(1e-14));
        }
    }

    SECTION("strictly increasing in t") {
        double prev = -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double v = psi(2.0 * i / 200.0, 0.9, 2.5);
            CHECK(v > prev);
            prev = v;
        }
    }

    SECTION("matches the quadrature form on random triples") {
        for (int i = 0; i < 20; ++i) {
            const double t = 0.02 + 1.5 * uniform01(99, 3 * i);
            const double l2 = 0.2 + 2.0 * uniform01(99, 3 * i + 1);
            const double p = 1.2 + 2.5 * uniform01(99, 3 * i + 2);
            const double closed = psi(t, l2, p);
            const double quad = psi_quadrature(t, l2, p);
            CHECK(std::abs(closed - quad) / quad < 1e-10);
        }
    }

    SECTION("rejects p <= 1") {
        CHECK_THROWS_AS(psi(0.5, 1.0, 1.0), std::domain_error);
        CHECK_THROWS_AS(psi(0.5, 1.0, 0.7), std::domain_error);
    }
}

TEST_CASE("dwell times tau_i and tau_hat") {
    const auto cert = benchmark_certificate().constants;
    const auto lip = benchmark_lipschitz();
    const double B1 = margin_B1(cert);
    const double B3 = margin_B3(cert);
    const double cc = margin_c(cert, lip);

    SECTION("zero coefficient gives the unbounded marker") {
        const auto tb = tau_i(0.0, B1, cc, 1.0, 2.0);
        CHECK_FALSE(tb.finite);
    }

    SECTION("benchmark values against the closed-form inversion oracle") {
        // for p = 2, l2 = 1: psi(t) = 4 (e^t - 1)^2, so t = log(1 + sqrt(target) / 2)
        const double t1_oracle = std::log1p(0.5 * std::sqrt(B1 / cc / 9.0));
        const double t3_oracle = std::log1p(0.5 * std::sqrt(B3 / cc));
        const auto t1 = tau_i(3.0, B1, cc, 1.0, 2.0);
        const auto t3 = tau_i(1.0, B3, cc, 1.0, 2.0);
        REQUIRE(t1.finite);
        REQUIRE(t3.finite);
        CHECK(t1.seconds == Approx(t1_oracle).epsilon(1e-9));
        CHECK(t3.seconds == Approx(t3_oracle).epsilon(1e-9));

        const auto th = tau_hat(cert, lip);
        REQUIRE(th.finite);
        CHECK(th.seconds == Approx(std::min(t1_oracle, t3_oracle)).epsilon(1e-9));
        // faithful evaluation of the published operating point
        CHECK(th.seconds == Approx(1.7898e-3).epsilon(1e-3));
    }

    SECTION("doubling lambda_i strictly decreases tau_i") {
        for (int i = 0; i < 10; ++i) {
            const double li = 0.3 + 4.0 * uniform01(13, 2 * i);
            const double Bi = 1e-4 + 0.1 * uniform01(13, 2 * i + 1);
            const auto a = tau_i(li, Bi, cc, 1.0, 2.0);
            const auto b = tau_i(2.0 * li, Bi, cc, 1.0, 2.0);
            REQUIRE(a.finite);
            REQUIRE(b.finite);
            CHECK(b.seconds < a.seconds);
        }
    }

    SECTION("non-positive margin is rejected") {
        CHECK_THROWS_AS(tau_i(1.0, 0.0, cc, 1.0, 2.0), std::domain_error);
        CHECK_THROWS_AS(tau_i(1.0, -1.0, cc, 1.0, 2.0), std::domain_error);
    }

    SECTION("tau_hat consistency: the binding dwell sits on the margin") {
        const auto r = miet(cert, lip, {1.0, 10.0}, 0.0);
        REQUIRE(r.tau_hat.finite);
        const double ps = psi(r.tau_hat.seconds, lip.lambda2, cert.p);
        CHECK(std::pow(lip.lambda1, cert.p) * ps <= r.B1 / r.c * (1.0 + 1e-9));
        CHECK(std::pow(lip.lambda3, cert.p) * ps <= r.B3 / r.c * (1.0 + 1e-9));
        const double active = std::min(std::pow(lip.lambda1, cert.p) * ps / (r.B1 / r.c),
                                       std::pow(lip.lambda3, cert.p) * ps / (r.B3 / r.c));
        (void)active;
        const double hit1 = std::pow(lip.lambda1, cert.p) * ps / (r.B1 / r.c);
        const double hit3 = std::pow(lip.lambda3, cert.p) * ps / (r.B3 / r.c);
        CHECK(std::max(hit1, hit3) == Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("tau_star") {
    SECTION("tau_star(0) = 0 on both branches") {
        CHECK(tau_star(0.0, 5.0, 1.0, 0.01) == 0.0);
        CHECK(tau_star(0.0, 2.0 / 0.01, 1.0, 0.01) == 0.0);
    }

    SECTION("critical branch value at chi = 1") {
        const double m1 = 0.37;
        const double l2 = 1.4;
        const double kap = 2.0 * l2 / m1;
        CHECK(tau_star(1.0, kap, l2, m1) == Approx(m1 / (l2 * (2.0 + m1))));
    }

    SECTION("continuity across the branch switch") {
        const double m1 = 0.0107;
        const double l2 = 1.0;
        const double kc = 2.0 * l2 / m1;
        for (double chi : {0.5, 1.0, 2.0}) {
            const double exact = tau_star(chi, kc, l2, m1);
            for (double s : {1.0 + 1e-7, 1.0 - 1e-7}) {
                const double off = tau_star(chi, kc * s, l2, m1);
                CHECK(std::abs(off - exact) <= 1e-5 * exact);
            }
        }
    }

    SECTION("strictly increasing in chi, approaching the supremum") {
        for (double kap : {20.0, 186.9158878504673, 600.0}) {  // below, near, above critical
            const double m1 = 0.0107;
            const double l2 = 1.0;
            double prev = -1.0;
            for (int i = 0; i <= 50; ++i) {
                const double chi = std::pow(10.0, -2.0 + 6.0 * i / 50.0);
                const double v = tau_star(chi, kap, l2, m1);
                CHECK(v > prev);
                prev = v;
            }
            const double sup = tau_star_max(kap, l2, m1);
            CHECK(prev < sup);
            CHECK(tau_star(1e12, kap, l2, m1) == Approx(sup).epsilon(1e-6));
        }
    }

    SECTION("negative chi rejected") {
        CHECK_THROWS_AS(tau_star(-0.1, 5.0, 1.0, 0.01), std::domain_error);
    }
}

TEST_CASE("miet report") {
    const auto cert = benchmark_certificate().constants;
    const auto lip = benchmark_lipschitz();

    SECTION("disturbance-free: kappa = 2 lambda1 / m1 and tau_m > 0") {
        const auto r = miet(cert, lip, {1.0, 10.0}, 0.0);
        REQUIRE(r.kappa.has_value());
        CHECK(*r.kappa == Approx(2.0 * lip.lambda1 / r.m1));
        REQUIRE(r.tau_m.has_value());
        CHECK(r.tau_m->finite);
        CHECK(r.tau_m->seconds > 0.0);
    }

    SECTION("benchmark operating point") {
        const auto r = miet(cert, lip, {1.0, 10.0}, 4.5);
        CHECK(r.B1 == Approx(5.9846e-5).epsilon(1e-3));
        CHECK(r.B3 == Approx(7.8415e-2).epsilon(1e-3));
        CHECK(r.c == Approx(0.518));
        CHECK(r.m1 == Approx(1.07486e-2).epsilon(1e-4));
        CHECK(r.m2 == Approx(4.39375).epsilon(1e-4));
        REQUIRE(r.kappa.has_value());
        CHECK(*r.kappa == Approx(558.211).epsilon(1e-3));
        REQUIRE(r.tau_star_1.has_value());
        CHECK(*r.tau_star_1 == Approx(1.78504e-3).epsilon(1e-3));
        REQUIRE(r.tau_m.has_value());
        CHECK(r.tau_m->seconds == Approx(std::min(*r.tau_star_1, r.tau_hat.seconds)));
        // the analytic floor must lower-bound the observed minimum gap scale
        CHECK(r.tau_m->seconds < 22.3e-3);
    }

    SECTION("static rule under disturbance degenerates") {
        const auto r = miet(cert, lip, {0.0, 10.0}, 1.0);
        CHECK(r.degenerate_m2);
        CHECK_FALSE(r.tau_m.has_value());
        CHECK(r.miet_or_zero() == 0.0);
        // without disturbance the same gains still give a floor via tau_hat
        const auto r0 = miet(cert, lip, {0.0, 10.0}, 0.0);
        CHECK(r0.tau_m.has_value());
    }

    SECTION("shrinking delta_bar decreases tau_m when the disturbance branch is active") {
        // small lambda1 and a large disturbance bound so kappa is driven by
        // the m2 term; tau*(1) stays below tau_hat on both sides
        LipschitzCoefficients weak{0.3, 1.0, 1.0};
        const auto big = miet(cert, weak, {1.0, 10.0}, 500.0);
        const auto small = miet(cert, weak, {1.0, 0.1}, 500.0);
        REQUIRE(big.tau_m.has_value());
        REQUIRE(small.tau_m.has_value());
        CHECK(*big.kappa == Approx(2.0 * 500.0 / big.m2));
        CHECK(small.tau_m->seconds < big.tau_m->seconds);
    }

    SECTION("margins fail for an out-of-range lambda") {
        auto bad = cert;
        bad.lambda = 5.5e-3;  // beyond the upper endpoint
        bad.validated = false;
        CHECK_THROWS_AS(miet(bad, lip, {1.0, 10.0}, 0.0), std::domain_error);
    }
}

TEST_CASE("error integral gains (a, b)") {
    const auto cert = benchmark_certificate().constants;
    const auto lip = benchmark_lipschitz();
    const auto r = miet(cert, lip, {1.0, 10.0}, 4.5);

    SECTION("a c stays on the right side of B1, b c below B3") {
        CHECK(r.a * r.c < r.B1);
        CHECK(r.a * r.c == Approx(r.B1).epsilon(1e-9));  // tau1 is the binding dwell here
        CHECK(r.b * r.c < r.B3);
    }

    SECTION("a / b equals (lambda1 / lambda3)^p exactly") {
        CHECK(r.a / r.b == Approx(std::pow(lip.lambda1 / lip.lambda3, cert.p)).epsilon(1e-14));
    }

    SECTION("lambda1 = 0 gives a = 0") {
        LipschitzCoefficients l0{0.0, 1.0, 1.0};
        const auto [a, b] = error_integral_gains(cert, l0, tau_hat(cert, l0));
        CHECK(a == 0.0);
        CHECK(b > 0.0);
    }

    SECTION("a foreign tau_hat violating the margins is rejected") {
        CHECK_THROWS_AS(error_integral_gains(cert, lip, TimeBound::of(1.0)), std::logic_error);
    }
}

TEST_CASE("co-scaling rule for the decay margin") {
    // Under Vs scaling by upsilon with lambda co-scaled by upsilon^(1/q),
    // B1 scales exactly by upsilon. (Exact invariance of the dwell times does
    // not hold: the Young term lambda2^p / p in c does not scale.)
    const auto cert = benchmark_certificate().constants;
    for (double u : {0.3, 2.0, 11.0}) {
        auto s = scale_Vs(cert, u);
        s.lambda = cert.lambda * std::pow(u, 1.0 / cert.q());
        CHECK(margin_B1(s) == Approx(u * margin_B1(cert)).epsilon(1e-12));
    }
}

TEST_CASE("rho_bar") {
    const auto bundle = benchmark_certificate();
    const auto lower = lure_level_lower_bound(3.6e-3, 0.47, 4.7e-3);

    SECTION("zero level gives zero radius") {
        const double r = rho_bar(bundle.constants, bundle.lyapunov, Vec{0.0, 0.0}, 0.0, 0.0, 0.0,
                                 0.0, lower, 1.0);
        CHECK(r == 0.0);
    }

    SECTION("radius dominates the initial condition") {
        for (double ang : {0.1, 1.0, 2.2, 4.0}) {
            Vec xi0{std::cos(ang), std::sin(ang)};
            const double r = rho_bar(bundle.constants, bundle.lyapunov, xi0, 4.5, 12.5, 10.0,
                                     50.0, lower, 1.0);
            CHECK(std::isfinite(r));
            CHECK(r >= norm2(xi0));
        }
    }

    SECTION("doubling theta2 never decreases the radius") {
        Vec xi0{1.0, 0.0};
        const double r1 = rho_bar(bundle.constants, bundle.lyapunov, xi0, 1.0, 12.5, 10.0, 50.0,
                                  lower, 1.0);
        const double r2 = rho_bar(bundle.constants, bundle.lyapunov, xi0, 1.0, 12.5, 20.0, 50.0,
                                  lower, 1.0);
        CHECK(r2 >= r1);
    }

    SECTION("a non-monotone bound is rejected") {
        CHECK_THROWS_AS(rho_bar(bundle.constants, bundle.lyapunov, Vec{1.0, 0.0}, 1.0, 12.5, 10.0,
                                50.0, ClassK::zero(), 1.0),
                        std::domain_error);
    }
}

TEST_CASE("enlargement design") {
    const auto bundle = benchmark_certificate();
    const auto lip = benchmark_lipschitz();
    auto rep = miet(bundle.constants, lip, {1.0, 10.0}, 4.5);
    rep.rho_bar = rho_bar(bundle.constants, bundle.lyapunov, Vec{1.0, 0.0}, 4.5, 12.5, 10.0, 50.0,
                          lure_level_lower_bound(3.6e-3, 0.47, 4.7e-3), 1.0);

    SECTION("tau_circ = 0 degenerates to the base design") {
        const auto d = enlargement_design(rep, 0.0, 50.0, 10.0);
        CHECK(d.chi_circ == 1.0);
        CHECK(d.chi_star == 1.0);
        CHECK(d.delta_star == Approx(10.0));
    }

    SECTION("tau_circ = tau*(1) is the fixed point") {
        const auto d = enlargement_design(rep, *rep.tau_star_1, 50.0, 10.0);
        CHECK(d.chi_circ == 1.0);
        CHECK(d.delta_star == Approx(10.0));
    }

    SECTION("doubling the floor inflates the threshold") {
        const auto d = enlargement_design(rep, 2.0 * *rep.tau_star_1, 50.0, 10.0);
        CHECK(d.chi_circ > 1.0);
        CHECK(d.chi_star >= d.chi_circ);
        CHECK(d.delta_star > 10.0);
        // the inverted level actually reaches the requested floor
        CHECK(tau_star(d.chi_circ, *rep.kappa, rep.lambda2_used, rep.m1) >= 2.0 * *rep.tau_star_1);
        // chi* follows the documented inflation formula
        CHECK(d.chi_star ==
              Approx(d.chi_circ + rep.m1 / rep.m2 * rep.rho_bar * (d.chi_circ - 1.0)));
    }

    SECTION("an unachievable floor is rejected before simulation") {
        const double sup = tau_star_max(*rep.kappa, rep.lambda2_used, rep.m1);
        CHECK_THROWS_AS(enlargement_design(rep, sup * 1.01, 50.0, 10.0), std::domain_error);
    }
}
