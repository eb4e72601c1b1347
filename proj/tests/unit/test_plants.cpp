#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "etclab/bounds.hpp"
#include "etclab/lure.hpp"
#include "etclab/plant.hpp"

using namespace etclab;
using Catch::Approx;

TEST_CASE("sector nonlinearity branches") {
    CHECK(lure_sector(0.2, 0.3) == Approx(0.4));
    CHECK(lure_sector(1.0, 0.3) == Approx(1.3));
    CHECK(lure_sector(-1.0, 0.3) == Approx(-1.3));

    SECTION("sector bounds r^2 <= r H(r) <= 2 r^2 on random points") {
        for (int i = 0; i < 1000; ++i) {
            const double r = 8.0 * uniform01(11, i) - 4.0;
            const double rh = r * lure_sector(r, 0.3);
            CHECK(rh >= r * r - 1e-12);
            CHECK(rh <= 2.0 * r * r + 1e-12);
        }
    }

    SECTION("continuity at the breakpoints") {
        const double h = 0.3;
        CHECK(lure_sector(std::nextafter(h, 0.0), h) == Approx(lure_sector(std::nextafter(h, 1.0), h)).margin(1e-12));
        CHECK(lure_sector(std::nextafter(-h, 0.0), h) == Approx(lure_sector(std::nextafter(-h, -1.0), h)).margin(1e-12));
    }

    SECTION("integral matches quadrature") {
        for (double x : {-1.7, -0.25, 0.1, 0.3, 0.9, 4.0}) {
            const int steps = 20000;
            double acc = 0.0;
            for (int i = 0; i < steps; ++i) {
                const double a = x * i / steps;
                const double b = x * (i + 1) / steps;
                acc += 0.5 * (b - a) * (lure_sector(a, 0.3) + lure_sector(b, 0.3));
            }
            CHECK(lure_sector_integral(x, 0.3) == Approx(acc).margin(1e-6));
        }
    }
}

TEST_CASE("lure plant structure") {
    const auto plant = lure_plant(0.3);
    plant.validate();

    Vec x{0.7, -0.4}, d{0.25}, out(2);
    plant.f(x, d, out);
    CHECK(out[0] == Approx(-0.4));
    CHECK(out[1] == Approx(-lure_sector(0.7, 0.3) + 0.25));

    Vec u(1);
    plant.gamma(x, u);
    CHECK(u[0] == Approx(0.4));

    Vec z(1);
    plant.h(x, d, z);
    CHECK(z[0] == Approx(0.7));
}

TEST_CASE("lure certificate closed forms") {
    const auto bundle = lure_certificate(3.6e-3, 1.0, 0.47, 0.99, 5.0, 4.7e-3, 0.3);
    const auto& c = bundle.constants;

    CHECK(c.c1 == Approx(1.8e-3));
    CHECK(c.c2 == Approx(1.8e-2));
    CHECK(c.c3 == Approx(1.8e-2));
    // eigenvalue oracle: det([5-l, 1; 1, 2-l]) = 0 -> l = (7 +- sqrt(13))/2
    CHECK(c.cbar1 == Approx(1.8e-3 * 0.5 * (7.0 + std::sqrt(13.0))));
    CHECK(c.cbar3 == Approx((0.5 * (3.0 + std::sqrt(5.0)) + 4.0) / 0.53));
    CHECK(c.mu * c.mu == Approx(4.486150140505821));
    CHECK(c.validated);

    SECTION("n2 >= 1 rejected") {
        CHECK_THROWS_AS(lure_certificate(3.6e-3, 1.0, 1.0, 0.99, 5.0, 4.7e-3, 0.3),
                        std::invalid_argument);
    }

    SECTION("gradient matches finite differences of V_c") {
        Vec g(2), xp(2), xm(2);
        for (int i = 0; i < 50; ++i) {
            Vec x{3.0 * uniform01(5, 2 * i) - 1.5, 3.0 * uniform01(5, 2 * i + 1) - 1.5};
            bundle.lyapunov.grad_V_c(x, g);
            for (int k = 0; k < 2; ++k) {
                xp = x;
                xm = x;
                const double step = 1e-7;
                xp[k] += step;
                xm[k] -= step;
                const double fd = (bundle.lyapunov.V_c(xp) - bundle.lyapunov.V_c(xm)) / (2.0 * step);
                CHECK(g[k] == Approx(fd).margin(1e-5));
            }
        }
    }
}

TEST_CASE("declared Lipschitz coefficients dominate sampled estimates") {
    const auto plant = lure_plant(0.3);
    const auto est = lipschitz_estimate(plant, 1.0, 1.0, 4000);
    CHECK(est.lambda1 <= 3.0 * 1.05);
    CHECK(est.lambda2 <= 1.0 * 1.05);
    CHECK(est.lambda3 <= 1.0 * 1.05);
    // the estimate should not be vacuous either
    CHECK(est.lambda1 > 1.0);
    CHECK(est.lambda2 == Approx(1.0).epsilon(0.05));
    CHECK(est.lambda3 == Approx(1.0).epsilon(0.05));
}

TEST_CASE("lipschitz estimate on a linear plant approaches operator norms") {
    // xi_dot = A xi + d, u = K xi with A = [[0, 1], [-2, -3]], B = [0;1], K = [-1, -2]
    ControlAffinePlant p;
    p.state_dim = 2;
    p.input_dim = 1;
    p.disturbance_dim = 1;
    p.output_dim = 1;
    p.f = [](const Vec& x, const Vec& d, Vec& out) {
        out.resize(2);
        out[0] = x[1];
        out[1] = -2.0 * x[0] - 3.0 * x[1] + d[0];
    };
    p.g = [](const Vec&, Mat& out) {
        out.resize(2, 1);
        out(0, 0) = 0.0;
        out(1, 0) = 1.0;
    };
    p.gamma = [](const Vec& x, Vec& out) {
        out.resize(1);
        out[0] = -x[0] - 2.0 * x[1];
    };
    p.h = [](const Vec& x, const Vec&, Vec& out) {
        out.resize(1);
        out[0] = x[0];
    };
    // closed-loop state matrix A + BK = [[0, 1], [-3, -5]]; spectral norm:
    const double a2 = sym2x2_max_eig(0.0 * 0.0 + 3.0 * 3.0, 0.0 * 1.0 + (-3.0) * (-5.0),
                                     1.0 + 25.0);  // eig of M'M
    const double op_norm = std::sqrt(a2);
    const auto est = lipschitz_estimate(p, 1.0, 1.0, 20000);
    CHECK(est.lambda1 == Approx(op_norm).epsilon(0.05));
    CHECK(est.lambda2 == Approx(std::sqrt(5.0)).epsilon(0.05));  // ||BK|| = ||K||
    CHECK(est.lambda3 == Approx(1.0).epsilon(0.05));
}

TEST_CASE("zero-dynamics plant estimates to zero") {
    ControlAffinePlant p;
    p.state_dim = 1;
    p.input_dim = 1;
    p.disturbance_dim = 1;
    p.output_dim = 1;
    p.f = [](const Vec&, const Vec&, Vec& out) { out.assign(1, 0.0); };
    p.g = [](const Vec&, Mat& out) { out.resize(1, 1); out(0, 0) = 0.0; };
    p.gamma = [](const Vec&, Vec& out) { out.assign(1, 0.0); };
    p.h = [](const Vec&, const Vec&, Vec& out) { out.assign(1, 0.0); };
    const auto est = lipschitz_estimate(p, 1.0, 1.0, 500);
    CHECK(est.lambda1 == 0.0);
    CHECK(est.lambda2 == 0.0);
    CHECK(est.lambda3 == 0.0);
}

TEST_CASE("disturbance realizations") {
    SECTION("zero variant") {
        const auto r = realize_disturbance(DisturbanceSpec::zero(), 1, 10.0, 1e-3);
        Vec d;
        r.value(3.3, d);
        CHECK(d[0] == 0.0);
        CHECK(r.sup_norm() == 0.0);
    }

    SECTION("same seed gives an identical realization") {
        const auto spec = DisturbanceSpec::gaussian(1.0, 10.0, 0.1, 12345);
        const auto r1 = realize_disturbance(spec, 1, 10.0, 1e-3);
        const auto r2 = realize_disturbance(spec, 1, 10.0, 1e-3);
        Vec a, b;
        for (double t = 0.0; t < 12.0; t += 0.37) {
            r1.value(t, a);
            r2.value(t, b);
            CHECK(a[0] == b[0]);
        }
        CHECK(r1.sup_norm() == r2.sup_norm());
    }

    SECTION("zero outside the window") {
        const auto r = realize_disturbance(DisturbanceSpec::gaussian(1.0, 5.0, 0.5, 9), 1, 10.0, 1e-3);
        Vec d;
        r.value(5.0, d);
        CHECK(d[0] == 0.0);
        r.value(7.0, d);
        CHECK(d[0] == 0.0);
        r.value(4.99, d);
        CHECK(d[0] != 0.0);
    }

    SECTION("sample variance of a variance-1 realization is near 1") {
        const auto r = realize_disturbance(DisturbanceSpec::gaussian(1.0, 100.0, 1e-4, 77), 1,
                                           100.0, 1e-4);
        Vec d;
        double s = 0.0, s2 = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            r.value(i * 1e-4, d);
            s += d[0];
            s2 += d[0] * d[0];
        }
        const double mean = s / n;
        const double var = s2 / n - mean * mean;
        CHECK(var == Approx(1.0).epsilon(0.05));
        CHECK(std::abs(mean) < 0.01);
    }

    SECTION("hold period defaults to the integrator step") {
        const auto r = realize_disturbance(DisturbanceSpec::gaussian(1.0, 1.0, 0.0, 3), 1, 1.0, 0.01);
        CHECK(r.hold() == Approx(0.01));
        Vec a, b;
        r.value(0.0, a);
        r.value(0.0099, b);
        CHECK(a[0] == b[0]);
        r.value(0.0101, b);
        CHECK(a[0] != b[0]);
    }
}
