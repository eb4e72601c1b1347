#pragma once

// Control-affine plant interface and disturbance realizations.
//
// A plant is
//     xi_dot = f(xi, d) + g(xi) u,      z = h(xi, d),
// with a state-feedback law u = gamma(xi). All callables write into
// caller-provided buffers so the simulator's inner loop stays allocation-free.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "etclab/numeric.hpp"

namespace etclab {

/// Lipschitz coefficients for || xi_dot || <= l1 ||xi|| + l2 ||eps|| + l3 ||d||,
/// valid on the ball the analysis runs in.
struct LipschitzCoefficients {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;

    void validate() const {
        if (!(lambda2 > 0.0)) throw std::invalid_argument("LipschitzCoefficients: lambda2 must be > 0");
        if (lambda1 < 0.0 || lambda3 < 0.0 || !std::isfinite(lambda1) || !std::isfinite(lambda2) ||
            !std::isfinite(lambda3))
            throw std::invalid_argument("LipschitzCoefficients: coefficients must be finite and >= 0");
    }
};

struct ControlAffinePlant {
    int state_dim = 0;
    int input_dim = 0;
    int disturbance_dim = 0;
    int output_dim = 0;

    std::function<void(const Vec& xi, const Vec& d, Vec& out)> f;
    std::function<void(const Vec& xi, Mat& out)> g;
    std::function<void(const Vec& xi, Vec& out)> gamma;
    std::function<void(const Vec& xi, const Vec& d, Vec& out)> h;

    std::optional<LipschitzCoefficients> declared_lipschitz;

    /// f_s(xi, eps, d) = f(xi, d) + g(xi) gamma(xi + eps)
    void f_sampled(const Vec& xi, const Vec& eps, const Vec& d, Vec& out, Vec& tmp_xi_eps,
                   Vec& tmp_u, Mat& tmp_g) const {
        tmp_xi_eps.resize(xi.size());
        for (std::size_t i = 0; i < xi.size(); ++i) tmp_xi_eps[i] = xi[i] + eps[i];
        gamma(tmp_xi_eps, tmp_u);
        f(xi, d, out);
        g(xi, tmp_g);
        for (int r = 0; r < state_dim; ++r) {
            double s = 0.0;
            for (int c = 0; c < input_dim; ++c) s += tmp_g(r, c) * tmp_u[c];
            out[r] += s;
        }
    }

    /// f with a held input: f(xi, d) + g(xi) u_held
    void f_held(const Vec& xi, const Vec& u_held, const Vec& d, Vec& out, Mat& tmp_g) const {
        f(xi, d, out);
        g(xi, tmp_g);
        for (int r = 0; r < state_dim; ++r) {
            double s = 0.0;
            for (int c = 0; c < input_dim; ++c) s += tmp_g(r, c) * u_held[c];
            out[r] += s;
        }
    }

    /// Checks f(0,0) = 0 and h(0,0) = 0 plus dimension consistency.
    void validate() const {
        if (state_dim <= 0 || input_dim <= 0 || disturbance_dim < 0 || output_dim <= 0)
            throw std::invalid_argument("ControlAffinePlant: bad dimensions");
        if (!f || !g || !gamma || !h) throw std::invalid_argument("ControlAffinePlant: missing callables");
        Vec x0(state_dim, 0.0), d0(std::max(disturbance_dim, 1), 0.0);
        Vec fx(state_dim), zx(output_dim);
        f(x0, d0, fx);
        h(x0, d0, zx);
        for (double v : fx)
            if (std::abs(v) > 1e-12) throw std::invalid_argument("ControlAffinePlant: f(0,0) != 0");
        for (double v : zx)
            if (std::abs(v) > 1e-12) throw std::invalid_argument("ControlAffinePlant: h(0,0) != 0");
    }
};

// ---------------------------------------------------------------------------
// Disturbance
// ---------------------------------------------------------------------------

struct DisturbanceSpec {
    enum class Kind { Zero, Gaussian, Constant, Table };

    Kind kind = Kind::Zero;
    double variance = 1.0;      ///< per-draw variance of the Gaussian variant
    double window = 100.0;      ///< signal is zero for t >= window
    double hold = 0.0;          ///< sample-hold period; 0 means "integrator step"
    double constant_value = 0.0;
    std::vector<std::pair<double, double>> table;  ///< (time, value), step-held
    std::uint64_t seed = 0;

    static DisturbanceSpec zero() { return {}; }

    static DisturbanceSpec gaussian(double variance, double window, double hold, std::uint64_t seed) {
        DisturbanceSpec s;
        s.kind = Kind::Gaussian;
        s.variance = variance;
        s.window = window;
        s.hold = hold;
        s.seed = seed;
        return s;
    }

    static DisturbanceSpec constant(double value, double window) {
        DisturbanceSpec s;
        s.kind = Kind::Constant;
        s.constant_value = value;
        s.window = window;
        return s;
    }
};

/// A realized disturbance signal: piecewise-constant, deterministic in
/// (spec.seed, t), with its sup norm recorded.
class DisturbanceRealization {
  public:
    DisturbanceRealization() = default;

    DisturbanceRealization(const DisturbanceSpec& spec, int dim, double duration, double step) {
        if (dim < 0) throw std::invalid_argument("DisturbanceRealization: dim < 0");
        spec_ = spec;
        dim_ = std::max(dim, 1);
        hold_ = spec.hold > 0.0 ? spec.hold : step;
        if (!(hold_ > 0.0)) throw std::invalid_argument("DisturbanceRealization: hold must be > 0");
        scale_ = std::sqrt(std::max(spec.variance, 0.0));
        // sup norm over the active window of this realization
        switch (spec_.kind) {
            case DisturbanceSpec::Kind::Zero:
                d_inf_ = 0.0;
                break;
            case DisturbanceSpec::Kind::Constant:
                d_inf_ = std::abs(spec_.constant_value);
                break;
            case DisturbanceSpec::Kind::Table: {
                double m = 0.0;
                for (const auto& [t, v] : spec_.table) m = std::max(m, std::abs(v));
                d_inf_ = m;
                break;
            }
            case DisturbanceSpec::Kind::Gaussian: {
                const double active = std::min(duration, spec_.window);
                const std::uint64_t n = active <= 0.0
                                            ? 0
                                            : static_cast<std::uint64_t>(std::floor(active / hold_)) + 1;
                Vec buf(dim_);
                double m = 0.0;
                for (std::uint64_t i = 0; i < n; ++i) {
                    draw(i, buf);
                    m = std::max(m, norm2(buf));
                }
                d_inf_ = m;
                break;
            }
        }
    }

    int dim() const { return dim_; }
    double hold() const { return hold_; }
    double sup_norm() const { return d_inf_; }

    void value(double t, Vec& out) const {
        out.resize(dim_);
        if (t >= spec_.window && spec_.kind != DisturbanceSpec::Kind::Table) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        switch (spec_.kind) {
            case DisturbanceSpec::Kind::Zero:
                std::fill(out.begin(), out.end(), 0.0);
                break;
            case DisturbanceSpec::Kind::Constant:
                std::fill(out.begin(), out.end(), spec_.constant_value);
                break;
            case DisturbanceSpec::Kind::Gaussian:
                draw(static_cast<std::uint64_t>(std::floor(std::max(t, 0.0) / hold_)), out);
                break;
            case DisturbanceSpec::Kind::Table: {
                double v = 0.0;
                for (const auto& [ts, val] : spec_.table) {
                    if (t >= ts)
                        v = val;
                    else
                        break;
                }
                std::fill(out.begin(), out.end(), v);
                break;
            }
        }
    }

  private:
    void draw(std::uint64_t interval, Vec& out) const {
        for (int c = 0; c < dim_; ++c)
            out[c] = scale_ * gaussian(spec_.seed, interval * static_cast<std::uint64_t>(dim_) + c);
    }

    DisturbanceSpec spec_;
    int dim_ = 1;
    double hold_ = 1.0;
    double scale_ = 1.0;
    double d_inf_ = 0.0;
};

inline DisturbanceRealization realize_disturbance(const DisturbanceSpec& spec, int dim,
                                                  double duration, double step) {
    return DisturbanceRealization(spec, dim, duration, step);
}

}  // namespace etclab
