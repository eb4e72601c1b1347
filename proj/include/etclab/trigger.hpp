#pragma once

// The general dynamic triggering condition
//
//     Phi(t) = kbar * varphi(xi, eps) - k1 * phi1(t) - k2 * phi2(t),
//
// an event firing when Phi reaches zero from below. phi1 is a dynamic filter
// state, phi2 a designed positive threshold with a constant floor delta_bar
// inside [t_k, t_hat_k) and a schedule delta_k(t) afterwards. Resets at
// sampling instants and at the phase switch, with running budget monitors.

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etclab/bounds.hpp"
#include "etclab/certificate.hpp"
#include "etclab/classk.hpp"
#include "etclab/plant.hpp"

namespace etclab {
namespace trigger {

// ---------------------------------------------------------------------------
// Threshold schedules
// ---------------------------------------------------------------------------

/// How phi2 relates to the schedule between events.
enum class PinMode {
    PostHat,  ///< phi2 integrates toward delta_bar before t_hat, then equals delta_k(t)
    Always,   ///< phi2 equals the schedule in both phases (enlargement design)
    Never     ///< phi2 just decays through alpha2; no pinning (threshold-variable style)
};

class DeltaSchedule {
  public:
    enum class Kind { Constant, Exponential, Staircase, Enlargement, Table, FreeDecay };

    static DeltaSchedule constant() {
        DeltaSchedule s;
        s.kind_ = Kind::Constant;
        return s;
    }

    /// delta_k(t) = D1 * exp(-rho1 * t), global time.
    static DeltaSchedule exponential(double D1, double rho1) {
        if (!(D1 > 0.0) || !(rho1 > 0.0))
            throw std::invalid_argument("DeltaSchedule::exponential: D1, rho1 must be > 0");
        DeltaSchedule s;
        s.kind_ = Kind::Exponential;
        s.a_ = D1;
        s.b_ = rho1;
        return s;
    }

    /// delta_k(t) = D2 * rho2^n / n!, n = ceil(t / n_bar), global time.
    static DeltaSchedule staircase(double D2, double rho2, double n_bar) {
        if (!(D2 > 0.0) || !(rho2 > 0.0) || !(n_bar > 0.0))
            throw std::invalid_argument("DeltaSchedule::staircase: parameters must be > 0");
        DeltaSchedule s;
        s.kind_ = Kind::Staircase;
        s.a_ = D2;
        s.b_ = rho2;
        s.c_ = n_bar;
        return s;
    }

    /// phi2 = delta_star on [0, T_circ); afterwards the constant floor takes
    /// over (the zero continuation would surrender the separation guarantee,
    /// so the fallback keeps the floor unless configured otherwise).
    static DeltaSchedule enlargement(double delta_star, double T_circ, bool zero_after = false) {
        if (!(delta_star > 0.0) || !(T_circ > 0.0))
            throw std::invalid_argument("DeltaSchedule::enlargement: parameters must be > 0");
        DeltaSchedule s;
        s.kind_ = Kind::Enlargement;
        s.a_ = delta_star;
        s.b_ = T_circ;
        s.zero_after_ = zero_after;
        return s;
    }

    /// Piecewise-constant (time, value) table, step-held, global time.
    static DeltaSchedule table(std::vector<std::pair<double, double>> knots) {
        if (knots.empty()) throw std::invalid_argument("DeltaSchedule::table: empty");
        for (const auto& [t, v] : knots)
            if (!(v > 0.0)) throw std::invalid_argument("DeltaSchedule::table: values must be > 0");
        DeltaSchedule s;
        s.kind_ = Kind::Table;
        s.knots_ = std::move(knots);
        return s;
    }

    /// No schedule at all: phi2 obeys phi2' = -alpha2(phi2) everywhere.
    static DeltaSchedule free_decay() {
        DeltaSchedule s;
        s.kind_ = Kind::FreeDecay;
        return s;
    }

    Kind kind() const { return kind_; }

    PinMode pin_mode() const {
        switch (kind_) {
            case Kind::Enlargement:
                return PinMode::Always;
            case Kind::FreeDecay:
                return PinMode::Never;
            default:
                return PinMode::PostHat;
        }
    }

    /// Schedule value at global time t. For the constant variant this is the
    /// floor delta_bar, supplied by the config.
    double value(double t, double delta_bar) const {
        switch (kind_) {
            case Kind::Constant:
                return delta_bar;
            case Kind::Exponential:
                return a_ * std::exp(-b_ * t);
            case Kind::Staircase: {
                const double n = std::ceil(t / c_);
                if (n <= 0.0) return a_;
                double fact = 1.0;
                for (int i = 2; i <= static_cast<int>(n); ++i) fact *= i;
                return a_ * std::pow(b_, n) / fact;
            }
            case Kind::Enlargement:
                if (t < b_) return a_;
                return zero_after_ ? 0.0 : delta_bar;
            case Kind::Table: {
                double v = knots_.front().second;
                for (const auto& [ts, val] : knots_) {
                    if (t >= ts)
                        v = val;
                    else
                        break;
                }
                return v;
            }
            case Kind::FreeDecay:
                return 0.0;
        }
        return 0.0;
    }

    /// Discontinuity instants of the schedule inside (t0, t1]; the simulator
    /// lands a step on each so events at downward jumps are localized exactly.
    void jump_times(double t0, double t1, std::vector<double>& out) const {
        out.clear();
        if (kind_ == Kind::Staircase) {
            double k = std::floor(t0 / c_) + 1.0;
            for (double t = k * c_; t <= t1; t += c_)
                if (t > t0) out.push_back(t);
        } else if (kind_ == Kind::Enlargement) {
            if (b_ > t0 && b_ <= t1) out.push_back(b_);
        } else if (kind_ == Kind::Table) {
            for (const auto& [ts, v] : knots_)
                if (ts > t0 && ts <= t1) out.push_back(ts);
        }
    }

    double enlargement_delta_star() const { return kind_ == Kind::Enlargement ? a_ : 0.0; }
    double enlargement_horizon() const { return kind_ == Kind::Enlargement ? b_ : 0.0; }

  private:
    Kind kind_ = Kind::Constant;
    double a_ = 0.0, b_ = 0.0, c_ = 0.0;
    bool zero_after_ = false;
    std::vector<std::pair<double, double>> knots_;
};

// ---------------------------------------------------------------------------
// Reset rules
// ---------------------------------------------------------------------------

/// Reset sequence for phi1 at sampling instants: r_k. The default zero keeps
/// the budget trivially convergent.
struct ResetR {
    enum class Kind { Zero, Geometric };
    Kind kind = Kind::Zero;
    double first = 0.0;
    double ratio = 0.5;

    static ResetR zero() { return {}; }
    static ResetR geometric(double first, double ratio) {
        if (!(first >= 0.0) || !(ratio > 0.0) || !(ratio < 1.0))
            throw std::invalid_argument("ResetR::geometric: need first >= 0, ratio in (0,1)");
        return ResetR{Kind::Geometric, first, ratio};
    }
    double value(int k) const {
        return kind == Kind::Zero ? 0.0 : first * std::pow(ratio, k);
    }
};

/// Reset for phi1 at the phase switch: r_hat_k. Carryover keeps phi1
/// continuous (its running sum is monitored rather than enforced).
struct ResetRHat {
    enum class Kind { Carryover, Zero, Geometric };
    Kind kind = Kind::Carryover;
    double first = 0.0;
    double ratio = 0.5;

    static ResetRHat carryover() { return {}; }
    static ResetRHat zero() { return ResetRHat{Kind::Zero, 0.0, 0.5}; }
    static ResetRHat geometric(double first, double ratio) {
        if (!(first >= 0.0) || !(ratio > 0.0) || !(ratio < 1.0))
            throw std::invalid_argument("ResetRHat::geometric: need first >= 0, ratio in (0,1)");
        return ResetRHat{Kind::Geometric, first, ratio};
    }
};

/// Reset for phi2 at sampling instants: s_k (must not undercut the floor).
struct ResetS {
    enum class Kind { Constant, Carryover };
    Kind kind = Kind::Constant;
    double value = 0.0;    ///< constant s_k; also the initial phi2 for carryover

    static ResetS constant(double v) { return ResetS{Kind::Constant, v}; }
    static ResetS carryover(double initial) { return ResetS{Kind::Carryover, initial}; }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Phi3Mode {
    Exact,      ///< grad V_{c,lambda} . g (gamma(xi+eps) - gamma(xi))
    NonAffine,  ///< lambda2 ||grad V_{c,lambda}|| ||eps||  (non-affine plants)
    None        ///< drop the cross term
};

struct Config {
    double k_bar = 1.0;  ///< 0 or 1
    double k1 = 1.0;
    double k2 = 1.0;
    ClassK alpha1 = ClassK::linear(1.0);
    ClassK alpha2 = ClassK::linear(1.0);
    double delta_bar = 10.0;
    DeltaSchedule schedule = DeltaSchedule::constant();
    double tau_hat = 0.0;  ///< phase-switch dwell, from the bounds module
    ResetR reset_r;
    ResetRHat reset_r_hat;
    ResetS reset_s = ResetS::constant(12.5);
    double theta1 = 400.0;
    double theta2 = 10.0;
    double theta3 = 50.0;
    Phi3Mode phi3_mode = Phi3Mode::Exact;
    double phi3_lambda2 = 1.0;  ///< only used by the non-affine variant
    bool dwell_gate = false;    ///< suppress monitoring until t_k + dwell_time
    double dwell_time = 0.0;    ///< filled from the analytic MIET

    void validate() const {
        if (k_bar != 0.0 && k_bar != 1.0)
            throw std::invalid_argument("trigger::Config: k_bar must be 0 or 1");
        if (k1 < 0.0 || k2 < 0.0) throw std::invalid_argument("trigger::Config: gains must be >= 0");
        if (delta_bar < 0.0) throw std::invalid_argument("trigger::Config: delta_bar must be >= 0");
        if (!(theta1 > 0.0 && theta2 > 0.0 && theta3 > 0.0))
            throw std::invalid_argument("trigger::Config: budget caps must be > 0");
        if (reset_s.kind == ResetS::Kind::Constant && reset_s.value < delta_bar)
            throw std::invalid_argument("trigger::Config: s_k must be >= delta_bar");
        if (reset_s.kind == ResetS::Kind::Carryover && reset_s.value < delta_bar)
            throw std::invalid_argument("trigger::Config: initial phi2 must be >= delta_bar");
        if (schedule.pin_mode() != PinMode::Never && k2 > 0.0 && !(delta_bar > 0.0))
            throw std::invalid_argument(
                "trigger::Config: a positive floor is required when k2 > 0 with a pinned schedule");
    }

    void validate_for_run() const {
        validate();
        if (!(tau_hat > 0.0))
            throw std::invalid_argument("trigger::Config: tau_hat must be set (> 0) before running");
        if (dwell_gate && !(dwell_time > 0.0))
            throw std::invalid_argument("trigger::Config: dwell_gate requires dwell_time > 0");
    }

    /// Checks the filter rate against the certificate: a linear alpha1 must
    /// dominate nu * r. A zero alpha1 is structurally allowed (some reduced
    /// designs use it) but voids the decay guarantees; that is reported as a
    /// warning, not an error.
    std::vector<std::string> validate_against(const CertificateConstants& c) const {
        std::vector<std::string> warnings;
        const double nu = c.nu();
        if (alpha1.is_zero()) {
            warnings.push_back("alpha1 = 0: decay/boundedness guarantees do not apply");
        } else if (alpha1.kind() == ClassK::Kind::Linear) {
            if (alpha1.linear_slope() < nu)
                throw std::domain_error("trigger::Config: alpha1 slope below required nu");
        } else if (!alpha1.dominates_linear(nu, 1e3)) {
            throw std::domain_error("trigger::Config: alpha1(r) < nu r on the sampled grid");
        }
        if (k2 > 0.0 && delta_bar == 0.0)
            warnings.push_back("delta_bar = 0: no robust separation floor under disturbance");
        return warnings;
    }
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

enum class Phase { PreHat, PostHat };

struct State {
    double phi1 = 0.0;
    double phi2 = 0.0;
    double t_k = 0.0;
    double t_hat_k = 0.0;
    Phase phase = Phase::PreHat;
    int k = 0;  ///< sample counter (0 = initial sample)

    // budget accumulators (Assumption-style monitors)
    double sum_r = 0.0;
    double sum_r_hat = 0.0;
    double int_delta = 0.0;  ///< integral of the schedule over post-hat windows

    bool budget_r_exceeded = false;
    bool budget_r_hat_exceeded = false;
    bool budget_delta_exceeded = false;

    bool any_budget_flag() const {
        return budget_r_exceeded || budget_r_hat_exceeded || budget_delta_exceeded;
    }
};

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Workspace {
    Vec xi_eps, u_a, u_b, grad, fs_tmp;
    Mat g;
};

/// varphi(xi, eps) = -c1 sigma ||xi||^p + c2 ||eps||^p + phi3(xi, eps).
inline double varphi(const ControlAffinePlant& plant, const CertificateConstants& c,
                     const LyapunovPair& lyap, const Vec& xi, const Vec& eps, Phi3Mode mode,
                     double phi3_lambda2, Workspace& ws) {
    double v = -c.c1 * c.sigma * norm_pow(xi, c.p) + c.c2 * norm_pow(eps, c.p);
    if (mode == Phi3Mode::None) return v;
    lyap.grad_V_c(xi, ws.grad);
    if (mode == Phi3Mode::NonAffine) {
        return v + phi3_lambda2 * c.lambda * norm2(ws.grad) * norm2(eps);
    }
    // exact: lambda * grad Vc(xi)' g(xi) (gamma(xi+eps) - gamma(xi))
    ws.xi_eps.resize(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) ws.xi_eps[i] = xi[i] + eps[i];
    plant.gamma(ws.xi_eps, ws.u_a);
    plant.gamma(xi, ws.u_b);
    plant.g(xi, ws.g);
    double phi3 = 0.0;
    for (int col = 0; col < plant.input_dim; ++col) {
        double gd = 0.0;
        for (int r = 0; r < plant.state_dim; ++r) gd += ws.grad[r] * ws.g(r, col);
        phi3 += gd * (ws.u_a[col] - ws.u_b[col]);
    }
    return v + c.lambda * phi3;
}

/// Phi = kbar varphi - k1 phi1 - k2 phi2. An event is due when Phi >= 0 with
/// a prior strictly negative value (reaching zero from below).
inline double Phi(const Config& cfg, const ControlAffinePlant& plant,
                  const CertificateConstants& c, const LyapunovPair& lyap, const State& st,
                  const Vec& xi, const Vec& eps, Workspace& ws) {
    const double v = cfg.k_bar != 0.0
                         ? varphi(plant, c, lyap, xi, eps, cfg.phi3_mode, cfg.phi3_lambda2, ws)
                         : 0.0;
    return cfg.k_bar * v - cfg.k1 * st.phi1 - cfg.k2 * st.phi2;
}

/// Derivatives of the dynamic variables at a stage point. phi2 is only
/// integrated when it is not pinned in the current phase.
inline void dynamics(const Config& cfg, const State& st, double phi1, double phi2, double varphi_val,
                     double& dphi1, double& dphi2) {
    dphi1 = -cfg.alpha1(std::max(phi1, 0.0)) + cfg.k2 * phi2 - varphi_val;
    switch (cfg.schedule.pin_mode()) {
        case PinMode::PostHat:
            dphi2 = st.phase == Phase::PreHat
                        ? cfg.alpha2(cfg.delta_bar) - cfg.alpha2(std::max(phi2, 0.0))
                        : 0.0;
            break;
        case PinMode::Always:
            dphi2 = 0.0;
            break;
        case PinMode::Never:
            dphi2 = -cfg.alpha2(std::max(phi2, 0.0));
            break;
    }
}

/// Sampling-instant reset: phi1 := r_k, phi2 := s_k, phase := pre-hat,
/// budgets updated against their caps. The sampling error itself is reset by
/// the simulator (xi_held := xi).
inline void on_sample(State& st, const Config& cfg, double t_new) {
    st.k += 1;
    st.t_k = t_new;
    st.t_hat_k = t_new + cfg.tau_hat;
    st.phase = Phase::PreHat;

    const double rk = cfg.reset_r.value(st.k);
    st.sum_r += rk;
    st.phi1 = rk;

    switch (cfg.schedule.pin_mode()) {
        case PinMode::Always:
            st.phi2 = cfg.schedule.value(t_new, cfg.delta_bar);
            break;
        case PinMode::Never:
            if (cfg.reset_s.kind == ResetS::Kind::Constant) st.phi2 = cfg.reset_s.value;
            // carryover: phi2 continues through the event
            break;
        case PinMode::PostHat:
            st.phi2 = cfg.reset_s.kind == ResetS::Kind::Constant ? cfg.reset_s.value : st.phi2;
            break;
    }

    if (st.sum_r > cfg.theta2) st.budget_r_exceeded = true;
}

/// Initializes the state for the very first sample at t0 (not counted as a
/// triggered event).
inline State initial_state(const Config& cfg, double t0) {
    State st;
    st.k = 0;
    st.t_k = t0;
    st.t_hat_k = t0 + cfg.tau_hat;
    st.phase = Phase::PreHat;
    const double r0 = cfg.reset_r.value(0);
    st.phi1 = r0;
    st.sum_r = r0;
    st.phi2 = cfg.schedule.pin_mode() == PinMode::Always
                  ? cfg.schedule.value(t0, cfg.delta_bar)
                  : cfg.reset_s.value;
    if (st.sum_r > cfg.theta2) st.budget_r_exceeded = true;
    return st;
}

/// Phase switch at t_hat_k: phi1 := r_hat_k (default carryover keeps it
/// continuous), phi2 := delta_k(t_hat_k) for pinned schedules.
inline void on_hat_transition(State& st, const Config& cfg, double t) {
    st.phase = Phase::PostHat;
    switch (cfg.reset_r_hat.kind) {
        case ResetRHat::Kind::Carryover:
            st.sum_r_hat += st.phi1;
            break;
        case ResetRHat::Kind::Zero:
            st.phi1 = 0.0;
            break;
        case ResetRHat::Kind::Geometric: {
            const double v = cfg.reset_r_hat.first * std::pow(cfg.reset_r_hat.ratio, st.k);
            st.sum_r_hat += v;
            st.phi1 = v;
            break;
        }
    }
    if (cfg.schedule.pin_mode() != PinMode::Never)
        st.phi2 = cfg.schedule.value(t, cfg.delta_bar);
    if (st.sum_r_hat > cfg.theta3) st.budget_r_hat_exceeded = true;
}

// ---------------------------------------------------------------------------
// Preset catalog
// ---------------------------------------------------------------------------

/// Named reductions of the general condition to triggering rules from the
/// literature. Structural fields are pinned; rate/threshold numbers keep the
/// benchmark defaults and remain overridable. The comparison presets (all but
/// "me-submitted") drop the cross term phi3.
inline Config preset(const std::string& name) {
    Config cfg;  // benchmark defaults: kbar=1, k1=k2=1, alpha=id, dbar=10, s=12.5
    cfg.phi3_mode = Phi3Mode::None;
    if (name == "me-submitted") {
        cfg.k1 = 0.0;
        cfg.reset_s = ResetS::constant(cfg.delta_bar);
        cfg.phi3_mode = Phi3Mode::Exact;
    } else if (name == "mixed") {
        // constant threshold: phi2 == delta_bar, trigger at varphi = k2 delta_bar
        cfg.k1 = 0.0;
        cfg.schedule = DeltaSchedule::constant();
        cfg.reset_s = ResetS::constant(cfg.delta_bar);
    } else if (name == "girard") {
        cfg.k2 = 0.0;
    } else if (name == "integral") {
        // Phi = -phi1 with phi1' = -varphi: trigger when the running integral
        // of varphi returns to zero
        cfg.k_bar = 0.0;
        cfg.k1 = 1.0;
        cfg.k2 = 0.0;
        cfg.alpha1 = ClassK::zero();
    } else if (name == "static") {
        cfg.k1 = 0.0;
        cfg.k2 = 0.0;
    } else if (name == "dolk") {
        cfg.k_bar = 0.0;
        cfg.k1 = 1.0;
        cfg.k2 = 0.0;
        cfg.alpha1 = ClassK::zero();
        cfg.dwell_gate = true;
    } else if (name == "mahmoud") {
        cfg.k1 = 0.0;
        cfg.k2 = 0.0;
        cfg.dwell_gate = true;
    } else if (name == "postoyan") {
        // phi2 as a pure threshold variable: no forcing, no floor, continuous
        // across events
        cfg.k1 = 0.0;
        cfg.delta_bar = 0.0;
        cfg.schedule = DeltaSchedule::free_decay();
        cfg.reset_s = ResetS::carryover(10.0);
    } else {
        throw std::invalid_argument("trigger::preset: unknown preset '" + name + "'");
    }
    return cfg;
}

inline std::vector<std::string> preset_names() {
    return {"me-submitted", "mixed", "girard", "integral", "static", "dolk", "mahmoud", "postoyan"};
}

}  // namespace trigger
}  // namespace etclab
