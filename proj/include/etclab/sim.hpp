#pragma once

// Closed-loop hybrid simulator: fixed-step RK4 on the plant plus trigger
// dynamics under zero-order hold, bisection event localization, resets at
// sampling instants, and runtime invariant monitors.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "etclab/bounds.hpp"
#include "etclab/certificate.hpp"
#include "etclab/plant.hpp"
#include "etclab/trigger.hpp"

namespace etclab {

struct IntegratorConfig {
    double h = 1e-4;               ///< macro step (s)
    double event_tol = 1e-9;       ///< event localization tolerance (s)
    double zeno_min_gap = 1e-7;    ///< guard: smallest accepted inter-event gap
    long zeno_max_events = 100000; ///< guard: most events per run
    int record_stride = 0;         ///< trajectory row every N accepted nodes; 0 = off

    void validate() const {
        if (!(h > 0.0)) throw std::invalid_argument("IntegratorConfig: h must be > 0");
        if (!(event_tol > 0.0) || event_tol >= h)
            throw std::invalid_argument("IntegratorConfig: event_tol must be in (0, h)");
        if (!(zeno_min_gap > 0.0) || zeno_max_events <= 0)
            throw std::invalid_argument("IntegratorConfig: zeno guard thresholds must be positive");
    }
};

struct Event {
    int k = 0;  ///< 1-based index of the triggered sample
    double t = 0.0;
    double xi_norm = 0.0;
    enum class Cause { Threshold, DwellForced } cause = Cause::Threshold;
    double gap = 0.0;     ///< t minus the previous sampling instant
    bool at_jump = false; ///< fired exactly at a phase switch or schedule jump
    double residual_rel = 0.0;  ///< |Phi(t-)| / (|kbar varphi| + k1 phi1 + k2 phi2 + 1)
};

struct EventLog {
    std::vector<Event> events;

    int count() const { return static_cast<int>(events.size()); }
    double min_gap() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& e : events) m = std::min(m, e.gap);
        return m;
    }
    double mean_gap() const {
        if (events.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (const auto& e : events) s += e.gap;
        return s / events.size();
    }
};

struct TrajectoryRow {
    double t;
    Vec xi;
    Vec u;
    double eps_norm;
    double phi1;
    double phi2;
    double Phi;
    Vec d;
    Vec z;
};

/// Worst-case monitor outcomes over a run. Tolerances live with the tests;
/// the run only records extremes.
struct MonitorReport {
    double phi1_min = std::numeric_limits<double>::infinity();
    double phi2_prehat_margin_min = std::numeric_limits<double>::infinity();  ///< min(phi2 - delta_bar)
    double phi2_pin_dev_max = 0.0;       ///< max |phi2 - delta_k(t)| on pinned post-hat nodes
    double event_residual_rel_max = 0.0; ///< smooth threshold events only
    double ball_norm_max = 0.0;
    double lemma_error_excess_max = -std::numeric_limits<double>::infinity();
    int error_windows = 0;
    double v_decay_excess_max = -std::numeric_limits<double>::infinity();
};

struct RunResult {
    EventLog log;
    double t_end = 0.0;
    Vec xi_final;
    bool diverged = false;
    bool zeno_guard_hit = false;

    MonitorReport monitors;

    double int_z_p = 0.0;           ///< integral of ||z||^p over the run
    double int_d_p = 0.0;           ///< integral of ||d||^p over the run
    double eq_gain_offset = 0.0;    ///< (k2 theta1 + theta3 + V(xi0)) / lambda
    double eq_gain_residual = 0.0;  ///< mu_d^p int_d + offset - int_z (>= 0 expected)

    double d_inf_realized = 0.0;

    double sum_r = 0.0;
    double sum_r_hat = 0.0;
    double int_delta = 0.0;
    bool budget_flag = false;

    std::vector<TrajectoryRow> trajectory;
};

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class SimEngine {
  public:
    SimEngine(const ControlAffinePlant& plant, const CertificateConstants& cert,
              const LyapunovPair& lyap, const trigger::Config& cfg,
              const DisturbanceRealization& dist, const IntegratorConfig& integ,
              const BoundsReport* bounds = nullptr)
        : plant_(plant), cert_(cert), lyap_(lyap), cfg_(cfg), dist_(dist), integ_(integ),
          bounds_(bounds) {
        integ_.validate();
        cfg_.validate_for_run();
        n_ = plant_.state_dim;
        y_.assign(n_ + 2, 0.0);
        y_seg_.assign(n_ + 2, 0.0);
        rk1_.assign(n_ + 2, 0.0);
        rk2_.assign(n_ + 2, 0.0);
        rk3_.assign(n_ + 2, 0.0);
        rk4buf_.assign(n_ + 2, 0.0);
        ytmp_.assign(n_ + 2, 0.0);
        xi_view_.assign(n_, 0.0);
        eps_.assign(n_, 0.0);
        fx_.assign(n_, 0.0);
        u_held_.assign(plant_.input_dim, 0.0);
        dbuf_.assign(std::max(plant_.disturbance_dim, 1), 0.0);
        zbuf_.assign(plant_.output_dim, 0.0);
        xi_held_.assign(n_, 0.0);
    }

    RunResult run(const Vec& xi0, double duration) {
        if (static_cast<int>(xi0.size()) != n_) throw std::invalid_argument("run: xi0 dimension");
        reset(xi0);
        RunResult out;
        out.d_inf_realized = dist_.sup_norm();
        while (t_ < duration && !aborted_) advance_one(duration);
        finalize(out);
        return out;
    }

    /// One plain macro step without event handling; for integration tests.
    void step_plain(double h) {
        dist_.value(t_, dbuf_);
        y_seg_ = y_;
        rk4(t_, y_seg_, h, dbuf_, y_);
        t_ += h;
        assign_pinned(t_, y_);
    }

    void reset(const Vec& xi0) {
        t_ = 0.0;
        std::copy(xi0.begin(), xi0.end(), y_.begin());
        xi_held_ = xi0;
        plant_.gamma(xi_held_, u_held_);
        trig_ = trigger::initial_state(cfg_, 0.0);
        y_[n_] = trig_.phi1;
        y_[n_ + 1] = trig_.phi2;
        aborted_ = diverged_ = zeno_hit_ = false;
        node_count_ = 0;
        int_z_ = int_d_ = int_xi_p_ = 0.0;
        mon_ = MonitorReport{};
        events_.events.clear();
        traj_.clear();
        v_s0_ = lyap_.V_s(xi0);
        v_total0_ = lyap_.V_total(xi0, cert_.lambda);
        win_open_ = true;
        win_eps_ = win_xi_ = win_d_ = 0.0;
        snapshot_node();
        phi_prev_ = eval_phi(y_);
        record_node(phi_prev_);
    }

    const Vec& state() const { return y_; }
    double time() const { return t_; }
    const trigger::State& trig() const { return trig_; }
    double initial_level() const { return v_total0_; }

  private:
    enum class Break { None, Hat, Gate, Jump, End };

    // ---- derivative of the augmented state [xi, phi1, phi2] ----
    void deriv(double t, const Vec& y, const Vec& d, Vec& dy) {
        for (int i = 0; i < n_; ++i) xi_view_[i] = y[i];
        plant_.f_held(xi_view_, u_held_, d, fx_, gmat_);
        for (int i = 0; i < n_; ++i) {
            dy[i] = fx_[i];
            eps_[i] = xi_held_[i] - xi_view_[i];
        }
        const double vp = trigger::varphi(plant_, cert_, lyap_, xi_view_, eps_, cfg_.phi3_mode,
                                          cfg_.phi3_lambda2, ws_);
        // pinned phases: phi1 integrates against the exact schedule value at
        // the stage time, not the stale phi2 slot
        double phi2_eff = y[n_ + 1];
        const auto pin = cfg_.schedule.pin_mode();
        if (pin == trigger::PinMode::Always ||
            (pin == trigger::PinMode::PostHat && trig_.phase == trigger::Phase::PostHat))
            phi2_eff = cfg_.schedule.value(t, cfg_.delta_bar);
        trigger::dynamics(cfg_, trig_, y[n_], phi2_eff, vp, dy[n_], dy[n_ + 1]);
    }

    void rk4(double t, const Vec& y_in, double h, const Vec& d, Vec& y_out) {
        deriv(t, y_in, d, rk1_);
        for (std::size_t i = 0; i < y_in.size(); ++i) ytmp_[i] = y_in[i] + 0.5 * h * rk1_[i];
        deriv(t + 0.5 * h, ytmp_, d, rk2_);
        for (std::size_t i = 0; i < y_in.size(); ++i) ytmp_[i] = y_in[i] + 0.5 * h * rk2_[i];
        deriv(t + 0.5 * h, ytmp_, d, rk3_);
        for (std::size_t i = 0; i < y_in.size(); ++i) ytmp_[i] = y_in[i] + h * rk3_[i];
        deriv(t + h, ytmp_, d, rk4buf_);
        for (std::size_t i = 0; i < y_in.size(); ++i)
            y_out[i] =
                y_in[i] + (h / 6.0) * (rk1_[i] + 2.0 * rk2_[i] + 2.0 * rk3_[i] + rk4buf_[i]);
    }

    /// Pinned schedules carry phi2 exactly; the ODE path only produces the
    /// pre-hat relaxation toward the floor.
    void assign_pinned(double t, Vec& y) {
        const auto pin = cfg_.schedule.pin_mode();
        if (pin == trigger::PinMode::Always ||
            (pin == trigger::PinMode::PostHat && trig_.phase == trigger::Phase::PostHat))
            y[n_ + 1] = cfg_.schedule.value(t, cfg_.delta_bar);
    }

    double eval_phi(const Vec& y) {
        for (int i = 0; i < n_; ++i) {
            xi_view_[i] = y[i];
            eps_[i] = xi_held_[i] - xi_view_[i];
        }
        trigger::State st = trig_;
        st.phi1 = y[n_];
        st.phi2 = y[n_ + 1];
        return trigger::Phi(cfg_, plant_, cert_, lyap_, st, xi_view_, eps_, ws_);
    }

    double phi_normalizer(const Vec& y) {
        for (int i = 0; i < n_; ++i) {
            xi_view_[i] = y[i];
            eps_[i] = xi_held_[i] - xi_view_[i];
        }
        const double vp = cfg_.k_bar != 0.0
                              ? std::abs(trigger::varphi(plant_, cert_, lyap_, xi_view_, eps_,
                                                         cfg_.phi3_mode, cfg_.phi3_lambda2, ws_))
                              : 0.0;
        return vp + cfg_.k1 * std::abs(y[n_]) + cfg_.k2 * std::abs(y[n_ + 1]) + 1.0;
    }

    // ---- node bookkeeping: quadrature snapshots, monitors, recording ----
    void snapshot_node() {
        for (int i = 0; i < n_; ++i) {
            xi_view_[i] = y_[i];
            eps_[i] = xi_held_[i] - xi_view_[i];
        }
        dist_.value(t_, dbuf_);
        plant_.h(xi_view_, dbuf_, zbuf_);
        prev_t_ = t_;
        prev_zp_ = norm_pow(zbuf_, cert_.p);
        prev_dp_ = norm_pow(dbuf_, cert_.p);
        prev_ep_ = norm_pow(eps_, cert_.p);
        prev_xp_ = norm_pow(xi_view_, cert_.p);
        prev_phi2_ = y_[n_ + 1];
    }

    /// Trapezoid contributions from the previous node up to (t_, y_), then
    /// refresh the snapshots.
    void accumulate_to_current() {
        const double dt = t_ - prev_t_;
        if (dt <= 0.0) {
            snapshot_node();
            return;
        }
        for (int i = 0; i < n_; ++i) {
            xi_view_[i] = y_[i];
            eps_[i] = xi_held_[i] - xi_view_[i];
        }
        dist_.value(t_, dbuf_);
        plant_.h(xi_view_, dbuf_, zbuf_);
        const double zp = norm_pow(zbuf_, cert_.p);
        const double dp = norm_pow(dbuf_, cert_.p);
        const double ep = norm_pow(eps_, cert_.p);
        const double xp = norm_pow(xi_view_, cert_.p);

        int_z_ += 0.5 * dt * (prev_zp_ + zp);
        int_d_ += 0.5 * dt * (prev_dp_ + dp);
        int_xi_p_ += 0.5 * dt * (prev_xp_ + xp);
        if (win_open_) {
            win_eps_ += 0.5 * dt * (prev_ep_ + ep);
            win_xi_ += 0.5 * dt * (prev_xp_ + xp);
            win_d_ += 0.5 * dt * (prev_dp_ + dp);
        }
        if (trig_.phase == trigger::Phase::PostHat &&
            cfg_.schedule.pin_mode() != trigger::PinMode::Never) {
            trig_.int_delta += 0.5 * dt * (prev_phi2_ + y_[n_ + 1]);
            // the integrability budget only constrains designs whose threshold
            // variable actually enters the condition
            if (cfg_.k2 > 0.0 && trig_.int_delta > cfg_.theta1)
                trig_.budget_delta_exceeded = true;
        }

        prev_t_ = t_;
        prev_zp_ = zp;
        prev_dp_ = dp;
        prev_ep_ = ep;
        prev_xp_ = xp;
        prev_phi2_ = y_[n_ + 1];

        const double vs = lyap_.V_s(xi_view_);
        const double excess = vs + cert_.c1 * (1.0 - cert_.sigma) * int_xi_p_ - v_s0_ -
                              cfg_.k2 * trig_.int_delta - trig_.sum_r_hat - trig_.sum_r;
        mon_.v_decay_excess_max = std::max(mon_.v_decay_excess_max, excess);
    }

    void record_node(double phi_val) {
        mon_.phi1_min = std::min(mon_.phi1_min, y_[n_]);
        if (trig_.phase == trigger::Phase::PreHat &&
            cfg_.schedule.pin_mode() == trigger::PinMode::PostHat)
            mon_.phi2_prehat_margin_min =
                std::min(mon_.phi2_prehat_margin_min, y_[n_ + 1] - cfg_.delta_bar);
        if (trig_.phase == trigger::Phase::PostHat &&
            cfg_.schedule.pin_mode() == trigger::PinMode::PostHat)
            mon_.phi2_pin_dev_max =
                std::max(mon_.phi2_pin_dev_max,
                         std::abs(y_[n_ + 1] - cfg_.schedule.value(t_, cfg_.delta_bar)));
        mon_.ball_norm_max =
            std::max(mon_.ball_norm_max,
                     norm2(std::span<const double>(y_.data(), static_cast<std::size_t>(n_))));

        if (integ_.record_stride > 0 && node_count_ % integ_.record_stride == 0) {
            TrajectoryRow row;
            row.t = t_;
            row.xi.assign(y_.begin(), y_.begin() + n_);
            row.u = u_held_;
            for (int i = 0; i < n_; ++i) eps_[i] = xi_held_[i] - y_[i];
            row.eps_norm = norm2(eps_);
            row.phi1 = y_[n_];
            row.phi2 = y_[n_ + 1];
            row.Phi = phi_val;
            dist_.value(t_, dbuf_);
            row.d = dbuf_;
            plant_.h(row.xi, dbuf_, zbuf_);
            row.z = zbuf_;
            traj_.push_back(std::move(row));
        }
        ++node_count_;
    }

    void close_window() {
        if (!win_open_) return;
        win_open_ = false;
        if (bounds_ && bounds_->tau_hat.finite) {
            mon_.lemma_error_excess_max =
                std::max(mon_.lemma_error_excess_max,
                         win_eps_ - bounds_->a * win_xi_ - bounds_->b * win_d_);
            ++mon_.error_windows;
        }
        win_eps_ = win_xi_ = win_d_ = 0.0;
    }

    // ---- stepping ----
    void advance_one(double duration) {
        const double t0 = t_;
        double t1 = t0 + integ_.h;
        Break brk = Break::None;
        if (t1 >= duration) {
            t1 = duration;
            brk = Break::End;
        }
        if (trig_.phase == trigger::Phase::PreHat && trig_.t_hat_k > t0 && trig_.t_hat_k <= t1) {
            t1 = trig_.t_hat_k;
            brk = Break::Hat;
        }
        if (cfg_.dwell_gate) {
            const double gate = trig_.t_k + cfg_.dwell_time;
            if (gate > t0 && gate < t1) {
                t1 = gate;
                brk = Break::Gate;
            }
        }
        const auto pin = cfg_.schedule.pin_mode();
        if (pin == trigger::PinMode::Always ||
            (pin == trigger::PinMode::PostHat && trig_.phase == trigger::Phase::PostHat)) {
            cfg_.schedule.jump_times(t0, t1, jump_buf_);
            if (!jump_buf_.empty()) {
                if (jump_buf_.front() < t1) {
                    t1 = jump_buf_.front();
                    brk = Break::Jump;
                } else if (brk == Break::None || brk == Break::End) {
                    brk = Break::Jump;  // jump exactly at the step end
                }
            }
        }

        // integrate the smooth segment; the disturbance is held at its value
        // at the segment start
        y_seg_ = y_;
        dist_.value(t0, dbuf_);
        dseg_ = dbuf_;
        rk4(t0, y_seg_, t1 - t0, dseg_, y_);
        if (!all_finite(y_)) {
            diverged_ = true;
            aborted_ = true;
            return;
        }
        t_ = t1;
        assign_pinned(t_, y_);  // left-limit value at t1

        const double gate_time = trig_.t_k + cfg_.dwell_time;
        const bool monitoring = !cfg_.dwell_gate || t_ >= gate_time;

        // smooth crossing inside (t0, t1): locate unless it happened during a
        // dwell blackout (then the event fires at the gate instead)
        double phi_now = eval_phi(y_);
        if (phi_prev_ < 0.0 && phi_now >= 0.0) {
            if (monitoring && brk != Break::Gate) {
                const double t_event = locate_crossing(t0, t1);
                handle_event(t_event, false, Event::Cause::Threshold);
                return;
            }
            if (brk == Break::Gate) {
                // condition tripped during the blackout: forced event at gate
                handle_event(t1, false, Event::Cause::DwellForced);
                return;
            }
            // not monitoring yet: fall through, the gate break will catch it
        }

        accumulate_to_current();

        bool discontinuity = false;
        if (brk == Break::Hat) {
            close_window();
            trigger::on_hat_transition(trig_, cfg_, t_);
            y_[n_] = trig_.phi1;
            y_[n_ + 1] = trig_.phi2;
            snapshot_node();
            discontinuity = true;
        } else if (brk == Break::Jump) {
            // move phi2 to the post-jump schedule level
            y_[n_ + 1] = cfg_.schedule.value(std::nextafter(t_, t_ + 1.0), cfg_.delta_bar);
            snapshot_node();
            discontinuity = true;
        }

        if (discontinuity || brk == Break::Gate) {
            phi_now = eval_phi(y_);
            if (monitoring && phi_now >= 0.0 && (phi_now > 0.0 || phi_prev_ < 0.0)) {
                handle_event(t_, discontinuity,
                             brk == Break::Gate ? Event::Cause::DwellForced
                                                : Event::Cause::Threshold);
                return;
            }
        }

        record_node(phi_now);
        phi_prev_ = phi_now;
    }

    /// Bisects the crossing of Phi in (t0, t1]; each probe is a single RK4
    /// re-integration from the saved segment start. Leaves (t_, y_) at the
    /// accepted instant, where Phi >= 0.
    double locate_crossing(double t0, double t1) {
        if (t1 - t0 <= integ_.event_tol || eval_phi(y_) == 0.0) return t1;
        double lo = t0, hi = t1;
        while (hi - lo > integ_.event_tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            probe(t0, mid);
            if (eval_phi(y_) >= 0.0)
                hi = mid;
            else
                lo = mid;
        }
        probe(t0, hi);
        return hi;
    }

    void probe(double t0, double target) {
        rk4(t0, y_seg_, target - t0, dseg_, y_);
        t_ = target;
        assign_pinned(target, y_);
    }

    void handle_event(double t_event, bool at_jump, Event::Cause cause) {
        Event ev;
        ev.k = trig_.k + 1;
        ev.t = t_event;
        ev.cause = cause;
        ev.gap = t_event - trig_.t_k;
        ev.at_jump = at_jump;
        for (int i = 0; i < n_; ++i) xi_view_[i] = y_[i];
        ev.xi_norm = norm2(xi_view_);
        const double phi_val = eval_phi(y_);
        ev.residual_rel = std::abs(phi_val) / phi_normalizer(y_);
        if (!at_jump && cause == Event::Cause::Threshold)
            mon_.event_residual_rel_max = std::max(mon_.event_residual_rel_max, ev.residual_rel);
        events_.events.push_back(ev);

        // close quadrature and the error-energy window with pre-reset values
        accumulate_to_current();
        close_window();
        record_node(phi_val);

        if (ev.gap < integ_.zeno_min_gap ||
            static_cast<long>(events_.events.size()) >= integ_.zeno_max_events) {
            zeno_hit_ = true;
            aborted_ = true;
            return;
        }

        for (int i = 0; i < n_; ++i) xi_held_[i] = y_[i];
        plant_.gamma(xi_held_, u_held_);
        trigger::on_sample(trig_, cfg_, t_event);
        y_[n_] = trig_.phi1;
        y_[n_ + 1] = trig_.phi2;
        assign_pinned(t_event, y_);
        win_open_ = true;
        win_eps_ = win_xi_ = win_d_ = 0.0;
        snapshot_node();
        phi_prev_ = eval_phi(y_);
    }

    void finalize(RunResult& out) {
        accumulate_to_current();
        out.log = std::move(events_);
        out.t_end = t_;
        out.xi_final.assign(y_.begin(), y_.begin() + n_);
        out.diverged = diverged_;
        out.zeno_guard_hit = zeno_hit_;
        out.monitors = mon_;
        out.int_z_p = int_z_;
        out.int_d_p = int_d_;
        out.eq_gain_offset = (cfg_.k2 * cfg_.theta1 + cfg_.theta3 + v_total0_) / cert_.lambda;
        out.eq_gain_residual = cert_.mud_pow() * int_d_ + out.eq_gain_offset - int_z_;
        out.sum_r = trig_.sum_r;
        out.sum_r_hat = trig_.sum_r_hat;
        out.int_delta = trig_.int_delta;
        out.budget_flag = trig_.any_budget_flag();
        out.trajectory = std::move(traj_);
    }

    const ControlAffinePlant& plant_;
    const CertificateConstants& cert_;
    const LyapunovPair& lyap_;
    trigger::Config cfg_;
    const DisturbanceRealization& dist_;
    IntegratorConfig integ_;
    const BoundsReport* bounds_;

    int n_ = 0;
    double t_ = 0.0;
    Vec y_, y_seg_, rk1_, rk2_, rk3_, rk4buf_, ytmp_;
    Vec xi_view_, eps_, fx_, u_held_, dbuf_, dseg_, zbuf_, xi_held_;
    Mat gmat_;
    trigger::Workspace ws_;
    trigger::State trig_;
    std::vector<double> jump_buf_;

    double phi_prev_ = 0.0;
    bool aborted_ = false;
    bool diverged_ = false;
    bool zeno_hit_ = false;

    long node_count_ = 0;
    double prev_t_ = 0.0;
    double prev_zp_ = 0.0, prev_dp_ = 0.0, prev_ep_ = 0.0, prev_xp_ = 0.0, prev_phi2_ = 0.0;
    double int_z_ = 0.0, int_d_ = 0.0, int_xi_p_ = 0.0;
    bool win_open_ = true;
    double win_eps_ = 0.0, win_xi_ = 0.0, win_d_ = 0.0;
    double v_s0_ = 0.0;
    double v_total0_ = 0.0;

    MonitorReport mon_;
    EventLog events_;
    std::vector<TrajectoryRow> traj_;
};

/// Builds an engine and runs once.
inline RunResult simulate(const ControlAffinePlant& plant, const CertificateConstants& cert,
                          const LyapunovPair& lyap, const trigger::Config& cfg,
                          const DisturbanceRealization& dist, const IntegratorConfig& integ,
                          const Vec& xi0, double duration, const BoundsReport* bounds = nullptr) {
    SimEngine eng(plant, cert, lyap, cfg, dist, integ, bounds);
    return eng.run(xi0, duration);
}

}  // namespace etclab
