#pragma once

// Experiment orchestration: configuration schema, the six-case benchmark
// matrix, seeded Monte-Carlo execution, gain-inequality reporting, and CSV
// output. Runs are deterministic for a given (config, seed) and independent
// runs execute on a small worker pool with index-ordered aggregation.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "etclab/config.hpp"
#include "etclab/lure.hpp"
#include "etclab/sim.hpp"

namespace etclab {

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    // [plant]
    std::string plant_type = "lure";
    double h_star = 0.3;
    LipschitzCoefficients lip{3.0, 1.0, 1.0};

    // [certificate]
    double upsilon1 = 3.6e-3;
    double n1 = 1.0;
    double n2 = 0.47;
    double sigma = 0.99;
    double mu_d = 5.0;
    double lambda = 4.7e-3;

    // [trigger]
    std::string preset;  ///< when set, structural fields come from the catalog
    double k_bar = 1.0;
    double k1 = 1.0;
    double k2 = 1.0;
    double alpha1_slope = 1.0;
    double alpha2_slope = 1.0;
    double delta_bar = 10.0;
    double s_k = 12.5;
    std::string schedule = "exponential";  ///< exponential | staircase | constant
    double D1 = 10.0, rho1 = 0.05;
    double D2 = 2.0, rho2 = 3.0, n_bar = 10.0;
    std::string r_hat_rule = "carryover";  ///< carryover | zero
    double theta1 = 400.0, theta2 = 10.0, theta3 = 50.0;
    std::string phi3 = "exact";  ///< exact | nonaffine | none

    // [integrator]
    IntegratorConfig integ;

    // [experiment]
    double duration = 100.0;
    int mc_count = 100;
    std::uint64_t seed = 1;
    double init_radius = 1.0;
    std::string init_on = "circle";  ///< circle | disk
    std::string disturbance = "gaussian";  ///< gaussian | zero
    double variance = 1.0;
    double window = 100.0;
    double hold = 100.0;  ///< sample-hold period of the Gaussian draw (s)
    double epsilon_bound = -1.0;  ///< < 0: use the realized max sup-norm
    std::vector<std::string> cases{"i", "ii", "iii", "iv", "v", "vi"};
    std::string out_dir;
    bool dump_trajectories = false;
    int record_stride = 100;

    std::string config_hash;  ///< hex fingerprint of the source document

    static ExperimentConfig from_file(const ConfigFile& cf) {
        ExperimentConfig e;
        e.plant_type = cf.get_string("plant", "type", e.plant_type);
        e.h_star = cf.get_double("plant", "h_star", e.h_star);
        e.lip.lambda1 = cf.get_double("plant", "lambda1", e.lip.lambda1);
        e.lip.lambda2 = cf.get_double("plant", "lambda2", e.lip.lambda2);
        e.lip.lambda3 = cf.get_double("plant", "lambda3", e.lip.lambda3);

        e.upsilon1 = cf.get_double("certificate", "upsilon1", e.upsilon1);
        e.n1 = cf.get_double("certificate", "n1", e.n1);
        e.n2 = cf.get_double("certificate", "n2", e.n2);
        e.sigma = cf.get_double("certificate", "sigma", e.sigma);
        e.mu_d = cf.get_double("certificate", "mu_d", e.mu_d);
        e.lambda = cf.get_double("certificate", "lambda", e.lambda);

        e.preset = cf.get_string("trigger", "preset", e.preset);
        e.k_bar = cf.get_double("trigger", "k_bar", e.k_bar);
        e.k1 = cf.get_double("trigger", "k1", e.k1);
        e.k2 = cf.get_double("trigger", "k2", e.k2);
        e.alpha1_slope = cf.get_double("trigger", "alpha1", e.alpha1_slope);
        e.alpha2_slope = cf.get_double("trigger", "alpha2", e.alpha2_slope);
        e.delta_bar = cf.get_double("trigger", "delta_bar", e.delta_bar);
        e.s_k = cf.get_double("trigger", "s_k", e.s_k);
        e.schedule = cf.get_string("trigger", "schedule", e.schedule);
        e.D1 = cf.get_double("trigger", "D1", e.D1);
        e.rho1 = cf.get_double("trigger", "rho1", e.rho1);
        e.D2 = cf.get_double("trigger", "D2", e.D2);
        e.rho2 = cf.get_double("trigger", "rho2", e.rho2);
        e.n_bar = cf.get_double("trigger", "n_bar", e.n_bar);
        e.r_hat_rule = cf.get_string("trigger", "r_hat", e.r_hat_rule);
        e.theta1 = cf.get_double("trigger", "theta1", e.theta1);
        e.theta2 = cf.get_double("trigger", "theta2", e.theta2);
        e.theta3 = cf.get_double("trigger", "theta3", e.theta3);
        e.phi3 = cf.get_string("trigger", "phi3", e.phi3);

        e.integ.h = cf.get_double("integrator", "step", e.integ.h);
        e.integ.event_tol = cf.get_double("integrator", "event_tolerance", e.integ.event_tol);
        e.integ.zeno_min_gap = cf.get_double("integrator", "zeno_min_gap", e.integ.zeno_min_gap);
        e.integ.zeno_max_events =
            cf.get_int("integrator", "zeno_max_events", e.integ.zeno_max_events);

        e.duration = cf.get_double("experiment", "duration", e.duration);
        e.mc_count = static_cast<int>(cf.get_int("experiment", "mc_count", e.mc_count));
        e.seed = static_cast<std::uint64_t>(cf.get_int("experiment", "seed", static_cast<long>(e.seed)));
        e.init_radius = cf.get_double("experiment", "init_radius", e.init_radius);
        e.init_on = cf.get_string("experiment", "init_on", e.init_on);
        e.disturbance = cf.get_string("experiment", "disturbance", e.disturbance);
        e.variance = cf.get_double("experiment", "variance", e.variance);
        e.window = cf.get_double("experiment", "window", e.window);
        e.hold = cf.get_double("experiment", "hold", e.hold);
        e.epsilon_bound = cf.get_double("experiment", "epsilon_bound", e.epsilon_bound);
        const std::string cases = cf.get_string("experiment", "cases", "i,ii,iii,iv,v,vi");
        e.cases = split_csv(cases);
        e.out_dir = cf.get_string("experiment", "out_dir", e.out_dir);
        e.dump_trajectories =
            cf.get_bool("experiment", "dump_trajectories", e.dump_trajectories);
        e.record_stride =
            static_cast<int>(cf.get_int("experiment", "record_stride", e.record_stride));

        cf.reject_unknown_keys();
        e.config_hash = hash_hex(cf.hash());
        return e;
    }

    static std::vector<std::string> split_csv(const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                cur += c;
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    }
};

// ---------------------------------------------------------------------------
// System bundle (plant + certificate + analysis inputs)
// ---------------------------------------------------------------------------

struct SystemBundle {
    ControlAffinePlant plant;
    CertificateConstants constants;
    LyapunovPair lyapunov;
    ClassK level_lower_bound = ClassK::linear(1.0);
    LipschitzCoefficients lip;
};

inline SystemBundle make_bundle(const ExperimentConfig& e) {
    if (e.plant_type != "lure")
        throw std::invalid_argument("unknown plant type '" + e.plant_type +
                                    "' (custom plants are registered programmatically)");
    SystemBundle b;
    b.plant = lure_plant(e.h_star);
    auto cert = lure_certificate(e.upsilon1, e.n1, e.n2, e.sigma, e.mu_d, e.lambda, e.h_star);
    b.constants = cert.constants;
    b.lyapunov = std::move(cert.lyapunov);
    b.level_lower_bound = lure_level_lower_bound(e.upsilon1, e.n2, e.lambda);
    b.lip = e.lip;
    b.lip.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Case matrix
// ---------------------------------------------------------------------------

struct CaseSpec {
    std::string label;
    double k1;
    double k2;
    enum class Sched { Exponential, Staircase, None } sched;
};

/// The six benchmark combinations of (k1, k2, schedule).
inline const std::vector<CaseSpec>& benchmark_cases() {
    static const std::vector<CaseSpec> cases = {
        {"i", 1.0, 1.0, CaseSpec::Sched::Exponential},
        {"ii", 1.0, 1.0, CaseSpec::Sched::Staircase},
        {"iii", 1.0, 0.0, CaseSpec::Sched::None},
        {"iv", 0.0, 1.0, CaseSpec::Sched::Exponential},
        {"v", 0.0, 1.0, CaseSpec::Sched::Staircase},
        {"vi", 0.0, 0.0, CaseSpec::Sched::None},
    };
    return cases;
}

inline const CaseSpec& find_case(const std::string& label) {
    for (const auto& c : benchmark_cases())
        if (c.label == label) return c;
    throw std::invalid_argument("unknown case label '" + label + "'");
}

inline trigger::DeltaSchedule schedule_from_config(const ExperimentConfig& e,
                                                   CaseSpec::Sched sched) {
    switch (sched) {
        case CaseSpec::Sched::Exponential:
            return trigger::DeltaSchedule::exponential(e.D1, e.rho1);
        case CaseSpec::Sched::Staircase:
            return trigger::DeltaSchedule::staircase(e.D2, e.rho2, e.n_bar);
        case CaseSpec::Sched::None:
            return trigger::DeltaSchedule::constant();
    }
    return trigger::DeltaSchedule::constant();
}

inline trigger::Phi3Mode phi3_mode_from_string(const std::string& s) {
    if (s == "exact") return trigger::Phi3Mode::Exact;
    if (s == "nonaffine") return trigger::Phi3Mode::NonAffine;
    if (s == "none") return trigger::Phi3Mode::None;
    throw std::invalid_argument("unknown phi3 mode '" + s + "'");
}

/// Trigger configuration for one benchmark case (tau_hat not yet set).
inline trigger::Config make_case_trigger(const ExperimentConfig& e, const CaseSpec& cs) {
    trigger::Config cfg;
    cfg.k_bar = e.k_bar;
    cfg.k1 = cs.k1;
    cfg.k2 = cs.k2;
    cfg.alpha1 = ClassK::linear(e.alpha1_slope);
    cfg.alpha2 = ClassK::linear(e.alpha2_slope);
    cfg.delta_bar = e.delta_bar;
    cfg.schedule = schedule_from_config(e, cs.sched);
    cfg.reset_s = trigger::ResetS::constant(e.s_k);
    cfg.reset_r_hat = e.r_hat_rule == "zero" ? trigger::ResetRHat::zero()
                                             : trigger::ResetRHat::carryover();
    cfg.theta1 = e.theta1;
    cfg.theta2 = e.theta2;
    cfg.theta3 = e.theta3;
    cfg.phi3_mode = phi3_mode_from_string(e.phi3);
    cfg.phi3_lambda2 = e.lip.lambda2;
    cfg.validate();
    return cfg;
}

/// Trigger configuration from the [trigger] section directly (preset or
/// explicit gains); used by the single-run entry point.
inline trigger::Config make_explicit_trigger(const ExperimentConfig& e) {
    trigger::Config cfg;
    if (!e.preset.empty()) {
        cfg = trigger::preset(e.preset);
    } else {
        cfg.k_bar = e.k_bar;
        cfg.k1 = e.k1;
        cfg.k2 = e.k2;
        cfg.alpha1 = ClassK::linear(e.alpha1_slope);
        cfg.alpha2 = ClassK::linear(e.alpha2_slope);
        cfg.delta_bar = e.delta_bar;
        if (e.schedule == "exponential")
            cfg.schedule = trigger::DeltaSchedule::exponential(e.D1, e.rho1);
        else if (e.schedule == "staircase")
            cfg.schedule = trigger::DeltaSchedule::staircase(e.D2, e.rho2, e.n_bar);
        else if (e.schedule == "constant")
            cfg.schedule = trigger::DeltaSchedule::constant();
        else
            throw std::invalid_argument("unknown schedule '" + e.schedule + "'");
        cfg.reset_s = trigger::ResetS::constant(e.s_k);
        cfg.reset_r_hat = e.r_hat_rule == "zero" ? trigger::ResetRHat::zero()
                                                 : trigger::ResetRHat::carryover();
        cfg.theta1 = e.theta1;
        cfg.theta2 = e.theta2;
        cfg.theta3 = e.theta3;
        cfg.phi3_mode = phi3_mode_from_string(e.phi3);
    }
    cfg.phi3_lambda2 = e.lip.lambda2;
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Monte-Carlo execution
// ---------------------------------------------------------------------------

/// Initial condition for a run: shared across cases so case comparisons are
/// paired. Uniform on the sphere of init_radius, or in the ball when
/// init_on = disk.
inline Vec initial_condition(const ExperimentConfig& e, int dim, int run_index) {
    const std::uint64_t key = mix_keys(e.seed, 0xA11CE);
    Vec x(dim);
    double s2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        x[i] = gaussian(key, static_cast<std::uint64_t>(run_index) * dim + i);
        s2 += x[i] * x[i];
    }
    double r = e.init_radius;
    if (e.init_on == "disk")
        r *= std::pow(uniform01(key, 0x10000000ULL + run_index), 1.0 / dim);
    const double n = std::sqrt(s2);
    for (auto& v : x) v *= n > 0.0 ? r / n : 0.0;
    return x;
}

inline DisturbanceSpec disturbance_spec(const ExperimentConfig& e, int run_index) {
    if (e.disturbance == "zero") return DisturbanceSpec::zero();
    if (e.disturbance == "gaussian")
        return DisturbanceSpec::gaussian(e.variance, e.window, e.hold,
                                         mix_keys(e.seed, 0xD157 + run_index));
    throw std::invalid_argument("unknown disturbance '" + e.disturbance + "'");
}

struct RunRow {
    int run = 0;
    int n_events = 0;
    double tau_m = std::numeric_limits<double>::infinity();
    double mean_gap = std::numeric_limits<double>::quiet_NaN();
    double eq_gain_residual = 0.0;
    double lp_ratio = std::numeric_limits<double>::quiet_NaN();
    bool zeno = false;
    bool diverged = false;
    bool budget_flag = false;
};

struct CaseSummary {
    std::string label;
    int runs = 0;
    double n_mean = 0.0;
    double tau_m = std::numeric_limits<double>::infinity();  ///< min gap over all runs
    double mean_gap = std::numeric_limits<double>::quiet_NaN();
    double lp_ratio_max = 0.0;
    double eq_gain_residual_min = std::numeric_limits<double>::infinity();
    int zeno_runs = 0;
    int diverged_runs = 0;
    bool budget_flag_any = false;

    // worst-case monitors across runs
    double phi1_min = std::numeric_limits<double>::infinity();
    double phi2_prehat_margin_min = std::numeric_limits<double>::infinity();
    double phi2_pin_dev_max = 0.0;
    double event_residual_rel_max = 0.0;
    double lemma_error_excess_max = -std::numeric_limits<double>::infinity();
    double ball_norm_max = 0.0;

    BoundsReport bounds;
    std::string config_hash;
    std::vector<RunRow> rows;
    std::vector<RunResult> results;  ///< kept when keep_results is requested
};

namespace detail {

template <typename F>
void parallel_for(int count, F&& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(count));
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

/// Disturbance bound for the analytic report: configured value, or the max
/// realized sup-norm over the Monte-Carlo draws.
inline double effective_epsilon_bound(const ExperimentConfig& e, int dim) {
    if (e.epsilon_bound >= 0.0) return e.epsilon_bound;
    double eps = 0.0;
    for (int r = 0; r < e.mc_count; ++r) {
        const auto real = realize_disturbance(disturbance_spec(e, r), dim, e.duration, e.integ.h);
        eps = std::max(eps, real.sup_norm());
    }
    return eps;
}

/// Analytic report for a case: margins, dwell, MIET, error gains, ball.
inline BoundsReport case_bounds(const ExperimentConfig& e, const SystemBundle& b,
                                const trigger::Config& cfg, double eps_bound) {
    auto rep = miet(b.constants, b.lip, {cfg.k2, cfg.delta_bar}, eps_bound);
    double phi2_sup = cfg.reset_s.value;
    for (int i = 0; i <= 200; ++i)
        phi2_sup = std::max(phi2_sup,
                            cfg.schedule.value(e.duration * i / 200.0, cfg.delta_bar));
    Vec xi_worst(b.plant.state_dim, 0.0);
    xi_worst[0] = e.init_radius;
    rep.rho_bar = rho_bar(b.constants, b.lyapunov, xi_worst, eps_bound, phi2_sup, cfg.theta2,
                          cfg.theta3, b.level_lower_bound, cfg.k2);
    return rep;
}

/// Monte-Carlo execution of one trigger configuration. tau_hat and, for the
/// dwell-gated reductions, the dwell time are bound from the analytic report.
inline CaseSummary run_with_trigger(const ExperimentConfig& e, const SystemBundle& b,
                                    trigger::Config cfg, const std::string& label,
                                    bool keep_results = false,
                                    std::optional<double> eps_override = std::nullopt) {
    CaseSummary sum;
    sum.label = label;
    sum.runs = e.mc_count;
    sum.config_hash = e.config_hash;

    const double eps =
        eps_override ? *eps_override : effective_epsilon_bound(e, b.plant.disturbance_dim);
    sum.bounds = case_bounds(e, b, cfg, eps);
    cfg.tau_hat = sum.bounds.tau_hat.finite ? sum.bounds.tau_hat.seconds : e.duration;
    if (cfg.dwell_gate) {
        // time-regularized reductions wait out the analytic MIET; when that
        // guarantee degenerates (k2 delta_bar = 0 under disturbance) the
        // dwell falls back to tau_hat
        cfg.dwell_time = sum.bounds.tau_m ? sum.bounds.miet_or_zero()
                                          : (sum.bounds.tau_hat.finite ? sum.bounds.tau_hat.seconds
                                                                       : 0.0);
    }

    IntegratorConfig integ = e.integ;
    integ.record_stride = e.dump_trajectories ? e.record_stride : 0;

    std::vector<RunResult> results(e.mc_count);
    detail::parallel_for(e.mc_count, [&](int r) {
        const auto dist =
            realize_disturbance(disturbance_spec(e, r), b.plant.disturbance_dim, e.duration, integ.h);
        const Vec xi0 = initial_condition(e, b.plant.state_dim, r);
        results[r] = simulate(b.plant, b.constants, b.lyapunov, cfg, dist, integ, xi0, e.duration,
                              &sum.bounds);
    });

    double n_sum = 0.0, gap_sum = 0.0;
    int gap_count = 0;
    for (int r = 0; r < e.mc_count; ++r) {
        const auto& res = results[r];
        RunRow row;
        row.run = r;
        row.n_events = res.log.count();
        row.tau_m = res.log.count() ? res.log.min_gap() : std::numeric_limits<double>::infinity();
        row.mean_gap = res.log.mean_gap();
        row.eq_gain_residual = res.eq_gain_residual;
        row.lp_ratio = res.int_d_p > 0.0 ? res.int_z_p / res.int_d_p
                                         : std::numeric_limits<double>::quiet_NaN();
        row.zeno = res.zeno_guard_hit;
        row.diverged = res.diverged;
        row.budget_flag = res.budget_flag;
        sum.rows.push_back(row);

        n_sum += row.n_events;
        if (res.log.count()) {
            sum.tau_m = std::min(sum.tau_m, row.tau_m);
            gap_sum += row.mean_gap;
            ++gap_count;
        }
        sum.zeno_runs += row.zeno ? 1 : 0;
        sum.diverged_runs += row.diverged ? 1 : 0;
        sum.budget_flag_any = sum.budget_flag_any || row.budget_flag;
        sum.eq_gain_residual_min = std::min(sum.eq_gain_residual_min, row.eq_gain_residual);
        if (!std::isnan(row.lp_ratio)) sum.lp_ratio_max = std::max(sum.lp_ratio_max, row.lp_ratio);

        sum.phi1_min = std::min(sum.phi1_min, res.monitors.phi1_min);
        sum.phi2_prehat_margin_min =
            std::min(sum.phi2_prehat_margin_min, res.monitors.phi2_prehat_margin_min);
        sum.phi2_pin_dev_max = std::max(sum.phi2_pin_dev_max, res.monitors.phi2_pin_dev_max);
        sum.event_residual_rel_max =
            std::max(sum.event_residual_rel_max, res.monitors.event_residual_rel_max);
        sum.lemma_error_excess_max =
            std::max(sum.lemma_error_excess_max, res.monitors.lemma_error_excess_max);
        sum.ball_norm_max = std::max(sum.ball_norm_max, res.monitors.ball_norm_max);
    }
    sum.n_mean = n_sum / e.mc_count;
    sum.mean_gap = gap_count ? gap_sum / gap_count : std::numeric_limits<double>::quiet_NaN();
    if (keep_results) sum.results = std::move(results);
    return sum;
}

inline CaseSummary run_case(const ExperimentConfig& e, const SystemBundle& b, const CaseSpec& cs,
                            bool keep_results = false,
                            std::optional<double> eps_override = std::nullopt) {
    return run_with_trigger(e, b, make_case_trigger(e, cs), cs.label, keep_results, eps_override);
}

inline std::vector<CaseSummary> run_table(const ExperimentConfig& e, const SystemBundle& b,
                                          bool keep_results = false) {
    const double eps = effective_epsilon_bound(e, b.plant.disturbance_dim);
    std::vector<CaseSummary> out;
    for (const auto& label : e.cases)
        out.push_back(run_case(e, b, find_case(label), keep_results, eps));
    return out;
}

// ---------------------------------------------------------------------------
// Enlargement study
// ---------------------------------------------------------------------------

struct EnlargementOutcome {
    EnlargementDesign design;
    CaseSummary summary;
    double min_gap_within_horizon = std::numeric_limits<double>::infinity();
    bool verified = false;  ///< every gap with t_{k+1} <= T_circ is >= tau_circ - tol
};

/// Designs delta* for the requested floor and verifies it in closed loop.
/// The trigger uses k1 = 0 with the threshold pinned at delta* up to T_circ.
inline EnlargementOutcome run_enlargement(const ExperimentConfig& e, const SystemBundle& b,
                                          double tau_circ, double T_circ) {
    CaseSpec cs{"enlarge", 0.0, 1.0, CaseSpec::Sched::None};
    auto cfg = make_case_trigger(e, cs);

    const double eps = effective_epsilon_bound(e, b.plant.disturbance_dim);
    auto rep = case_bounds(e, b, cfg, eps);
    const auto design = enlargement_design(rep, tau_circ, T_circ, cfg.delta_bar);

    cfg.schedule = trigger::DeltaSchedule::enlargement(std::max(design.delta_star, cfg.delta_bar),
                                                       T_circ);
    cfg.tau_hat = rep.tau_hat.finite ? rep.tau_hat.seconds : e.duration;

    EnlargementOutcome out;
    out.design = design;

    IntegratorConfig integ = e.integ;
    integ.record_stride = 0;

    std::vector<RunResult> results(e.mc_count);
    detail::parallel_for(e.mc_count, [&](int r) {
        const auto dist =
            realize_disturbance(disturbance_spec(e, r), b.plant.disturbance_dim, e.duration, integ.h);
        const Vec xi0 = initial_condition(e, b.plant.state_dim, r);
        results[r] = simulate(b.plant, b.constants, b.lyapunov, cfg, dist, integ, xi0, e.duration,
                              &rep);
    });

    out.verified = true;
    CaseSummary& sum = out.summary;
    sum.label = "enlarge";
    sum.runs = e.mc_count;
    sum.bounds = rep;
    sum.config_hash = e.config_hash;
    double n_sum = 0.0;
    for (int r = 0; r < e.mc_count; ++r) {
        const auto& res = results[r];
        n_sum += res.log.count();
        sum.zeno_runs += res.zeno_guard_hit ? 1 : 0;
        sum.diverged_runs += res.diverged ? 1 : 0;
        for (const auto& ev : res.log.events) {
            if (ev.t <= T_circ) {
                out.min_gap_within_horizon = std::min(out.min_gap_within_horizon, ev.gap);
                if (ev.gap < tau_circ - e.integ.event_tol) out.verified = false;
            }
            sum.tau_m = std::min(sum.tau_m, ev.gap);
        }
        sum.eq_gain_residual_min = std::min(sum.eq_gain_residual_min, res.eq_gain_residual);
    }
    sum.n_mean = n_sum / e.mc_count;
    return out;
}

// ---------------------------------------------------------------------------
// Gain-inequality report from a recorded trajectory
// ---------------------------------------------------------------------------

struct GainReport {
    double int_z_p = 0.0;
    double int_d_p = 0.0;
    double offset = 0.0;
    double residual = 0.0;  ///< mu_d^p int_d + offset - int_z; >= 0 is the pass condition
};

/// Trapezoidal evaluation of the gain inequality over a recorded trajectory.
inline GainReport gain_report(const std::vector<TrajectoryRow>& traj,
                              const CertificateConstants& c, const LyapunovPair& lyap,
                              double k2, double theta1, double theta3) {
    GainReport g;
    if (traj.empty()) return g;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        const double dt = traj[i].t - traj[i - 1].t;
        g.int_z_p += 0.5 * dt * (norm_pow(traj[i - 1].z, c.p) + norm_pow(traj[i].z, c.p));
        g.int_d_p += 0.5 * dt * (norm_pow(traj[i - 1].d, c.p) + norm_pow(traj[i].d, c.p));
    }
    g.offset = (k2 * theta1 + theta3 + lyap.V_total(traj.front().xi, c.lambda)) / c.lambda;
    g.residual = c.mud_pow() * g.int_d_p + g.offset - g.int_z_p;
    return g;
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_events_csv(const std::filesystem::path& path, const EventLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "k,t_k,gap,cause\n";
    for (const auto& e : log.events)
        out << e.k << ',' << detail::fmt(e.t) << ',' << detail::fmt(e.gap) << ','
            << (e.cause == Event::Cause::Threshold ? "threshold" : "dwell-forced") << '\n';
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const std::vector<TrajectoryRow>& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    if (traj.empty()) {
        out << "t\n";
        return;
    }
    out << "t";
    for (std::size_t i = 0; i < traj.front().xi.size(); ++i) out << ",xi" << i + 1;
    for (std::size_t i = 0; i < traj.front().u.size(); ++i) out << ",u" << i + 1;
    out << ",eps_norm,phi1,phi2,Phi";
    for (std::size_t i = 0; i < traj.front().d.size(); ++i) out << ",d" << i + 1;
    for (std::size_t i = 0; i < traj.front().z.size(); ++i) out << ",z" << i + 1;
    out << '\n';
    for (const auto& row : traj) {
        out << detail::fmt(row.t);
        for (double v : row.xi) out << ',' << detail::fmt(v);
        for (double v : row.u) out << ',' << detail::fmt(v);
        out << ',' << detail::fmt(row.eps_norm) << ',' << detail::fmt(row.phi1) << ','
            << detail::fmt(row.phi2) << ',' << detail::fmt(row.Phi);
        for (double v : row.d) out << ',' << detail::fmt(v);
        for (double v : row.z) out << ',' << detail::fmt(v);
        out << '\n';
    }
}

inline std::string bounds_csv_header() {
    return "B1,B3,c,tau1,tau3,tau_hat,m1,m2,kappa,tau_star_1,tau_m,a,b,rho_bar,epsilon_bound,"
           "degenerate_m2,unchecked_certificate";
}

inline std::string bounds_csv_row(const BoundsReport& r) {
    using detail::fmt;
    auto tb = [](const TimeBound& t) { return t.finite ? detail::fmt(t.seconds) : std::string("inf"); };
    std::string row = fmt(r.B1) + "," + fmt(r.B3) + "," + fmt(r.c) + "," + tb(r.tau1) + "," +
                      tb(r.tau3) + "," + tb(r.tau_hat) + "," + fmt(r.m1) + "," + fmt(r.m2) + ",";
    row += r.kappa ? fmt(*r.kappa) : "none";
    row += ",";
    row += r.tau_star_1 ? fmt(*r.tau_star_1) : "none";
    row += ",";
    row += r.tau_m ? tb(*r.tau_m) : "none";
    row += "," + fmt(r.a) + "," + fmt(r.b) + "," + fmt(r.rho_bar) + "," + fmt(r.epsilon_bound);
    row += std::string(",") + (r.degenerate_m2 ? "1" : "0") + "," +
           (r.unchecked_certificate ? "1" : "0");
    return row;
}

inline std::string bounds_text(const BoundsReport& r) {
    std::string t;
    auto line = [&](const std::string& name, const std::string& val) {
        t += "  " + name + std::string(name.size() < 14 ? 14 - name.size() : 1, ' ') + val + "\n";
    };
    auto tb = [](const TimeBound& x) {
        return x.finite ? detail::fmt(x.seconds) + " s" : std::string("unbounded");
    };
    line("B1", detail::fmt(r.B1));
    line("B3", detail::fmt(r.B3));
    line("c", detail::fmt(r.c));
    line("tau1", tb(r.tau1));
    line("tau3", tb(r.tau3));
    line("tau_hat", tb(r.tau_hat));
    line("m1", detail::fmt(r.m1));
    line("m2", detail::fmt(r.m2));
    line("kappa", r.kappa ? detail::fmt(*r.kappa) : "n/a");
    line("tau_star(1)", r.tau_star_1 ? detail::fmt(*r.tau_star_1) + " s" : "n/a");
    line("tau_m", r.tau_m ? tb(*r.tau_m) : "no guarantee (k2*delta_bar = 0 under disturbance)");
    line("a", detail::fmt(r.a));
    line("b", detail::fmt(r.b));
    line("rho_bar", detail::fmt(r.rho_bar));
    line("epsilon", detail::fmt(r.epsilon_bound));
    if (r.unchecked_certificate) t += "  [warning] certificate was not validated\n";
    return t;
}

inline std::string summary_csv_header() {
    return "case,runs,N_mean,tau_m,mean_gap,lp_ratio_max,eq_gain_residual_min,zeno_runs,"
           "diverged_runs,budget_flag,phi1_min,phi2_margin_min,pin_dev_max,event_residual_max,"
           "config_hash";
}

inline std::string summary_csv_row(const CaseSummary& s) {
    using detail::fmt;
    std::string row = s.label + "," + std::to_string(s.runs) + "," + fmt(s.n_mean) + "," +
                      fmt(s.tau_m) + "," + fmt(s.mean_gap) + "," + fmt(s.lp_ratio_max) + "," +
                      fmt(s.eq_gain_residual_min) + "," + std::to_string(s.zeno_runs) + "," +
                      std::to_string(s.diverged_runs) + "," + (s.budget_flag_any ? "1" : "0") +
                      "," + fmt(s.phi1_min) + "," + fmt(s.phi2_prehat_margin_min) + "," +
                      fmt(s.phi2_pin_dev_max) + "," + fmt(s.event_residual_rel_max) + "," +
                      s.config_hash;
    return row;
}

inline void write_summary_csv(const std::filesystem::path& path,
                              const std::vector<CaseSummary>& sums) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << summary_csv_header() << '\n';
    for (const auto& s : sums) out << summary_csv_row(s) << '\n';
}

}  // namespace etclab
