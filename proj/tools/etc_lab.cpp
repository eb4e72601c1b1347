// etc-lab: event-triggered control laboratory.
//
// Subcommands:
//   bounds   analytic guarantees for the configured trigger
//   run      Monte-Carlo simulation of one case (or the [trigger] section)
//   table2   the full six-case benchmark matrix
//   enlarge  inter-event enlargement design and closed-loop verification
//   presets  list the trigger preset catalog

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "etclab/experiment.hpp"

namespace fs = std::filesystem;
using namespace etclab;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<long> seed;
    std::optional<double> duration;
    std::optional<double> step;
    std::optional<long> mc_count;
    std::string out_dir;
    std::string case_label;
    bool dump_trajectories = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_config = true) {
    auto* c = cmd->add_option("--config", o.config_path, "experiment configuration file");
    if (need_config) c->required();
    cmd->add_option("--seed", o.seed, "override [experiment] seed");
    cmd->add_option("--duration", o.duration, "override [experiment] duration (s)");
    cmd->add_option("--step", o.step, "override [integrator] step (s)");
    cmd->add_option("--mc-count", o.mc_count, "override [experiment] mc_count");
    cmd->add_option("--out-dir", o.out_dir, "directory for CSV outputs");
    cmd->add_flag("--dump-trajectories", o.dump_trajectories, "write per-run trajectory CSVs");
}

ExperimentConfig load_experiment(const CommonOpts& o) {
    std::ifstream in(o.config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + o.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto cf = ConfigFile::parse(ss.str());
    // command-line overrides become part of the effective (hashed) config
    if (o.seed) cf.override_value("experiment", "seed", std::to_string(*o.seed));
    if (o.duration) cf.override_value("experiment", "duration", std::to_string(*o.duration));
    if (o.step) cf.override_value("integrator", "step", std::to_string(*o.step));
    if (o.mc_count) cf.override_value("experiment", "mc_count", std::to_string(*o.mc_count));
    if (o.dump_trajectories) cf.override_value("experiment", "dump_trajectories", "true");
    auto e = ExperimentConfig::from_file(cf);
    if (!o.out_dir.empty()) e.out_dir = o.out_dir;
    return e;
}

std::string case_summary_text(const CaseSummary& s) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "  case %-8s N=%-8.4g tau_m=%-12.6g mean_gap=%-10.4g lp_ratio<=%-10.4g "
                  "residual>=%-12.6g zeno=%d%s",
                  s.label.c_str(), s.n_mean, s.tau_m, s.mean_gap, s.lp_ratio_max,
                  s.eq_gain_residual_min, s.zeno_runs, s.budget_flag_any ? " [budget]" : "");
    return buf;
}

void write_case_outputs(const ExperimentConfig& e, const CaseSummary& s) {
    if (e.out_dir.empty()) return;
    fs::create_directories(e.out_dir);
    for (std::size_t r = 0; r < s.results.size(); ++r) {
        char name[128];
        std::snprintf(name, sizeof(name), "case_%s_run_%03zu_events.csv", s.label.c_str(), r);
        write_events_csv(fs::path(e.out_dir) / name, s.results[r].log);
        if (e.dump_trajectories && !s.results[r].trajectory.empty()) {
            std::snprintf(name, sizeof(name), "case_%s_run_%03zu_trajectory.csv", s.label.c_str(),
                          r);
            write_trajectory_csv(fs::path(e.out_dir) / name, s.results[r].trajectory);
        }
    }
}

void print_ordering_checks(const std::vector<CaseSummary>& sums) {
    auto get = [&](const std::string& label) -> const CaseSummary* {
        for (const auto& s : sums)
            if (s.label == label) return &s;
        return nullptr;
    };
    const auto *i = get("i"), *ii = get("ii"), *iii = get("iii"), *iv = get("iv"), *v = get("v"),
               *vi = get("vi");
    if (!(i && ii && iii && iv && v && vi)) return;
    const bool n_order = std::max(i->n_mean, ii->n_mean) < std::min(iv->n_mean, v->n_mean) &&
                         std::max(iv->n_mean, v->n_mean) < iii->n_mean && iii->n_mean < vi->n_mean;
    const bool t_order = std::min(i->tau_m, iv->tau_m) > std::max(ii->tau_m, v->tau_m) &&
                         std::min(ii->tau_m, v->tau_m) > iii->tau_m && iii->tau_m > vi->tau_m;
    std::printf("  N ordering  (i),(ii) < (iv),(v) < (iii) < (vi): %s\n",
                n_order ? "holds" : "VIOLATED");
    std::printf("  MIET ordering (i),(iv) > (ii),(v) > (iii) > (vi): %s\n",
                t_order ? "holds" : "VIOLATED");
}

int cmd_bounds(const CommonOpts& o) {
    const auto e = load_experiment(o);
    const auto b = make_bundle(e);
    trigger::Config cfg = o.case_label.empty() ? make_explicit_trigger(e)
                                               : make_case_trigger(e, find_case(o.case_label));
    const double eps = effective_epsilon_bound(e, b.plant.disturbance_dim);
    const auto rep = case_bounds(e, b, cfg, eps);
    std::printf("bounds report (config %s)\n", e.config_hash.c_str());
    std::fputs(bounds_text(rep).c_str(), stdout);
    std::printf("csv: %s\n", bounds_csv_header().c_str());
    std::printf("     %s\n", bounds_csv_row(rep).c_str());
    if (!e.out_dir.empty()) {
        fs::create_directories(e.out_dir);
        std::ofstream out(fs::path(e.out_dir) / "bounds.csv");
        out << bounds_csv_header() << '\n' << bounds_csv_row(rep) << '\n';
    }
    return 0;
}

int cmd_run(const CommonOpts& o) {
    auto e = load_experiment(o);
    const auto b = make_bundle(e);
    const bool keep = !e.out_dir.empty();
    CaseSummary sum;
    if (!o.case_label.empty())
        sum = run_case(e, b, find_case(o.case_label), keep);
    else
        sum = run_with_trigger(e, b, make_explicit_trigger(e), "custom", keep);
    std::printf("run summary (config %s, %d runs, duration %g s)\n", e.config_hash.c_str(),
                sum.runs, e.duration);
    std::puts(case_summary_text(sum).c_str());
    std::printf("analytic bounds:\n%s", bounds_text(sum.bounds).c_str());
    if (sum.diverged_runs) std::printf("  [warning] %d runs diverged\n", sum.diverged_runs);
    write_case_outputs(e, sum);
    if (!e.out_dir.empty()) write_summary_csv(fs::path(e.out_dir) / "summary.csv", {sum});
    return sum.diverged_runs == 0 ? 0 : 1;
}

int cmd_table2(const CommonOpts& o) {
    auto e = load_experiment(o);
    const auto b = make_bundle(e);
    const bool keep = !e.out_dir.empty();
    const auto sums = run_table(e, b, keep);
    std::printf("benchmark matrix (config %s, %d runs/case, duration %g s)\n",
                e.config_hash.c_str(), e.mc_count, e.duration);
    for (const auto& s : sums) std::puts(case_summary_text(s).c_str());
    print_ordering_checks(sums);
    for (const auto& s : sums) write_case_outputs(e, s);
    if (!e.out_dir.empty()) write_summary_csv(fs::path(e.out_dir) / "summary.csv", sums);
    int bad = 0;
    for (const auto& s : sums) bad += s.diverged_runs;
    return bad == 0 ? 0 : 1;
}

int cmd_enlarge(const CommonOpts& o, double tau_circ, double t_circ) {
    auto e = load_experiment(o);
    const auto b = make_bundle(e);
    const auto out = run_enlargement(e, b, tau_circ, t_circ);
    std::printf("enlargement design (config %s)\n", e.config_hash.c_str());
    std::printf("  chi_circ    %.9g\n", out.design.chi_circ);
    std::printf("  chi_star    %.9g\n", out.design.chi_star);
    std::printf("  delta_star  %.9g\n", out.design.delta_star);
    std::printf("  floor       %.9g s on [0, %.9g) s\n", out.design.tau_circ, out.design.T_circ);
    std::printf("  min gap within horizon: %.9g s\n", out.min_gap_within_horizon);
    std::printf("  verification: %s\n", out.verified ? "pass" : "FAIL");
    if (!e.out_dir.empty()) {
        fs::create_directories(e.out_dir);
        write_summary_csv(fs::path(e.out_dir) / "enlarge_summary.csv", {out.summary});
    }
    return out.verified ? 0 : 1;
}

int cmd_presets() {
    std::puts("trigger preset catalog:");
    std::puts("  me-submitted  k1 = 0, s_k = floor; full threshold dynamics");
    std::puts("  mixed         constant threshold: trigger at varphi = k2 * delta_bar");
    std::puts("  girard        dynamic filter only (k2 = 0)");
    std::puts("  integral      running-integral rule: trigger when int(varphi) = 0");
    std::puts("  static        pure state-based rule: trigger at varphi = 0");
    std::puts("  dolk          dwell-gated integral rule");
    std::puts("  mahmoud       dwell-gated static rule");
    std::puts("  postoyan      decaying threshold variable, no floor");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"etc-lab: event-triggered control simulation and analysis"};
    app.require_subcommand(1);

    CommonOpts ob, orun, otab, oenl;
    double tau_circ = 0.0, t_circ = 50.0;

    auto* bounds_cmd = app.add_subcommand("bounds", "print the analytic bounds report");
    add_common(bounds_cmd, ob);
    bounds_cmd->add_option("--case", ob.case_label, "benchmark case label (i..vi)");

    auto* run_cmd = app.add_subcommand("run", "simulate one case or the [trigger] section");
    add_common(run_cmd, orun);
    run_cmd->add_option("--case", orun.case_label, "benchmark case label (i..vi)");

    auto* tab_cmd = app.add_subcommand("table2", "run the configured benchmark case matrix");
    add_common(tab_cmd, otab);

    auto* enl_cmd = app.add_subcommand("enlarge", "design and verify an inter-event floor");
    add_common(enl_cmd, oenl);
    enl_cmd->add_option("--tau-circ", tau_circ, "requested inter-event floor (s)")->required();
    enl_cmd->add_option("--t-circ", t_circ, "horizon the floor must hold on (s)");

    auto* presets_cmd = app.add_subcommand("presets", "list the trigger preset catalog");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bounds_cmd->parsed()) return cmd_bounds(ob);
        if (run_cmd->parsed()) return cmd_run(orun);
        if (tab_cmd->parsed()) return cmd_table2(otab);
        if (enl_cmd->parsed()) return cmd_enlarge(oenl, tau_circ, t_circ);
        if (presets_cmd->parsed()) return cmd_presets();
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 2;
    }
    return 0;
}
