#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "etclab/experiment.hpp"

using namespace etclab;
using Catch::Approx;

namespace {

ExperimentConfig small_experiment() {
    ExperimentConfig e;
    e.mc_count = 4;
    e.duration = 20.0;
    e.seed = 2024;
    e.hold = 100.0;
    e.config_hash = "deadbeefdeadbeef";
    return e;
}

}  // namespace

TEST_CASE("case matrix") {
    CHECK(benchmark_cases().size() == 6);
    const auto& c1 = find_case("i");
    CHECK(c1.k1 == 1.0);
    CHECK(c1.k2 == 1.0);
    CHECK(c1.sched == CaseSpec::Sched::Exponential);
    const auto& c6 = find_case("vi");
    CHECK(c6.k1 == 0.0);
    CHECK(c6.k2 == 0.0);
    CHECK_THROWS_AS(find_case("vii"), std::invalid_argument);
}

TEST_CASE("initial conditions are shared across cases and sit on the circle") {
    const auto e = small_experiment();
    for (int r = 0; r < 6; ++r) {
        const auto x = initial_condition(e, 2, r);
        CHECK(norm2(x) == Approx(1.0).epsilon(1e-12));
        const auto again = initial_condition(e, 2, r);
        CHECK(x[0] == again[0]);
        CHECK(x[1] == again[1]);
    }
    auto edisk = e;
    edisk.init_on = "disk";
    bool interior = false;
    for (int r = 0; r < 32; ++r) {
        const auto x = initial_condition(edisk, 2, r);
        CHECK(norm2(x) <= 1.0 + 1e-12);
        interior = interior || norm2(x) < 0.99;
    }
    CHECK(interior);
}

TEST_CASE("single case run produces a coherent summary") {
    const auto e = small_experiment();
    const auto b = make_bundle(e);
    const auto sum = run_case(e, b, find_case("i"));
    CHECK(sum.runs == 4);
    CHECK(sum.rows.size() == 4);
    CHECK(sum.zeno_runs == 0);
    CHECK(sum.diverged_runs == 0);
    CHECK(sum.eq_gain_residual_min >= 0.0);
    CHECK(sum.phi1_min >= -1e-9);
    CHECK(sum.phi2_prehat_margin_min >= -1e-9);
    CHECK(sum.phi2_pin_dev_max == 0.0);
    CHECK(sum.bounds.tau_m.has_value());
    // min over runs matches the row data
    double tau_m = std::numeric_limits<double>::infinity();
    double n_sum = 0.0;
    for (const auto& row : sum.rows) {
        n_sum += row.n_events;
        tau_m = std::min(tau_m, row.tau_m);
    }
    CHECK(sum.n_mean == Approx(n_sum / 4.0));
    if (std::isfinite(tau_m)) CHECK(sum.tau_m == Approx(tau_m));
}

TEST_CASE("table run is deterministic for a fixed seed") {
    auto e = small_experiment();
    e.cases = {"i", "vi"};
    e.duration = 10.0;
    const auto b = make_bundle(e);
    const auto t1 = run_table(e, b);
    const auto t2 = run_table(e, b);
    REQUIRE(t1.size() == t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) {
        CHECK(t1[i].n_mean == t2[i].n_mean);
        CHECK(t1[i].tau_m == t2[i].tau_m);
        CHECK(t1[i].eq_gain_residual_min == t2[i].eq_gain_residual_min);
    }
}

TEST_CASE("gain report from a recorded trajectory matches the inline accumulators") {
    auto e = small_experiment();
    e.duration = 5.0;
    e.dump_trajectories = true;
    e.record_stride = 1;  // every node, so the quadratures coincide
    const auto b = make_bundle(e);
    const auto sum = run_case(e, b, find_case("iv"), /*keep_results=*/true);
    REQUIRE_FALSE(sum.results.empty());
    const auto& res = sum.results.front();
    REQUIRE_FALSE(res.trajectory.empty());
    const auto g = gain_report(res.trajectory, b.constants, b.lyapunov, 1.0, e.theta1, e.theta3);
    CHECK(g.int_z_p == Approx(res.int_z_p).epsilon(1e-6));
    CHECK(g.int_d_p == Approx(res.int_d_p).epsilon(1e-6));
    CHECK(g.residual == Approx(res.eq_gain_residual).epsilon(1e-6));
    CHECK(g.residual >= 0.0);
}

TEST_CASE("csv outputs are byte-identical across repeated invocations") {
    namespace fs = std::filesystem;
    auto e = small_experiment();
    e.duration = 10.0;
    e.mc_count = 2;
    const auto b = make_bundle(e);
    const auto sum = run_case(e, b, find_case("i"), true);

    const auto dir = fs::temp_directory_path() / "etclab_test_csv";
    fs::create_directories(dir);
    auto read_file = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };

    write_events_csv(dir / "a.csv", sum.results.front().log);
    write_events_csv(dir / "b.csv", sum.results.front().log);
    CHECK(read_file(dir / "a.csv") == read_file(dir / "b.csv"));

    write_summary_csv(dir / "s1.csv", {sum});
    write_summary_csv(dir / "s2.csv", {sum});
    const auto s1 = read_file(dir / "s1.csv");
    CHECK(s1 == read_file(dir / "s2.csv"));
    CHECK(s1.find("deadbeefdeadbeef") != std::string::npos);  // config hash embedded
    fs::remove_all(dir);
}

TEST_CASE("zero-disturbance, zero-initial-condition run stays quiet") {
    auto e = small_experiment();
    e.disturbance = "zero";
    e.init_radius = 0.0;
    e.mc_count = 1;
    e.duration = 5.0;
    const auto b = make_bundle(e);
    const auto sum = run_case(e, b, find_case("i"));
    CHECK(sum.n_mean <= 1.0);
    CHECK(sum.zeno_runs == 0);
}

TEST_CASE("enlargement study verifies the designed floor") {
    auto e = small_experiment();
    e.mc_count = 2;
    e.duration = 30.0;
    const auto b = make_bundle(e);
    const auto eps = effective_epsilon_bound(e, 1);
    auto cfg = make_case_trigger(e, find_case("iv"));
    const auto rep = case_bounds(e, b, cfg, eps);
    REQUIRE(rep.tau_star_1.has_value());

    const auto out = run_enlargement(e, b, 2.0 * *rep.tau_star_1, 25.0);
    CHECK(out.design.delta_star > e.delta_bar);
    CHECK(out.verified);
    CHECK(out.min_gap_within_horizon >= 2.0 * *rep.tau_star_1 - e.integ.event_tol);
}
