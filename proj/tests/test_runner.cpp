#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "expo/runner.hpp"

using namespace expo;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_lr(const std::string& out) {
    ExperimentConfig cfg;
    cfg.task = "lr";
    cfg.method = "expo";
    cfg.iterations = 5;
    cfg.seeds = {1, 2, 3};
    cfg.k1 = 2;
    cfg.k2 = 2;
    cfg.embed_dim = 32;
    cfg.arm_estimator.hidden_width = 16;
    cfg.arm_estimator.epochs = 25;
    cfg.out_dir = out;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config json roundtrip preserves every field") {
    ExperimentConfig cfg = tiny_lr("somewhere");
    cfg.method = "expo_es";
    cfg.eta_desc = 42.0;
    cfg.kES = 33;
    cfg.mab.K = 7;
    cfg.seq_estimator.optimizer = Optimizer::gd;
    cfg.transcript = true;
    ExperimentConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.task == cfg.task);
    CHECK(back.method == cfg.method);
    CHECK(back.iterations == cfg.iterations);
    CHECK(back.seeds == cfg.seeds);
    CHECK(back.k1 == cfg.k1);
    CHECK(back.eta_desc == cfg.eta_desc);
    CHECK(back.kES == cfg.kES);
    CHECK(back.mab.K == cfg.mab.K);
    CHECK(back.embed_dim == cfg.embed_dim);
    CHECK(back.arm_estimator.hidden_width == cfg.arm_estimator.hidden_width);
    CHECK(back.seq_estimator.optimizer == Optimizer::gd);
    CHECK(back.transcript == cfg.transcript);
    CHECK(back.out_dir == cfg.out_dir);
}

TEST_CASE("resolve_config fills per-task defaults") {
    ExperimentConfig cfg;
    cfg.task = "lr";
    resolve_config(cfg);
    CHECK(cfg.iterations == 50);
    CHECK(cfg.eta_desc == 100.0);

    ExperimentConfig mab;
    mab.task = "mab";
    resolve_config(mab);
    CHECK(mab.iterations == 100);
    CHECK(mab.eta_desc == 10.0);

    for (auto [n, want] : {std::pair{10, 100}, {15, 200}, {20, 300}}) {
        ExperimentConfig tsp;
        tsp.task = "tsp";
        tsp.tsp.n_nodes = n;
        resolve_config(tsp);
        CHECK(tsp.iterations == want);
    }

    ExperimentConfig bad;
    bad.task = "chess";
    CHECK_THROWS_AS(resolve_config(bad), ValidationError);
}

TEST_CASE("aggregate computes mean and standard error") {
    std::vector<std::vector<TraceRow>> traces(3, std::vector<TraceRow>(2));
    // iteration 0 values: 1, 2, 3  -> mean 2, sd 1, se 1/sqrt(3)
    for (int r = 0; r < 3; ++r) {
        traces[r][0] = {0, 0, -1, 0, 0, 0, static_cast<double>(r + 1)};
        traces[r][1] = {1, 0, -1, 0, 0, 0, 5.0};
    }
    auto rows = aggregate(traces);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mean == doctest::Approx(2.0));
    CHECK(rows[0].se == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(rows[1].mean == doctest::Approx(5.0));
    CHECK(rows[1].se == doctest::Approx(0.0));
    // single replicate has se 0
    auto single = aggregate({traces[0]});
    CHECK(single[0].se == 0.0);
    CHECK_THROWS(aggregate({}));
    traces[1].pop_back();
    CHECK_THROWS_AS(aggregate(traces), ShapeError);
}

TEST_CASE("aggregate csv roundtrip") {
    std::vector<AggregateRow> rows = {{0, 2.5, 0.25}, {1, 1.75, 0.1}};
    const std::string path = (fs::temp_directory_path() / "agg_rt.csv").string();
    write_aggregate_csv(path, rows);
    auto back = read_aggregate_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].mean == doctest::Approx(1.75));
    CHECK(back[1].se == doctest::Approx(0.1));
    fs::remove(path);
}

TEST_CASE("best arm file roundtrip and validation") {
    const std::string path = (fs::temp_directory_path() / "best_arm.txt").string();
    write_best_arm(path, Arm{7, 2, 1});
    CHECK(load_best_arm(path) == 7);
    std::ofstream(path) << "version 2\narm 7\n";
    CHECK_THROWS_AS(load_best_arm(path), ParseError);
    fs::remove(path);
}

TEST_CASE("run_experiment writes the full run directory layout") {
    const std::string out = (fs::temp_directory_path() / "runner_layout").string();
    fs::remove_all(out);
    ExperimentConfig cfg = tiny_lr(out);
    cfg.transcript = true;
    RunArtifacts art = run_experiment(cfg);
    CHECK(art.run_dir == out);
    CHECK(fs::exists(out + "/config.resolved.json"));
    CHECK(fs::exists(out + "/aggregate.csv"));
    CHECK(fs::exists(out + "/plot.svg"));
    CHECK(fs::exists(out + "/best_arm.txt"));
    for (uint64_t s : {1, 2, 3}) {
        CHECK(fs::exists(out + "/traces/rep_" + std::to_string(s) + ".csv"));
        CHECK(fs::exists(out + "/transcript/rep_" + std::to_string(s) + ".jsonl"));
    }
    REQUIRE(art.traces.size() == 3);
    for (const auto& t : art.traces) CHECK(t.size() == 5);
    CHECK(art.aggregate.size() == 5);
    // the resolved config reparses and matches what ran
    ExperimentConfig resolved = load_config(out + "/config.resolved.json");
    CHECK(resolved.iterations == 5);
    CHECK(resolved.eta_desc == 100.0);
    // the plot mentions svg structure
    const std::string svg = slurp(out + "/plot.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("polygon") != std::string::npos);
    fs::remove_all(out);
}

TEST_CASE("dry run only validates and reports the plan") {
    const std::string out = (fs::temp_directory_path() / "runner_dry").string();
    fs::remove_all(out);
    ExperimentConfig cfg = tiny_lr(out);
    cfg.dry_run = true;
    RunArtifacts art = run_experiment(cfg);
    CHECK_FALSE(fs::exists(out));
    CHECK(art.traces.empty());
    CHECK(art.plan.find("task=lr") != std::string::npos);
    CHECK(art.plan.find("k=4") != std::string::npos);
}

TEST_CASE("parallel runs equal sequential runs") {
    const std::string a = (fs::temp_directory_path() / "runner_seq").string();
    const std::string b = (fs::temp_directory_path() / "runner_par").string();
    fs::remove_all(a);
    fs::remove_all(b);
    ExperimentConfig seq = tiny_lr(a);
    ExperimentConfig par = tiny_lr(b);
    par.parallelism = 3;
    run_experiment(seq);
    run_experiment(par);
    CHECK(slurp(a + "/aggregate.csv") == slurp(b + "/aggregate.csv"));
    for (uint64_t s : {1, 2, 3})
        CHECK(slurp(a + "/traces/rep_" + std::to_string(s) + ".csv") ==
              slurp(b + "/traces/rep_" + std::to_string(s) + ".csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("two runs of the same config are byte-identical") {
    const std::string a = (fs::temp_directory_path() / "runner_det_a").string();
    const std::string b = (fs::temp_directory_path() / "runner_det_b").string();
    fs::remove_all(a);
    fs::remove_all(b);
    run_experiment(tiny_lr(a));
    run_experiment(tiny_lr(b));
    CHECK(slurp(a + "/aggregate.csv") == slurp(b + "/aggregate.csv"));
    CHECK(slurp(a + "/plot.svg") == slurp(b + "/plot.svg"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("reference presets pin the published constants") {
    for (const char* name : {"lr_2_30", "lr_36_neg1", "tsp_10", "tsp_15", "tsp_20",
                             "mab_easy_bssnd", "mab_easy_bsscd", "mab_hard_bssnd",
                             "mab_hard_bsscd"}) {
        ExperimentConfig cfg = reference_preset(name);
        CHECK(cfg.batch == 8);
        CHECK(cfg.exemplar_cap == 20);
        CHECK(cfg.pool_cap == 30);
        CHECK(cfg.kES == 257);
        CHECK(cfg.eta_exemplar == 10.0);
        CHECK(cfg.arm_estimator.hidden_width == 1536);
        CHECK(cfg.seq_estimator.hidden_width == 512);
        CHECK(cfg.embed_dim == 3072);
        CHECK(cfg.k1 == 101);
        CHECK(cfg.k2 == 101);
    }
    CHECK(reference_preset("lr_2_30").iterations == 50);
    CHECK(reference_preset("tsp_10").iterations == 100);
    CHECK(reference_preset("tsp_15").iterations == 200);
    CHECK(reference_preset("tsp_20").iterations == 300);
    CHECK(reference_preset("mab_hard_bssnd").iterations == 100);
    CHECK(reference_preset("lr_2_30").eta_desc == 100.0);
    CHECK(reference_preset("mab_hard_bsscd").eta_desc == 10.0);
    CHECK(reference_preset("mab_easy_bssnd").mab.K == 4);
    CHECK(reference_preset("mab_easy_bssnd").mab.gap == 0.5);
    CHECK(reference_preset("mab_hard_bssnd").mab.K == 5);
    CHECK(reference_preset("mab_hard_bssnd").mab.gap == 0.2);
    CHECK(reference_preset("lr_36_neg1").lr.w_true == 36.0);
    CHECK(reference_preset("lr_36_neg1").lr.b_true == -1.0);
    CHECK_THROWS(reference_preset("nope"));
}
