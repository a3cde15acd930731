#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "expo/runner.hpp"

namespace {

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoull(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt-optimization experiment runner"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    std::string config_path, task, method, seeds_csv, out_dir;
    int parallelism = 0, iterations = -1;
    bool dry = false;
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--task", task, "override: lr | tsp | mab");
    run->add_option("--method", method, "override: expo | expo_es | opro | ...");
    run->add_option("--seeds", seeds_csv, "override: comma-separated seeds");
    run->add_option("--parallelism", parallelism, "override: worker count");
    run->add_option("--iterations", iterations, "override: iteration count");
    run->add_option("--out-dir", out_dir, "override: run directory");
    run->add_flag("--dry-run", dry, "validate and print the plan only");

    // replay
    auto* replay = app.add_subcommand("replay", "re-run the best arm of a finished run");
    std::string run_dir, replay_out;
    replay->add_option("--run-dir", run_dir, "finished run directory")->required();
    replay->add_option("--out-dir", replay_out, "replay output (default <run-dir>_replay)");

    // oracle tsp
    auto* oracle = app.add_subcommand("oracle", "exact solvers");
    auto* oracle_tsp = oracle->add_subcommand("tsp", "optimal tour for a node file (x y per line)");
    std::string nodes_path;
    oracle_tsp->add_option("--nodes", nodes_path, "node coordinate file")->required();

    // domain generate
    auto* domain = app.add_subcommand("domain", "prompt domain utilities");
    auto* gen = domain->add_subcommand("generate", "write an offline k1 x k2 domain");
    std::string tmpl = "opro_lr", domain_out = "domain.json";
    int k1 = 3, k2 = 3;
    gen->add_option("--template", tmpl, "opro_lr | opro_tsp | opro_tsp_enhanced | bssnd | bsscd");
    gen->add_option("--k1", k1, "description count");
    gen->add_option("--k2", k2, "instruction count");
    gen->add_option("--out", domain_out, "output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            expo::ExperimentConfig cfg = expo::load_config(config_path);
            if (!task.empty()) cfg.task = task;
            if (!method.empty()) cfg.method = method;
            if (!seeds_csv.empty()) cfg.seeds = parse_seed_list(seeds_csv);
            if (parallelism > 0) cfg.parallelism = parallelism;
            if (iterations >= 0) cfg.iterations = iterations;
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (dry) cfg.dry_run = true;
            expo::RunArtifacts art = expo::run_experiment(cfg);
            if (cfg.dry_run) {
                std::cout << art.plan << "\n";
            } else {
                std::cout << "run dir: " << art.run_dir << "\n";
                std::cout << "final mean best_so_far: "
                          << expo::format_real(art.aggregate.back().mean) << "\n";
            }
        } else if (*replay) {
            expo::ExperimentConfig cfg = expo::load_config(run_dir + "/config.resolved.json");
            cfg.method = "fixed_replay";
            cfg.replay_run_dir = run_dir;
            cfg.out_dir = replay_out.empty() ? run_dir + "_replay" : replay_out;
            expo::RunArtifacts art = expo::run_experiment(cfg);
            std::cout << "replay dir: " << art.run_dir << "\n";
        } else if (*oracle_tsp) {
            std::ifstream in(nodes_path);
            if (!in) throw expo::ValidationError("cannot open " + nodes_path);
            std::vector<expo::Point> nodes;
            double x, y;
            while (in >> x >> y) nodes.push_back({x, y});
            auto [tour, length] = expo::tsp_oracle(nodes);
            std::cout << "tour:";
            for (int v : tour) std::cout << ' ' << v;
            std::cout << "\nlength: " << expo::format_real(length) << "\n";
        } else if (*gen) {
            expo::PromptDomain d = expo::make_offline_domain(tmpl, k1, k2);
            d.save(domain_out);
            std::cout << "wrote " << domain_out << " (k=" << d.k() << ")\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
