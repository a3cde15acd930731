#pragma once

#include <string>
#include <vector>

#include "expo/agent.hpp"
#include "expo/environment.hpp"
#include "expo/expo_es.hpp"
#include "expo/optimizer.hpp"

namespace expo {

// One experiment: task x method x seeds, written to a run directory:
//   config.resolved.json   the fully-defaulted config that actually ran
//   traces/rep_<seed>.csv  per-replicate trace
//   aggregate.csv          mean and standard error of best_so_far
//   plot.svg               mean curve with a +-1 SE band
//   best_arm.txt           arm of the best replicate (replay input)
//   snapshots/, transcript/  optional
struct ExperimentConfig {
    std::string task = "lr";      // lr | tsp | mab
    std::string method = "expo";  // expo | expo_es | opro | opro_enhanced |
                                  // uniform_random | neural_ucb | fixed_replay
    int iterations = 0;           // 0: per-task default
    std::vector<uint64_t> seeds = {1, 2, 3};
    int parallelism = 1;
    std::string out_dir = "runs/out";
    bool dry_run = false;

    // prompt domain: k1 x k2 offline variants, or a serialized domain file
    int k1 = 3;
    int k2 = 3;
    std::string domain_path;

    std::string provider = "scripted";  // scripted | remote
    std::string embedder = "synthetic"; // synthetic | remote
    size_t embed_dim = 64;
    RemoteChatConfig remote_chat;
    RemoteEmbedderConfig remote_embed;
    bool transcript = false;

    double eta_desc = 0;  // 0: per-task default (100 opro tasks, 10 mab)
    double eta_exemplar = 10.0;
    int batch = 8;
    int exemplar_cap = 20;
    int parse_retries = 3;
    double ucb_beta = 1.0;
    int kES = 257;
    int pool_cap = 30;
    bool save_snapshots = false;
    TrainConfig arm_estimator{.hidden_width = 32, .epochs = 100, .learning_rate = 1e-3};
    TrainConfig seq_estimator{.hidden_width = 32, .epochs = 100, .learning_rate = 1e-3};

    LrConfig lr;
    TspConfig tsp;
    MabConfig mab;
    std::string mab_template = "bssnd";  // bssnd | bsscd

    std::string replay_run_dir;  // fixed_replay: source of best_arm.txt
};

ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Fills iterations / eta_desc defaults and validates enum-like fields.
void resolve_config(ExperimentConfig& cfg);

// The k1 x k2 offline domain: deterministic variants of the template's
// initial meta prompt (variant 0 is the initial pair verbatim).
PromptDomain make_offline_domain(const std::string& template_name, int k1, int k2);

std::string template_name_for(const std::string& task, const std::string& method,
                              const std::string& mab_template);

// Pinned full-scale settings (remote provider + remote embeddings):
// lr_2_30, lr_36_neg1, tsp_10, tsp_15, tsp_20,
// mab_easy_bssnd, mab_easy_bsscd, mab_hard_bssnd, mab_hard_bsscd.
ExperimentConfig reference_preset(const std::string& name);

struct AggregateRow {
    int iteration = 0;
    double mean = 0;
    double se = 0;  // sample sd / sqrt(n); 0 for n = 1
};

std::vector<AggregateRow> aggregate(const std::vector<std::vector<TraceRow>>& traces);
void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(const std::string& path);

// Deterministic line plot of the aggregate with a shaded +-1 SE band.
void emit_plot_svg(const std::string& path, const std::vector<AggregateRow>& rows,
                   const std::string& title);

void write_best_arm(const std::string& path, const Arm& arm);
int load_best_arm(const std::string& path);

struct RunArtifacts {
    std::string run_dir;
    std::vector<std::vector<TraceRow>> traces;  // one per seed, config order
    std::vector<AggregateRow> aggregate;
    std::string plan;  // dry runs only
};

// Runs every replicate (bounded thread pool of cfg.parallelism) and writes
// the run directory. Dry runs validate and report without touching disk.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

// One replicate with externally supplied plumbing; the runner and the tests
// share this path.
std::vector<TraceRow> run_replicate(const ExperimentConfig& cfg, uint64_t seed,
                                    const PromptDomain& domain, Arm* best_arm_out = nullptr,
                                    double* final_metric_out = nullptr);

}  // namespace expo
