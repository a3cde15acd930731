#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "expo/types.hpp"

namespace expo {

struct PromptScoreConfig {
    double b = 100.0;  // stabilizing constant, > 0
};

// Affine decreasing map: eval=0 -> 1, eval=b -> 0.
double normalize_prompt_score(double eval, const PromptScoreConfig& cfg);

// (solver_best - optimum) / optimum * 100. Requires optimum > 0 and
// solver_best >= optimum.
double optimality_gap(double solver_best, double optimum);

enum class MetricDirection {
    minimize,    // best_so_far = running minimum of the metric
    accumulate,  // best_so_far = running sum (cumulative regret)
};

struct EvalOutcome {
    double raw_eval = 0;      // task-native evaluation
    double prompt_score = 0;  // normalized NN label
    double metric = 0;        // MSE | tour length | instantaneous regret
};

// A benchmark task: parser, evaluator, prompt-score design and exemplar
// rendering. Deterministic given its seed; one instance per run.
class Environment {
public:
    virtual ~Environment() = default;
    virtual std::string name() const = 0;
    virtual MetricDirection direction() const { return MetricDirection::minimize; }
    virtual std::optional<ActionPayload> parse(const std::string& raw) const = 0;
    virtual EvalOutcome evaluate(const ActionPayload& action, std::mt19937_64& rng) = 0;
    virtual std::string render_exemplar(const Exemplar& e) const = 0;
    virtual std::vector<Exemplar> warm_start(std::mt19937_64& rng) const { return {}; }
    // Fills environment placeholders of the rendered prompt (e.g. {POINTS}).
    virtual void fill_placeholders(std::string& body) const {}
    // Exemplar block: items joined by one blank line. MAB overrides this
    // with the summarized per-arm history.
    virtual std::string render_exemplar_block(const std::vector<Exemplar>& items) const;
};

// ---------------------------------------------------------------------------
// Linear regression: find (w, b) minimizing MSE over 50 noisy points.

struct LrConfig {
    double w_true = 2;
    double b_true = 30;
    int n_points = 50;
    double noise_sd = 1.0;
    uint64_t seed = 0;
    double score_b = 10000.0;  // prompt-score stabilizing constant
};

class LinearRegressionEnv : public Environment {
public:
    explicit LinearRegressionEnv(const LrConfig& cfg);
    std::string name() const override { return "lr"; }
    std::optional<ActionPayload> parse(const std::string& raw) const override;
    EvalOutcome evaluate(const ActionPayload& action, std::mt19937_64& rng) override;
    std::string render_exemplar(const Exemplar& e) const override;
    std::vector<Exemplar> warm_start(std::mt19937_64& rng) const override;

    double evaluate_wb(double w, double b) const;  // plain MSE
    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& ys() const { return ys_; }

private:
    LrConfig cfg_;
    std::vector<double> xs_, ys_;
};

double lr_evaluate(const LinearRegressionEnv& env, double w, double b);

// ---------------------------------------------------------------------------
// TSP: n nodes uniform in [-100,100]^2, closed-tour Euclidean length.

struct TspConfig {
    int n_nodes = 10;
    uint64_t seed = 0;
    double score_b = 0;  // 0: default to 10x the greedy tour length
};

struct Point {
    double x = 0, y = 0;
};

class TspEnv : public Environment {
public:
    explicit TspEnv(const TspConfig& cfg);
    // Explicit node list; oracle still runs when n <= 20.
    TspEnv(std::vector<Point> nodes, double score_b = 0);

    std::string name() const override { return "tsp"; }
    std::optional<ActionPayload> parse(const std::string& raw) const override;
    EvalOutcome evaluate(const ActionPayload& action, std::mt19937_64& rng) override;
    std::string render_exemplar(const Exemplar& e) const override;
    std::vector<Exemplar> warm_start(std::mt19937_64& rng) const override;
    void fill_placeholders(std::string& body) const override;

    double tour_length(const std::vector<int>& tour) const;
    const std::vector<Point>& nodes() const { return nodes_; }
    double optimal_length() const { return optimal_length_; }
    const std::vector<int>& optimal_tour() const { return optimal_tour_; }
    double greedy_length() const { return greedy_length_; }

private:
    void finish_init(double score_b);
    std::vector<Point> nodes_;
    std::vector<int> optimal_tour_;
    double optimal_length_ = 0;
    double greedy_length_ = 0;
    double score_b_ = 0;
};

double tsp_evaluate(const TspEnv& env, const std::vector<int>& tour);

// Exact optimum: dynamic programming over subsets, n <= 20.
std::pair<std::vector<int>, double> tsp_oracle(const std::vector<Point>& nodes);
// Brute-force cross-check, n <= 10.
std::pair<std::vector<int>, double> tsp_enumerate(const std::vector<Point>& nodes);

double tour_length(const std::vector<Point>& nodes, const std::vector<int>& tour);
std::vector<int> greedy_tour(const std::vector<Point>& nodes);

// ---------------------------------------------------------------------------
// Bernoulli multi-armed bandit played through an LLM-proposed distribution.

struct MabConfig {
    int K = 5;
    double gap = 0.2;       // best arm mean = 0.5 + gap/2, others 0.5 - gap/2
    int best_arm = 0;       // blue button
    uint64_t seed = 0;
};

struct MabHistory {
    std::vector<long> pulls;
    std::vector<double> reward_sums;

    explicit MabHistory(int K = 0) : pulls(K, 0), reward_sums(K, 0.0) {}
    long total() const;
    double mean(int arm) const;  // 0 when unpulled
};

class BernoulliMabEnv : public Environment {
public:
    explicit BernoulliMabEnv(const MabConfig& cfg);
    std::string name() const override { return "mab"; }
    MetricDirection direction() const override { return MetricDirection::accumulate; }
    std::optional<ActionPayload> parse(const std::string& raw) const override;
    EvalOutcome evaluate(const ActionPayload& action, std::mt19937_64& rng) override;
    std::string render_exemplar(const Exemplar& e) const override;
    std::string render_exemplar_block(const std::vector<Exemplar>& items) const override;
    void fill_placeholders(std::string& body) const override;

    const std::vector<double>& means() const { return means_; }
    const std::vector<std::string>& arm_names() const { return names_; }
    const MabHistory& history() const { return history_; }
    void set_arm_order(std::vector<std::string> order);

private:
    MabConfig cfg_;
    std::vector<double> means_;
    std::vector<std::string> names_;
    std::vector<std::string> arm_order_;  // rendering order for the summary
    MabHistory history_;
};

struct MabStepResult {
    int arm = 0;
    int reward = 0;
    double instant_regret = 0;
};

// Samples an arm from p, draws a Bernoulli reward and computes the
// instantaneous regret mu* - mu_arm.
MabStepResult mab_step(const std::vector<double>& means, const std::vector<double>& p,
                       std::mt19937_64& rng);

// Expected reward sum_i p_i * mu_hat_i with mu_hat_i = 0 for unpulled arms.
double mab_prompt_score(const std::vector<double>& p, const MabHistory& history);

std::vector<std::string> default_button_names(int K);

}  // namespace expo
