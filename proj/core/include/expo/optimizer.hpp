#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "expo/agent.hpp"
#include "expo/embedding.hpp"
#include "expo/environment.hpp"
#include "expo/exp3.hpp"
#include "expo/mlp.hpp"
#include "expo/types.hpp"

namespace expo {

// Named substreams derived from one master seed. Changing the draw count of
// one component must not perturb the others.
struct RngStreams {
    std::mt19937_64 env, agent, sampler, domain, estimator, exemplar;
    static RngStreams from_master(uint64_t master);
};

// History of (meta-prompt embedding, prompt score) pairs; the NN training set.
struct ScoreLedger {
    std::vector<TrainRow> rows;
};

enum class ArmPolicy { exp3, fixed, uniform_random, neural_ucb };

struct ExpoOptions {
    double eta_desc = 100.0;
    int batch = 8;            // B: batch-1 calls at temperature 1, then 1 at 0
    int exemplar_cap = 20;    // heuristic keeps the top-scoring exemplars
    int parse_retries = 3;    // extra attempts for the scoring call
    double ucb_beta = 1.0;    // neural_ucb only
    TrainConfig estimator;
    PromptTemplate tmpl;
};

struct BatchResult {
    std::vector<ActionRecord> actions;  // every call, exploratory first
    ActionRecord scoring;               // the temperature-0 call
};

BatchResult batch_select(AgentProvider& agent, const Environment& env, const std::string& prompt,
                         int batch, int parse_retries);

// Top min(cap, n) best-scoring exemplars rendered in descending order of raw
// evaluation (worst first, best last). Environments with a summarized
// history ignore the selection and render from their own state.
ExemplarSequence heuristic_exemplars(const std::vector<Exemplar>& pool, const Environment& env,
                                     int cap);

// One optimization run: arm selection policy over the prompt domain plus the
// shared agent/environment/ledger plumbing used by every method.
class ExpoOptimizer {
public:
    ExpoOptimizer(const PromptDomain& domain, Environment& env, AgentProvider& agent,
                  EmbeddingProvider& embedder, EmbeddingCache& cache, ExpoOptions opts,
                  ArmPolicy policy, RngStreams& rngs, int initial_arm = 0);
    virtual ~ExpoOptimizer() = default;

    TraceRow step();
    std::vector<TraceRow> run(int iterations);

    int iteration() const { return iteration_; }
    const Arm& current_arm() const { return arm_; }
    const ScoreLedger& ledger() const { return ledger_; }
    const CumulativeScores& cum_scores() const { return cum_; }
    const std::vector<Exemplar>& exemplars() const { return exemplars_; }
    const std::optional<MlpParams>& estimator_params() const { return params_; }
    Arm best_arm() const { return best_arm_; }
    const std::optional<Exemplar>& best_exemplar() const { return best_exemplar_; }

protected:
    // EXPO-ES replaces the heuristic selection of the next exemplar
    // sequence; the returned id lands in the trace (-1 = heuristic).
    virtual std::pair<ExemplarSequence, int> select_next_sequence(double step_score);

    const EmbeddingVector& arm_input(int arm_index);
    EmbeddingVector sequence_embedding(const std::string& rendered);

    const PromptDomain& domain_;
    Environment& env_;
    AgentProvider& agent_;
    EmbeddingProvider& embedder_;
    EmbeddingCache& cache_;
    ExpoOptions opts_;
    ArmPolicy policy_;
    RngStreams& rngs_;

    Arm arm_;
    ExemplarSequence seq_;
    std::vector<Exemplar> exemplars_;
    ScoreLedger ledger_;
    CumulativeScores cum_;
    std::optional<MlpParams> params_;
    std::vector<long> pulls_;  // neural_ucb bookkeeping
    int iteration_ = 0;
    double best_metric_ = 0;
    bool have_best_ = false;
    Arm best_arm_;
    std::optional<Exemplar> best_exemplar_;

private:
    int select_next_arm(const std::vector<double>& predictions);
    std::vector<std::optional<EmbeddingVector>> arm_inputs_;
};

}  // namespace expo
