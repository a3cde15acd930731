#pragma once

#include <string>
#include <vector>

#include "expo/optimizer.hpp"

namespace expo {

// Training set for the exemplar-sequence score network.
struct ExemplarTrainingSet {
    std::vector<TrainRow> rows;
};

// Ordered per-iteration parameters of the sequence network; index i is the
// model trained at iteration i.
struct SnapshotHistory {
    std::vector<MlpParams> snapshots;
};

enum class SequenceMode { random, cyclic };

struct SequenceDomain {
    std::vector<ExemplarSequence> candidates;
    SequenceMode generation = SequenceMode::random;
};

// (kES - 1) random ordered draws of L exemplars without replacement, plus
// the heuristic candidate. The pool is first cut to its top min(size, cap)
// records; a pool smaller than L collapses to a single all-exemplar
// sequence. An empty pool yields an empty domain.
SequenceDomain build_sequence_domain(const std::vector<Exemplar>& pool, int L, int kES,
                                     const ExemplarSequence& heuristic, const Environment& env,
                                     std::mt19937_64& rng, int pool_cap = 30);

// All K rotations of the arm summary order; candidate i starts with name i.
std::vector<std::vector<std::string>> cyclic_rotations(const std::vector<std::string>& names);

// score_j = sum over snapshots of predict(snapshot, g(candidate_j)).
// Summation runs in snapshot order for reproducibility.
std::vector<double> cumulative_sequence_scores(const SequenceDomain& domain,
                                               const SnapshotHistory& history,
                                               EmbeddingProvider& embedder,
                                               EmbeddingCache& cache);

// Translated exponential-weight draw over candidate scores.
int select_sequence(const std::vector<double>& scores, double eta, std::mt19937_64& rng);

struct EsOptions {
    double eta_exemplar = 10.0;
    int kES = 257;
    int L = 20;           // exemplars per candidate sequence
    int pool_cap = 30;    // top historical records eligible for sampling
    SequenceMode mode = SequenceMode::random;
    TrainConfig estimator;            // sequence network (hidden width 512)
    std::string snapshot_dir;         // when set, one params file per iteration
};

// EXPO plus adversarial-bandit selection of the exemplar sequence.
class EsOptimizer : public ExpoOptimizer {
public:
    EsOptimizer(const PromptDomain& domain, Environment& env, AgentProvider& agent,
                EmbeddingProvider& embedder, EmbeddingCache& cache, ExpoOptions opts,
                EsOptions es_opts, RngStreams& rngs, int initial_arm = 0);

    const SnapshotHistory& snapshot_history() const { return history_; }
    const ExemplarTrainingSet& training_set() const { return training_set_; }
    const CumulativeScores& cyclic_scores() const { return cyclic_cum_; }

protected:
    std::pair<ExemplarSequence, int> select_next_sequence(double step_score) override;

private:
    std::pair<ExemplarSequence, int> select_random_mode();
    std::pair<ExemplarSequence, int> select_cyclic_mode();

    EsOptions es_opts_;
    ExemplarTrainingSet training_set_;
    SnapshotHistory history_;
    std::optional<MlpParams> es_params_;
    CumulativeScores cyclic_cum_;  // cyclic mode only; length K, incremental
};

}  // namespace expo
