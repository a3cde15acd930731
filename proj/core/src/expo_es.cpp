#include "expo/expo_es.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

namespace expo {

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

SequenceDomain build_sequence_domain(const std::vector<Exemplar>& pool, int L, int kES,
                                     const ExemplarSequence& heuristic, const Environment& env,
                                     std::mt19937_64& rng, int pool_cap) {
    SequenceDomain domain;
    if (pool.empty()) return domain;

    // top min(size, cap) historical records
    std::vector<Exemplar> top = pool;
    const bool lower_better = env.direction() == MetricDirection::minimize;
    std::stable_sort(top.begin(), top.end(), [&](const Exemplar& a, const Exemplar& b) {
        return lower_better ? a.score < b.score : a.score > b.score;
    });
    if (static_cast<int>(top.size()) > pool_cap) top.resize(static_cast<size_t>(pool_cap));

    if (static_cast<int>(top.size()) < L) {
        ExemplarSequence all;
        all.items = top;
        all.rendered_text = env.render_exemplar_block(all.items);
        domain.candidates.push_back(std::move(all));
        return domain;
    }

    std::vector<size_t> idx(top.size());
    for (int j = 0; j < kES - 1; ++j) {
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        ExemplarSequence seq;
        seq.items.reserve(static_cast<size_t>(L));
        for (int i = 0; i < L; ++i) seq.items.push_back(top[idx[static_cast<size_t>(i)]]);
        seq.rendered_text = env.render_exemplar_block(seq.items);
        domain.candidates.push_back(std::move(seq));
    }
    domain.candidates.push_back(heuristic);
    return domain;
}

std::vector<std::vector<std::string>> cyclic_rotations(const std::vector<std::string>& names) {
    const size_t k = names.size();
    std::vector<std::vector<std::string>> out(k);
    for (size_t i = 0; i < k; ++i) {
        out[i].reserve(k);
        for (size_t p = 0; p < k; ++p) out[i].push_back(names[(i + p) % k]);
    }
    return out;
}

std::vector<double> cumulative_sequence_scores(const SequenceDomain& domain,
                                               const SnapshotHistory& history,
                                               EmbeddingProvider& embedder,
                                               EmbeddingCache& cache) {
    if (history.snapshots.empty()) throw ValidationError("empty snapshot history");
    std::vector<double> scores(domain.candidates.size(), 0.0);
    for (size_t j = 0; j < domain.candidates.size(); ++j) {
        const std::string& text = domain.candidates[j].rendered_text;
        const EmbeddingVector& x =
            cache.get_or_compute(text.empty() ? "(no exemplars)" : text, embedder);
        for (const auto& snapshot : history.snapshots) scores[j] += predict(snapshot, x);
    }
    return scores;
}

int select_sequence(const std::vector<double>& scores, double eta, std::mt19937_64& rng) {
    return sample(exp_weights(scores, eta), rng);
}

EsOptimizer::EsOptimizer(const PromptDomain& domain, Environment& env, AgentProvider& agent,
                         EmbeddingProvider& embedder, EmbeddingCache& cache, ExpoOptions opts,
                         EsOptions es_opts, RngStreams& rngs, int initial_arm)
    : ExpoOptimizer(domain, env, agent, embedder, cache, std::move(opts), ArmPolicy::exp3, rngs,
                    initial_arm),
      es_opts_(std::move(es_opts)) {
    if (es_opts_.mode == SequenceMode::cyclic) {
        auto* mab = dynamic_cast<BernoulliMabEnv*>(&env_);
        if (!mab) throw ValidationError("cyclic sequence mode requires the MAB environment");
        cyclic_cum_ = CumulativeScores(mab->arm_names().size());
    }
}

std::pair<ExemplarSequence, int> EsOptimizer::select_next_sequence(double step_score) {
    // grow the sequence training set with the sequence just used
    const std::string& used = seq_.rendered_text;
    training_set_.rows.emplace_back(sequence_embedding(used), step_score);

    TrainConfig cfg = es_opts_.estimator;
    cfg.seed = mix64(cfg.seed ^ static_cast<uint64_t>(iteration_) ^ 0x5eedull);
    es_params_ = train(training_set_.rows, cfg, es_params_).params;

    if (es_opts_.mode == SequenceMode::cyclic) return select_cyclic_mode();

    history_.snapshots.push_back(*es_params_);
    if (!es_opts_.snapshot_dir.empty()) {
        std::filesystem::create_directories(es_opts_.snapshot_dir);
        es_params_->save(es_opts_.snapshot_dir + "/snapshot_" + std::to_string(iteration_) +
                         ".bin");
    }
    return select_random_mode();
}

std::pair<ExemplarSequence, int> EsOptimizer::select_random_mode() {
    if (static_cast<int>(exemplars_.size()) <= es_opts_.L)
        return ExpoOptimizer::select_next_sequence(0);  // Algo guard: heuristic path

    ExemplarSequence heuristic = heuristic_exemplars(exemplars_, env_, opts_.exemplar_cap);
    SequenceDomain domain = build_sequence_domain(exemplars_, es_opts_.L, es_opts_.kES, heuristic,
                                                  env_, rngs_.exemplar, es_opts_.pool_cap);
    if (domain.candidates.empty()) return {seq_, -1};  // keep the previous sequence
    auto scores = cumulative_sequence_scores(domain, history_, embedder_, cache_);
    int j = select_sequence(scores, es_opts_.eta_exemplar, rngs_.exemplar);
    return {domain.candidates[static_cast<size_t>(j)], j};
}

std::pair<ExemplarSequence, int> EsOptimizer::select_cyclic_mode() {
    auto& mab = dynamic_cast<BernoulliMabEnv&>(env_);
    auto rotations = cyclic_rotations(mab.arm_names());
    // fixed domain: incremental cumulative updates, no snapshot history
    std::vector<double> preds(rotations.size(), 0.0);
    for (size_t i = 0; i < rotations.size(); ++i) {
        std::string text = render_mab_summary(mab.history(), mab.arm_names(), rotations[i]);
        preds[i] = predict(*es_params_, sequence_embedding(text));
    }
    accumulate(cyclic_cum_, preds);
    auto dist = distribution(cyclic_cum_, es_opts_.eta_exemplar);
    int j = sample(dist, rngs_.exemplar);
    mab.set_arm_order(rotations[static_cast<size_t>(j)]);
    ExemplarSequence seq;
    seq.rendered_text = mab.render_exemplar_block({});
    return {std::move(seq), j};
}

}  // namespace expo
