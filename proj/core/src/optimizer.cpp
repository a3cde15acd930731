#include "expo/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace expo {

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::mt19937_64 substream(uint64_t master, const char* name) {
    uint64_t h = 14695981039346656037ull;
    for (const char* c = name; *c; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 1099511628211ull;
    }
    return std::mt19937_64(mix64(master ^ h));
}

}  // namespace

RngStreams RngStreams::from_master(uint64_t master) {
    return RngStreams{substream(master, "env"),       substream(master, "agent"),
                      substream(master, "sampler"),   substream(master, "domain"),
                      substream(master, "estimator"), substream(master, "exemplar")};
}

BatchResult batch_select(AgentProvider& agent, const Environment& env, const std::string& prompt,
                         int batch, int parse_retries) {
    if (batch < 1) throw ValidationError("batch must be >= 1");
    BatchResult result;
    for (int i = 0; i < batch - 1; ++i) {
        std::string raw = agent.complete(prompt, 1.0);
        result.actions.push_back(ActionRecord{raw, env.parse(raw)});
    }
    ActionRecord scoring;
    for (int attempt = 0; attempt <= parse_retries; ++attempt) {
        std::string raw = agent.complete(prompt, 0.0);
        scoring = ActionRecord{raw, env.parse(raw)};
        if (scoring.parsed) break;
    }
    result.actions.push_back(scoring);
    result.scoring = std::move(scoring);
    return result;
}

ExemplarSequence heuristic_exemplars(const std::vector<Exemplar>& pool, const Environment& env,
                                     int cap) {
    std::vector<Exemplar> selected = pool;
    const bool lower_better = env.direction() == MetricDirection::minimize;
    std::stable_sort(selected.begin(), selected.end(), [&](const Exemplar& a, const Exemplar& b) {
        return lower_better ? a.score < b.score : a.score > b.score;
    });
    if (static_cast<int>(selected.size()) > cap)
        selected.resize(static_cast<size_t>(cap));
    // render worst first, best last
    std::reverse(selected.begin(), selected.end());
    ExemplarSequence seq;
    seq.rendered_text = env.render_exemplar_block(selected);
    seq.items = std::move(selected);
    return seq;
}

ExpoOptimizer::ExpoOptimizer(const PromptDomain& domain, Environment& env, AgentProvider& agent,
                             EmbeddingProvider& embedder, EmbeddingCache& cache, ExpoOptions opts,
                             ArmPolicy policy, RngStreams& rngs, int initial_arm)
    : domain_(domain),
      env_(env),
      agent_(agent),
      embedder_(embedder),
      cache_(cache),
      opts_(std::move(opts)),
      policy_(policy),
      rngs_(rngs),
      arm_(domain.arm(initial_arm)),
      cum_(static_cast<size_t>(domain.k())),
      pulls_(static_cast<size_t>(domain.k()), 0),
      best_arm_(arm_),
      arm_inputs_(static_cast<size_t>(domain.k())) {
    exemplars_ = env_.warm_start(rngs_.env);
    seq_ = heuristic_exemplars(exemplars_, env_, opts_.exemplar_cap);
}

const EmbeddingVector& ExpoOptimizer::arm_input(int arm_index) {
    auto& slot = arm_inputs_[static_cast<size_t>(arm_index)];
    if (!slot) {
        Arm a = domain_.arm(arm_index);
        slot = concat(cache_.get_or_compute(domain_.desc(a.desc_id).text, embedder_),
                      cache_.get_or_compute(domain_.instr(a.instr_id).text, embedder_));
    }
    return *slot;
}

EmbeddingVector ExpoOptimizer::sequence_embedding(const std::string& rendered) {
    return cache_.get_or_compute(rendered.empty() ? "(no exemplars)" : rendered, embedder_);
}

int ExpoOptimizer::select_next_arm(const std::vector<double>& predictions) {
    switch (policy_) {
        case ArmPolicy::fixed:
            return arm_.index;
        case ArmPolicy::uniform_random: {
            std::uniform_int_distribution<int> u(0, domain_.k() - 1);
            return u(rngs_.sampler);
        }
        case ArmPolicy::neural_ucb: {
            int best = 0;
            double best_v = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < domain_.k(); ++i) {
                double bonus = std::sqrt(std::log(static_cast<double>(iteration_) + 1.0) /
                                         (1.0 + static_cast<double>(pulls_[static_cast<size_t>(i)])));
                double v = predictions[static_cast<size_t>(i)] + opts_.ucb_beta * bonus;
                if (v > best_v) {  // ties keep the lowest index
                    best_v = v;
                    best = i;
                }
            }
            return best;
        }
        case ArmPolicy::exp3: {
            accumulate(cum_, predictions);
            auto dist = distribution(cum_, opts_.eta_desc);
            return sample(dist, rngs_.sampler);
        }
    }
    throw std::logic_error("unreachable");
}

TraceRow ExpoOptimizer::step() {
    // 1. render the meta-prompt for the current arm and exemplar sequence
    MetaPrompt prompt = render_meta_prompt(domain_.desc(arm_.desc_id),
                                           domain_.instr(arm_.instr_id), seq_, opts_.tmpl);
    env_.fill_placeholders(prompt.text);

    // 2. query the agent; the temperature-0 call carries the score
    BatchResult batch = batch_select(agent_, env_, prompt.text, opts_.batch, opts_.parse_retries);

    double raw_eval = 0, prompt_score = 0, metric = 0;
    if (batch.scoring.parsed) {
        EvalOutcome outcome = env_.evaluate(*batch.scoring.parsed, rngs_.env);
        raw_eval = outcome.raw_eval;
        prompt_score = outcome.prompt_score;
        metric = outcome.metric;
    } else {
        // unparseable after retries; the loop stays total
        metric = env_.direction() == MetricDirection::minimize && have_best_ ? best_metric_ : 0;
    }

    // 3. grow the exemplar set with every parsed action from the batch
    const bool lower_better = env_.direction() == MetricDirection::minimize;
    for (const auto& action : batch.actions) {
        if (!action.parsed) continue;
        double score = raw_eval;
        if (&action != &batch.actions.back() || !batch.scoring.parsed) {
            // exploratory actions are scored without touching env state
            if (env_.name() == "mab") continue;  // summarized history instead
            std::mt19937_64 throwaway(0);
            score = env_.evaluate(*action.parsed, throwaway).raw_eval;
        }
        Exemplar e{action, score};
        if (!best_exemplar_ ||
            (lower_better ? score < best_exemplar_->score : score > best_exemplar_->score))
            best_exemplar_ = e;
        exemplars_.push_back(std::move(e));
    }

    // 4. ledger row and estimator update (Eq. (1) path)
    std::vector<double> predictions(static_cast<size_t>(domain_.k()), 0.0);
    if (policy_ == ArmPolicy::exp3 || policy_ == ArmPolicy::neural_ucb) {
        ledger_.rows.emplace_back(arm_input(arm_.index), prompt_score);
        TrainConfig cfg = opts_.estimator;
        cfg.seed = mix64(cfg.seed ^ static_cast<uint64_t>(iteration_));
        params_ = train(ledger_.rows, cfg, params_).params;
        for (int i = 0; i < domain_.k(); ++i)
            predictions[static_cast<size_t>(i)] = predict(*params_, arm_input(i));
    }

    // 5. sample the next arm and choose the next exemplar sequence
    pulls_[static_cast<size_t>(arm_.index)]++;
    const int chosen_arm = arm_.index;
    arm_ = domain_.arm(select_next_arm(predictions));
    auto [next_seq, seq_id] = select_next_sequence(prompt_score);
    seq_ = std::move(next_seq);

    // 6. trace bookkeeping
    if (env_.direction() == MetricDirection::minimize) {
        if (!have_best_ || metric < best_metric_) {
            best_metric_ = metric;
            best_arm_ = domain_.arm(chosen_arm);
        }
        have_best_ = true;
    } else {
        best_metric_ = (have_best_ ? best_metric_ : 0) + metric;
        have_best_ = true;
        best_arm_ = domain_.arm(chosen_arm);
    }
    TraceRow row{iteration_, chosen_arm, seq_id, raw_eval, prompt_score, metric, best_metric_};
    ++iteration_;
    return row;
}

std::vector<TraceRow> ExpoOptimizer::run(int iterations) {
    std::vector<TraceRow> rows;
    rows.reserve(static_cast<size_t>(iterations));
    for (int t = 0; t < iterations; ++t) rows.push_back(step());
    return rows;
}

std::pair<ExemplarSequence, int> ExpoOptimizer::select_next_sequence(double) {
    return {heuristic_exemplars(exemplars_, env_, opts_.exemplar_cap), -1};
}

}  // namespace expo
