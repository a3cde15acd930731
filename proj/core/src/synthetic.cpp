#include "expo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "expo/embedding.hpp"
#include "expo/exp3.hpp"
#include "expo/optimizer.hpp"

namespace expo {

namespace {

// Rewards of all arms for one hidden direction, min-max rescaled to [0, 1].
std::vector<double> arm_rewards(const std::vector<EmbeddingVector>& arms,
                                const std::vector<double>& u) {
    std::vector<double> r(arms.size());
    for (size_t i = 0; i < arms.size(); ++i) {
        double dot = 0;
        for (size_t d = 0; d < u.size(); ++d) dot += u[d] * arms[i].values[d];
        r[i] = dot;
    }
    auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    const double span = *hi - *lo;
    for (auto& v : r) v = span > 0 ? (v - *lo) / span : 0.5;
    return r;
}

}  // namespace

SyntheticResult run_synthetic_drift(SyntheticMethod method, const SyntheticDriftConfig& cfg,
                                    uint64_t seed) {
    RngStreams rngs = RngStreams::from_master(seed);
    SyntheticEmbedder embedder(cfg.embed_dim, seed);
    std::vector<EmbeddingVector> arms;
    arms.reserve(static_cast<size_t>(cfg.k));
    for (int i = 0; i < cfg.k; ++i) arms.push_back(embedder.embed("arm " + std::to_string(i)));

    auto random_direction = [&](std::mt19937_64& rng) {
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> u(cfg.embed_dim);
        for (auto& v : u) v = n(rng);
        return u;
    };
    const auto u_before = random_direction(rngs.env);
    const auto u_after = random_direction(rngs.env);
    const auto rewards_before = arm_rewards(arms, u_before);
    const auto rewards_after = arm_rewards(arms, u_after);

    std::normal_distribution<double> noise(0.0, cfg.noise_sd);
    std::vector<TrainRow> ledger;
    std::optional<MlpParams> params;
    CumulativeScores cum(static_cast<size_t>(cfg.k));
    std::vector<long> pulls(static_cast<size_t>(cfg.k), 0);

    SyntheticResult result;
    int arm = 0;
    for (int t = 0; t < cfg.T; ++t) {
        const auto& base = t < cfg.switch_at ? rewards_before : rewards_after;
        const double best = *std::max_element(base.begin(), base.end());

        // observe the chosen arm
        const double observed = base[static_cast<size_t>(arm)] + noise(rngs.env);
        result.cum_pseudo_reward += base[static_cast<size_t>(arm)];
        result.pseudo_regret += best - base[static_cast<size_t>(arm)];
        pulls[static_cast<size_t>(arm)]++;

        if (method == SyntheticMethod::uniform_random) {
            std::uniform_int_distribution<int> u(0, cfg.k - 1);
            arm = u(rngs.sampler);
            continue;
        }

        ledger.emplace_back(arms[static_cast<size_t>(arm)], observed);
        TrainConfig tc = cfg.estimator;
        tc.seed = seed ^ static_cast<uint64_t>(t);
        params = train(ledger, tc, params).params;
        std::vector<double> preds(static_cast<size_t>(cfg.k));
        for (int i = 0; i < cfg.k; ++i)
            preds[static_cast<size_t>(i)] = predict(*params, arms[static_cast<size_t>(i)]);

        if (method == SyntheticMethod::expo) {
            accumulate(cum, preds);
            arm = sample(distribution(cum, cfg.eta), rngs.sampler);
        } else {  // neural_ucb
            int bestArm = 0;
            double best_v = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < cfg.k; ++i) {
                double bonus = std::sqrt(std::log(static_cast<double>(t) + 1.0) /
                                         (1.0 + static_cast<double>(pulls[static_cast<size_t>(i)])));
                double v = preds[static_cast<size_t>(i)] + cfg.ucb_beta * bonus;
                if (v > best_v) {
                    best_v = v;
                    bestArm = i;
                }
            }
            arm = bestArm;
        }
    }
    return result;
}

}  // namespace expo
