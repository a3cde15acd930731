#pragma once

#include <cstdint>

#include "expo/mlp.hpp"

namespace expo {

// Drifting-reward arm testbed: every arm has a fixed synthetic embedding and
// its reward is a hidden linear function of that embedding, rescaled to
// [0, 1] across arms. The hidden direction switches at switch_at, moving
// the optimum.
struct SyntheticDriftConfig {
    int k = 64;
    int T = 300;
    int switch_at = 150;
    size_t embed_dim = 32;
    double noise_sd = 0.02;
    double eta = 5.0;        // exp3 arm sampler
    double ucb_beta = 1.0;   // neural ucb bonus scale
    TrainConfig estimator{.hidden_width = 16, .epochs = 30, .learning_rate = 5e-3};
};

enum class SyntheticMethod { expo, uniform_random, neural_ucb };

struct SyntheticResult {
    double cum_pseudo_reward = 0;  // sum of noiseless rewards of chosen arms
    double pseudo_regret = 0;      // sum of per-step gaps to the best arm
};

SyntheticResult run_synthetic_drift(SyntheticMethod method, const SyntheticDriftConfig& cfg,
                                    uint64_t seed);

}  // namespace expo
