#pragma once

#include <random>
#include <vector>

#include "expo/types.hpp"

namespace expo {

// Running sums of per-iteration score estimates, one entry per arm.
struct CumulativeScores {
    std::vector<double> s_hat;
    long t = 0;

    explicit CumulativeScores(size_t k = 0) : s_hat(k, 0.0) {}
    size_t k() const { return s_hat.size(); }
};

struct SamplingDistribution {
    std::vector<double> probs;
};

// Elementwise sum; increments the iteration counter.
void accumulate(CumulativeScores& cs, const std::vector<double>& predictions);

// Exponential weights with the max-translation: probs[i] proportional to
// exp(eta * (s_i - max_j s_j)). Invariant under adding a constant to all s.
SamplingDistribution distribution(const CumulativeScores& cs, double eta);
SamplingDistribution exp_weights(const std::vector<double>& scores, double eta);

int sample(const SamplingDistribution& dist, std::mt19937_64& rng);

}  // namespace expo
