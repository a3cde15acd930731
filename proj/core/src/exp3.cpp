#include "expo/exp3.hpp"

#include <algorithm>
#include <cmath>

namespace expo {

void accumulate(CumulativeScores& cs, const std::vector<double>& predictions) {
    if (predictions.size() != cs.s_hat.size())
        throw ShapeError("prediction vector length does not match arm count");
    for (double p : predictions) {
        if (!std::isfinite(p)) throw ValidationError("non-finite prediction");
    }
    for (size_t i = 0; i < predictions.size(); ++i) cs.s_hat[i] += predictions[i];
    cs.t += 1;
}

SamplingDistribution exp_weights(const std::vector<double>& scores, double eta) {
    if (scores.empty()) throw ValidationError("empty score vector");
    if (!(eta > 0)) throw ValidationError("eta must be > 0");
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("non-finite score");
    const double c = *std::max_element(scores.begin(), scores.end());
    SamplingDistribution dist;
    dist.probs.resize(scores.size());
    double sum = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        dist.probs[i] = std::exp(eta * (scores[i] - c));
        sum += dist.probs[i];
    }
    for (auto& p : dist.probs) p /= sum;
    return dist;
}

SamplingDistribution distribution(const CumulativeScores& cs, double eta) {
    return exp_weights(cs.s_hat, eta);
}

int sample(const SamplingDistribution& dist, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    double cdf = 0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        cdf += dist.probs[i];
        if (u < cdf) return static_cast<int>(i);
    }
    return static_cast<int>(dist.probs.size() - 1);
}

}  // namespace expo
