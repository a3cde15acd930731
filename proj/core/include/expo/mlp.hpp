#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "expo/embedding.hpp"

namespace expo {

// Single-hidden-layer ReLU MLP with a scalar output.
struct MlpParams {
    size_t in = 0;
    size_t hidden = 0;
    std::vector<double> w1;  // hidden x in, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0;

    size_t count() const { return hidden * in + hidden + hidden + 1; }

    void save(const std::string& path) const;
    static MlpParams load(const std::string& path);
};

enum class Optimizer { adam, gd };

struct TrainConfig {
    size_t hidden_width = 64;
    size_t epochs = 500;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
    Optimizer optimizer = Optimizer::adam;
    bool warm_start = true;  // reuse previous params when provided
};

// One training row: input embedding and its prompt-score label.
using TrainRow = std::pair<EmbeddingVector, double>;

struct TrainResult {
    MlpParams params;
    double final_loss = 0;
};

MlpParams init_params(size_t in, size_t hidden, uint64_t seed);

// Full-batch training, minimizing mean squared error. Deterministic given
// the seed; throws on NaN loss with the offending epoch.
TrainResult train(const std::vector<TrainRow>& rows, const TrainConfig& cfg,
                  const std::optional<MlpParams>& init = std::nullopt);

double predict(const MlpParams& params, const EmbeddingVector& x);

double mse_loss(const MlpParams& params, const std::vector<TrainRow>& rows);

// Analytic gradient of the mean-MSE loss, packed in (w1, b1, w2, b2) order.
std::vector<double> loss_gradient(const MlpParams& params, const std::vector<TrainRow>& rows);

// Max relative error between the analytic gradient and central finite
// differences over all parameters.
double grad_check(const MlpParams& params, const std::vector<TrainRow>& rows, double h = 1e-5);

}  // namespace expo
