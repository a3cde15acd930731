#include "expo/mlp.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace expo {

namespace {
constexpr uint32_t kMlpMagic = 0x4558504e;  // "EXPN"
constexpr uint32_t kMlpVersion = 1;
}  // namespace

void MlpParams::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write params file: " + path);
    auto put = [&](const void* p, size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
    put(&kMlpMagic, 4);
    put(&kMlpVersion, 4);
    uint64_t in64 = in, hidden64 = hidden;
    put(&in64, 8);
    put(&hidden64, 8);
    put(w1.data(), w1.size() * sizeof(double));
    put(b1.data(), b1.size() * sizeof(double));
    put(w2.data(), w2.size() * sizeof(double));
    put(&b2, sizeof(double));
}

MlpParams MlpParams::load(const std::string& path) {
    std::ifstream in_stream(path, std::ios::binary);
    if (!in_stream) throw std::runtime_error("cannot read params file: " + path);
    auto get = [&](void* p, size_t n) {
        in_stream.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_stream) throw ValidationError("truncated params file: " + path);
    };
    uint32_t magic = 0, version = 0;
    get(&magic, 4);
    get(&version, 4);
    if (magic != kMlpMagic || version != kMlpVersion)
        throw ValidationError("unsupported params file format: " + path);
    uint64_t in64 = 0, hidden64 = 0;
    get(&in64, 8);
    get(&hidden64, 8);
    MlpParams p;
    p.in = in64;
    p.hidden = hidden64;
    p.w1.resize(p.hidden * p.in);
    p.b1.resize(p.hidden);
    p.w2.resize(p.hidden);
    get(p.w1.data(), p.w1.size() * sizeof(double));
    get(p.b1.data(), p.b1.size() * sizeof(double));
    get(p.w2.data(), p.w2.size() * sizeof(double));
    get(&p.b2, sizeof(double));
    return p;
}

MlpParams init_params(size_t in, size_t hidden, uint64_t seed) {
    if (in == 0 || hidden == 0) throw ShapeError("in and hidden must be >= 1");
    MlpParams p;
    p.in = in;
    p.hidden = hidden;
    p.w1.resize(hidden * in);
    p.b1.assign(hidden, 0.0);
    p.w2.resize(hidden);
    p.b2 = 0.0;
    std::mt19937_64 rng(seed);
    // He-style scaling for the ReLU layer
    std::normal_distribution<double> d1(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    std::normal_distribution<double> d2(0.0, std::sqrt(1.0 / static_cast<double>(hidden)));
    for (auto& w : p.w1) w = d1(rng);
    for (auto& w : p.w2) w = d2(rng);
    return p;
}

double predict(const MlpParams& p, const EmbeddingVector& x) {
    if (x.dim() != p.in) throw ShapeError("input dim mismatch in predict");
    double out = p.b2;
    for (size_t h = 0; h < p.hidden; ++h) {
        double z = p.b1[h];
        const double* row = &p.w1[h * p.in];
        for (size_t i = 0; i < p.in; ++i) z += row[i] * x.values[i];
        if (z > 0) out += p.w2[h] * z;
    }
    return out;
}

double mse_loss(const MlpParams& p, const std::vector<TrainRow>& rows) {
    double loss = 0;
    for (const auto& [x, y] : rows) {
        double e = predict(p, x) - y;
        loss += e * e;
    }
    return loss / static_cast<double>(rows.size());
}

std::vector<double> loss_gradient(const MlpParams& p, const std::vector<TrainRow>& rows) {
    if (rows.empty()) throw ValidationError("gradient of empty batch");
    const size_t n_w1 = p.hidden * p.in;
    std::vector<double> g(p.count(), 0.0);
    double* gw1 = g.data();
    double* gb1 = g.data() + n_w1;
    double* gw2 = g.data() + n_w1 + p.hidden;
    double* gb2 = g.data() + n_w1 + 2 * p.hidden;
    std::vector<double> z(p.hidden);
    const double scale = 2.0 / static_cast<double>(rows.size());
    for (const auto& [x, y] : rows) {
        if (x.dim() != p.in) throw ShapeError("input dim mismatch in gradient");
        double out = p.b2;
        for (size_t h = 0; h < p.hidden; ++h) {
            double s = p.b1[h];
            const double* row = &p.w1[h * p.in];
            for (size_t i = 0; i < p.in; ++i) s += row[i] * x.values[i];
            z[h] = s;
            if (s > 0) out += p.w2[h] * s;
        }
        const double d = scale * (out - y);
        *gb2 += d;
        for (size_t h = 0; h < p.hidden; ++h) {
            if (z[h] > 0) {
                gw2[h] += d * z[h];
                const double dh = d * p.w2[h];
                gb1[h] += dh;
                double* grow = &gw1[h * p.in];
                for (size_t i = 0; i < p.in; ++i) grow[i] += dh * x.values[i];
            }
        }
    }
    return g;
}

namespace {

void apply_packed(MlpParams& p, const std::vector<double>& delta) {
    const size_t n_w1 = p.hidden * p.in;
    for (size_t i = 0; i < n_w1; ++i) p.w1[i] += delta[i];
    for (size_t h = 0; h < p.hidden; ++h) p.b1[h] += delta[n_w1 + h];
    for (size_t h = 0; h < p.hidden; ++h) p.w2[h] += delta[n_w1 + p.hidden + h];
    p.b2 += delta[n_w1 + 2 * p.hidden];
}

}  // namespace

TrainResult train(const std::vector<TrainRow>& rows, const TrainConfig& cfg,
                  const std::optional<MlpParams>& init) {
    if (rows.empty()) throw ValidationError("training set is empty");
    const size_t in = rows.front().first.dim();
    for (const auto& [x, y] : rows) {
        if (x.dim() != in) throw ShapeError("inconsistent input dims in training set");
        if (!std::isfinite(y)) throw ValidationError("non-finite training label");
    }
    MlpParams p;
    if (init && cfg.warm_start) {
        if (init->in != in || init->hidden != cfg.hidden_width)
            throw ShapeError("warm-start params shape mismatch");
        p = *init;
    } else {
        p = init_params(in, cfg.hidden_width, cfg.seed);
    }

    const size_t n = p.count();
    std::vector<double> m(n, 0.0), v(n, 0.0), step(n, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double loss = mse_loss(p, rows);
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto g = loss_gradient(p, rows);
        if (cfg.optimizer == Optimizer::adam) {
            const double t = static_cast<double>(epoch + 1);
            const double bc1 = 1.0 - std::pow(beta1, t);
            const double bc2 = 1.0 - std::pow(beta2, t);
            for (size_t i = 0; i < n; ++i) {
                m[i] = beta1 * m[i] + (1 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i];
                step[i] = -cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
        } else {
            for (size_t i = 0; i < n; ++i) step[i] = -cfg.learning_rate * g[i];
        }
        apply_packed(p, step);
        loss = mse_loss(p, rows);
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged (NaN loss) at epoch " +
                                     std::to_string(epoch));
    }
    return TrainResult{std::move(p), loss};
}

double grad_check(const MlpParams& p, const std::vector<TrainRow>& rows, double h) {
    if (rows.empty()) throw ValidationError("grad_check on empty batch");
    auto analytic = loss_gradient(p, rows);
    MlpParams q = p;
    auto at = [&](size_t i) -> double& {
        const size_t n_w1 = q.hidden * q.in;
        if (i < n_w1) return q.w1[i];
        if (i < n_w1 + q.hidden) return q.b1[i - n_w1];
        if (i < n_w1 + 2 * q.hidden) return q.w2[i - n_w1 - q.hidden];
        return q.b2;
    };
    double max_rel = 0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        double& w = at(i);
        const double orig = w;
        w = orig + h;
        double lp = mse_loss(q, rows);
        w = orig - h;
        double lm = mse_loss(q, rows);
        w = orig;
        double numeric = (lp - lm) / (2 * h);
        double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(numeric - analytic[i]) / denom);
    }
    return max_rel;
}

}  // namespace expo
