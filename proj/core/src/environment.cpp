#include "expo/environment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "expo/agent.hpp"

namespace expo {

double normalize_prompt_score(double eval, const PromptScoreConfig& cfg) {
    if (!(cfg.b > 0)) throw ValidationError("stabilizing constant b must be > 0");
    return (-eval + cfg.b) / cfg.b;
}

double optimality_gap(double solver_best, double optimum) {
    if (!(optimum > 0)) throw ValidationError("optimum must be > 0");
    if (solver_best < optimum)
        throw std::logic_error("solver result below the oracle optimum");
    return (solver_best - optimum) / optimum * 100.0;
}

std::string Environment::render_exemplar_block(const std::vector<Exemplar>& items) const {
    std::string out;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += render_exemplar(items[i]);
    }
    return out;
}

// --------------------------------------------------------------------------
// Linear regression

LinearRegressionEnv::LinearRegressionEnv(const LrConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, cfg.noise_sd);
    xs_.resize(cfg.n_points);
    ys_.resize(cfg.n_points);
    for (int i = 0; i < cfg.n_points; ++i) {
        xs_[i] = ux(rng);
        ys_[i] = cfg.w_true * xs_[i] + cfg.b_true + (cfg.noise_sd > 0 ? noise(rng) : 0.0);
    }
}

double LinearRegressionEnv::evaluate_wb(double w, double b) const {
    double sum = 0;
    for (size_t i = 0; i < xs_.size(); ++i) {
        double e = ys_[i] - (w * xs_[i] + b);
        sum += e * e;
    }
    return sum / static_cast<double>(xs_.size());
}

double lr_evaluate(const LinearRegressionEnv& env, double w, double b) {
    if (!std::isfinite(w) || !std::isfinite(b)) throw ValidationError("non-finite (w, b)");
    return env.evaluate_wb(w, b);
}

std::optional<ActionPayload> LinearRegressionEnv::parse(const std::string& raw) const {
    try {
        auto [w, b] = parse_wb(raw);
        return ActionPayload{WbPair{w, b}};
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

EvalOutcome LinearRegressionEnv::evaluate(const ActionPayload& action, std::mt19937_64&) {
    const auto& wb = std::get<WbPair>(action);
    double mse = evaluate_wb(wb.w, wb.b);
    return EvalOutcome{mse, normalize_prompt_score(mse, {cfg_.score_b}), mse};
}

std::string LinearRegressionEnv::render_exemplar(const Exemplar& e) const {
    const auto& wb = std::get<WbPair>(*e.action.parsed);
    return "w=" + format_real(wb.w) + ", b=" + format_real(wb.b) +
           "\nfunction value: " + format_real(e.score);
}

std::vector<Exemplar> LinearRegressionEnv::warm_start(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(10.0, 20.0);
    std::vector<Exemplar> out;
    for (int i = 0; i < 5; ++i) {
        double w = u(rng), b = u(rng);
        ActionRecord rec{"[" + format_real(w) + ", " + format_real(b) + "]",
                         ActionPayload{WbPair{w, b}}};
        out.push_back(Exemplar{std::move(rec), evaluate_wb(w, b)});
    }
    return out;
}

// --------------------------------------------------------------------------
// TSP

double tour_length(const std::vector<Point>& nodes, const std::vector<int>& tour) {
    if (tour.size() != nodes.size()) throw ValidationError("tour length != node count");
    std::vector<bool> seen(nodes.size(), false);
    for (int v : tour) {
        if (v < 0 || static_cast<size_t>(v) >= nodes.size() || seen[static_cast<size_t>(v)])
            throw ValidationError("tour is not a permutation of the nodes");
        seen[static_cast<size_t>(v)] = true;
    }
    double len = 0;
    for (size_t i = 0; i < tour.size(); ++i) {
        const Point& a = nodes[static_cast<size_t>(tour[i])];
        const Point& b = nodes[static_cast<size_t>(tour[(i + 1) % tour.size()])];
        len += std::hypot(b.x - a.x, b.y - a.y);
    }
    return len;
}

std::vector<int> greedy_tour(const std::vector<Point>& nodes) {
    const int n = static_cast<int>(nodes.size());
    std::vector<int> tour{0};
    std::vector<bool> used(static_cast<size_t>(n), false);
    used[0] = true;
    for (int step = 1; step < n; ++step) {
        int cur = tour.back(), best = -1;
        double best_d = 0;
        for (int j = 0; j < n; ++j) {
            if (used[static_cast<size_t>(j)]) continue;
            double d = std::hypot(nodes[static_cast<size_t>(j)].x - nodes[static_cast<size_t>(cur)].x,
                                  nodes[static_cast<size_t>(j)].y - nodes[static_cast<size_t>(cur)].y);
            if (best < 0 || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        tour.push_back(best);
        used[static_cast<size_t>(best)] = true;
    }
    return tour;
}

std::pair<std::vector<int>, double> tsp_oracle(const std::vector<Point>& nodes) {
    const int n = static_cast<int>(nodes.size());
    if (n > 20) throw ValidationError("tsp_oracle supports at most 20 nodes");
    if (n <= 1) return {std::vector<int>(static_cast<size_t>(n), 0), 0.0};
    if (n == 2) return {{0, 1}, tour_length(nodes, {0, 1})};

    auto dist = [&](int a, int b) {
        return std::hypot(nodes[static_cast<size_t>(b)].x - nodes[static_cast<size_t>(a)].x,
                          nodes[static_cast<size_t>(b)].y - nodes[static_cast<size_t>(a)].y);
    };

    // Held-Karp with node 0 fixed as start; masks index nodes 1..n-1.
    const int m = n - 1;
    const size_t n_masks = size_t{1} << m;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(n_masks * static_cast<size_t>(m), inf);
    std::vector<int8_t> parent(n_masks * static_cast<size_t>(m), -1);
    for (int j = 0; j < m; ++j)
        dp[(size_t{1} << j) * static_cast<size_t>(m) + static_cast<size_t>(j)] = dist(0, j + 1);
    for (size_t mask = 1; mask < n_masks; ++mask) {
        for (int j = 0; j < m; ++j) {
            if (!(mask & (size_t{1} << j))) continue;
            const double cur = dp[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
            if (cur == inf) continue;
            for (int next = 0; next < m; ++next) {
                if (mask & (size_t{1} << next)) continue;
                const size_t nmask = mask | (size_t{1} << next);
                double cand = cur + dist(j + 1, next + 1);
                double& slot = dp[nmask * static_cast<size_t>(m) + static_cast<size_t>(next)];
                if (cand < slot) {
                    slot = cand;
                    parent[nmask * static_cast<size_t>(m) + static_cast<size_t>(next)] =
                        static_cast<int8_t>(j);
                }
            }
        }
    }
    const size_t full = n_masks - 1;
    double best = inf;
    int best_j = 0;
    for (int j = 0; j < m; ++j) {
        double cand = dp[full * static_cast<size_t>(m) + static_cast<size_t>(j)] + dist(j + 1, 0);
        if (cand < best) {
            best = cand;
            best_j = j;
        }
    }
    std::vector<int> rev;
    size_t mask = full;
    int j = best_j;
    while (j >= 0) {
        rev.push_back(j + 1);
        int pj = parent[mask * static_cast<size_t>(m) + static_cast<size_t>(j)];
        mask &= ~(size_t{1} << j);
        j = pj;
    }
    std::vector<int> tour{0};
    tour.insert(tour.end(), rev.rbegin(), rev.rend());
    return {std::move(tour), best};
}

std::pair<std::vector<int>, double> tsp_enumerate(const std::vector<Point>& nodes) {
    const int n = static_cast<int>(nodes.size());
    if (n > 10) throw ValidationError("tsp_enumerate supports at most 10 nodes");
    if (n <= 2) return tsp_oracle(nodes);
    std::vector<int> rest(static_cast<size_t>(n - 1));
    std::iota(rest.begin(), rest.end(), 1);
    std::vector<int> best_tour;
    double best = std::numeric_limits<double>::infinity();
    do {
        std::vector<int> tour{0};
        tour.insert(tour.end(), rest.begin(), rest.end());
        double len = tour_length(nodes, tour);
        if (len < best) {
            best = len;
            best_tour = tour;
        }
    } while (std::next_permutation(rest.begin(), rest.end()));
    return {std::move(best_tour), best};
}

TspEnv::TspEnv(const TspConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    nodes_.resize(static_cast<size_t>(cfg.n_nodes));
    for (auto& p : nodes_) {
        p.x = u(rng);
        p.y = u(rng);
    }
    finish_init(cfg.score_b);
}

TspEnv::TspEnv(std::vector<Point> nodes, double score_b) : nodes_(std::move(nodes)) {
    finish_init(score_b);
}

void TspEnv::finish_init(double score_b) {
    if (nodes_.size() < 2) throw ValidationError("tsp needs at least 2 nodes");
    if (nodes_.size() <= 20) {
        auto [tour, len] = tsp_oracle(nodes_);
        optimal_tour_ = std::move(tour);
        optimal_length_ = len;
    }
    greedy_length_ = expo::tour_length(nodes_, greedy_tour(nodes_));
    score_b_ = score_b > 0 ? score_b : 10.0 * greedy_length_;
}

double TspEnv::tour_length(const std::vector<int>& tour) const {
    return expo::tour_length(nodes_, tour);
}

double tsp_evaluate(const TspEnv& env, const std::vector<int>& tour) {
    const size_t n = env.nodes().size();
    if (tour.size() != n) throw ValidationError("tour does not visit every node");
    std::vector<bool> seen(n, false);
    for (int id : tour) {
        if (id < 0 || static_cast<size_t>(id) >= n || seen[static_cast<size_t>(id)])
            throw ValidationError("tour is not a permutation of the nodes");
        seen[static_cast<size_t>(id)] = true;
    }
    return env.tour_length(tour);
}

std::optional<ActionPayload> TspEnv::parse(const std::string& raw) const {
    try {
        auto order = parse_trace(raw, static_cast<int>(nodes_.size()));
        return ActionPayload{TspTour{std::move(order)}};
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

EvalOutcome TspEnv::evaluate(const ActionPayload& action, std::mt19937_64&) {
    const auto& tour = std::get<TspTour>(action);
    double len = tsp_evaluate(*this, tour.order);
    return EvalOutcome{len, normalize_prompt_score(len, {score_b_}), len};
}

std::string TspEnv::render_exemplar(const Exemplar& e) const {
    const auto& tour = std::get<TspTour>(*e.action.parsed);
    std::string line = "<trace>";
    for (size_t i = 0; i < tour.order.size(); ++i) {
        if (i > 0) line += ",";
        line += std::to_string(tour.order[i]);
    }
    line += "</trace>\nlength: " + format_real(e.score);
    return line;
}

std::vector<Exemplar> TspEnv::warm_start(std::mt19937_64& rng) const {
    std::vector<Exemplar> out;
    std::vector<int> order(nodes_.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < 5; ++i) {
        std::shuffle(order.begin(), order.end(), rng);
        std::string raw = "<trace>";
        for (size_t j = 0; j < order.size(); ++j) {
            if (j > 0) raw += ",";
            raw += std::to_string(order[j]);
        }
        raw += "</trace>";
        ActionRecord rec{raw, ActionPayload{TspTour{order}}};
        out.push_back(Exemplar{std::move(rec), tour_length(order)});
    }
    return out;
}

void TspEnv::fill_placeholders(std::string& body) const {
    std::string points;
    for (size_t i = 0; i < nodes_.size(); ++i) {
        if (i > 0) points += ", ";
        points += "(" + format_real(nodes_[i].x) + ", " + format_real(nodes_[i].y) + ")";
    }
    auto pos = body.find("{POINTS}");
    while (pos != std::string::npos) {
        body.replace(pos, 8, points);
        pos = body.find("{POINTS}", pos + points.size());
    }
}

// --------------------------------------------------------------------------
// Bernoulli MAB

long MabHistory::total() const {
    long sum = 0;
    for (long p : pulls) sum += p;
    return sum;
}

double MabHistory::mean(int arm) const {
    const auto i = static_cast<size_t>(arm);
    return pulls[i] == 0 ? 0.0 : reward_sums[i] / static_cast<double>(pulls[i]);
}

std::vector<std::string> default_button_names(int K) {
    static const std::vector<std::string> base{"blue", "green", "red",    "yellow", "purple",
                                               "orange", "pink", "brown", "black",  "white"};
    if (K > static_cast<int>(base.size()))
        throw ValidationError("no button names configured for K > 10");
    return {base.begin(), base.begin() + K};
}

BernoulliMabEnv::BernoulliMabEnv(const MabConfig& cfg)
    : cfg_(cfg), names_(default_button_names(cfg.K)), history_(cfg.K) {
    if (cfg.K < 2) throw ValidationError("mab needs at least 2 arms");
    if (cfg.best_arm < 0 || cfg.best_arm >= cfg.K) throw ValidationError("best_arm out of range");
    // best - gap rather than 0.5 - gap/2: the suboptimal regret is then the
    // configured gap bit-for-bit, keeping long-horizon regret sums exact.
    const double best = 0.5 + cfg.gap / 2;
    means_.assign(static_cast<size_t>(cfg.K), best - cfg.gap);
    means_[static_cast<size_t>(cfg.best_arm)] = best;
    arm_order_ = names_;
}

void BernoulliMabEnv::set_arm_order(std::vector<std::string> order) {
    if (order.size() != names_.size()) throw ValidationError("arm order size mismatch");
    arm_order_ = std::move(order);
}

std::optional<ActionPayload> BernoulliMabEnv::parse(const std::string& raw) const {
    try {
        auto p = parse_mab_dist(raw, cfg_.K, names_);
        return ActionPayload{MabDist{std::move(p)}};
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

MabStepResult mab_step(const std::vector<double>& means, const std::vector<double>& p,
                       std::mt19937_64& rng) {
    double sum = 0;
    for (double v : p) {
        if (!(v >= 0)) throw ValidationError("negative sampling probability");
        sum += v;
    }
    if (p.size() != means.size() || std::abs(sum - 1.0) > 1e-6)
        throw ValidationError("malformed sampling distribution");
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u = u01(rng), cdf = 0;
    int arm = static_cast<int>(p.size()) - 1;
    for (size_t i = 0; i < p.size(); ++i) {
        cdf += p[i];
        if (u < cdf) {
            arm = static_cast<int>(i);
            break;
        }
    }
    const double mu = means[static_cast<size_t>(arm)];
    const double mu_star = *std::max_element(means.begin(), means.end());
    int reward = u01(rng) < mu ? 1 : 0;
    return MabStepResult{arm, reward, mu_star - mu};
}

double mab_prompt_score(const std::vector<double>& p, const MabHistory& history) {
    if (p.size() != history.pulls.size()) throw ShapeError("distribution/history size mismatch");
    double score = 0;
    for (size_t i = 0; i < p.size(); ++i) score += p[i] * history.mean(static_cast<int>(i));
    return score;
}

EvalOutcome BernoulliMabEnv::evaluate(const ActionPayload& action, std::mt19937_64& rng) {
    const auto& dist = std::get<MabDist>(action);
    // Score uses the estimates from history before this pull.
    const double score = mab_prompt_score(dist.p, history_);
    auto step = mab_step(means_, dist.p, rng);
    history_.pulls[static_cast<size_t>(step.arm)] += 1;
    history_.reward_sums[static_cast<size_t>(step.arm)] += step.reward;
    return EvalOutcome{static_cast<double>(step.reward), score, step.instant_regret};
}

std::string BernoulliMabEnv::render_exemplar(const Exemplar& e) const {
    return e.action.raw_text;
}

std::string BernoulliMabEnv::render_exemplar_block(const std::vector<Exemplar>&) const {
    return render_mab_summary(history_, names_, arm_order_);
}

void BernoulliMabEnv::fill_placeholders(std::string& body) const {
    const std::string plays = std::to_string(history_.total());
    auto pos = body.find("{NUM_PLAYS}");
    while (pos != std::string::npos) {
        body.replace(pos, 11, plays);
        pos = body.find("{NUM_PLAYS}", pos + plays.size());
    }
}

}  // namespace expo
