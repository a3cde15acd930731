#include "expo/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace expo {

namespace {

json train_config_to_json(const TrainConfig& tc) {
    return json{{"hidden_width", tc.hidden_width},
                {"epochs", tc.epochs},
                {"learning_rate", tc.learning_rate},
                {"optimizer", tc.optimizer == Optimizer::adam ? "adam" : "gd"},
                {"warm_start", tc.warm_start}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& def) {
    TrainConfig tc = def;
    tc.hidden_width = j.value("hidden_width", def.hidden_width);
    tc.epochs = j.value("epochs", def.epochs);
    tc.learning_rate = j.value("learning_rate", def.learning_rate);
    const std::string opt = j.value("optimizer", def.optimizer == Optimizer::adam ? "adam" : "gd");
    if (opt == "adam")
        tc.optimizer = Optimizer::adam;
    else if (opt == "gd")
        tc.optimizer = Optimizer::gd;
    else
        throw ValidationError("unknown optimizer: " + opt);
    tc.warm_start = j.value("warm_start", def.warm_start);
    return tc;
}

bool one_of(const std::string& v, std::initializer_list<const char*> opts) {
    for (const char* o : opts)
        if (v == o) return true;
    return false;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string fmt2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    ExperimentConfig cfg;
    cfg.task = j.value("task", cfg.task);
    cfg.method = j.value("method", cfg.method);
    cfg.iterations = j.value("iterations", cfg.iterations);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.dry_run = j.value("dry_run", cfg.dry_run);
    cfg.k1 = j.value("k1", cfg.k1);
    cfg.k2 = j.value("k2", cfg.k2);
    cfg.domain_path = j.value("domain_path", cfg.domain_path);
    cfg.provider = j.value("provider", cfg.provider);
    cfg.embedder = j.value("embedder", cfg.embedder);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.transcript = j.value("transcript", cfg.transcript);
    if (j.contains("remote_chat")) {
        const json& r = j.at("remote_chat");
        cfg.remote_chat.base_url = r.value("base_url", "");
        cfg.remote_chat.path = r.value("path", cfg.remote_chat.path);
        cfg.remote_chat.model = r.value("model", "");
        cfg.remote_chat.api_key_env = r.value("api_key_env", "");
        cfg.remote_chat.max_attempts = r.value("max_attempts", cfg.remote_chat.max_attempts);
        cfg.remote_chat.timeout_seconds = r.value("timeout_seconds", cfg.remote_chat.timeout_seconds);
    }
    if (j.contains("remote_embed")) {
        const json& r = j.at("remote_embed");
        cfg.remote_embed.base_url = r.value("base_url", "");
        cfg.remote_embed.path = r.value("path", cfg.remote_embed.path);
        cfg.remote_embed.model = r.value("model", "");
        cfg.remote_embed.api_key_env = r.value("api_key_env", "");
        cfg.remote_embed.dim = r.value("dim", cfg.remote_embed.dim);
        cfg.remote_embed.max_attempts = r.value("max_attempts", cfg.remote_embed.max_attempts);
        cfg.remote_embed.timeout_seconds =
            r.value("timeout_seconds", cfg.remote_embed.timeout_seconds);
    }
    cfg.eta_desc = j.value("eta_desc", cfg.eta_desc);
    cfg.eta_exemplar = j.value("eta_exemplar", cfg.eta_exemplar);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.exemplar_cap = j.value("exemplar_cap", cfg.exemplar_cap);
    cfg.parse_retries = j.value("parse_retries", cfg.parse_retries);
    cfg.ucb_beta = j.value("ucb_beta", cfg.ucb_beta);
    cfg.kES = j.value("kES", cfg.kES);
    cfg.pool_cap = j.value("pool_cap", cfg.pool_cap);
    cfg.save_snapshots = j.value("save_snapshots", cfg.save_snapshots);
    if (j.contains("arm_estimator"))
        cfg.arm_estimator = train_config_from_json(j.at("arm_estimator"), cfg.arm_estimator);
    if (j.contains("seq_estimator"))
        cfg.seq_estimator = train_config_from_json(j.at("seq_estimator"), cfg.seq_estimator);
    if (j.contains("lr")) {
        const json& e = j.at("lr");
        cfg.lr.w_true = e.value("w_true", cfg.lr.w_true);
        cfg.lr.b_true = e.value("b_true", cfg.lr.b_true);
        cfg.lr.n_points = e.value("n_points", cfg.lr.n_points);
        cfg.lr.noise_sd = e.value("noise_sd", cfg.lr.noise_sd);
        cfg.lr.seed = e.value("seed", cfg.lr.seed);
        cfg.lr.score_b = e.value("score_b", cfg.lr.score_b);
    }
    if (j.contains("tsp")) {
        const json& e = j.at("tsp");
        cfg.tsp.n_nodes = e.value("n_nodes", cfg.tsp.n_nodes);
        cfg.tsp.seed = e.value("seed", cfg.tsp.seed);
        cfg.tsp.score_b = e.value("score_b", cfg.tsp.score_b);
    }
    if (j.contains("mab")) {
        const json& e = j.at("mab");
        cfg.mab.K = e.value("K", cfg.mab.K);
        cfg.mab.gap = e.value("gap", cfg.mab.gap);
        cfg.mab.best_arm = e.value("best_arm", cfg.mab.best_arm);
        cfg.mab.seed = e.value("seed", cfg.mab.seed);
    }
    cfg.mab_template = j.value("mab_template", cfg.mab_template);
    cfg.replay_run_dir = j.value("replay_run_dir", cfg.replay_run_dir);
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j{
        {"task", cfg.task},
        {"method", cfg.method},
        {"iterations", cfg.iterations},
        {"seeds", cfg.seeds},
        {"parallelism", cfg.parallelism},
        {"out_dir", cfg.out_dir},
        {"dry_run", cfg.dry_run},
        {"k1", cfg.k1},
        {"k2", cfg.k2},
        {"domain_path", cfg.domain_path},
        {"provider", cfg.provider},
        {"embedder", cfg.embedder},
        {"embed_dim", cfg.embed_dim},
        {"transcript", cfg.transcript},
        {"remote_chat",
         {{"base_url", cfg.remote_chat.base_url},
          {"path", cfg.remote_chat.path},
          {"model", cfg.remote_chat.model},
          {"api_key_env", cfg.remote_chat.api_key_env},
          {"max_attempts", cfg.remote_chat.max_attempts},
          {"timeout_seconds", cfg.remote_chat.timeout_seconds}}},
        {"remote_embed",
         {{"base_url", cfg.remote_embed.base_url},
          {"path", cfg.remote_embed.path},
          {"model", cfg.remote_embed.model},
          {"api_key_env", cfg.remote_embed.api_key_env},
          {"dim", cfg.remote_embed.dim},
          {"max_attempts", cfg.remote_embed.max_attempts},
          {"timeout_seconds", cfg.remote_embed.timeout_seconds}}},
        {"eta_desc", cfg.eta_desc},
        {"eta_exemplar", cfg.eta_exemplar},
        {"batch", cfg.batch},
        {"exemplar_cap", cfg.exemplar_cap},
        {"parse_retries", cfg.parse_retries},
        {"ucb_beta", cfg.ucb_beta},
        {"kES", cfg.kES},
        {"pool_cap", cfg.pool_cap},
        {"save_snapshots", cfg.save_snapshots},
        {"arm_estimator", train_config_to_json(cfg.arm_estimator)},
        {"seq_estimator", train_config_to_json(cfg.seq_estimator)},
        {"lr",
         {{"w_true", cfg.lr.w_true},
          {"b_true", cfg.lr.b_true},
          {"n_points", cfg.lr.n_points},
          {"noise_sd", cfg.lr.noise_sd},
          {"seed", cfg.lr.seed},
          {"score_b", cfg.lr.score_b}}},
        {"tsp", {{"n_nodes", cfg.tsp.n_nodes}, {"seed", cfg.tsp.seed}, {"score_b", cfg.tsp.score_b}}},
        {"mab",
         {{"K", cfg.mab.K},
          {"gap", cfg.mab.gap},
          {"best_arm", cfg.mab.best_arm},
          {"seed", cfg.mab.seed}}},
        {"mab_template", cfg.mab_template},
        {"replay_run_dir", cfg.replay_run_dir},
    };
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void resolve_config(ExperimentConfig& cfg) {
    if (!one_of(cfg.task, {"lr", "tsp", "mab"}))
        throw ValidationError("unknown task: " + cfg.task);
    if (!one_of(cfg.method, {"expo", "expo_es", "opro", "opro_enhanced", "uniform_random",
                             "neural_ucb", "fixed_replay"}))
        throw ValidationError("unknown method: " + cfg.method);
    if (!one_of(cfg.provider, {"scripted", "remote"}))
        throw ValidationError("unknown provider: " + cfg.provider);
    if (!one_of(cfg.embedder, {"synthetic", "remote"}))
        throw ValidationError("unknown embedder: " + cfg.embedder);
    if (!one_of(cfg.mab_template, {"bssnd", "bsscd"}))
        throw ValidationError("unknown mab_template: " + cfg.mab_template);
    if (cfg.method == "opro_enhanced" && cfg.task != "tsp")
        throw ValidationError("opro_enhanced is a tsp method");
    if (cfg.method == "fixed_replay" && cfg.replay_run_dir.empty())
        throw ValidationError("fixed_replay needs replay_run_dir");
    if (cfg.seeds.empty()) throw ValidationError("seeds must be non-empty");
    if (cfg.parallelism < 1) throw ValidationError("parallelism must be >= 1");
    if (cfg.k1 < 1 || cfg.k2 < 1) throw ValidationError("k1 and k2 must be >= 1");
    if (cfg.batch < 1) throw ValidationError("batch must be >= 1");
    if (cfg.iterations == 0) {
        if (cfg.task == "lr")
            cfg.iterations = 50;
        else if (cfg.task == "mab")
            cfg.iterations = 100;
        else
            cfg.iterations = cfg.tsp.n_nodes <= 10 ? 100 : cfg.tsp.n_nodes <= 15 ? 200 : 300;
    }
    if (cfg.iterations < 1) throw ValidationError("iterations must be >= 1");
    if (cfg.eta_desc == 0) cfg.eta_desc = cfg.task == "mab" ? 10.0 : 100.0;
}

std::string template_name_for(const std::string& task, const std::string& method,
                              const std::string& mab_template) {
    if (task == "lr") return "opro_lr";
    if (task == "tsp") return method == "opro_enhanced" ? "opro_tsp_enhanced" : "opro_tsp";
    return mab_template;
}

ExperimentConfig reference_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.method = "expo_es";
    cfg.provider = "remote";
    cfg.embedder = "remote";
    cfg.embed_dim = 3072;
    cfg.remote_embed.dim = 3072;
    cfg.k1 = 101;
    cfg.k2 = 101;
    cfg.batch = 8;
    cfg.exemplar_cap = 20;
    cfg.pool_cap = 30;
    cfg.kES = 257;
    cfg.eta_exemplar = 10.0;
    cfg.arm_estimator.hidden_width = 1536;
    cfg.seq_estimator.hidden_width = 512;
    if (name == "lr_2_30") {
        cfg.task = "lr";
        cfg.lr.w_true = 2;
        cfg.lr.b_true = 30;
    } else if (name == "lr_36_neg1") {
        cfg.task = "lr";
        cfg.lr.w_true = 36;
        cfg.lr.b_true = -1;
    } else if (name == "tsp_10" || name == "tsp_15" || name == "tsp_20") {
        cfg.task = "tsp";
        cfg.tsp.n_nodes = std::stoi(name.substr(4));
    } else if (name == "mab_easy_bssnd" || name == "mab_easy_bsscd" ||
               name == "mab_hard_bssnd" || name == "mab_hard_bsscd") {
        cfg.task = "mab";
        const bool easy = name.find("easy") != std::string::npos;
        cfg.mab.K = easy ? 4 : 5;
        cfg.mab.gap = easy ? 0.5 : 0.2;
        cfg.mab_template = name.substr(name.size() - 5);
    } else {
        throw ValidationError("unknown preset: " + name);
    }
    resolve_config(cfg);
    return cfg;
}

PromptDomain make_offline_domain(const std::string& template_name, int k1, int k2) {
    auto [desc0, instr0] = initial_meta_prompt(template_name);
    std::vector<TaskDescription> descs;
    std::vector<MetaInstruction> instrs;
    for (int i = 0; i < k1; ++i) {
        std::string text = desc0;
        if (i > 0) text += "\n(paraphrase variant " + std::to_string(i) + ")";
        descs.push_back({i, text});
    }
    for (int i = 0; i < k2; ++i) {
        std::string text = instr0;
        if (i > 0) text += "\n(paraphrase variant " + std::to_string(i) + ")";
        instrs.push_back({i, text});
    }
    return PromptDomain(std::move(descs), std::move(instrs));
}

std::vector<AggregateRow> aggregate(const std::vector<std::vector<TraceRow>>& traces) {
    if (traces.empty()) throw ValidationError("aggregate: no traces");
    const size_t T = traces.front().size();
    for (const auto& t : traces)
        if (t.size() != T) throw ShapeError("aggregate: trace lengths differ");
    const double n = static_cast<double>(traces.size());
    std::vector<AggregateRow> rows(T);
    for (size_t i = 0; i < T; ++i) {
        double sum = 0;
        for (const auto& t : traces) sum += t[i].best_so_far;
        const double mean = sum / n;
        double ssq = 0;
        for (const auto& t : traces) {
            const double d = t[i].best_so_far - mean;
            ssq += d * d;
        }
        const double se = traces.size() > 1 ? std::sqrt(ssq / (n - 1)) / std::sqrt(n) : 0.0;
        rows[i] = {traces.front()[i].iteration, mean, se};
    }
    return rows;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "iteration,mean,se\n";
    for (const auto& r : rows) out << r.iteration << ',' << fmt(r.mean) << ',' << fmt(r.se) << '\n';
}

std::vector<AggregateRow> read_aggregate_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "iteration,mean,se")
        throw ParseError("bad aggregate header in " + path);
    std::vector<AggregateRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        AggregateRow r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf", &r.iteration, &r.mean, &r.se) != 3)
            throw ParseError("bad aggregate row: " + line);
        rows.push_back(r);
    }
    return rows;
}

void emit_plot_svg(const std::string& path, const std::vector<AggregateRow>& rows,
                   const std::string& title) {
    if (rows.empty()) throw ValidationError("emit_plot_svg: no rows");
    const double W = 640, H = 400, ml = 60, mr = 20, mt = 40, mb = 40;
    double x0 = rows.front().iteration, x1 = rows.back().iteration;
    if (x1 == x0) x1 = x0 + 1;
    double lo = rows[0].mean - rows[0].se, hi = rows[0].mean + rows[0].se;
    for (const auto& r : rows) {
        lo = std::min(lo, r.mean - r.se);
        hi = std::max(hi, r.mean + r.se);
    }
    if (hi == lo) hi = lo + 1;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - lo) / (hi - lo) * (H - mt - mb); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
        << " font-size=\"14\">" << title << "</text>\n";
    // SE band: upper edge forward, lower edge back
    svg << "<polygon fill=\"#a0c4ff\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (const auto& r : rows) svg << fmt2(px(r.iteration)) << ',' << fmt2(py(r.mean + r.se)) << ' ';
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
        svg << fmt2(px(it->iteration)) << ',' << fmt2(py(it->mean - it->se)) << ' ';
    svg << "\"/>\n";
    svg << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.5\" points=\"";
    for (const auto& r : rows) svg << fmt2(px(r.iteration)) << ',' << fmt2(py(r.mean)) << ' ';
    svg << "\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml << "\" y=\"" << H - mb + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(x0) << "</text>\n";
    svg << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 16
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(x1)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(lo)
        << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(hi)
        << "</text>\n";
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << svg.str();
}

void write_best_arm(const std::string& path, const Arm& arm) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "version 1\narm " << arm.index << "\ndesc " << arm.desc_id << "\ninstr " << arm.instr_id
        << "\n";
}

int load_best_arm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string key;
    int version = 0, arm = -1;
    if (!(in >> key >> version) || key != "version" || version != 1)
        throw ParseError("unsupported best_arm file: " + path);
    while (in >> key) {
        int v;
        if (!(in >> v)) throw ParseError("bad best_arm field: " + key);
        if (key == "arm") arm = v;
    }
    if (arm < 0) throw ParseError("best_arm file missing arm: " + path);
    return arm;
}

std::vector<TraceRow> run_replicate(const ExperimentConfig& cfg, uint64_t seed,
                                    const PromptDomain& domain, Arm* best_arm_out,
                                    double* final_metric_out) {
    std::unique_ptr<Environment> env;
    std::unique_ptr<AgentProvider> base_agent;
    if (cfg.task == "lr") {
        auto* lr = new LinearRegressionEnv(cfg.lr);
        env.reset(lr);
        if (cfg.provider == "scripted")
            base_agent = std::make_unique<ImprovingWbProvider>(cfg.lr.w_true, cfg.lr.b_true, 15.0,
                                                               15.0, 0.15, seed);
    } else if (cfg.task == "tsp") {
        auto* tsp = new TspEnv(cfg.tsp);
        env.reset(tsp);
        if (cfg.provider == "scripted") {
            std::vector<int> target = tsp->optimal_tour();
            if (target.empty()) target = greedy_tour(tsp->nodes());
            base_agent = std::make_unique<ImprovingTourProvider>(std::move(target), seed);
        }
    } else {
        auto* mab = new BernoulliMabEnv(cfg.mab);
        env.reset(mab);
        if (cfg.provider == "scripted")
            base_agent = std::make_unique<GreedyMabProvider>(mab->arm_names(), 0.2, seed);
    }
    if (!base_agent) base_agent = std::make_unique<RemoteChatProvider>(cfg.remote_chat);

    std::shared_ptr<AgentProvider> agent(std::move(base_agent));
    if (cfg.transcript) {
        const std::string path =
            cfg.out_dir + "/transcript/rep_" + std::to_string(seed) + ".jsonl";
        agent = std::make_shared<TranscriptProvider>(agent, path);
    }

    std::unique_ptr<EmbeddingProvider> embedder;
    if (cfg.embedder == "synthetic")
        embedder = std::make_unique<SyntheticEmbedder>(cfg.embed_dim, 0);
    else
        embedder = std::make_unique<RemoteEmbedder>(cfg.remote_embed);
    EmbeddingCache cache;

    ExpoOptions opts;
    opts.eta_desc = cfg.eta_desc;
    opts.batch = cfg.batch;
    opts.exemplar_cap = cfg.exemplar_cap;
    opts.parse_retries = cfg.parse_retries;
    opts.ucb_beta = cfg.ucb_beta;
    opts.estimator = cfg.arm_estimator;
    opts.tmpl = builtin_template(template_name_for(cfg.task, cfg.method, cfg.mab_template));

    RngStreams rngs = RngStreams::from_master(seed);
    std::unique_ptr<ExpoOptimizer> opt;
    if (cfg.method == "expo_es") {
        EsOptions es;
        es.eta_exemplar = cfg.eta_exemplar;
        es.kES = cfg.kES;
        es.L = cfg.exemplar_cap;
        es.pool_cap = cfg.pool_cap;
        es.mode = cfg.task == "mab" ? SequenceMode::cyclic : SequenceMode::random;
        es.estimator = cfg.seq_estimator;
        if (cfg.save_snapshots)
            es.snapshot_dir = cfg.out_dir + "/snapshots/rep_" + std::to_string(seed);
        opt = std::make_unique<EsOptimizer>(domain, *env, *agent, *embedder, cache, opts, es, rngs);
    } else {
        ArmPolicy policy = ArmPolicy::exp3;
        int initial_arm = 0;
        if (cfg.method == "opro" || cfg.method == "opro_enhanced") {
            policy = ArmPolicy::fixed;
        } else if (cfg.method == "uniform_random") {
            policy = ArmPolicy::uniform_random;
        } else if (cfg.method == "neural_ucb") {
            policy = ArmPolicy::neural_ucb;
        } else if (cfg.method == "fixed_replay") {
            policy = ArmPolicy::fixed;
            initial_arm = load_best_arm(cfg.replay_run_dir + "/best_arm.txt");
            if (initial_arm >= domain.k())
                throw ValidationError("replayed arm outside the domain");
        }
        opt = std::make_unique<ExpoOptimizer>(domain, *env, *agent, *embedder, cache, opts, policy,
                                              rngs, initial_arm);
    }

    std::vector<TraceRow> trace = opt->run(cfg.iterations);
    if (best_arm_out) *best_arm_out = opt->best_arm();
    if (final_metric_out) *final_metric_out = trace.empty() ? 0.0 : trace.back().best_so_far;
    return trace;
}

RunArtifacts run_experiment(const ExperimentConfig& input) {
    ExperimentConfig cfg = input;
    resolve_config(cfg);

    PromptDomain domain = cfg.domain_path.empty()
        ? make_offline_domain(template_name_for(cfg.task, cfg.method, cfg.mab_template),
                              cfg.k1, cfg.k2)
        : PromptDomain::load(cfg.domain_path);

    RunArtifacts art;
    if (cfg.dry_run) {
        std::ostringstream plan;
        plan << "task=" << cfg.task << " method=" << cfg.method << " iterations=" << cfg.iterations
             << " domain=" << domain.k1() << "x" << domain.k2() << " (k=" << domain.k() << ")"
             << " seeds=" << cfg.seeds.size() << " parallelism=" << cfg.parallelism
             << " out_dir=" << cfg.out_dir;
        art.plan = plan.str();
        return art;
    }

    fs::create_directories(cfg.out_dir);
    fs::create_directories(cfg.out_dir + "/traces");
    if (cfg.transcript) fs::create_directories(cfg.out_dir + "/transcript");
    if (cfg.method == "expo_es" && cfg.save_snapshots)
        for (uint64_t s : cfg.seeds)
            fs::create_directories(cfg.out_dir + "/snapshots/rep_" + std::to_string(s));
    {
        std::ofstream out(cfg.out_dir + "/config.resolved.json");
        if (!out) throw ValidationError("cannot write config.resolved.json");
        out << config_to_json(cfg);
    }

    const size_t n = cfg.seeds.size();
    art.traces.resize(n);
    std::vector<Arm> best_arms(n);
    std::vector<double> finals(n, 0.0);
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                art.traces[i] =
                    run_replicate(cfg, cfg.seeds[i], domain, &best_arms[i], &finals[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const size_t workers = std::min<size_t>(static_cast<size_t>(cfg.parallelism), n);
    std::vector<std::thread> pool;
    for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    // best replicate: lowest final best_so_far in both directions (running
    // minimum of the metric, or cumulative regret)
    size_t best_rep = 0;
    for (size_t i = 1; i < n; ++i)
        if (finals[i] < finals[best_rep]) best_rep = i;

    for (size_t i = 0; i < n; ++i)
        write_trace_csv(cfg.out_dir + "/traces/rep_" + std::to_string(cfg.seeds[i]) + ".csv",
                        art.traces[i]);
    art.aggregate = aggregate(art.traces);
    write_aggregate_csv(cfg.out_dir + "/aggregate.csv", art.aggregate);
    emit_plot_svg(cfg.out_dir + "/plot.svg", art.aggregate,
                  cfg.task + " / " + cfg.method + " (best so far)");
    write_best_arm(cfg.out_dir + "/best_arm.txt", best_arms[best_rep]);
    art.run_dir = cfg.out_dir;
    return art;
}

}  // namespace expo
