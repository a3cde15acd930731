#include "expo/agent.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "expo/environment.hpp"

namespace expo {

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

const char* kNumberPattern = R"(([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))";

}  // namespace

// --------------------------------------------------------------------------
// Providers

std::string ScriptedTableProvider::complete(const std::string& prompt, double temperature) {
    const uint64_t call = calls_++;
    for (const auto& e : entries_) {
        if (!e.pattern.empty() && prompt.find(e.pattern) == std::string::npos) continue;
        if (e.replies.empty()) break;
        if (temperature == 0.0) return e.replies.front();
        return e.replies[mix64(seed_ ^ call) % e.replies.size()];
    }
    throw TransportError("scripted provider has no entry for this prompt");
}

ImprovingWbProvider::ImprovingWbProvider(double w_target, double b_target, double w0, double b0,
                                         double rate, uint64_t seed)
    : wt_(w_target), bt_(b_target), w_(w0), b_(b0), rate_(rate), rng_(seed) {}

std::string ImprovingWbProvider::complete(const std::string&, double temperature) {
    char buf[96];
    if (temperature == 0.0) {
        // advance toward the target; the quadratic objective strictly
        // improves along this line
        w_ += rate_ * (wt_ - w_);
        b_ += rate_ * (bt_ - b_);
        std::snprintf(buf, sizeof(buf), "The next pair is [%.8f, %.8f]", w_, b_);
    } else {
        std::uniform_real_distribution<double> jitter(-0.5, 0.5);
        std::snprintf(buf, sizeof(buf), "Exploring: [%.8f, %.8f]", w_ + jitter(rng_),
                      b_ + jitter(rng_));
    }
    return buf;
}

ImprovingTourProvider::ImprovingTourProvider(std::vector<int> target_tour, uint64_t seed)
    : target_(std::move(target_tour)), current_(target_), rng_(seed) {
    std::shuffle(current_.begin(), current_.end(), rng_);
}

std::string ImprovingTourProvider::complete(const std::string&, double temperature) {
    auto render = [](const std::vector<int>& t) {
        std::string s = "<trace>";
        for (size_t i = 0; i < t.size(); ++i) {
            if (i > 0) s += ",";
            s += std::to_string(t[i]);
        }
        return s + "</trace>";
    };
    ++calls_;
    if (temperature == 0.0) {
        // fix the first position that disagrees with the target
        for (size_t i = 0; i < current_.size(); ++i) {
            if (current_[i] != target_[i]) {
                auto it = std::find(current_.begin() + static_cast<long>(i), current_.end(),
                                    target_[i]);
                std::iter_swap(current_.begin() + static_cast<long>(i), it);
                break;
            }
        }
        return render(current_);
    }
    auto probe = current_;
    std::uniform_int_distribution<size_t> pick(0, probe.size() - 1);
    std::swap(probe[pick(rng_)], probe[pick(rng_)]);
    return render(probe);
}

GreedyMabProvider::GreedyMabProvider(std::vector<std::string> arm_names, double explore,
                                     uint64_t seed)
    : names_(std::move(arm_names)), explore_(explore), rng_(seed) {}

std::string GreedyMabProvider::complete(const std::string& prompt, double temperature) {
    const int K = static_cast<int>(names_.size());
    std::vector<double> mean(static_cast<size_t>(K), 0.0);
    std::vector<long> pulls(static_cast<size_t>(K), 0);
    for (int i = 0; i < K; ++i) {
        std::regex re(names_[static_cast<size_t>(i)] +
                      R"( button: pressed ([0-9]+) times(?: with average reward ([0-9.]+))?)");
        std::smatch m;
        if (std::regex_search(prompt, m, re)) {
            pulls[static_cast<size_t>(i)] = std::stol(m[1]);
            if (m[2].matched) mean[static_cast<size_t>(i)] = std::stod(m[2]);
        }
    }
    int best = 0;
    for (int i = 0; i < K; ++i) {
        // unpulled arms are optimistic
        double vi = pulls[static_cast<size_t>(i)] == 0 ? 1.1 : mean[static_cast<size_t>(i)];
        double vb = pulls[static_cast<size_t>(best)] == 0 ? 1.1 : mean[static_cast<size_t>(best)];
        if (vi > vb) best = i;
    }
    double explore = explore_;
    if (temperature > 0.0) {
        std::uniform_real_distribution<double> extra(0.0, 0.3);
        explore = std::min(1.0, explore_ + extra(rng_));
    }
    std::string dist;
    for (int i = 0; i < K; ++i) {
        double p = explore / K + (i == best ? 1.0 - explore : 0.0);
        if (i > 0) dist += ",";
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%s:%.4f", names_[static_cast<size_t>(i)].c_str(), p);
        dist += buf;
    }
    return "<Answer>" + dist + "</Answer>";
}

std::string RemoteChatProvider::complete(const std::string& prompt, double temperature) {
    std::string key;
    if (!cfg_.api_key_env.empty()) {
        const char* val = std::getenv(cfg_.api_key_env.c_str());
        if (val) key = val;
    }
    nlohmann::json req{{"model", cfg_.model},
                       {"temperature", temperature},
                       {"messages", {{{"role", "user"}, {"content", prompt}}}}};
    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
        httplib::Client client(cfg_.base_url);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
        auto res = client.Post(cfg_.path, headers, req.dump(), "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    throw TransportError("chat request failed after " + std::to_string(cfg_.max_attempts) +
                         " attempts: " + last_error);
}

std::string TranscriptProvider::complete(const std::string& prompt, double temperature) {
    std::string reply = inner_->complete(prompt, temperature);
    std::ofstream out(path_, std::ios::app);
    if (out) {
        nlohmann::json rec{{"temperature", temperature}, {"prompt", prompt}, {"response", reply}};
        out << rec.dump() << "\n";
    }
    return reply;
}

// --------------------------------------------------------------------------
// Parsers

std::pair<double, double> parse_wb(const std::string& text) {
    static const std::regex re(std::string(R"(\[\s*)") + kNumberPattern + R"(\s*,\s*)" +
                               kNumberPattern + R"(\s*\])");
    std::smatch last;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
         it != std::sregex_iterator(); ++it)
        last = *it;
    if (last.empty()) throw ParseError("no bracketed [w, b] pair found");
    return {std::stod(last[1]), std::stod(last[2])};
}

std::vector<int> parse_trace(const std::string& text, int n) {
    if (n < 2) throw ValidationError("trace needs n >= 2");
    auto open = text.rfind("<trace>");
    if (open == std::string::npos) throw ParseError("missing <trace> tag");
    auto close = text.find("</trace>", open);
    if (close == std::string::npos) throw ParseError("missing </trace> tag");
    std::string inner = text.substr(open + 7, close - open - 7);
    for (auto& c : inner)
        if (c == ',') c = ' ';
    std::istringstream ss(inner);
    std::vector<int> order;
    int id;
    while (ss >> id) order.push_back(id);
    if (!ss.eof()) throw ParseError("non-numeric node id in trace");
    if (static_cast<int>(order.size()) != n) throw ParseError("trace does not list all nodes");
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (int v : order) {
        if (v < 0 || v >= n || seen[static_cast<size_t>(v)])
            throw ParseError("trace is not a permutation");
        seen[static_cast<size_t>(v)] = true;
    }
    return order;
}

std::vector<double> parse_mab_dist(const std::string& text, int K,
                                   const std::vector<std::string>& arm_names) {
    if (static_cast<int>(arm_names.size()) != K) throw ValidationError("arm_names size mismatch");
    // prefer the last <Answer>...</Answer> block; accept a backslashed
    // closing tag too, a common model typo
    std::string scope = text;
    {
        static const std::regex answer(R"(<Answer>([\s\S]*?)<[/\\]Answer>)");
        std::smatch last;
        for (auto it = std::sregex_iterator(text.begin(), text.end(), answer);
             it != std::sregex_iterator(); ++it)
            last = *it;
        if (!last.empty()) scope = last[1];
    }
    std::string pattern;
    for (int i = 0; i < K; ++i) {
        if (i > 0) pattern += R"(\s*,\s*)";
        pattern += arm_names[static_cast<size_t>(i)] + R"(\s*:\s*)" + kNumberPattern;
    }
    const std::regex re(pattern);
    std::smatch last;
    for (auto it = std::sregex_iterator(scope.begin(), scope.end(), re);
         it != std::sregex_iterator(); ++it)
        last = *it;
    if (last.empty()) throw ParseError("no arm distribution found");
    std::vector<double> p(static_cast<size_t>(K));
    double sum = 0;
    for (int i = 0; i < K; ++i) {
        double v = std::stod(last[static_cast<size_t>(i) + 1]);
        if (v < 0) v = 0;  // clamp
        p[static_cast<size_t>(i)] = v;
        sum += v;
    }
    if (sum <= 0) {
        std::fill(p.begin(), p.end(), 1.0 / K);
    } else {
        for (auto& v : p) v /= sum;
    }
    return p;
}

std::string render_mab_summary(const MabHistory& history, const std::vector<std::string>& names,
                               const std::vector<std::string>& arm_order) {
    if (arm_order.size() != names.size()) throw ValidationError("arm_order is not a permutation");
    std::string out;
    for (const auto& name : arm_order) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ValidationError("unknown arm name: " + name);
        const int i = static_cast<int>(it - names.begin());
        char buf[96];
        if (history.pulls[static_cast<size_t>(i)] == 0) {
            std::snprintf(buf, sizeof(buf), "%s button: pressed 0 times", name.c_str());
        } else {
            std::snprintf(buf, sizeof(buf), "%s button: pressed %ld times with average reward %.1f",
                          name.c_str(), history.pulls[static_cast<size_t>(i)],
                          history.mean(i));
        }
        if (!out.empty()) out += "\n";
        out += buf;
    }
    return out;
}

// --------------------------------------------------------------------------
// Templates

namespace {

const char* kDefaultLayout = "{DESCRIPTION}\n\n{EXEMPLARS}\n\n{INSTRUCTION}";

const char* kMabLayout =
    "{DESCRIPTION}\n\n"
    "{INSTRUCTION}\n\n"
    "You must provide your final answer within the tags <Answer>DIST</Answer> where DIST is "
    "the distribution in the format specified above.\n\n"
    "So far you have played {NUM_PLAYS} times with your past choices and rewards summarized "
    "as follows:\n"
    "{EXEMPLARS}\n\n"
    "Which button will you choose next? Remember, YOU MUST provide your final answer within "
    "the tags <Answer>DIST</Answer> where DIST is the distribution in the format specified "
    "above.";

const char* kLrDescription =
    "Now you will help me minimize a function with two input variables (w, b). I have some "
    "(w, b) pairs and the function values at those points. The pairs are arranged in "
    "descending order based on their function values, where lower values are better.";

const char* kLrInstruction =
    "Give me a new (w, b) pair that is different from all pairs above, and has a function "
    "value lower than any of the above. Do not write code. The output must end with a pair "
    "[w, b], where w and b are numerical values.";

const char* kTspDescription =
    "You are given a list of points with coordinates below: {POINTS}.\n"
    "Below are some previous traces and their lengths. The traces are arranged in descending "
    "order based on their lengths, where lower values are better.";

const char* kTspEnhancedDescription =
    "You are given a list of points with coordinates below: {POINTS}.\n"
    "Below are some previous traces and their lengths. The traces are arranged in descending "
    "order based on their lengths, where smaller lengths indicate better solutions. "
    "Therefore, the traces are listed from the largest length to the smallest, the trace "
    "with the smallest length is considered the most optimal.";

const char* kTspInstruction =
    "Give me a new trace that is different from all traces above, and has a length lower "
    "than any of the above. The trace should traverse all points exactly once. The trace "
    "should start with <trace> and end with </trace>.";

const char* kMabDescription =
    "You are a bandit algorithm in a room with 5 buttons labeled blue, green, red, yellow, "
    "purple. Each button is associated with a Bernoulli distribution with a fixed but "
    "unknown mean; the means for the buttons could be different. For each button, when you "
    "press it, you will get a reward that is sampled from the button's associated "
    "distribution. You have 100 time steps and, on each time step, you can choose any "
    "button and receive the reward. Your goal is to maximize the total reward over the 100 "
    "time steps.";

const char* kBssndInstruction =
    "At each time step, I will show you a summary of your past choices and rewards. Then "
    "you must make the next choice. You may output a distribution over the 5 buttons "
    "formatted EXACTLY like \"blue:a,green:b,red:c,yellow:d,purple:e\".";

const char* kBsscdInstruction =
    "At each time step, I will show you a summary of your past choices and rewards. Then "
    "you must make the next choice. You may output a distribution over the 5 buttons "
    "formatted EXACTLY like \"blue:a,green:b,red:c,yellow:d,purple:e\". Let's think step by "
    "step to make sure we make a good choice.";

}  // namespace

const char* const kRephraseTemplate =
    "To achieve a more effective TASK description and INSTRUCTION and convey its core "
    "essence more clearly, please enhance the content in the quote by rephrasing and "
    "changing some information: \"{INITIAL_META_PROMPT}\"\n"
    "Please return directly the modified description without additional description.\n"
    "The modified description:\n";

PromptTemplate builtin_template(const std::string& name) {
    if (name == "opro_lr" || name == "opro_tsp" || name == "opro_tsp_enhanced")
        return PromptTemplate{name, kDefaultLayout};
    if (name == "bssnd" || name == "bsscd") return PromptTemplate{name, kMabLayout};
    throw ValidationError("unknown template name: " + name);
}

std::pair<std::string, std::string> initial_meta_prompt(const std::string& name) {
    if (name == "opro_lr") return {kLrDescription, kLrInstruction};
    if (name == "opro_tsp") return {kTspDescription, kTspInstruction};
    if (name == "opro_tsp_enhanced") return {kTspEnhancedDescription, kTspInstruction};
    if (name == "bssnd") return {kMabDescription, kBssndInstruction};
    if (name == "bsscd") return {kMabDescription, kBsscdInstruction};
    throw ValidationError("unknown template name: " + name);
}

std::pair<std::string, std::string> load_meta_prompt_asset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read template asset: " + path);
    std::string line, desc, instr;
    int section = 0;
    while (std::getline(in, line)) {
        if (line == "[DESCRIPTION]") {
            section = 1;
            continue;
        }
        if (line == "[INSTRUCTION]") {
            section = 2;
            continue;
        }
        auto& target = section == 1 ? desc : instr;
        if (section == 0) continue;
        if (!target.empty()) target += "\n";
        target += line;
    }
    if (desc.empty() || instr.empty())
        throw ValidationError("template asset missing sections: " + path);
    return {desc, instr};
}

// --------------------------------------------------------------------------
// Domain generation

namespace {

std::vector<std::string> rephrase_n(AgentProvider& provider, const std::string& initial,
                                    const DomainGenConfig& cfg) {
    std::vector<std::string> out{initial};
    std::set<std::string> seen{initial};
    std::string prompt = kRephraseTemplate;
    auto pos = prompt.find("{INITIAL_META_PROMPT}");
    prompt.replace(pos, 21, initial);
    for (int i = 0; i < cfg.n_rephrase; ++i) {
        bool added = false;
        for (int attempt = 0; attempt <= cfg.retry_cap; ++attempt) {
            std::string reply = provider.complete(prompt, cfg.temperature);
            if (reply.empty()) continue;
            if (seen.insert(reply).second) {
                out.push_back(std::move(reply));
                added = true;
                break;
            }
        }
        if (!added)
            throw ValidationError("domain generation stalled on duplicates after " +
                                  std::to_string(out.size()) + " completed items");
    }
    return out;
}

}  // namespace

PromptDomain generate_domain(AgentProvider& provider, const std::string& initial_desc,
                             const std::string& initial_instr, const DomainGenConfig& cfg) {
    if (cfg.n_rephrase < 0) throw ValidationError("n_rephrase must be >= 0");
    auto desc_texts = rephrase_n(provider, initial_desc, cfg);
    auto instr_texts = rephrase_n(provider, initial_instr, cfg);
    std::vector<TaskDescription> descs;
    std::vector<MetaInstruction> instrs;
    for (size_t i = 0; i < desc_texts.size(); ++i)
        descs.push_back({static_cast<int>(i), std::move(desc_texts[i])});
    for (size_t i = 0; i < instr_texts.size(); ++i)
        instrs.push_back({static_cast<int>(i), std::move(instr_texts[i])});
    return build_domain(std::move(descs), std::move(instrs));
}

}  // namespace expo
