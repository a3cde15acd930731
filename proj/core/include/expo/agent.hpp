#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "expo/types.hpp"

namespace expo {

struct MabHistory;  // environment.hpp

// The LLM behind the agent. Scripted implementations are pure functions of
// (prompt, temperature, call index, seed).
class AgentProvider {
public:
    virtual ~AgentProvider() = default;
    virtual std::string complete(const std::string& prompt, double temperature) = 0;
};

// Pattern-driven scripted provider: the first entry whose pattern is a
// substring of the prompt wins. Temperature 0 returns the first reply;
// temperature 1 picks a seeded-random reply from the entry's list.
class ScriptedTableProvider : public AgentProvider {
public:
    struct Entry {
        std::string pattern;  // empty matches everything
        std::vector<std::string> replies;
    };

    ScriptedTableProvider(std::vector<Entry> entries, uint64_t seed = 0)
        : entries_(std::move(entries)), seed_(seed) {}
    std::string complete(const std::string& prompt, double temperature) override;

private:
    std::vector<Entry> entries_;
    uint64_t seed_;
    uint64_t calls_ = 0;
};

// Emits replies that approach a target at a fixed per-call rate; used for
// offline end-to-end runs. The reply format is chosen by the task.
class ImprovingWbProvider : public AgentProvider {
public:
    ImprovingWbProvider(double w_target, double b_target, double w0, double b0,
                        double rate = 0.15, uint64_t seed = 0);
    std::string complete(const std::string& prompt, double temperature) override;

private:
    double wt_, bt_, w_, b_, rate_;
    std::mt19937_64 rng_;
};

// Walks from a seeded random tour toward a target tour one position per
// improvement call; temperature 1 adds a seeded random swap.
class ImprovingTourProvider : public AgentProvider {
public:
    ImprovingTourProvider(std::vector<int> target_tour, uint64_t seed = 0);
    std::string complete(const std::string& prompt, double temperature) override;

private:
    std::vector<int> target_, current_;
    std::mt19937_64 rng_;
    uint64_t calls_ = 0;
};

// Reads the summarized history out of the prompt and answers with a
// distribution that concentrates on the empirically best button.
class GreedyMabProvider : public AgentProvider {
public:
    GreedyMabProvider(std::vector<std::string> arm_names, double explore = 0.2,
                      uint64_t seed = 0);
    std::string complete(const std::string& prompt, double temperature) override;

private:
    std::vector<std::string> names_;
    double explore_;
    std::mt19937_64 rng_;
};

struct RemoteChatConfig {
    std::string base_url;
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env;
    int max_attempts = 3;
    int timeout_seconds = 60;
};

// Chat-completions HTTP contract: model, temperature, message list.
class RemoteChatProvider : public AgentProvider {
public:
    explicit RemoteChatProvider(RemoteChatConfig cfg) : cfg_(std::move(cfg)) {}
    std::string complete(const std::string& prompt, double temperature) override;

private:
    RemoteChatConfig cfg_;
};

// Wraps a provider and appends every request/response to a JSONL transcript.
class TranscriptProvider : public AgentProvider {
public:
    TranscriptProvider(std::shared_ptr<AgentProvider> inner, std::string path)
        : inner_(std::move(inner)), path_(std::move(path)) {}
    std::string complete(const std::string& prompt, double temperature) override;

private:
    std::shared_ptr<AgentProvider> inner_;
    std::string path_;
};

// --------------------------------------------------------------------------
// Response parsers

// Last bracketed numeric pair in the text, e.g. "... [2.5, 30]".
std::pair<double, double> parse_wb(const std::string& text);

// Node ids between <trace> and </trace>; must be a permutation of 0..n-1.
std::vector<int> parse_trace(const std::string& text, int n);

// Distribution "name:val,..." inside <Answer>...</Answer> when present,
// else the last matching pattern. Negatives clamp to 0; the result is
// renormalized; all-zero falls back to uniform.
std::vector<double> parse_mab_dist(const std::string& text, int K,
                                   const std::vector<std::string>& arm_names);

// One line per arm in the given order: "<name> button: pressed <n> times
// with average reward <r>" (one decimal place), or "pressed 0 times".
std::string render_mab_summary(const MabHistory& history,
                               const std::vector<std::string>& names,
                               const std::vector<std::string>& arm_order);

// --------------------------------------------------------------------------
// Templates

// Built-in prompt layouts: opro_lr, opro_tsp, opro_tsp_enhanced, bssnd, bsscd.
PromptTemplate builtin_template(const std::string& name);
// Initial (description, instruction) pair for a template name.
std::pair<std::string, std::string> initial_meta_prompt(const std::string& name);
// Loads a "[DESCRIPTION] ... [INSTRUCTION] ..." asset file.
std::pair<std::string, std::string> load_meta_prompt_asset(const std::string& path);

extern const char* const kRephraseTemplate;  // {INITIAL_META_PROMPT} slot

// --------------------------------------------------------------------------
// Domain generation via rephrasing

struct DomainGenConfig {
    int n_rephrase = 100;
    double temperature = 1.3;
    int retry_cap = 10;  // redraws allowed per duplicate text
};

PromptDomain generate_domain(AgentProvider& provider, const std::string& initial_desc,
                             const std::string& initial_instr, const DomainGenConfig& cfg);

}  // namespace expo
