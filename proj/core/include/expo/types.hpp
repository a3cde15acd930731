#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace expo {

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TemplateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TaskDescription {
    int id = 0;
    std::string text;
};

struct MetaInstruction {
    int id = 0;
    std::string text;
};

// One (description, instruction) pair. index = desc_id * k2 + instr_id.
struct Arm {
    int index = 0;
    int desc_id = 0;
    int instr_id = 0;
};

// Finite domain of k = k1 * k2 arms, row-major pairing.
class PromptDomain {
public:
    PromptDomain() = default;
    PromptDomain(std::vector<TaskDescription> descs, std::vector<MetaInstruction> instrs);

    int k1() const { return static_cast<int>(descs_.size()); }
    int k2() const { return static_cast<int>(instrs_.size()); }
    int k() const { return k1() * k2(); }

    Arm arm(int index) const;
    Arm arm(int desc_id, int instr_id) const;
    const TaskDescription& desc(int id) const { return descs_.at(static_cast<size_t>(id)); }
    const MetaInstruction& instr(int id) const { return instrs_.at(static_cast<size_t>(id)); }
    const std::vector<TaskDescription>& descs() const { return descs_; }
    const std::vector<MetaInstruction>& instrs() const { return instrs_; }

    void save(const std::string& path) const;
    static PromptDomain load(const std::string& path);

private:
    std::vector<TaskDescription> descs_;
    std::vector<MetaInstruction> instrs_;
};

PromptDomain build_domain(std::vector<TaskDescription> descs, std::vector<MetaInstruction> instrs);

// Environment-specific action payloads.
struct WbPair {
    double w = 0;
    double b = 0;
};
struct TspTour {
    std::vector<int> order;
};
struct MabDist {
    std::vector<double> p;
};
using ActionPayload = std::variant<WbPair, TspTour, MabDist>;

struct ActionRecord {
    std::string raw_text;
    std::optional<ActionPayload> parsed;
};

struct Exemplar {
    ActionRecord action;
    double score = 0;  // task-native evaluation value
};

struct ExemplarSequence {
    std::vector<Exemplar> items;
    std::string rendered_text;
};

struct PromptTemplate {
    std::string name;
    std::string body;  // must contain {DESCRIPTION}, {EXEMPLARS}, {INSTRUCTION}
};

struct MetaPrompt {
    TaskDescription desc;
    MetaInstruction instr;
    ExemplarSequence exemplars;
    std::string text;
};

// Deterministic: identical inputs yield byte-identical prompt text.
MetaPrompt render_meta_prompt(const TaskDescription& desc, const MetaInstruction& instr,
                              const ExemplarSequence& ex, const PromptTemplate& tmpl);

struct TraceRow {
    int iteration = 0;
    int arm = 0;
    int exemplar_seq = -1;  // -1: heuristic / none
    double raw_eval = 0;
    double prompt_score = 0;
    double metric = 0;
    double best_so_far = 0;
};

extern const char* const kTraceCsvHeader;  // iteration,arm,exemplar_seq,...

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::string& path);

// Real formatted with up to 4 decimal places, trailing zeros trimmed.
std::string format_real(double v);

}  // namespace expo
