#include "expo/types.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace expo {

namespace {

void check_ids(const auto& items, const char* what) {
    if (items.empty()) throw ValidationError(std::string(what) + " list is empty");
    std::set<int> seen;
    for (const auto& it : items) {
        if (it.text.empty()) throw ValidationError(std::string(what) + " text is empty");
        if (!seen.insert(it.id).second)
            throw ValidationError(std::string("duplicate ") + what + " id " + std::to_string(it.id));
    }
    // ids consecutive from 0
    int expect = 0;
    for (int id : seen) {
        if (id != expect++)
            throw ValidationError(std::string(what) + " ids not consecutive from 0");
    }
}

}  // namespace

PromptDomain::PromptDomain(std::vector<TaskDescription> descs, std::vector<MetaInstruction> instrs)
    : descs_(std::move(descs)), instrs_(std::move(instrs)) {
    check_ids(descs_, "description");
    check_ids(instrs_, "instruction");
}

Arm PromptDomain::arm(int index) const {
    if (index < 0 || index >= k()) throw ValidationError("arm index out of range");
    return Arm{index, index / k2(), index % k2()};
}

Arm PromptDomain::arm(int desc_id, int instr_id) const {
    if (desc_id < 0 || desc_id >= k1() || instr_id < 0 || instr_id >= k2())
        throw ValidationError("arm (desc_id, instr_id) out of range");
    return Arm{desc_id * k2() + instr_id, desc_id, instr_id};
}

PromptDomain build_domain(std::vector<TaskDescription> descs, std::vector<MetaInstruction> instrs) {
    return PromptDomain(std::move(descs), std::move(instrs));
}

void PromptDomain::save(const std::string& path) const {
    nlohmann::json j;
    j["version"] = 1;
    for (const auto& d : descs_) j["descriptions"].push_back({{"id", d.id}, {"text", d.text}});
    for (const auto& i : instrs_) j["instructions"].push_back({{"id", i.id}, {"text", i.text}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write domain file: " + path);
    out << j.dump(2) << "\n";
}

PromptDomain PromptDomain::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read domain file: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("version", 0) != 1) throw ValidationError("unsupported domain file version");
    std::vector<TaskDescription> descs;
    std::vector<MetaInstruction> instrs;
    for (const auto& d : j.at("descriptions")) descs.push_back({d.at("id"), d.at("text")});
    for (const auto& i : j.at("instructions")) instrs.push_back({i.at("id"), i.at("text")});
    return PromptDomain(std::move(descs), std::move(instrs));
}

namespace {

void replace_placeholder(std::string& body, const std::string& key, const std::string& value,
                         const std::string& tmpl_name) {
    auto pos = body.find(key);
    if (pos == std::string::npos)
        throw TemplateError("template '" + tmpl_name + "' is missing placeholder " + key);
    while (pos != std::string::npos) {
        body.replace(pos, key.size(), value);
        pos = body.find(key, pos + value.size());
    }
}

}  // namespace

MetaPrompt render_meta_prompt(const TaskDescription& desc, const MetaInstruction& instr,
                              const ExemplarSequence& ex, const PromptTemplate& tmpl) {
    std::string body = tmpl.body;
    replace_placeholder(body, "{DESCRIPTION}", desc.text, tmpl.name);
    replace_placeholder(body, "{EXEMPLARS}", ex.rendered_text, tmpl.name);
    replace_placeholder(body, "{INSTRUCTION}", instr.text, tmpl.name);
    return MetaPrompt{desc, instr, ex, std::move(body)};
}

const char* const kTraceCsvHeader = "iteration,arm,exemplar_seq,raw_eval,prompt_score,metric,best_so_far";

namespace {

std::string csv_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << kTraceCsvHeader << "\n";
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.arm << ',' << r.exemplar_seq << ',' << csv_real(r.raw_eval)
            << ',' << csv_real(r.prompt_score) << ',' << csv_real(r.metric) << ','
            << csv_real(r.best_so_far) << "\n";
    }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kTraceCsvHeader)
        throw ValidationError("bad trace header in " + path);
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        TraceRow r;
        char c;
        ss >> r.iteration >> c >> r.arm >> c >> r.exemplar_seq >> c >> r.raw_eval >> c >>
            r.prompt_score >> c >> r.metric >> c >> r.best_so_far;
        if (!ss) throw ValidationError("bad trace row in " + path + ": " + line);
        rows.push_back(r);
    }
    return rows;
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    std::string s(buf);
    auto dot = s.find('.');
    if (dot != std::string::npos) {
        auto last = s.find_last_not_of('0');
        if (last == dot) last--;
        s.erase(last + 1);
    }
    if (s == "-0") s = "0";
    return s;
}

}  // namespace expo
