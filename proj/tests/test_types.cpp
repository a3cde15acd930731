#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "expo/types.hpp"

using namespace expo;

namespace {

PromptDomain small_domain() {
    return PromptDomain({{0, "desc a"}, {1, "desc b"}, {2, "desc c"}},
                        {{0, "instr a"}, {1, "instr b"}});
}

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("domain indexing is row-major over (desc, instr)") {
    PromptDomain d = small_domain();
    CHECK(d.k1() == 3);
    CHECK(d.k2() == 2);
    CHECK(d.k() == 6);
    // arm index i maps to (i / k2, i % k2)
    for (int i = 0; i < d.k(); ++i) {
        Arm a = d.arm(i);
        CHECK(a.index == i);
        CHECK(a.desc_id == i / 2);
        CHECK(a.instr_id == i % 2);
        Arm b = d.arm(a.desc_id, a.instr_id);
        CHECK(b.index == i);
    }
    CHECK_THROWS_AS(d.arm(6), ValidationError);
    CHECK_THROWS_AS(d.arm(-1), ValidationError);
}

TEST_CASE("domain validation rejects bad ids and empty text") {
    CHECK_THROWS_AS(PromptDomain({{1, "a"}}, {{0, "b"}}), ValidationError);
    CHECK_THROWS_AS(PromptDomain({{0, "a"}, {2, "b"}}, {{0, "c"}}), ValidationError);
    CHECK_THROWS_AS(PromptDomain({{0, ""}}, {{0, "b"}}), ValidationError);
    CHECK_THROWS_AS(PromptDomain({}, {{0, "b"}}), ValidationError);
}

TEST_CASE("domain save/load roundtrip") {
    PromptDomain d = small_domain();
    const std::string path = tmp_path("domain_rt.json");
    d.save(path);
    PromptDomain e = PromptDomain::load(path);
    CHECK(e.k1() == d.k1());
    CHECK(e.k2() == d.k2());
    for (int i = 0; i < d.k1(); ++i) CHECK(e.desc(i).text == d.desc(i).text);
    for (int i = 0; i < d.k2(); ++i) CHECK(e.instr(i).text == d.instr(i).text);
    std::remove(path.c_str());
}

TEST_CASE("render_meta_prompt substitutes all three slots") {
    PromptTemplate tmpl{"t", "A {DESCRIPTION} B {EXEMPLARS} C {INSTRUCTION} D"};
    ExemplarSequence seq;
    seq.rendered_text = "EX";
    MetaPrompt mp = render_meta_prompt({0, "ddd"}, {0, "iii"}, seq, tmpl);
    CHECK(mp.text == "A ddd B EX C iii D");
}

TEST_CASE("render_meta_prompt rejects templates missing a placeholder") {
    ExemplarSequence seq;
    CHECK_THROWS_AS(
        render_meta_prompt({0, "d"}, {0, "i"}, seq, PromptTemplate{"t", "{DESCRIPTION} only"}),
        TemplateError);
    CHECK_THROWS_AS(
        render_meta_prompt({0, "d"}, {0, "i"}, seq,
                           PromptTemplate{"t", "{DESCRIPTION} {EXEMPLARS}"}),
        TemplateError);
}

TEST_CASE("rendering is deterministic") {
    PromptTemplate tmpl{"t", "{DESCRIPTION}|{EXEMPLARS}|{INSTRUCTION}"};
    ExemplarSequence seq;
    seq.rendered_text = "x";
    auto a = render_meta_prompt({1, "d"}, {2, "i"}, seq, tmpl);
    auto b = render_meta_prompt({1, "d"}, {2, "i"}, seq, tmpl);
    CHECK(a.text == b.text);
}

TEST_CASE("trace csv roundtrip preserves values") {
    std::vector<TraceRow> rows = {
        {0, 3, -1, 214.4132522609, 0.97855867, 214.4132522609, 214.4132522609},
        {1, 1, 12, 156.25, 0.984375, 156.25, 156.25},
    };
    const std::string path = tmp_path("trace_rt.csv");
    write_trace_csv(path, rows);
    auto back = read_trace_csv(path);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].iteration == rows[i].iteration);
        CHECK(back[i].arm == rows[i].arm);
        CHECK(back[i].exemplar_seq == rows[i].exemplar_seq);
        CHECK(back[i].raw_eval == doctest::Approx(rows[i].raw_eval).epsilon(1e-12));
        CHECK(back[i].prompt_score == doctest::Approx(rows[i].prompt_score).epsilon(1e-12));
        CHECK(back[i].best_so_far == doctest::Approx(rows[i].best_so_far).epsilon(1e-12));
    }
    std::remove(path.c_str());
}

TEST_CASE("format_real trims trailing zeros") {
    CHECK(format_real(1.0) == "1");
    CHECK(format_real(1.5) == "1.5");
    CHECK(format_real(1.25) == "1.25");
    CHECK(format_real(-0.1) == "-0.1");
    CHECK(format_real(2.00006) == "2.0001");  // 4 decimals, rounded
}
