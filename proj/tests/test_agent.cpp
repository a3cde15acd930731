#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "expo/agent.hpp"
#include "expo/embedding.hpp"
#include "expo/environment.hpp"

using namespace expo;

// ---------------------------------------------------------------------------
// parse_wb fixtures

struct WbFixture {
    const char* text;
    bool ok;
    double w, b;
};

static const WbFixture kWbFixtures[] = {
    {"[2, 30]", true, 2, 30},
    {"[2,30]", true, 2, 30},
    {"[ 2 , 30 ]", true, 2, 30},
    {"[2.5, -30.25]", true, 2.5, -30.25},
    {"[-2.5,-0.125]", true, -2.5, -0.125},
    {"[+3, +4]", true, 3, 4},
    {"[1e2, 3e-1]", true, 100, 0.3},
    {"[1.5E2, -2E1]", true, 150, -20},
    {"[.5, .25]", true, 0.5, 0.25},
    {"The next pair is [12.34567890, 9.87654321]", true, 12.34567890, 9.87654321},
    {"reasoning... [1, 1] is bad, so I pick [7, 8]", true, 7, 8},  // last match wins
    {"[1,2] [3,4] [5,6]", true, 5, 6},
    {"line one\nline two\n[0, 0]", true, 0, 0},
    {"answer: [  -17.5  ,  42  ] trailing words", true, -17.5, 42},
    {"[2, 30] and some text after", true, 2, 30},
    {"w=[9], pair [3.5, 2.5].", true, 3.5, 2.5},
    {"[0.0001, 10000]", true, 0.0001, 10000},
    {"deep deliberation [-0, 5]", true, 0, 5},
    {"tab\tseparated\t[6, 7]", true, 6, 7},
    {"[2 , 30]extra ] bracket", true, 2, 30},
    {"unicode \xc3\xa9 [8, 9]", true, 8, 9},
    {"[1e-09, 1e+09]", true, 1e-9, 1e9},
    // error cases
    {"", false, 0, 0},
    {"no pair here", false, 0, 0},
    {"[2, 30", false, 0, 0},          // unterminated
    {"2, 30]", false, 0, 0},          // unopened
    {"[2; 30]", false, 0, 0},         // wrong separator
    {"[a, b]", false, 0, 0},          // non-numeric
    {"[2]", false, 0, 0},             // single value
    {"[2, 30, 40]", false, 0, 0},     // triple is not a pair
    {"[, 3]", false, 0, 0},           // missing first value
    {"[nan, 1]", false, 0, 0},        // words rejected
};

TEST_CASE("parse_wb fixture suite") {
    int n = 0;
    for (const auto& f : kWbFixtures) {
        INFO("fixture: ", f.text);
        if (f.ok) {
            auto [w, b] = parse_wb(f.text);
            CHECK(w == doctest::Approx(f.w).epsilon(1e-12));
            CHECK(b == doctest::Approx(f.b).epsilon(1e-12));
        } else {
            CHECK_THROWS_AS(parse_wb(f.text), ParseError);
        }
        ++n;
    }
    CHECK(n >= 30);
}

// ---------------------------------------------------------------------------
// parse_trace fixtures

struct TraceFixture {
    const char* text;
    int n;
    bool ok;
    std::vector<int> expect;
};

static const TraceFixture kTraceFixtures[] = {
    {"<trace>0,1,2,3</trace>", 4, true, {0, 1, 2, 3}},
    {"<trace>0, 1, 2, 3</trace>", 4, true, {0, 1, 2, 3}},
    {"<trace>3 2 1 0</trace>", 4, true, {3, 2, 1, 0}},
    {"<trace> 1 , 0 , 2 </trace>", 3, true, {1, 0, 2}},
    {"<trace>0,2,1</trace>\nlength: 17", 3, true, {0, 2, 1}},
    {"preamble <trace>1,2,0</trace> postamble", 3, true, {1, 2, 0}},
    {"<trace>0,1</trace> then <trace>1,0</trace>", 2, true, {1, 0}},  // last block wins
    {"<trace>\n0,\n1,\n2\n</trace>", 3, true, {0, 1, 2}},
    {"<trace>4,3,2,1,0</trace>", 5, true, {4, 3, 2, 1, 0}},
    {"mixed <trace>0 1,2 3</trace>", 4, true, {0, 1, 2, 3}},
    {"<trace>0,1,2,3,4,5,6,7,8,9</trace>", 10, true, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}},
    {"text\n<trace>2,0,1</trace>\n", 3, true, {2, 0, 1}},
    {"<trace>0\t1\t2</trace>", 3, true, {0, 1, 2}},
    {"the shortest <trace>1,3,0,2</trace>!", 4, true, {1, 3, 0, 2}},
    {"<trace>00, 01, 02</trace>", 3, true, {0, 1, 2}},
    {"double open <trace>9<trace>0,1,2</trace>", 3, true, {0, 1, 2}},
    // error cases
    {"", 3, false, {}},
    {"no tags at all 0,1,2", 3, false, {}},
    {"<trace>0,1,2", 3, false, {}},              // missing close
    {"0,1,2</trace>", 3, false, {}},             // missing open
    {"<trace></trace>", 3, false, {}},           // empty
    {"<trace>0,1</trace>", 3, false, {}},        // too short
    {"<trace>0,1,2,3</trace>", 3, false, {}},    // too long
    {"<trace>0,1,1</trace>", 3, false, {}},      // duplicate
    {"<trace>0,1,3</trace>", 3, false, {}},      // out of range
    {"<trace>0,-1,2</trace>", 3, false, {}},     // negative
    {"<trace>0,a,2</trace>", 3, false, {}},      // non-numeric
    {"<trace>0;1;2</trace>", 3, false, {}},      // bad separator
    {"<trace>0.5,1,2</trace>", 3, false, {}},    // non-integers
    {"<TRACE>0,1,2</TRACE>", 3, false, {}},      // wrong case
};

TEST_CASE("parse_trace fixture suite") {
    int n = 0;
    for (const auto& f : kTraceFixtures) {
        INFO("fixture: ", f.text);
        if (f.ok)
            CHECK(parse_trace(f.text, f.n) == f.expect);
        else
            CHECK_THROWS(parse_trace(f.text, f.n));
        ++n;
    }
    CHECK(n >= 30);
}

// ---------------------------------------------------------------------------
// parse_mab_dist fixtures

struct DistFixture {
    const char* text;
    bool ok;
    std::vector<double> expect;  // post-normalization
};

static const std::vector<std::string> kNames = {"blue", "green", "red"};

static const DistFixture kDistFixtures[] = {
    {"<Answer>blue:0.5,green:0.3,red:0.2</Answer>", true, {0.5, 0.3, 0.2}},
    {"<Answer>blue: 0.5, green: 0.3, red: 0.2</Answer>", true, {0.5, 0.3, 0.2}},
    {"<Answer>blue:1,green:0,red:0</Answer>", true, {1, 0, 0}},
    {"<Answer>blue:2,green:1,red:1</Answer>", true, {0.5, 0.25, 0.25}},  // renormalized
    {"<Answer>blue:0.2,green:0.2,red:0.2</Answer>", true, {1.0 / 3, 1.0 / 3, 1.0 / 3}},
    {"<Answer>blue:-1,green:1,red:1</Answer>", true, {0, 0.5, 0.5}},  // negative clamps
    {"<Answer>blue:0,green:0,red:0</Answer>", true, {1.0 / 3, 1.0 / 3, 1.0 / 3}},  // uniform
    {"thinking...\n<Answer>blue:0.6,green:0.2,red:0.2</Answer>", true, {0.6, 0.2, 0.2}},
    {"<Answer>blue:0.1,green:0.1,red:0.8</Answer> trailing", true, {0.1, 0.1, 0.8}},
    {"<Answer>\nblue:0.5,\ngreen:0.25,\nred:0.25\n</Answer>", true, {0.5, 0.25, 0.25}},
    {"<Answer>blue:0.9,green:0.05,red:0.05<\\Answer>", true, {0.9, 0.05, 0.05}},
    {"<Answer>blue:.5,green:.5,red:0</Answer>", true, {0.5, 0.5, 0}},
    {"<Answer>blue:5e-1,green:25e-2,red:0.25</Answer>", true, {0.5, 0.25, 0.25}},
    {"two: <Answer>blue:1,green:0,red:0</Answer> <Answer>blue:0,green:1,red:0</Answer>",
     true, {0, 1, 0}},  // last block wins
    {"no tags, just blue:0.3,green:0.3,red:0.4", true, {0.3, 0.3, 0.4}},
    {"blue:1,green:1,red:2 then better blue:0,green:0,red:1", true, {0, 0, 1}},
    {"I choose blue : 0.7 , green : 0.2 , red : 0.1", true, {0.7, 0.2, 0.1}},
    {"<Answer>blue:100,green:200,red:700</Answer>", true, {0.1, 0.2, 0.7}},
    {"<Answer>blue:0.333,green:0.333,red:0.334</Answer>", true, {0.333, 0.333, 0.334}},
    {"<Answer>blue:+0.5,green:+0.5,red:0</Answer>", true, {0.5, 0.5, 0}},
    // error cases
    {"", false, {}},
    {"nothing useful", false, {}},
    {"<Answer></Answer>", false, {}},
    {"<Answer>blue:0.5,green:0.5</Answer>", false, {}},          // missing arm
    {"<Answer>green:0.5,blue:0.3,red:0.2</Answer>", false, {}},  // wrong order
    {"<Answer>blue 0.5, green 0.3, red 0.2</Answer>", false, {}},  // missing colons
    {"<Answer>blue:a,green:b,red:c</Answer>", false, {}},
    {"<Answer>blue=0.5,green=0.3,red=0.2</Answer>", false, {}},
    {"blue:0.5;green:0.3;red:0.2", false, {}},
    {"<Answer>yellow:0.5,purple:0.3,white:0.2</Answer>", false, {}},
};

TEST_CASE("parse_mab_dist fixture suite") {
    int n = 0;
    for (const auto& f : kDistFixtures) {
        INFO("fixture: ", f.text);
        if (f.ok) {
            auto p = parse_mab_dist(f.text, 3, kNames);
            REQUIRE(p.size() == 3);
            double sum = 0;
            for (size_t i = 0; i < 3; ++i) {
                CHECK(p[i] == doctest::Approx(f.expect[i]).epsilon(1e-9));
                CHECK(p[i] >= 0.0);
                sum += p[i];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));  // always valid
        } else {
            CHECK_THROWS(parse_mab_dist(f.text, 3, kNames));
        }
        ++n;
    }
    CHECK(n >= 30);
}

// ---------------------------------------------------------------------------
// summary rendering

TEST_CASE("render_mab_summary formats counts and one-decimal means") {
    MabHistory h(3);
    h.pulls = {2, 0, 5};
    h.reward_sums = {1.0, 0.0, 3.0};
    const std::string s = render_mab_summary(h, kNames, {"blue", "green", "red"});
    CHECK(s ==
          "blue button: pressed 2 times with average reward 0.5\n"
          "green button: pressed 0 times\n"
          "red button: pressed 5 times with average reward 0.6");
    // rotated order rearranges lines, not contents
    const std::string rot = render_mab_summary(h, kNames, {"red", "blue", "green"});
    CHECK(rot.rfind("red button:", 0) == 0);
    CHECK_THROWS_AS(render_mab_summary(h, kNames, {"blue", "green"}), ValidationError);
    CHECK_THROWS_AS(render_mab_summary(h, kNames, {"blue", "green", "white"}), ValidationError);
}

// ---------------------------------------------------------------------------
// scripted providers

TEST_CASE("scripted table provider matches patterns and temperatures") {
    ScriptedTableProvider p({{"alpha", {"A0", "A1", "A2"}}, {"", {"fallback"}}}, 5);
    CHECK(p.complete("prompt with alpha inside", 0.0) == "A0");
    CHECK(p.complete("no match", 0.0) == "fallback");
    const std::string r = p.complete("alpha", 1.0);
    CHECK((r == "A0" || r == "A1" || r == "A2"));
    ScriptedTableProvider q({{"specific", {"x"}}}, 0);
    CHECK_THROWS(q.complete("no such pattern", 0.0));
}

TEST_CASE("improving wb provider converges to the target") {
    ImprovingWbProvider p(2.0, 30.0, 15.0, 15.0, 0.25, 3);
    double last_dist = 1e18;
    for (int i = 0; i < 40; ++i) {
        auto [w, b] = parse_wb(p.complete("", 0.0));
        const double d = std::hypot(w - 2.0, b - 30.0);
        CHECK(d <= last_dist + 1e-9);
        last_dist = d;
    }
    CHECK(last_dist < 0.1);
    // temperature 1 output still parses
    CHECK_NOTHROW(parse_wb(p.complete("", 1.0)));
}

TEST_CASE("improving tour provider reaches the target tour") {
    std::vector<int> target = {0, 3, 1, 4, 2};
    ImprovingTourProvider p(target, 9);
    std::vector<int> tour;
    for (int i = 0; i < 20; ++i) tour = parse_trace(p.complete("", 0.0), 5);
    CHECK(tour == target);
    CHECK_NOTHROW(parse_trace(p.complete("", 1.0), 5));
}

TEST_CASE("greedy mab provider reads the summary and answers a distribution") {
    GreedyMabProvider p({"blue", "green", "red"}, 0.1, 4);
    const std::string prompt =
        "history:\n"
        "blue button: pressed 3 times with average reward 0.2\n"
        "green button: pressed 3 times with average reward 0.9\n"
        "red button: pressed 3 times with average reward 0.4\n"
        "choose.";
    auto dist = parse_mab_dist(p.complete(prompt, 0.0), 3, {"blue", "green", "red"});
    CHECK(dist[1] > dist[0]);
    CHECK(dist[1] > dist[2]);
    // unpulled arms are treated optimistically
    const std::string fresh =
        "blue button: pressed 5 times with average reward 0.5\n"
        "green button: pressed 0 times\n"
        "red button: pressed 5 times with average reward 0.5\n";
    auto d2 = parse_mab_dist(p.complete(fresh, 0.0), 3, {"blue", "green", "red"});
    CHECK(d2[1] > d2[0]);
}

TEST_CASE("transcript provider appends jsonl records") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "transcript_test.jsonl").string();
    std::remove(path.c_str());
    auto inner = std::make_shared<ScriptedTableProvider>(
        std::vector<ScriptedTableProvider::Entry>{{"", {"reply"}}}, 0);
    TranscriptProvider p(inner, path);
    CHECK(p.complete("hello", 0.0) == "reply");
    CHECK(p.complete("again", 1.0) == "reply");
    std::ifstream in(path);
    std::string line;
    int count = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j.at("response") == "reply");
        ++count;
    }
    CHECK(count == 2);
    std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// templates and assets

TEST_CASE("builtin templates contain the three slots") {
    for (const char* name : {"opro_lr", "opro_tsp", "opro_tsp_enhanced", "bssnd", "bsscd"}) {
        PromptTemplate t = builtin_template(name);
        CHECK(t.body.find("{DESCRIPTION}") != std::string::npos);
        CHECK(t.body.find("{EXEMPLARS}") != std::string::npos);
        CHECK(t.body.find("{INSTRUCTION}") != std::string::npos);
    }
    CHECK_THROWS(builtin_template("nope"));
}

TEST_CASE("template asset files match the built-in initial meta prompts") {
    for (const char* name : {"opro_lr", "opro_tsp", "opro_tsp_enhanced", "bssnd", "bsscd"}) {
        auto expect = initial_meta_prompt(name);
        auto got = load_meta_prompt_asset(std::string(ASSET_DIR "/templates/") + name + ".txt");
        CHECK(got.first == expect.first);
        CHECK(got.second == expect.second);
    }
}

TEST_CASE("asset loader rejects files missing a section") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "bad_asset.txt").string();
    std::ofstream(path) << "[DESCRIPTION]\nonly a description\n";
    CHECK_THROWS_AS(load_meta_prompt_asset(path), ValidationError);
    std::remove(path.c_str());
}

// ---------------------------------------------------------------------------
// domain generation

TEST_CASE("generate_domain produces n+1 unique texts per side") {
    // the scripted provider cycles through distinct rephrasings
    std::vector<std::string> variants;
    for (int i = 0; i < 50; ++i) variants.push_back("variant " + std::to_string(i));
    ScriptedTableProvider provider({{"", variants}}, 11);
    DomainGenConfig cfg;
    cfg.n_rephrase = 8;
    PromptDomain d = generate_domain(provider, "initial description", "initial instruction", cfg);
    CHECK(d.k1() == 9);
    CHECK(d.k2() == 9);
    CHECK(d.desc(0).text == "initial description");
    CHECK(d.instr(0).text == "initial instruction");
    // uniqueness within each side
    for (int i = 0; i < d.k1(); ++i)
        for (int j = i + 1; j < d.k1(); ++j) CHECK(d.desc(i).text != d.desc(j).text);
}

TEST_CASE("generate_domain throws after exhausting duplicate retries") {
    ScriptedTableProvider provider({{"", {"same thing"}}}, 0);
    DomainGenConfig cfg;
    cfg.n_rephrase = 5;
    cfg.retry_cap = 3;
    CHECK_THROWS(generate_domain(provider, "d", "i", cfg));
}

// ---------------------------------------------------------------------------
// remote providers against an in-process server

TEST_CASE("remote chat and embedding providers round-trip over http") {
    httplib::Server server;
    std::string seen_auth, seen_prompt;
    double seen_temp = -1;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        auto it = req.headers.find("Authorization");
        if (it != req.headers.end()) seen_auth = it->second;
        auto j = nlohmann::json::parse(req.body);
        seen_prompt = j.at("messages").at(0).at("content");
        seen_temp = j.at("temperature");
        nlohmann::json out{{"choices", {{{"message", {{"content", "echo: " + seen_prompt}}}}}}};
        res.set_content(out.dump(), "application/json");
    });
    int embed_calls = 0;
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        ++embed_calls;
        if (embed_calls == 1) {  // first attempt fails; the client retries
            res.status = 500;
            return;
        }
        std::vector<double> v(8, 0.25);
        nlohmann::json out{{"data", {{{"embedding", v}}}}};
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("TEST_API_KEY", "sekrit", 1);
    RemoteChatConfig chat;
    chat.base_url = "http://127.0.0.1:" + std::to_string(port);
    chat.model = "test-model";
    chat.api_key_env = "TEST_API_KEY";
    RemoteChatProvider provider(chat);
    CHECK(provider.complete("hello world", 0.5) == "echo: hello world");
    CHECK(seen_auth == "Bearer sekrit");
    CHECK(seen_temp == doctest::Approx(0.5));

    RemoteEmbedderConfig ec;
    ec.base_url = chat.base_url;
    ec.model = "embed-model";
    ec.dim = 8;
    RemoteEmbedder embedder(ec);
    auto v = embedder.embed("some text");
    CHECK(v.dim() == 8);
    CHECK(v.values[0] == doctest::Approx(0.25));
    CHECK(embed_calls == 2);  // retried once after the 500

    // dim mismatch is a transport error
    RemoteEmbedderConfig bad = ec;
    bad.dim = 16;
    RemoteEmbedder wrong(bad);
    CHECK_THROWS_AS(wrong.embed("text"), TransportError);

    server.stop();
    t.join();
}
