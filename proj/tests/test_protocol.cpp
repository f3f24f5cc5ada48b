#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "companion/protocol.hpp"
#include "companion/rng.hpp"

using namespace companion;

TEST_CASE("parse: prompt-template tool-call turn") {
    const std::string text =
        "<think>x</think>\n"
        "<tool_call>\n"
        "{\"name\":\"mem_search\",\"arguments\":{\"queries\":[\"q\"]}}\n"
        "</tool_call>";
    const AgentTurnParse p = parse_agent_output(text);
    CHECK(p.f_th);
    CHECK(p.f_tc);
    CHECK(!p.f_ans);
    REQUIRE(p.tool_calls.size() == 1);
    CHECK(p.tool_calls[0].name == "mem_search");
    CHECK(p.tool_calls[0].arguments["queries"][0] == "q");
    CHECK(p.think == "x");
    CHECK(p.is_tool_turn());
}

TEST_CASE("parse: multi-line blocks and blank lines") {
    const std::string text =
        "<think>plan\nmore plan\n\n</think>\n"
        "<tool_call>\n"
        "{\"name\": \"product_search\", \"arguments\": {\"query\": \"usb charger\", \"price\": \"<=20\"}}\n"
        "\n"
        "{\"name\": \"product_view\", \"arguments\": {\"product_ids\": [\"P1\", \"P2\"]}}\n"
        "\n"
        "</tool_call>";
    const AgentTurnParse p = parse_agent_output(text);
    CHECK(p.f_th);
    CHECK(p.f_tc);
    REQUIRE(p.tool_calls.size() == 2);
    CHECK(p.tool_calls[0].name == "product_search");
    CHECK(p.tool_calls[1].name == "product_view");
}

TEST_CASE("parse: missing </tool_call> drops the flag and the calls") {
    const std::string text =
        "<think>x</think>\n<tool_call>\n{\"name\":\"mem_search\",\"arguments\":{}}\n";
    const AgentTurnParse p = parse_agent_output(text);
    CHECK(p.f_th);
    CHECK(!p.f_tc);
    CHECK(p.tool_calls.empty());
}

TEST_CASE("parse: empty string yields all-false flags") {
    const AgentTurnParse p = parse_agent_output("");
    CHECK(!p.f_th);
    CHECK(!p.f_tc);
    CHECK(!p.f_ans);
    CHECK(!p.f_rec);
    CHECK(p.tool_calls.empty());
    CHECK(!p.think);
    CHECK(!p.answer);
}

TEST_CASE("parse: malformed JSON lines invalidate the whole block") {
    const std::string text = "<tool_call>\n{\"name\":\"a\",\"arguments\":{}}\nnot json\n</tool_call>";
    const AgentTurnParse p = parse_agent_output(text);
    CHECK(!p.f_tc);
    CHECK(p.tool_calls.empty());

    // name/arguments shape is mandatory
    CHECK(!parse_agent_output("<tool_call>\n{\"name\":\"a\"}\n</tool_call>").f_tc);
    CHECK(!parse_agent_output("<tool_call>\n{\"name\":1,\"arguments\":{}}\n</tool_call>").f_tc);
    CHECK(!parse_agent_output("<tool_call>\n{\"name\":\"a\",\"arguments\":[]}\n</tool_call>").f_tc);
    CHECK(!parse_agent_output("<tool_call>\n[1,2]\n</tool_call>").f_tc);
    // an empty block is not a tool-call turn
    CHECK(!parse_agent_output("<tool_call>\n\n</tool_call>").f_tc);
}

TEST_CASE("parse: unknown tool names still parse") {
    const AgentTurnParse p = parse_agent_output(
        "<tool_call>\n{\"name\":\"warp_drive\",\"arguments\":{}}\n</tool_call>");
    CHECK(p.f_tc);
    REQUIRE(p.tool_calls.size() == 1);
    CHECK(p.tool_calls[0].name == "warp_drive");
}

TEST_CASE("parse: nested or repeated think blocks clear f_th") {
    CHECK(!parse_agent_output("<think>a<think>b</think></think>").f_th);
    CHECK(!parse_agent_output("<think>a</think><think>b</think>").f_th);
    CHECK(!parse_agent_output("</think>a<think>").f_th);
    CHECK(parse_agent_output("<think>a</think>").f_th);
}

TEST_CASE("parse: answer span extraction") {
    const AgentTurnParse p = parse_agent_output("<answer>final text</answer>");
    CHECK(p.f_ans);
    CHECK(p.answer == "final text");
    CHECK(p.is_answer_turn());
    CHECK(!parse_agent_output("<answer>never closed").f_ans);
}

TEST_CASE("parse: a turn with both tool calls and answer is a tool-call turn") {
    const AgentTurnParse p = parse_agent_output(
        "<tool_call>\n{\"name\":\"a\",\"arguments\":{}}\n</tool_call>\n<answer>done</answer>");
    CHECK(p.f_tc);
    CHECK(p.f_ans); // flags unaffected
    CHECK(p.is_tool_turn());
    CHECK(!p.is_answer_turn());
}

TEST_CASE("extract_recommendation") {
    SUBCASE("single id") {
        const auto rec = extract_recommendation("see @REC::P1@ above");
        REQUIRE(rec.has_value());
        CHECK(*rec == std::vector<std::string>{"P1"});
    }
    SUBCASE("bundle form with whitespace") {
        const auto rec = extract_recommendation("@REC::P1, P2 ,P3@");
        REQUIRE(rec.has_value());
        CHECK(*rec == std::vector<std::string>{"P1", "P2", "P3"});
    }
    SUBCASE("two spans are rejected") {
        CHECK(!extract_recommendation("@REC::P1@ and @REC::P2@").has_value());
    }
    SUBCASE("unclosed span") { CHECK(!extract_recommendation("@REC::P1").has_value()); }
    SUBCASE("empty id") {
        CHECK(!extract_recommendation("@REC::@").has_value());
        CHECK(!extract_recommendation("@REC::P1,@").has_value());
        CHECK(!extract_recommendation("@REC::,P2@").has_value());
    }
    SUBCASE("order-preserving and idempotent") {
        const std::string answer = "@REC::Z9,A1,M5@";
        const auto first = extract_recommendation(answer);
        const auto second = extract_recommendation(answer);
        REQUIRE(first.has_value());
        CHECK(*first == std::vector<std::string>{"Z9", "A1", "M5"});
        CHECK(*first == *second);
    }
}

TEST_CASE("f_rec requires exactly one well-formed span in the answer") {
    CHECK(parse_agent_output("<answer>@REC::P1@</answer>").f_rec);
    CHECK(!parse_agent_output("<answer>@REC::P1@ @REC::P2@</answer>").f_rec);
    CHECK(!parse_agent_output("<answer>no rec</answer>").f_rec);
    CHECK(!parse_agent_output("@REC::P1@").f_rec); // outside an answer span
}

TEST_CASE("format_reward: substitution cases") {
    CHECK(format_reward({true, true, true, true}, 2) == Fraction(1, 1));
    CHECK(format_reward({true, true, false, false}, 1) == Fraction(2, 3));
    CHECK(format_reward({true, true, true, false}, 2) == Fraction(3, 4));
    CHECK(format_reward({false, false, false, false}, 1) == Fraction(0, 1));
    // stage 1 ignores the recommendation flag
    CHECK(format_reward({true, true, true, true}, 1) == Fraction(1, 1));
    CHECK_THROWS_AS(format_reward({true, true, true, true}, 3), ArgumentError);
    CHECK_THROWS_AS(format_reward({true, true, true, true}, 0), ArgumentError);
}

TEST_CASE("format_reward: all 16 flag vectors, both stages, exact and monotone") {
    for (int mask = 0; mask < 16; ++mask) {
        FormatFlags f;
        f.ans = mask & 1;
        f.th = mask & 2;
        f.tc = mask & 4;
        f.rec = mask & 8;
        const int set3 = (f.ans ? 1 : 0) + (f.th ? 1 : 0) + (f.tc ? 1 : 0);
        CHECK(format_reward(f, 1) == Fraction(set3, 3));
        CHECK(format_reward(f, 2) == Fraction(set3 + (f.rec ? 1 : 0), 4));
    }
    // monotone non-decreasing in each flag
    for (int stage = 1; stage <= 2; ++stage) {
        for (int mask = 0; mask < 16; ++mask) {
            FormatFlags base;
            base.ans = mask & 1;
            base.th = mask & 2;
            base.tc = mask & 4;
            base.rec = mask & 8;
            for (int bit = 0; bit < 4; ++bit) {
                FormatFlags raised = base;
                if (bit == 0) raised.ans = true;
                if (bit == 1) raised.th = true;
                if (bit == 2) raised.tc = true;
                if (bit == 3) raised.rec = true;
                CHECK(format_reward(base, stage) <= format_reward(raised, stage));
            }
        }
    }
}

TEST_CASE("trajectory flags: aggregation over turns") {
    const AgentTurnParse good_tool = parse_agent_output(
        "<think>a</think>\n<tool_call>\n{\"name\":\"x\",\"arguments\":{}}\n</tool_call>");
    const AgentTurnParse bad_tool =
        parse_agent_output("<think>a</think>\n<tool_call>\n{oops\n</tool_call>");
    const AgentTurnParse answer = parse_agent_output("<answer>done @REC::P1@</answer>");
    const AgentTurnParse rec_less_answer = parse_agent_output("<answer>done</answer>");
    const AgentTurnParse garbage = parse_agent_output("free text");

    SUBCASE("compliant trajectory sets every flag") {
        const auto flags = trajectory_format_flags({good_tool, answer});
        CHECK(flags.ans);
        CHECK(flags.th);
        CHECK(flags.tc);
        CHECK(flags.rec);
    }
    SUBCASE("one malformed tool block poisons f_tc") {
        const auto flags = trajectory_format_flags({good_tool, bad_tool, answer});
        CHECK(!flags.tc);
        CHECK(flags.th);
    }
    SUBCASE("no tool call at all means f_tc = 0") {
        const auto flags = trajectory_format_flags({rec_less_answer});
        CHECK(!flags.tc);
        CHECK(flags.ans);
        CHECK(!flags.rec);
    }
    SUBCASE("garbage-only trajectory earns nothing") {
        const auto flags = trajectory_format_flags({garbage, garbage});
        CHECK(!flags.ans);
        CHECK(!flags.th);
        CHECK(!flags.tc);
        CHECK(!flags.rec);
    }
    SUBCASE("answer must be terminal to count") {
        const auto flags = trajectory_format_flags({answer, garbage});
        CHECK(!flags.ans);
    }
    SUBCASE("empty trajectory") {
        const auto flags = trajectory_format_flags({});
        CHECK(!(flags.ans || flags.th || flags.tc || flags.rec));
    }
}

TEST_CASE("round-trip: serialized turns re-parse to equal flags and calls") {
    const std::vector<Json> calls = {
        make_tool_call_json("mem_search", Json{{"queries", Json::array({"navy jacket"})}}),
        make_tool_call_json("product_view", Json{{"product_ids", Json::array({"P1", "P2"})}})};
    const std::string turn = make_tool_call_turn("look things up", calls);
    const AgentTurnParse p = parse_agent_output(turn);
    CHECK(p.f_th);
    CHECK(p.f_tc);
    REQUIRE(p.tool_calls.size() == 2);
    CHECK(p.tool_calls[0].name == "mem_search");
    CHECK(p.tool_calls[1].arguments["product_ids"][1] == "P2");

    const std::string ans = make_answer_turn("all set @REC::P1,P2@");
    const AgentTurnParse a = parse_agent_output(ans);
    CHECK(a.f_ans);
    CHECK(a.f_rec);
    REQUIRE(a.recommendation.has_value());
    CHECK(*a.recommendation == std::vector<std::string>{"P1", "P2"});
}

TEST_CASE("fuzz: parser is total over mutated byte strings") {
    Rng rng(0xF00D);
    const std::string pieces[] = {"<think>", "</think>", "<tool_call>", "</tool_call>",
                                  "<answer>", "</answer>", "@REC::",     "@",
                                  "{\"name\":\"x\",\"arguments\":{}}", "{", "}", "\"", "\n",
                                  "plain words", "\x01\x02\xff", ",", "::", "P1"};
    for (int i = 0; i < 5000; ++i) {
        std::string text;
        const int n = static_cast<int>(rng.range(0, 12));
        for (int j = 0; j < n; ++j) {
            if (rng.below(4) == 0) {
                text.push_back(static_cast<char>(rng.below(256)));
            } else {
                text += pieces[rng.below(std::size(pieces))];
            }
        }
        const AgentTurnParse p = parse_agent_output(text);
        // structural invariant: a recommendation implies an extractable answer
        if (p.f_rec) CHECK(p.f_ans);
        if (p.f_tc) CHECK(!p.tool_calls.empty());
        if (!p.f_tc) CHECK(p.tool_calls.empty());
    }
}
