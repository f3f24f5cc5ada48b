#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "companion/fraction.hpp"
#include "companion/json_util.hpp"
#include "companion/text.hpp"

namespace companion {

struct ToolCall {
    std::string name;
    Json arguments;
    std::string raw_line;
};

/// Parse of one raw policy output under the turn grammar:
///   <think>...</think> followed by one <tool_call> block of JSON lines,
///   or a final <answer>...</answer> (optionally carrying one @REC::ids@ span).
///
/// Flags are computed independently per turn:
///   f_th  - think tags appear exactly once each, opening before closing
///   f_tc  - every <tool_call> block is closed, every non-blank line inside
///           parses as {"name": str, "arguments": obj}, and at least one
///           call was parsed (an empty block is not a tool-call turn)
///   f_ans - an <answer>...</answer> span is extractable
///   f_rec - the answer holds exactly one well-formed @REC::...@ span
///
/// A turn with both tool calls and an answer is treated as a tool-call turn;
/// the answer is ignored by the episode but the flags are unaffected.
struct AgentTurnParse {
    std::optional<std::string> think;
    std::vector<ToolCall> tool_calls;
    std::optional<std::string> answer;
    std::optional<std::vector<std::string>> recommendation;
    bool f_th = false;
    bool f_tc = false;
    bool f_ans = false;
    bool f_rec = false;
    bool has_think_text = false;     ///< raw text mentions a think tag
    bool has_tool_call_text = false; ///< raw text mentions a tool_call tag

    bool is_tool_turn() const { return !tool_calls.empty(); }
    bool is_answer_turn() const { return tool_calls.empty() && answer.has_value(); }
};

namespace detail {

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

/// Extracts inner texts of strictly alternating open/close tag pairs.
/// Returns false on any stray or unmatched tag.
inline bool extract_blocks(std::string_view text, std::string_view open, std::string_view close,
                           std::vector<std::string>& blocks) {
    std::size_t pos = 0;
    while (true) {
        const auto o = text.find(open, pos);
        const auto c = text.find(close, pos);
        if (o == std::string_view::npos && c == std::string_view::npos) return true;
        if (c < o || o == std::string_view::npos) return false; // stray close
        const auto inner_start = o + open.size();
        const auto cc = text.find(close, inner_start);
        if (cc == std::string_view::npos) return false; // unclosed block
        // a nested open before the close is malformed
        const auto oo = text.find(open, inner_start);
        if (oo != std::string_view::npos && oo < cc) return false;
        blocks.emplace_back(text.substr(inner_start, cc - inner_start));
        pos = cc + close.size();
    }
}

inline std::vector<std::string> split_nonblank_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line = trim(text.substr(start, end - start));
        if (!line.empty()) out.push_back(std::move(line));
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

} // namespace detail

/// Splits a @REC::...@ payload into trimmed ids; nullopt when any id is empty.
inline std::optional<std::vector<std::string>> split_rec_ids(std::string_view payload) {
    std::vector<std::string> ids;
    std::size_t start = 0;
    while (start <= payload.size()) {
        auto end = payload.find(',', start);
        if (end == std::string_view::npos) end = payload.size();
        std::string id = trim(payload.substr(start, end - start));
        if (id.empty()) return std::nullopt;
        ids.push_back(std::move(id));
        if (end == payload.size()) break;
        start = end + 1;
    }
    if (ids.empty()) return std::nullopt;
    return ids;
}

/// Recommendation ids from an answer. Present only when the answer contains
/// exactly one well-formed `@REC::id[,id...]@` span with non-empty ids.
inline std::optional<std::vector<std::string>> extract_recommendation(std::string_view answer) {
    constexpr std::string_view marker = "@REC::";
    const auto first = answer.find(marker);
    if (first == std::string_view::npos) return std::nullopt;
    if (answer.find(marker, first + marker.size()) != std::string_view::npos) {
        return std::nullopt; // the special format may be used only once
    }
    const auto payload_start = first + marker.size();
    const auto close = answer.find('@', payload_start);
    if (close == std::string_view::npos) return std::nullopt;
    return split_rec_ids(answer.substr(payload_start, close - payload_start));
}

/// Total over arbitrary byte strings; malformed input yields false flags and
/// empty fields, never an exception.
inline AgentTurnParse parse_agent_output(std::string_view text) {
    AgentTurnParse parse;

    parse.has_think_text =
        text.find("<think>") != std::string_view::npos || text.find("</think>") != std::string_view::npos;
    parse.has_tool_call_text = text.find("<tool_call>") != std::string_view::npos ||
                               text.find("</tool_call>") != std::string_view::npos;

    // think: tags must pair exactly once, opening first
    const auto think_open = text.find("<think>");
    if (detail::count_occurrences(text, "<think>") == 1 &&
        detail::count_occurrences(text, "</think>") == 1) {
        const auto think_close = text.find("</think>");
        if (think_open != std::string_view::npos && think_open < think_close) {
            parse.f_th = true;
            const auto start = think_open + 7;
            parse.think = std::string(text.substr(start, think_close - start));
        }
    }

    // answer: first extractable span
    const auto ans_open = text.find("<answer>");
    if (ans_open != std::string_view::npos) {
        const auto ans_close = text.find("</answer>", ans_open + 8);
        if (ans_close != std::string_view::npos) {
            parse.f_ans = true;
            parse.answer = std::string(text.substr(ans_open + 8, ans_close - (ans_open + 8)));
        }
    }

    // tool calls: all blocks well-formed, all lines parse, at least one call
    std::vector<std::string> blocks;
    if (parse.has_tool_call_text &&
        detail::extract_blocks(text, "<tool_call>", "</tool_call>", blocks)) {
        std::vector<ToolCall> calls;
        bool ok = !blocks.empty();
        for (const auto& block : blocks) {
            for (auto& line : detail::split_nonblank_lines(block)) {
                Json j = Json::parse(line, nullptr, false);
                if (j.is_discarded() || !j.is_object()) {
                    ok = false;
                    break;
                }
                const auto name = j.find("name");
                const auto args = j.find("arguments");
                if (name == j.end() || !name->is_string() || args == j.end() || !args->is_object()) {
                    ok = false;
                    break;
                }
                calls.push_back({name->get<std::string>(), *args, std::move(line)});
            }
            if (!ok) break;
        }
        if (ok && !calls.empty()) {
            parse.f_tc = true;
            parse.tool_calls = std::move(calls);
        }
    }

    if (parse.answer) {
        parse.recommendation = extract_recommendation(*parse.answer);
        parse.f_rec = parse.recommendation.has_value();
    }
    return parse;
}

struct FormatFlags {
    bool ans = false;
    bool th = false;
    bool tc = false;
    bool rec = false;
};

/// R_fmt = (f_ans + f_th + f_tc + [z=2]*f_rec) / (3 + [z=2]), exact.
inline Fraction format_reward(FormatFlags flags, int stage) {
    if (stage != 1 && stage != 2) {
        throw ArgumentError("format_reward: stage must be 1 or 2, got " + std::to_string(stage));
    }
    const int stage2 = stage == 2 ? 1 : 0;
    const int num = (flags.ans ? 1 : 0) + (flags.th ? 1 : 0) + (flags.tc ? 1 : 0) +
                    (stage2 ? (flags.rec ? 1 : 0) : 0);
    return Fraction(num, 3 + stage2);
}

/// Trajectory-level flag aggregation over the ordered assistant turns.
///   ans - the terminal turn carries an extractable answer
///   th  - at least one well-formed think block, and every turn that mentions
///         a think tag is well-formed
///   tc  - at least one parsed tool call, and every turn that mentions a
///         tool_call tag is well-formed
///   rec - the terminal answer carries exactly one well-formed @REC span
inline FormatFlags trajectory_format_flags(const std::vector<AgentTurnParse>& turns) {
    FormatFlags flags;
    if (turns.empty()) return flags;
    bool any_think = false;
    bool all_think_ok = true;
    bool any_call = false;
    bool all_calls_ok = true;
    for (const auto& t : turns) {
        if (t.f_th) any_think = true;
        if (t.has_think_text && !t.f_th) all_think_ok = false;
        if (!t.tool_calls.empty()) any_call = true;
        if (t.has_tool_call_text && !t.f_tc) all_calls_ok = false;
    }
    flags.th = any_think && all_think_ok;
    flags.tc = any_call && all_calls_ok;
    flags.ans = turns.back().f_ans;
    flags.rec = flags.ans && turns.back().f_rec;
    return flags;
}

/// Canonical tool-call turn text per the system-prompt template.
inline std::string make_tool_call_turn(std::string_view think,
                                       const std::vector<Json>& calls) {
    std::string out = "<think>";
    out += think;
    out += "\n\n</think>\n<tool_call>\n";
    for (const auto& c : calls) {
        out += c.dump();
        out.push_back('\n');
    }
    out += "\n</tool_call>";
    return out;
}

/// Canonical answer turn text per the system-prompt template.
inline std::string make_answer_turn(std::string_view answer) {
    std::string out = "<answer>";
    out += answer;
    out += "\n\n</answer>";
    return out;
}

inline Json make_tool_call_json(std::string_view name, Json arguments) {
    Json j;
    j["name"] = std::string(name);
    j["arguments"] = std::move(arguments);
    return j;
}

} // namespace companion
