#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "companion/json_util.hpp"
#include "companion/protocol.hpp"

namespace companion {

struct Message {
    std::string role; ///< system | user | assistant
    std::string content;
};

/// One dispatched tool invocation with everything reward scoring needs.
/// `payload` holds the scoreable result:
///   mem_search      {"hit_sessions": [[s,...], ...]}  per query, turn-level
///   mem_view        {"session_indices": [...]}        the requested indices
///   product_search  {"product_ids": [...]}            the returned ranking
///   product_view    {"product_ids": [...]}            the requested ids
/// Unscoreable tools (mem_summarize_by_date, web stubs) leave it null.
struct ToolCallRecord {
    int turn = 0; ///< 1-based assistant turn the call came from
    std::string name;
    Json arguments;
    bool ok = true;
    std::string observation;
    Json payload;
};

/// Full record of one episode, sufficient for deterministic re-scoring and
/// replay. Messages are append-only; tool results are stored verbatim as
/// shown to the policy.
struct Trajectory {
    std::string instance_id;
    int stage = 1;
    std::vector<Message> messages;
    std::vector<std::string> assistant_raw;
    std::vector<AgentTurnParse> parses;
    std::vector<ToolCallRecord> tool_log;
    std::optional<std::string> final_answer;
    std::optional<std::vector<std::string>> recommendation;
    std::vector<std::string> viewed_product_ids; ///< product_view requests, in call order
    bool terminal = false;
    bool cap_exhausted = false;
    bool aborted = false;
    int assistant_turns = 0;
    std::uint64_t response_chars = 0;
    std::uint64_t response_words = 0;

    FormatFlags format_flags() const { return trajectory_format_flags(parses); }
};

inline Json trajectory_to_json(const Trajectory& t) {
    Json j;
    j["instance_id"] = t.instance_id;
    j["stage"] = t.stage;
    Json turns = Json::array();
    for (const auto& m : t.messages) {
        turns.push_back(Json{{"role", m.role}, {"content", m.content}});
    }
    j["turns"] = turns;
    Json calls = Json::array();
    for (const auto& c : t.tool_log) {
        Json cj;
        cj["turn"] = c.turn;
        cj["name"] = c.name;
        cj["arguments"] = c.arguments;
        cj["ok"] = c.ok;
        cj["observation"] = c.observation;
        cj["payload"] = c.payload.is_null() ? Json() : c.payload;
        calls.push_back(cj);
    }
    j["tool_calls"] = calls;
    j["final_answer"] = t.final_answer ? Json(*t.final_answer) : Json();
    j["recommendation"] = t.recommendation ? Json(*t.recommendation) : Json(Json::array());
    j["terminal"] = t.terminal;
    j["cap_exhausted"] = t.cap_exhausted;
    j["aborted"] = t.aborted;
    return j;
}

/// Rebuilds a trajectory from its JSON record. Assistant turns are re-parsed
/// from the transcript, so a minimal {"instance_id","stage","turns"} object
/// (as a trainer would log it) is sufficient; tool scoring fields are
/// restored when present.
inline Trajectory trajectory_from_json(const Json& j, const std::string& where = "trajectory") {
    if (!j.is_object()) throw SchemaError(where + ": must be an object");
    Trajectory t;
    t.instance_id = j.contains("instance_id") ? require_string(j, "instance_id", where) : "";
    const Json& stage = require_field(j, "stage", where);
    if (!stage.is_number_integer()) throw SchemaError(where + ": 'stage' must be an integer");
    t.stage = stage.get<int>();
    const Json& turns = require_field(j, "turns", where);
    if (!turns.is_array()) throw SchemaError(where + ": 'turns' must be an array");
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const std::string twhere = where + ".turns[" + std::to_string(i) + "]";
        Message m;
        m.role = require_string(turns[i], "role", twhere);
        m.content = require_string(turns[i], "content", twhere);
        if (m.role == "assistant") {
            t.assistant_raw.push_back(m.content);
            t.parses.push_back(parse_agent_output(m.content));
            ++t.assistant_turns;
            t.response_chars += m.content.size();
            t.response_words += count_words(m.content);
        }
        t.messages.push_back(std::move(m));
    }
    if (j.contains("tool_calls") && j["tool_calls"].is_array()) {
        for (const auto& cj : j["tool_calls"]) {
            ToolCallRecord c;
            c.turn = cj.value("turn", 0);
            c.name = cj.value("name", std::string());
            c.arguments = cj.contains("arguments") ? Json(cj["arguments"]) : Json();
            c.ok = cj.value("ok", true);
            c.observation = cj.value("observation", std::string());
            c.payload = cj.contains("payload") ? Json(cj["payload"]) : Json();
            if (c.name == "product_view" && c.payload.is_object() && c.payload.contains("product_ids")) {
                for (const auto& pid : c.payload["product_ids"]) {
                    if (pid.is_string()) t.viewed_product_ids.push_back(pid.get<std::string>());
                }
            }
            t.tool_log.push_back(std::move(c));
        }
    }
    if (!t.parses.empty()) {
        const auto& last = t.parses.back();
        if (last.is_answer_turn()) {
            t.terminal = true;
            t.final_answer = last.answer;
            t.recommendation = last.recommendation;
        }
    }
    if (j.contains("final_answer") && j["final_answer"].is_string()) {
        t.final_answer = j["final_answer"].get<std::string>();
        t.terminal = true;
    }
    if (j.contains("recommendation") && j["recommendation"].is_array() &&
        !j["recommendation"].empty()) {
        std::vector<std::string> rec;
        for (const auto& r : j["recommendation"]) {
            if (r.is_string()) rec.push_back(r.get<std::string>());
        }
        t.recommendation = std::move(rec);
    }
    t.terminal = j.value("terminal", t.terminal);
    t.cap_exhausted = j.value("cap_exhausted", false);
    t.aborted = j.value("aborted", false);
    return t;
}

} // namespace companion
