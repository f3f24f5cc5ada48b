#pragma once

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "companion/catalog.hpp"
#include "companion/instance.hpp"
#include "companion/memory.hpp"
#include "companion/product_index.hpp"
#include "companion/prompts.hpp"
#include "companion/protocol.hpp"
#include "companion/rewards.hpp"
#include "companion/trajectory.hpp"

namespace companion {

enum class HintLevel { none, low, high };

inline HintLevel hint_level_from_string(const std::string& s) {
    if (s == "none") return HintLevel::none;
    if (s == "low") return HintLevel::low;
    if (s == "high") return HintLevel::high;
    throw ArgumentError("unknown hint level '" + s + "'");
}

struct EpisodeConfig {
    int max_turns = 20;          ///< assistant turns per trajectory
    int mem_k = kDefaultMemSearchK;
    int product_k = kDefaultProductSearchK;
    int max_feedback_rounds = 2; ///< stage-1 confirmation exchanges
    HintLevel hint = HintLevel::none;
    bool one_stage = false;
    std::string prompts_dir;
};

/// Read-only tool backends for one benchmark instance. Safe to share across
/// concurrent episodes.
struct ToolEnv {
    const Catalog* catalog = nullptr;
    const ProductIndex* product_index = nullptr;
    const MemoryStore* memory = nullptr;
    const MemoryIndex* memory_index = nullptr;
    const Embedder* embedder = nullptr;
    const Summarizer* summarizer = nullptr;
    /// Optional live web backend; the default stub reports unavailability.
    std::function<std::string(const ToolCall&)> web_backend;
};

namespace detail {

inline std::string format_score(double score) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    return std::string(buf);
}

inline std::vector<std::string> string_array_arg(const Json& args, const char* key) {
    std::vector<std::string> out;
    if (args.is_object() && args.contains(key) && args[key].is_array()) {
        for (const auto& v : args[key]) {
            if (v.is_string()) out.push_back(v.get<std::string>());
        }
    }
    return out;
}

inline std::vector<int> int_array_arg(const Json& args, const char* key) {
    std::vector<int> out;
    if (args.is_object() && args.contains(key) && args[key].is_array()) {
        for (const auto& v : args[key]) {
            if (v.is_number_integer()) out.push_back(v.get<int>());
        }
    }
    return out;
}

} // namespace detail

/// Executes one parsed tool call against the environment. Tool-level failures
/// (bad arguments, unknown names, tools outside the stage's set) produce an
/// error observation and the episode continues.
inline ToolCallRecord dispatch_tool_call(const ToolCall& call, int turn, StageMode mode,
                                         const ToolEnv& env, const EpisodeConfig& config) {
    ToolCallRecord rec;
    rec.turn = turn;
    rec.name = call.name;
    rec.arguments = call.arguments;

    const bool memory_tools = mode != StageMode::stage2;
    const bool product_tools = mode != StageMode::stage1;
    auto fail = [&](const std::string& message) {
        rec.ok = false;
        rec.observation = "error: " + message;
        return rec;
    };

    try {
        if (call.name == "mem_search") {
            if (!memory_tools) return fail("tool 'mem_search' is not available in this stage");
            if (!env.memory || !env.memory_index || !env.embedder) {
                return fail("memory store is not loaded");
            }
            const auto queries = detail::string_array_arg(call.arguments, "queries");
            if (queries.empty()) return fail("mem_search requires a non-empty 'queries' array");
            std::size_t k = static_cast<std::size_t>(config.mem_k);
            if (call.arguments.contains("k") && call.arguments["k"].is_number_integer()) {
                const int raw = call.arguments["k"].get<int>();
                if (raw < 1) return fail("mem_search 'k' must be >= 1");
                k = static_cast<std::size_t>(raw);
            }
            const auto results = mem_search(*env.memory_index, *env.embedder, queries, k);
            rec.observation = render_mem_search(*env.memory, queries, results);
            Json per_query = Json::array();
            for (const auto& hits : results) {
                Json sessions = Json::array();
                for (const auto& h : hits) sessions.push_back(h.session_index);
                per_query.push_back(sessions);
            }
            rec.payload = Json{{"hit_sessions", per_query}};
            return rec;
        }
        if (call.name == "mem_view") {
            if (!memory_tools) return fail("tool 'mem_view' is not available in this stage");
            if (!env.memory) return fail("memory store is not loaded");
            const auto indices = detail::int_array_arg(call.arguments, "session_indices");
            if (indices.empty()) return fail("mem_view requires a non-empty 'session_indices' array");
            rec.observation = render_mem_view(mem_view(*env.memory, indices));
            rec.payload = Json{{"session_indices", indices}};
            return rec;
        }
        if (call.name == "mem_summarize_by_date") {
            if (!memory_tools) {
                return fail("tool 'mem_summarize_by_date' is not available in this stage");
            }
            if (!env.memory || !env.summarizer) return fail("memory store is not loaded");
            if (!call.arguments.contains("start_date") || !call.arguments.contains("end_date")) {
                return fail("mem_summarize_by_date requires 'start_date' and 'end_date'");
            }
            const Date start = parse_date(call.arguments["start_date"].get<std::string>());
            const Date end = parse_date(call.arguments["end_date"].get<std::string>());
            rec.observation =
                render_summaries(mem_summarize_by_date(*env.memory, start, end, *env.summarizer));
            return rec;
        }
        if (call.name == "product_search") {
            if (!product_tools) return fail("tool 'product_search' is not available in this stage");
            if (!env.product_index || !env.catalog) return fail("product index is not loaded");
            if (!call.arguments.contains("query") || !call.arguments["query"].is_string()) {
                return fail("product_search requires a string 'query'");
            }
            std::optional<std::string> shop_id;
            if (call.arguments.contains("shop_id") && call.arguments["shop_id"].is_string()) {
                const std::string s = call.arguments["shop_id"].get<std::string>();
                if (!s.empty()) shop_id = s;
            }
            std::optional<std::string> price;
            if (call.arguments.contains("price") && call.arguments["price"].is_string()) {
                const std::string p = call.arguments["price"].get<std::string>();
                if (!trim(p).empty()) price = p;
            }
            std::size_t k = static_cast<std::size_t>(config.product_k);
            if (call.arguments.contains("k") && call.arguments["k"].is_number_integer()) {
                const int raw = call.arguments["k"].get<int>();
                if (raw < 1) return fail("product_search 'k' must be >= 1");
                k = static_cast<std::size_t>(raw);
            }
            const auto hits = product_search(*env.product_index,
                                             call.arguments["query"].get<std::string>(), shop_id,
                                             price, k);
            std::string obs;
            Json ids = Json::array();
            for (std::size_t i = 0; i < hits.size(); ++i) {
                const Product* p = env.catalog->find(hits[i].product_id);
                obs += std::to_string(i + 1) + ". [" + hits[i].product_id + "] (score " +
                       detail::format_score(hits[i].score) + ") ";
                if (p) {
                    obs += p->name + " | " + p->category + " | $" + p->price.str() + " | shop " +
                           p->shop_id;
                }
                obs.push_back('\n');
                ids.push_back(hits[i].product_id);
            }
            if (hits.empty()) obs = "(no results)\n";
            rec.observation = obs;
            rec.payload = Json{{"product_ids", ids}};
            return rec;
        }
        if (call.name == "product_view") {
            if (!product_tools) return fail("tool 'product_view' is not available in this stage");
            if (!env.catalog) return fail("catalog is not loaded");
            const auto ids = detail::string_array_arg(call.arguments, "product_ids");
            if (ids.empty()) return fail("product_view requires a non-empty 'product_ids' array");
            rec.observation = render_product_view(product_view(*env.catalog, ids));
            rec.payload = Json{{"product_ids", ids}};
            return rec;
        }
        if (call.name == "web_search" || call.name == "web_visit") {
            if (!product_tools) {
                return fail("tool '" + call.name + "' is not available in this stage");
            }
            if (env.web_backend) {
                rec.observation = env.web_backend(call);
            } else {
                rec.observation = "web access unavailable in this environment";
            }
            return rec;
        }
        return fail("unknown tool '" + call.name + "'");
    } catch (const ArgumentError& e) {
        return fail(e.what());
    } catch (const SchemaError& e) {
        return fail(e.what());
    }
}

/// Mutable episode state. Single-owner; the transcript is append-only.
struct EpisodeState {
    StageMode mode = StageMode::stage1;
    int stage = 1; ///< reward stage label; one-stage episodes score as stage 2
    EpisodeConfig config;
    Trajectory trajectory;
    int t = 0;
    bool terminal = false;
};

/// C_0 = [system prompt, user message]. Stage 2 requires the confirmed
/// preferences produced by stage 1.
inline EpisodeState reset(const BenchmarkInstance& instance, int stage, const EpisodeConfig& config,
                          const std::string* confirmed_preferences = nullptr) {
    if (stage != 1 && stage != 2) throw ArgumentError("reset: stage must be 1 or 2");
    if (stage == 2 && !config.one_stage && confirmed_preferences == nullptr) {
        throw ArgumentError("reset: stage 2 requires the confirmed preferences from stage 1");
    }
    EpisodeState st;
    st.config = config;
    st.stage = config.one_stage ? 2 : stage;
    st.mode = config.one_stage ? StageMode::one_stage
                               : (stage == 1 ? StageMode::stage1 : StageMode::stage2);
    st.trajectory.instance_id = instance.instance_id;
    st.trajectory.stage = st.stage;
    st.trajectory.messages.push_back({"system", system_prompt(st.mode, config.prompts_dir)});
    if (st.mode == StageMode::stage2) {
        st.trajectory.messages.push_back(
            {"user", stage2_user_message(instance.instruction, *confirmed_preferences)});
    } else {
        st.trajectory.messages.push_back({"user", instance.instruction});
    }
    return st;
}

struct StepResult {
    std::string observation; ///< empty on terminal answer turns
    bool terminal = false;
};

/// Environment half of the transition: parses one policy output, dispatches
/// tool calls or accepts the final answer, and appends the observation.
inline StepResult step(EpisodeState& st, const ToolEnv& env, std::string_view policy_output) {
    if (st.terminal) throw ArgumentError("step: episode is already terminal");
    Trajectory& traj = st.trajectory;
    traj.messages.push_back({"assistant", std::string(policy_output)});
    traj.assistant_raw.emplace_back(policy_output);
    traj.response_chars += policy_output.size();
    traj.response_words += count_words(policy_output);
    AgentTurnParse parse = parse_agent_output(policy_output);
    ++st.t;
    traj.assistant_turns = st.t;

    StepResult result;
    if (parse.is_tool_turn()) {
        std::string observation;
        for (const auto& call : parse.tool_calls) {
            ToolCallRecord rec = dispatch_tool_call(call, st.t, st.mode, env, st.config);
            if (!observation.empty()) observation += "\n";
            observation += "<tool_response name=\"" + rec.name + "\">\n" + rec.observation +
                           "\n</tool_response>";
            if (rec.ok && rec.name == "product_view") {
                for (const auto& id : detail::string_array_arg(rec.arguments, "product_ids")) {
                    traj.viewed_product_ids.push_back(id);
                }
            }
            traj.tool_log.push_back(std::move(rec));
        }
        traj.messages.push_back({"user", observation});
        result.observation = observation;
    } else if (parse.is_answer_turn()) {
        st.terminal = true;
        traj.terminal = true;
        traj.final_answer = parse.answer;
        if (st.stage == 2) traj.recommendation = parse.recommendation;
    } else {
        const std::string nudge(prompt_text::kFormatNudge);
        traj.messages.push_back({"user", nudge});
        result.observation = nudge;
    }
    traj.parses.push_back(std::move(parse));

    if (!st.terminal && st.t >= st.config.max_turns) {
        st.terminal = true;
        traj.terminal = true;
        traj.cap_exhausted = true;
    }
    result.terminal = st.terminal;
    return result;
}

/// Chat-completion policy contract: full message list in, raw text out.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string complete(const std::vector<Message>& messages) = 0;
};

/// Runs one stage to termination. Policy transport failures mark the
/// trajectory aborted and return the partial log.
inline Trajectory run_episode(const BenchmarkInstance& instance, int stage, Policy& policy,
                              const ToolEnv& env, const EpisodeConfig& config,
                              const std::string* confirmed_preferences = nullptr) {
    EpisodeState st = reset(instance, stage, config, confirmed_preferences);
    while (!st.terminal) {
        std::string output;
        try {
            output = policy.complete(st.trajectory.messages);
        } catch (const std::exception&) {
            st.trajectory.aborted = true;
            break;
        }
        step(st, env, output);
    }
    return std::move(st.trajectory);
}

/// User-intervention verdict on a stage-1 answer.
struct Feedback {
    HintLevel level = HintLevel::none;
    bool all_matched = false;
    std::string message;  ///< verbatim user message fed back to the agent
    Json detail;          ///< high hint: {"missing": [...], "wrong": [...]}
};

/// Simulates the human confirmation step at a given hint granularity.
class UserSimulator {
public:
    virtual ~UserSimulator() = default;
    virtual Feedback feedback(const std::string& stage1_answer, const GoldAnnotation& gold,
                              HintLevel level) = 0;
};

/// Containment-based simulator:
///   missing - wanted features whose "name: value" string is absent
///   wrong   - does-not-matter features asserted in the answer
/// Low hints return a single verdict token; when both apply, "missing" wins.
/// High hints name the offending features, never their values.
class OracleUserSimulator final : public UserSimulator {
public:
    Feedback feedback(const std::string& stage1_answer, const GoldAnnotation& gold,
                      HintLevel level) override {
        if (level == HintLevel::none) throw ArgumentError("user_feedback: level must not be none");
        const std::string norm = normalize_for_match(stage1_answer);
        std::vector<std::string> missing;
        for (const auto& feat : gold.all_wanted_features()) {
            if (!contains_normalized(norm, feat)) missing.push_back(feature_name(feat));
        }
        std::vector<std::string> wrong;
        for (const auto& feat : gold.does_not_matter_features) {
            if (contains_normalized(norm, feat)) wrong.push_back(feature_name(feat));
        }

        Feedback fb;
        fb.level = level;
        fb.all_matched = missing.empty() && wrong.empty();
        fb.detail = Json{{"missing", missing}, {"wrong", wrong}};
        if (level == HintLevel::low) {
            fb.message = fb.all_matched ? "all matched" : (!missing.empty() ? "missing" : "wrong");
        } else {
            fb.message = fb.detail.dump();
        }
        return fb;
    }

private:
    static std::string feature_name(const std::string& feature) {
        const auto colon = feature.find(':');
        return trim(colon == std::string::npos ? feature : feature.substr(0, colon));
    }
};

inline Feedback user_feedback(const std::string& stage1_answer, const GoldAnnotation& gold,
                              HintLevel level, UserSimulator& simulator) {
    return simulator.feedback(stage1_answer, gold, level);
}

struct FeedbackRecord {
    int round = 0;
    HintLevel level = HintLevel::none;
    std::string message;
    bool all_matched = false;
};

struct TwoStageResult {
    Trajectory stage1;
    Trajectory stage2;
    std::vector<FeedbackRecord> feedback;
    std::string confirmed_preferences;
};

/// Full two-stage loop: stage 1 with at most max_feedback_rounds confirmation
/// exchanges, then stage 2 seeded with the confirmed answer. With hint level
/// none the stage-2 input is the stage-1 final answer verbatim. A judge
/// failure during feedback downgrades the episode to no intervention.
inline TwoStageResult run_two_stage(const BenchmarkInstance& instance, Policy& policy,
                                    const ToolEnv& env, const EpisodeConfig& config,
                                    UserSimulator* simulator = nullptr) {
    TwoStageResult out;
    EpisodeState st = reset(instance, 1, config);
    int feedback_rounds = 0;
    while (true) {
        while (!st.terminal) {
            std::string output;
            try {
                output = policy.complete(st.trajectory.messages);
            } catch (const std::exception&) {
                st.trajectory.aborted = true;
                break;
            }
            step(st, env, output);
        }
        if (st.trajectory.aborted || st.trajectory.cap_exhausted ||
            !st.trajectory.final_answer.has_value()) {
            break;
        }
        if (config.hint == HintLevel::none || !simulator ||
            feedback_rounds >= config.max_feedback_rounds ||
            st.t >= st.config.max_turns) {
            break;
        }
        Feedback fb;
        try {
            fb = simulator->feedback(*st.trajectory.final_answer, instance.gold, config.hint);
        } catch (const std::exception&) {
            break; // feedback unavailable, proceed as level none
        }
        ++feedback_rounds;
        out.feedback.push_back({feedback_rounds, fb.level, fb.message, fb.all_matched});
        if (fb.all_matched) break;
        // reopen the episode with the user's correction
        st.terminal = false;
        st.trajectory.terminal = false;
        st.trajectory.final_answer.reset();
        st.trajectory.messages.push_back({"user", fb.message});
    }
    out.stage1 = std::move(st.trajectory);
    out.confirmed_preferences = out.stage1.final_answer.value_or("");

    out.stage2 = run_episode(instance, 2, policy, env, config, &out.confirmed_preferences);
    return out;
}

/// End-to-end success per the four checks: product count, id validity, needs
/// plus preference match (judged), and budget feasibility for add-on deals.
inline int success(const Trajectory& trajectory, const GoldAnnotation& gold, const Catalog& catalog,
                   Judge& judge) {
    if (!trajectory.terminal) throw ArgumentError("success: trajectory is not terminal");
    if (trajectory.stage != 2) throw ArgumentError("success: defined for stage-2 trajectories");
    if (!trajectory.recommendation) return 0;

    std::vector<std::string> distinct;
    for (const auto& id : *trajectory.recommendation) {
        if (std::find(distinct.begin(), distinct.end(), id) == distinct.end()) {
            distinct.push_back(id);
        }
    }
    if (static_cast<int>(distinct.size()) != gold.bundle_size) return 0; // check 1: count
    for (const auto& id : distinct) {
        if (!catalog.find(id)) return 0; // recommended ids must exist
    }
    const JudgeSignals s = judge.evaluate(trajectory, gold);
    if (s.q != 1) return 0;                       // check 2: explicit needs
    if (s.m != gold.feature_count()) return 0;    // check 3: preference match
    if (gold.task_bit == 1 && s.u != 1) return 0; // check 4: budget feasibility
    return 1;
}

struct BehavioralMetrics {
    double mean_turns = 0.0;
    double mean_tool_uses = 0.0;
    double mean_response_chars = 0.0;
    double mean_response_words = 0.0;

    Json to_json() const {
        Json j;
        j["mean_turns"] = mean_turns;
        j["mean_tool_uses"] = mean_tool_uses;
        j["mean_response_chars"] = mean_response_chars;
        j["mean_response_words"] = mean_response_words;
        return j;
    }
};

/// Means over trajectories: assistant turns, tool calls, and response length
/// (characters of raw policy output summed per trajectory; word counts are
/// recorded alongside).
inline BehavioralMetrics behavioral_metrics(const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw ArgumentError("behavioral_metrics: empty trajectory set");
    BehavioralMetrics m;
    for (const auto& t : trajectories) {
        m.mean_turns += static_cast<double>(t.assistant_turns);
        m.mean_tool_uses += static_cast<double>(t.tool_log.size());
        m.mean_response_chars += static_cast<double>(t.response_chars);
        m.mean_response_words += static_cast<double>(t.response_words);
    }
    const double n = static_cast<double>(trajectories.size());
    m.mean_turns /= n;
    m.mean_tool_uses /= n;
    m.mean_response_chars /= n;
    m.mean_response_words /= n;
    return m;
}

} // namespace companion
