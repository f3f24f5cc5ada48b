#pragma once

#include <string>
#include <vector>

#include "companion/episode.hpp"
#include "companion/instance.hpp"
#include "companion/protocol.hpp"

namespace companion {

/// Emits a fixed list of outputs in order, then repeats the last one.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> outputs) : outputs_(std::move(outputs)) {}
    std::string complete(const std::vector<Message>& messages) override {
        (void)messages;
        if (outputs_.empty()) return "";
        const std::size_t i = cursor_ < outputs_.size() ? cursor_ : outputs_.size() - 1;
        ++cursor_;
        return outputs_[i];
    }
    void rewind() { cursor_ = 0; }

private:
    std::vector<std::string> outputs_;
    std::size_t cursor_ = 0;
};

/// Always returns empty text; the episode burns through its turn cap and
/// every metric bottoms out.
class EmptyPolicy final : public Policy {
public:
    std::string complete(const std::vector<Message>&) override { return ""; }
};

/// Re-emits the assistant turns of a recorded trajectory, for replay checks.
class ReplayPolicy final : public Policy {
public:
    explicit ReplayPolicy(std::vector<std::string> recorded) : recorded_(std::move(recorded)) {}
    std::string complete(const std::vector<Message>&) override {
        if (cursor_ >= recorded_.size()) {
            throw std::runtime_error("replay: recorded trajectory exhausted");
        }
        return recorded_[cursor_++];
    }

private:
    std::vector<std::string> recorded_;
    std::size_t cursor_ = 0;
};

/// Reads the gold annotation and plays canonical turns: exact-match memory
/// lookups, filtered single-hit product searches, and answers that state
/// every wanted feature and category. Under the oracle judge it earns full
/// stage, tool and format credit.
class PerfectPolicy final : public Policy {
public:
    PerfectPolicy(const BenchmarkInstance& instance, const Catalog& catalog)
        : instance_(&instance), catalog_(&catalog) {}

    std::string complete(const std::vector<Message>& messages) override {
        const bool has_memory_tools =
            !messages.empty() && messages[0].content.find("\"mem_search\"") != std::string::npos;
        const bool has_product_tools =
            !messages.empty() && messages[0].content.find("\"product_search\"") != std::string::npos;
        int assistant_turns = 0;
        for (const auto& m : messages) {
            if (m.role == "assistant") ++assistant_turns;
        }
        if (has_memory_tools && has_product_tools) {
            return one_stage_turn(assistant_turns);
        }
        if (has_product_tools) return stage2_turn(assistant_turns);
        return stage1_turn(assistant_turns);
    }

private:
    std::string stage1_turn(int turn) const {
        const auto& gold = instance_->gold;
        if (turn == 0) {
            std::vector<Json> calls;
            Json queries = Json::array();
            queries.push_back(gold_turn_text());
            calls.push_back(make_tool_call_json(
                "mem_search", Json{{"queries", queries}, {"k", 1}}));
            return make_tool_call_turn("Search memory for the preference discussion.", calls);
        }
        if (turn == 1) {
            std::vector<Json> calls;
            calls.push_back(make_tool_call_json(
                "mem_view", Json{{"session_indices", gold.gold_session_indices}}));
            return make_tool_call_turn("Read the full preference sessions.", calls);
        }
        return make_answer_turn(preferences_text());
    }

    std::string stage2_turn(int turn) const {
        const auto& gold = instance_->gold;
        if (turn == 0) {
            return make_tool_call_turn("Search for each required product.", product_search_calls());
        }
        if (turn == 1) {
            std::vector<Json> calls;
            calls.push_back(make_tool_call_json("product_view", Json{{"product_ids", gold.product_ids}}));
            return make_tool_call_turn("Verify the attributes of the candidates.", calls);
        }
        return make_answer_turn(report_text());
    }

    std::string one_stage_turn(int turn) const {
        if (turn == 0) return stage1_turn(0);
        if (turn == 1) return stage1_turn(1);
        if (turn == 2) return stage2_turn(0);
        if (turn == 3) return stage2_turn(1);
        return make_answer_turn(report_text());
    }

    std::vector<Json> product_search_calls() const {
        std::vector<Json> calls;
        for (const auto& pid : instance_->gold.product_ids) {
            const Product* p = catalog_->find(pid);
            if (!p) continue;
            Json args;
            args["query"] = p->name;
            args["shop_id"] = p->shop_id;
            args["price"] = p->price.str() + "-" + p->price.str();
            args["k"] = 1;
            calls.push_back(make_tool_call_json("product_search", std::move(args)));
        }
        return calls;
    }

    std::string gold_turn_text() const {
        const auto& gold = instance_->gold;
        if (!gold.gold_session_indices.empty()) {
            const int idx = gold.gold_session_indices.front();
            if (idx >= 0 && static_cast<std::size_t>(idx) < instance_->history.size()) {
                const auto& session = instance_->history[static_cast<std::size_t>(idx)];
                if (!session.turns.empty()) return session.turns.front().content;
            }
        }
        return instance_->instruction;
    }

    std::string preferences_text() const {
        const auto& gold = instance_->gold;
        std::string out = "Identified preferences from your past conversations:\n";
        for (const auto& feat : gold.all_wanted_features()) {
            out += "- " + feat + "\n";
        }
        out += "Relevant categories: " + category_list() + ".\n";
        out += "Is this information sufficient and accurate?";
        return out;
    }

    std::string report_text() const {
        const auto& gold = instance_->gold;
        std::string out = "## Recommendation\n";
        out += "Matching categories: " + category_list() + ".\n";
        out += "Confirmed preferences satisfied:\n";
        for (const auto& feat : gold.all_wanted_features()) {
            out += "- " + feat + "\n";
        }
        std::string ids;
        for (std::size_t i = 0; i < gold.product_ids.size(); ++i) {
            if (i) ids += ",";
            ids += gold.product_ids[i];
        }
        out += "@REC::" + ids + "@";
        return out;
    }

    std::string category_list() const {
        std::string out;
        for (const auto& pid : instance_->gold.product_ids) {
            const Product* p = catalog_->find(pid);
            if (!p) continue;
            if (!out.empty()) out += ", ";
            out += p->category;
        }
        return out;
    }

    const BenchmarkInstance* instance_;
    const Catalog* catalog_;
};

} // namespace companion
