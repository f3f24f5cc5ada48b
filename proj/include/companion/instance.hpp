#pragma once

#include <string>
#include <vector>

#include "companion/json_util.hpp"
#include "companion/memory.hpp"
#include "companion/rewards.hpp"

namespace companion {

/// One benchmark task: instruction, conversation haystack, gold annotation.
struct BenchmarkInstance {
    std::string instance_id;
    int task_bit = 0; ///< 0 single-product, 1 add-on deals
    std::string instruction;
    std::vector<Session> history;
    GoldAnnotation gold;

    Json to_json() const {
        Json j;
        j["instance_id"] = instance_id;
        j["task_type"] = task_bit == 1 ? "addon" : "single";
        j["instruction"] = instruction;
        Json h = Json::array();
        for (const auto& s : history) h.push_back(s.to_json());
        j["history"] = h;
        j["gold"] = gold.to_json();
        return j;
    }

    static BenchmarkInstance from_json(const Json& j, const std::string& where) {
        BenchmarkInstance inst;
        inst.instance_id = require_string(j, "instance_id", where);
        const std::string task_type = require_string(j, "task_type", where);
        if (task_type == "single") {
            inst.task_bit = 0;
        } else if (task_type == "addon") {
            inst.task_bit = 1;
        } else {
            throw SchemaError(where + ": task_type must be 'single' or 'addon'");
        }
        inst.instruction = require_string(j, "instruction", where);
        const Json& history = require_field(j, "history", where);
        if (!history.is_array()) throw SchemaError(where + ": 'history' must be an array");
        for (std::size_t i = 0; i < history.size(); ++i) {
            inst.history.push_back(
                Session::from_json(history[i], where + ".history[" + std::to_string(i) + "]"));
        }
        inst.gold = GoldAnnotation::from_json(require_field(j, "gold", where), inst.task_bit,
                                              where + ".gold");
        inst.validate(where);
        return inst;
    }

    void validate(const std::string& where = "instance") const {
        gold.validate(where + ".gold");
        for (std::size_t i = 0; i < history.size(); ++i) {
            if (history[i].session_index != static_cast<int>(i)) {
                throw SchemaError(where + ": history session_index must be contiguous from 0");
            }
        }
        for (const int idx : gold.gold_session_indices) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= history.size()) {
                throw SchemaError(where + ": gold_session_indices out of range");
            }
        }
    }

    MemoryStore memory_store() const { return MemoryStore::from_sessions(history); }
};

inline std::vector<BenchmarkInstance> load_instances(const std::string& path) {
    std::vector<BenchmarkInstance> out;
    for_each_jsonl(path, [&](std::size_t lineno, const Json& j) {
        out.push_back(BenchmarkInstance::from_json(j, path + ":" + std::to_string(lineno)));
    });
    return out;
}

inline void save_instances(const std::string& path, const std::vector<BenchmarkInstance>& instances) {
    std::string out;
    for (const auto& inst : instances) {
        out += inst.to_json().dump();
        out.push_back('\n');
    }
    write_text_file(path, out);
}

} // namespace companion
