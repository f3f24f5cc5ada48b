#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "companion/episode.hpp"
#include "companion/instance.hpp"
#include "companion/rewards.hpp"
#include "companion/trajectory.hpp"

namespace companion {

inline std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::vector<Trajectory> out;
    for_each_jsonl(path, [&](std::size_t lineno, const Json& j) {
        out.push_back(trajectory_from_json(j, path + ":" + std::to_string(lineno)));
    });
    return out;
}

inline void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
    std::string out;
    for (const auto& t : trajectories) {
        out += trajectory_to_json(t).dump();
        out.push_back('\n');
    }
    write_text_file(path, out);
}

inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

/// Acc: mean over instances of m1/F for stage-1 trajectories, as a
/// percentage rounded to one decimal.
inline double accuracy_metric(const std::vector<Trajectory>& stage1,
                              const std::map<std::string, const BenchmarkInstance*>& instances,
                              Judge& judge) {
    if (stage1.empty()) throw ArgumentError("accuracy_metric: empty trajectory set");
    double sum = 0.0;
    for (const auto& traj : stage1) {
        const auto it = instances.find(traj.instance_id);
        if (it == instances.end()) {
            throw ArgumentError("accuracy_metric: no instance matches trajectory '" +
                                traj.instance_id + "'");
        }
        const GoldAnnotation& gold = it->second->gold;
        const JudgeSignals s = judge.evaluate(traj, gold);
        sum += static_cast<double>(s.m) / static_cast<double>(gold.feature_count());
    }
    return round1(100.0 * sum / static_cast<double>(stage1.size()));
}

/// Succ: fraction of stage-2 trajectories passing every success check,
/// as a percentage rounded to one decimal.
inline double success_metric(const std::vector<Trajectory>& stage2,
                             const std::map<std::string, const BenchmarkInstance*>& instances,
                             const Catalog& catalog, Judge& judge) {
    if (stage2.empty()) throw ArgumentError("success_metric: empty trajectory set");
    double passed = 0.0;
    for (const auto& traj : stage2) {
        const auto it = instances.find(traj.instance_id);
        if (it == instances.end()) {
            throw ArgumentError("success_metric: no instance matches trajectory '" +
                                traj.instance_id + "'");
        }
        passed += success(traj, it->second->gold, catalog, judge);
    }
    return round1(100.0 * passed / static_cast<double>(stage2.size()));
}

inline std::map<std::string, const BenchmarkInstance*> index_instances(
    const std::vector<BenchmarkInstance>& instances) {
    std::map<std::string, const BenchmarkInstance*> out;
    for (const auto& inst : instances) out[inst.instance_id] = &inst;
    return out;
}

struct EvalReport {
    double accuracy = 0.0;
    bool has_accuracy = false;
    double success_rate = 0.0;
    bool has_success = false;
    BehavioralMetrics behavioral;
    std::size_t stage1_count = 0;
    std::size_t stage2_count = 0;

    Json to_json() const {
        Json j;
        j["accuracy"] = has_accuracy ? Json(accuracy) : Json();
        j["success_rate"] = has_success ? Json(success_rate) : Json();
        j["behavioral"] = behavioral.to_json();
        j["stage1_count"] = stage1_count;
        j["stage2_count"] = stage2_count;
        return j;
    }
};

/// Scores a mixed trajectory log: Acc over the stage-1 records, Succ over the
/// stage-2 records, behavioral means over everything.
inline EvalReport evaluate_logs(const std::vector<Trajectory>& trajectories,
                                const std::vector<BenchmarkInstance>& instances,
                                const Catalog& catalog, Judge& judge) {
    if (trajectories.empty()) throw ArgumentError("evaluate_logs: empty trajectory set");
    const auto by_id = index_instances(instances);
    std::vector<Trajectory> stage1;
    std::vector<Trajectory> stage2;
    for (const auto& t : trajectories) {
        (t.stage == 1 ? stage1 : stage2).push_back(t);
    }
    EvalReport report;
    report.stage1_count = stage1.size();
    report.stage2_count = stage2.size();
    if (!stage1.empty()) {
        report.accuracy = accuracy_metric(stage1, by_id, judge);
        report.has_accuracy = true;
    }
    if (!stage2.empty()) {
        report.success_rate = success_metric(stage2, by_id, catalog, judge);
        report.has_success = true;
    }
    report.behavioral = behavioral_metrics(trajectories);
    return report;
}

} // namespace companion
