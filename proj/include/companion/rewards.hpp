#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "companion/catalog.hpp"
#include "companion/fraction.hpp"
#include "companion/json_util.hpp"
#include "companion/money.hpp"
#include "companion/trajectory.hpp"

namespace companion {

/// Discount rule attached to add-on-deal tasks.
struct Voucher {
    enum class Kind { flat_off_over_threshold, percent_off_capped };

    Kind kind = Kind::flat_off_over_threshold;
    Money threshold;              ///< flat kind: minimum total for the discount
    Money amount;                 ///< flat kind: discount amount
    std::int64_t percent_bp = 0;  ///< percent kind: percentage in basis points
    std::optional<Money> cap;     ///< percent kind: discount ceiling

    Money discount(Money total) const {
        if (kind == Kind::flat_off_over_threshold) {
            return total >= threshold ? amount : Money::from_cents(0);
        }
        Money d = Money::percent_of(total, percent_bp);
        if (cap && *cap < d) d = *cap;
        return d;
    }

    Money effective_total(Money total) const {
        const Money d = discount(total);
        return d > total ? Money::from_cents(0) : total - d;
    }

    std::string describe() const {
        if (kind == Kind::flat_off_over_threshold) {
            return "$" + amount.str() + " off on orders over $" + threshold.str();
        }
        std::string out = std::to_string(percent_bp / 100);
        if (percent_bp % 100) {
            out += "." + std::to_string(percent_bp % 100 / 10) + std::to_string(percent_bp % 10);
        }
        out += "% off";
        if (cap) out += " (up to $" + cap->str() + ")";
        return out;
    }

    Json to_json() const {
        Json j;
        j["kind"] = kind == Kind::flat_off_over_threshold ? "flat_off_over_threshold"
                                                          : "percent_off_capped";
        if (kind == Kind::flat_off_over_threshold) {
            j["threshold"] = threshold.to_number();
            j["amount"] = amount.to_number();
            j["cap"] = nullptr;
        } else {
            j["threshold"] = nullptr;
            j["amount"] = static_cast<double>(percent_bp) / 100.0; // percent
            j["cap"] = cap ? Json(cap->to_number()) : Json();
        }
        return j;
    }

    static Voucher from_json(const Json& j, const std::string& where) {
        Voucher v;
        const std::string kind = require_string(j, "kind", where);
        if (kind == "flat_off_over_threshold") {
            v.kind = Kind::flat_off_over_threshold;
            v.threshold = Money::from_number(require_field(j, "threshold", where).get<double>());
            v.amount = Money::from_number(require_field(j, "amount", where).get<double>());
            if (v.amount < Money::from_cents(0) || v.threshold < Money::from_cents(0)) {
                throw SchemaError(where + ": voucher amounts must be non-negative");
            }
        } else if (kind == "percent_off_capped") {
            v.kind = Kind::percent_off_capped;
            const double pct = require_field(j, "amount", where).get<double>();
            v.percent_bp = std::llround(pct * 100.0);
            if (v.percent_bp < 0 || v.percent_bp > 10000) {
                throw SchemaError(where + ": voucher percent must be in [0, 100]");
            }
            if (j.contains("cap") && !j["cap"].is_null()) {
                v.cap = Money::from_number(j["cap"].get<double>());
            }
        } else {
            throw SchemaError(where + ": unknown voucher kind '" + kind + "'");
        }
        return v;
    }
};

/// Reference annotation a trajectory is scored against.
struct GoldAnnotation {
    std::vector<std::string> product_ids; ///< P_gold, in slot order
    std::vector<std::pair<std::string, std::vector<std::string>>> wanted_features; ///< pid -> "name: value"
    std::vector<std::string> does_not_matter_features;
    std::vector<int> gold_session_indices; ///< S_gold
    int bundle_size = 1;                   ///< N
    int task_bit = 0;                      ///< b: 0 single-product, 1 add-on deals
    std::optional<Voucher> voucher;
    std::optional<Money> budget;

    /// F: number of distinct wanted-feature strings across the bundle.
    int feature_count() const {
        std::set<std::string> all;
        for (const auto& [pid, feats] : wanted_features) {
            all.insert(feats.begin(), feats.end());
        }
        return static_cast<int>(all.size());
    }

    std::vector<std::string> all_wanted_features() const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& [pid, feats] : wanted_features) {
            for (const auto& f : feats) {
                if (seen.insert(f).second) out.push_back(f);
            }
        }
        return out;
    }

    bool in_gold_sessions(int session_index) const {
        return std::find(gold_session_indices.begin(), gold_session_indices.end(), session_index) !=
               gold_session_indices.end();
    }
    bool is_gold_product(const std::string& id) const {
        return std::find(product_ids.begin(), product_ids.end(), id) != product_ids.end();
    }

    void validate(const std::string& where = "gold") const {
        if (task_bit != 0 && task_bit != 1) throw SchemaError(where + ": task bit must be 0 or 1");
        if (task_bit == 0) {
            if (bundle_size != 1) throw SchemaError(where + ": single-product tasks require bundle_size 1");
            if (voucher || budget) {
                throw SchemaError(where + ": single-product tasks carry no voucher or budget");
            }
        } else {
            if (bundle_size < 2) throw SchemaError(where + ": add-on tasks require bundle_size >= 2");
            if (!budget) throw SchemaError(where + ": add-on tasks require a budget");
        }
        if (static_cast<int>(product_ids.size()) != bundle_size) {
            throw SchemaError(where + ": product_ids size must equal bundle_size");
        }
        if (feature_count() < 1) throw SchemaError(where + ": at least one wanted feature required");
    }

    Json to_json() const {
        Json j;
        j["product_ids"] = product_ids;
        Json wf = Json::object();
        for (const auto& [pid, feats] : wanted_features) wf[pid] = feats;
        j["wanted_features"] = wf;
        j["does_not_matter_features"] = does_not_matter_features;
        j["gold_session_indices"] = gold_session_indices;
        j["bundle_size"] = bundle_size;
        j["voucher"] = voucher ? voucher->to_json() : Json();
        j["budget"] = budget ? Json(budget->to_number()) : Json();
        return j;
    }

    static GoldAnnotation from_json(const Json& j, int task_bit, const std::string& where) {
        GoldAnnotation g;
        g.task_bit = task_bit;
        const Json& ids = require_field(j, "product_ids", where);
        if (!ids.is_array() || ids.empty()) {
            throw SchemaError(where + ": 'product_ids' must be a non-empty array");
        }
        for (const auto& id : ids) g.product_ids.push_back(id.get<std::string>());
        const Json& wf = require_field(j, "wanted_features", where);
        if (!wf.is_object()) throw SchemaError(where + ": 'wanted_features' must be an object");
        for (const auto& [pid, feats] : wf.items()) {
            std::vector<std::string> list;
            for (const auto& f : feats) list.push_back(f.get<std::string>());
            g.wanted_features.emplace_back(pid, std::move(list));
        }
        if (j.contains("does_not_matter_features")) {
            for (const auto& f : j["does_not_matter_features"]) {
                g.does_not_matter_features.push_back(f.get<std::string>());
            }
        }
        const Json& gsi = require_field(j, "gold_session_indices", where);
        for (const auto& s : gsi) g.gold_session_indices.push_back(s.get<int>());
        g.bundle_size = require_field(j, "bundle_size", where).get<int>();
        if (j.contains("voucher") && !j["voucher"].is_null()) {
            g.voucher = Voucher::from_json(j["voucher"], where + ".voucher");
        }
        if (j.contains("budget") && !j["budget"].is_null()) {
            g.budget = Money::from_number(j["budget"].get<double>());
        }
        g.validate(where);
        return g;
    }
};

/// Structured judge output. Stage 1 uses (q, m, c); stage 2 uses
/// (p, q, m, n, u). m counts matched attributes in 0..F; c and n count
/// bundle slots in 0..N; the rest are binary.
struct JudgeSignals {
    int stage = 1;
    int q = 0;
    int m = 0;
    int c = 0;
    int p = 0;
    int n = 0;
    int u = 0;

    Json to_json() const {
        Json j;
        j["stage"] = stage;
        j["q"] = q;
        j["m"] = m;
        if (stage == 1) {
            j["c"] = c;
        } else {
            j["p"] = p;
            j["n"] = n;
            j["u"] = u;
        }
        return j;
    }
};

inline void validate_signals(const JudgeSignals& s, const GoldAnnotation& gold) {
    const int f = gold.feature_count();
    const int n_slots = gold.bundle_size;
    auto binary = [](int v, const char* name) {
        if (v != 0 && v != 1) {
            throw ArgumentError(std::string("judge signal ") + name + " must be 0 or 1");
        }
    };
    binary(s.q, "q");
    if (s.m < 0 || s.m > f) throw ArgumentError("judge signal m out of range [0, F]");
    if (s.stage == 1) {
        if (gold.task_bit == 1 && (s.c < 0 || s.c > n_slots)) {
            throw ArgumentError("judge signal c out of range [0, N]");
        }
    } else if (s.stage == 2) {
        binary(s.p, "p");
        if (gold.task_bit == 1) {
            if (s.n < 0 || s.n > n_slots) throw ArgumentError("judge signal n out of range [0, N]");
            binary(s.u, "u");
        }
    } else {
        throw ArgumentError("judge signals: stage must be 1 or 2");
    }
}

/// R_1 = (q1 + m1 + b*c1) / (1 + F + b*N)
inline Fraction stage1_reward(const JudgeSignals& s, const GoldAnnotation& gold) {
    JudgeSignals sig = s;
    sig.stage = 1;
    validate_signals(sig, gold);
    const int b = gold.task_bit;
    return Fraction(sig.q + sig.m + b * sig.c, 1 + gold.feature_count() + b * gold.bundle_size);
}

/// R_2 = (p2 + q2 + m2 + b*(n2 + u2)) / (2 + F + b*(N + 1))
inline Fraction stage2_reward(const JudgeSignals& s, const GoldAnnotation& gold) {
    JudgeSignals sig = s;
    sig.stage = 2;
    validate_signals(sig, gold);
    const int b = gold.task_bit;
    return Fraction(sig.p + sig.q + sig.m + b * (sig.n + sig.u),
                    2 + gold.feature_count() + b * (gold.bundle_size + 1));
}

/// Stage-reward judge contract. Backends return structured signals for the
/// trajectory's final answer; ranges are validated before any reward math.
class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeSignals evaluate(const Trajectory& trajectory, const GoldAnnotation& gold) = 0;
};

/// Stage-conditional reward: the branch matching the trajectory's stage label.
inline Fraction dual_reward(const Trajectory& trajectory, const GoldAnnotation& gold, Judge& judge) {
    if (trajectory.stage != 1 && trajectory.stage != 2) {
        throw ArgumentError("dual_reward: stage label must be 1 or 2, got " +
                            std::to_string(trajectory.stage));
    }
    const JudgeSignals signals = judge.evaluate(trajectory, gold);
    return trajectory.stage == 1 ? stage1_reward(signals, gold) : stage2_reward(signals, gold);
}

/// Per-call score r(u) against the gold annotation:
///   mem_search      fraction of retrieved turns from gold sessions, averaged
///                   over the call's queries
///   mem_view        fraction of requested session indices in gold sessions
///   product_search  fraction of returned ids in gold products
///   product_view    fraction of requested ids in gold products
/// Tools with no defined reward return nullopt; empty result sets score 0.
inline std::optional<Fraction> score_tool_call(const ToolCallRecord& call,
                                               const GoldAnnotation& gold) {
    if (call.name == "mem_search") {
        if (!call.payload.is_object() || !call.payload.contains("hit_sessions")) {
            return Fraction(0, 1);
        }
        const Json& per_query = call.payload["hit_sessions"];
        if (!per_query.is_array() || per_query.empty()) return Fraction(0, 1);
        Fraction sum(0, 1);
        for (const auto& hits : per_query) {
            if (!hits.is_array() || hits.empty()) continue; // empty result set scores 0
            std::int64_t in_gold = 0;
            for (const auto& s : hits) {
                if (s.is_number_integer() && gold.in_gold_sessions(s.get<int>())) ++in_gold;
            }
            sum += Fraction(in_gold, static_cast<std::int64_t>(hits.size()));
        }
        return sum / Fraction::whole(static_cast<std::int64_t>(per_query.size()));
    }
    if (call.name == "mem_view") {
        std::vector<int> indices;
        if (call.payload.is_object() && call.payload.contains("session_indices")) {
            for (const auto& s : call.payload["session_indices"]) {
                if (s.is_number_integer()) indices.push_back(s.get<int>());
            }
        } else if (call.arguments.is_object() && call.arguments.contains("session_indices")) {
            for (const auto& s : call.arguments["session_indices"]) {
                if (s.is_number_integer()) indices.push_back(s.get<int>());
            }
        }
        if (indices.empty()) return Fraction(0, 1);
        std::int64_t in_gold = 0;
        for (const int s : indices) {
            if (gold.in_gold_sessions(s)) ++in_gold;
        }
        return Fraction(in_gold, static_cast<std::int64_t>(indices.size()));
    }
    if (call.name == "product_search" || call.name == "product_view") {
        std::vector<std::string> ids;
        if (call.payload.is_object() && call.payload.contains("product_ids")) {
            for (const auto& p : call.payload["product_ids"]) {
                if (p.is_string()) ids.push_back(p.get<std::string>());
            }
        } else if (call.name == "product_view" && call.arguments.is_object() &&
                   call.arguments.contains("product_ids")) {
            for (const auto& p : call.arguments["product_ids"]) {
                if (p.is_string()) ids.push_back(p.get<std::string>());
            }
        }
        if (ids.empty()) return Fraction(0, 1);
        std::int64_t in_gold = 0;
        for (const auto& id : ids) {
            if (gold.is_gold_product(id)) ++in_gold;
        }
        return Fraction(in_gold, static_cast<std::int64_t>(ids.size()));
    }
    return std::nullopt; // no defined reward for this tool
}

struct ToolRewardOptions {
    /// When true, tools without a defined reward count as 0 in the mean
    /// instead of being excluded.
    bool strict = false;
};

/// R_tool: mean of the defined per-call scores; exactly 0 with no scoreable
/// calls.
inline Fraction tool_wise_reward(const Trajectory& trajectory, const GoldAnnotation& gold,
                                 ToolRewardOptions opts = {}) {
    Fraction sum(0, 1);
    std::int64_t counted = 0;
    for (const auto& call : trajectory.tool_log) {
        const auto score = score_tool_call(call, gold);
        if (score) {
            sum += *score;
            ++counted;
        } else if (opts.strict) {
            ++counted;
        }
    }
    if (counted == 0) return Fraction(0, 1);
    return sum / Fraction::whole(counted);
}

struct ToolScore {
    int call_index = 0;
    std::string tool;
    std::optional<Fraction> score;
};

/// Reward components for one trajectory. `r_stage` and `total` are
/// absent when the judge backend failed.
struct RewardBreakdown {
    std::optional<Fraction> r_stage;
    Fraction r_tool;
    Fraction r_fmt;
    std::optional<Fraction> total;
    std::vector<ToolScore> tool_scores;
    std::string judge_error;

    Json to_json() const {
        Json j;
        j["r_stage"] = r_stage ? Json(r_stage->value()) : Json();
        j["r_tool"] = r_tool.value();
        j["r_fmt"] = r_fmt.value();
        j["total"] = total ? Json(total->value()) : Json();
        Json scores = Json::array();
        for (const auto& s : tool_scores) {
            Json sj;
            sj["index"] = s.call_index;
            sj["tool"] = s.tool;
            sj["score"] = s.score ? Json(s.score->value()) : Json();
            scores.push_back(sj);
        }
        j["tool_scores"] = scores;
        if (!judge_error.empty()) j["judge_error"] = judge_error;
        return j;
    }
};

/// R = R_z + R_tool + R_fmt with unit weights; exact rational throughout.
inline RewardBreakdown final_reward(const Trajectory& trajectory, const GoldAnnotation& gold,
                                    Judge& judge, ToolRewardOptions opts = {}) {
    RewardBreakdown out;
    out.r_tool = tool_wise_reward(trajectory, gold, opts);
    out.r_fmt = format_reward(trajectory.format_flags(), trajectory.stage);
    int index = 0;
    for (const auto& call : trajectory.tool_log) {
        out.tool_scores.push_back({index++, call.name, score_tool_call(call, gold)});
    }
    try {
        out.r_stage = dual_reward(trajectory, gold, judge);
        out.total = *out.r_stage + out.r_tool + out.r_fmt;
    } catch (const JudgeError& e) {
        out.judge_error = e.what();
    }
    return out;
}

/// Deterministic stand-in for the LLM judge: containment checks over the
/// final answer plus the feature maps of recommended and viewed products.
class OracleJudge final : public Judge {
public:
    explicit OracleJudge(const Catalog* catalog = nullptr) : catalog_(catalog) {}

    JudgeSignals evaluate(const Trajectory& trajectory, const GoldAnnotation& gold) override {
        JudgeSignals s;
        s.stage = trajectory.stage;
        const std::string answer = normalize_for_match(trajectory.final_answer.value_or(""));

        // products the oracle may inspect: recommendation plus viewed ids
        std::vector<const Product*> visible;
        if (catalog_) {
            auto add = [&](const std::vector<std::string>& ids) {
                for (const auto& id : ids) {
                    if (const Product* p = catalog_->find(id)) visible.push_back(p);
                }
            };
            if (trajectory.recommendation) add(*trajectory.recommendation);
            add(trajectory.viewed_product_ids);
        }

        // m: wanted-feature strings present in the answer or a visible product
        int matched = 0;
        for (const auto& feat : gold.all_wanted_features()) {
            if (feature_present(feat, answer, visible)) ++matched;
        }
        s.m = matched;

        // q: every gold product's category surfaces in the answer or products
        int covered_categories = 0;
        for (const auto& pid : gold.product_ids) {
            if (category_present(pid, answer, visible)) ++covered_categories;
        }
        s.q = covered_categories == static_cast<int>(gold.product_ids.size()) ? 1 : 0;

        if (trajectory.stage == 1) {
            if (gold.task_bit == 1) {
                s.c = std::min(covered_categories, gold.bundle_size);
            }
            return s;
        }

        // stage 2
        std::vector<std::string> rec_distinct;
        if (trajectory.recommendation) {
            for (const auto& id : *trajectory.recommendation) {
                if (std::find(rec_distinct.begin(), rec_distinct.end(), id) == rec_distinct.end()) {
                    rec_distinct.push_back(id);
                }
            }
        }
        const bool f_rec = trajectory.format_flags().rec;
        bool all_known = !rec_distinct.empty() && catalog_ != nullptr;
        for (const auto& id : rec_distinct) {
            if (!catalog_ || !catalog_->find(id)) all_known = false;
        }
        s.p = f_rec && all_known ? 1 : 0;

        if (gold.task_bit == 1) {
            s.n = std::min(static_cast<int>(rec_distinct.size()), gold.bundle_size);
            if (all_known && gold.budget) {
                Money total = Money::from_cents(0);
                for (const auto& id : rec_distinct) total = total + catalog_->find(id)->price;
                const Money effective =
                    gold.voucher ? gold.voucher->effective_total(total) : total;
                s.u = effective <= *gold.budget ? 1 : 0;
            }
        }
        return s;
    }

private:
    static bool feature_present(const std::string& feature, const std::string& norm_answer,
                                const std::vector<const Product*>& visible) {
        if (contains_normalized(norm_answer, feature)) return true;
        const std::string want = normalize_for_match(feature);
        for (const Product* p : visible) {
            for (const auto& [k, v] : p->features) {
                if (normalize_for_match(k + ": " + v) == want) return true;
            }
        }
        return false;
    }

    bool category_present(const std::string& pid, const std::string& norm_answer,
                          const std::vector<const Product*>& visible) const {
        const Product* gold_product = catalog_ ? catalog_->find(pid) : nullptr;
        if (!gold_product) return false;
        const std::string category = normalize_for_match(gold_product->category);
        if (category.empty()) return false;
        if (norm_answer.find(category) != std::string::npos) return true;
        for (const Product* p : visible) {
            if (normalize_for_match(p->category) == category) return true;
        }
        return false;
    }

    const Catalog* catalog_;
};

/// Deterministic stand-in judge, usable without a catalog: scores stage-1
/// style containment only. Provided for reward-only setups and tests.
inline JudgeSignals oracle_judge(const Trajectory& trajectory, const GoldAnnotation& gold,
                                 const Catalog* catalog = nullptr) {
    OracleJudge judge(catalog);
    return judge.evaluate(trajectory, gold);
}

} // namespace companion
