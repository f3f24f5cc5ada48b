#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "companion/episode.hpp"
#include "companion/json_util.hpp"
#include "companion/memory.hpp"
#include "companion/prompts.hpp"
#include "companion/rewards.hpp"
#include "companion/synth.hpp"

namespace companion {

struct LlmConfig {
    std::string base_url; ///< http://host:port[/path-prefix]
    std::string api_key;
    std::string model = "default";
    int max_retries = 3;
    int timeout_sec = 60;

    static LlmConfig from_env() {
        LlmConfig cfg;
        if (const char* v = std::getenv("COMPANION_LLM_BASE_URL")) cfg.base_url = v;
        if (const char* v = std::getenv("COMPANION_LLM_API_KEY")) cfg.api_key = v;
        if (const char* v = std::getenv("COMPANION_JUDGE_MODEL")) cfg.model = v;
        return cfg;
    }
};

namespace detail {

inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    const auto scheme = base_url.find("://");
    const std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = base_url.find('/', host_start);
    if (slash == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, slash), prefix};
}

/// Pulls the first {...} object out of model output that may carry prose or
/// code fences around it.
inline Json first_json_object(const std::string& text) {
    const auto start = text.find('{');
    if (start == std::string::npos) return Json();
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') in_string = true;
        if (c == '{') ++depth;
        if (c == '}') {
            --depth;
            if (depth == 0) {
                return Json::parse(text.substr(start, i - start + 1), nullptr, false);
            }
        }
    }
    return Json();
}

} // namespace detail

/// Minimal chat-completions client with bounded exponential-backoff retries.
class ChatClient {
public:
    explicit ChatClient(LlmConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty()) {
            throw ArgumentError("ChatClient: base_url is required (COMPANION_LLM_BASE_URL)");
        }
    }

    std::string complete(const std::vector<Message>& messages) const {
        Json body;
        body["model"] = config_.model;
        Json msgs = Json::array();
        for (const auto& m : messages) {
            msgs.push_back(Json{{"role", m.role}, {"content", m.content}});
        }
        body["messages"] = msgs;

        const auto [host, prefix] = detail::split_base_url(config_.base_url);
        std::string last_error;
        for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
            }
            httplib::Client client(host);
            client.set_read_timeout(config_.timeout_sec, 0);
            client.set_connection_timeout(config_.timeout_sec, 0);
            httplib::Headers headers;
            if (!config_.api_key.empty()) {
                headers.emplace("Authorization", "Bearer " + config_.api_key);
            }
            const auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                                         "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            const Json parsed = Json::parse(res->body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
                last_error = "malformed completion response";
                continue;
            }
            const Json& choice = parsed["choices"][0];
            if (choice.contains("message") && choice["message"].contains("content") &&
                choice["message"]["content"].is_string()) {
                return choice["message"]["content"].get<std::string>();
            }
            last_error = "completion response missing message content";
        }
        throw BackendError("chat completion failed after " + std::to_string(config_.max_retries) +
                           " attempts: " + last_error);
    }

    const LlmConfig& config() const { return config_; }

private:
    LlmConfig config_;
};

/// Policy backed by a chat-completion endpoint.
class HttpPolicy final : public Policy {
public:
    explicit HttpPolicy(LlmConfig config) : client_(std::move(config)) {}
    std::string complete(const std::vector<Message>& messages) override {
        return client_.complete(messages);
    }

private:
    ChatClient client_;
};

namespace detail {

inline std::string gold_reference_text(const GoldAnnotation& gold, const Catalog* catalog) {
    std::string out;
    for (const auto& [pid, feats] : gold.wanted_features) {
        out += "- product " + pid;
        if (catalog) {
            if (const Product* p = catalog->find(pid)) out += " (" + p->name + ")";
        }
        out += ", required features:";
        for (const auto& f : feats) out += " [" + f + "]";
        out.push_back('\n');
    }
    return out;
}

inline std::string first_user_message(const Trajectory& traj) {
    for (const auto& m : traj.messages) {
        if (m.role == "user") return m.content;
    }
    return "";
}

inline std::string rendered_recommendation(const Trajectory& traj, const Catalog* catalog) {
    if (!traj.recommendation || !catalog) return "(none)";
    std::string out;
    for (const auto& id : *traj.recommendation) {
        if (const Product* p = catalog->find(id)) {
            out += render_product(*p);
            out.push_back('\n');
        } else {
            out += "[" + id + "] not found\n";
        }
    }
    return out.empty() ? "(none)" : out;
}

} // namespace detail

/// LLM-backed stage-reward judge. Prompts are template files overridable at
/// runtime; outputs are strict JSON signal objects validated before use.
class LlmJudge final : public Judge {
public:
    LlmJudge(LlmConfig config, const Catalog* catalog = nullptr, std::string prompts_dir = "")
        : client_(std::move(config)), catalog_(catalog), prompts_dir_(std::move(prompts_dir)) {}

    JudgeSignals evaluate(const Trajectory& traj, const GoldAnnotation& gold) override {
        const bool addon = gold.task_bit == 1;
        std::string prompt = load_template(traj.stage == 1 ? "judge_stage1.txt" : "judge_stage2.txt",
                                           traj.stage == 1 ? prompt_text::kJudgeStage1
                                                           : prompt_text::kJudgeStage2);
        prompt = replace_all(std::move(prompt), "{bundle_note}",
                             addon ? "; the reference bundle holds N products" : "");
        prompt = replace_all(std::move(prompt), "{c_field}",
                             addon ? "\n- \"c\": how many of the N bundle products the hypothesis "
                                     "identifies (0..N)."
                                   : "");
        prompt = replace_all(std::move(prompt), "{n_u_fields}",
                             addon ? "\n- \"n\": how many of the N bundle slots the recommendation "
                                     "covers (0..N).\n- \"u\": 1 if the voucher-adjusted total is "
                                     "within budget, else 0."
                                   : "");
        prompt = replace_all(std::move(prompt), "{user_query}", detail::first_user_message(traj));
        prompt = replace_all(std::move(prompt), "{reference}",
                             detail::gold_reference_text(gold, catalog_));
        prompt = replace_all(std::move(prompt), "{recommended_products}",
                             detail::rendered_recommendation(traj, catalog_));
        prompt = replace_all(std::move(prompt), "{hypothesis}", traj.final_answer.value_or(""));

        std::string raw;
        try {
            raw = client_.complete({{"user", prompt}});
        } catch (const BackendError& e) {
            throw JudgeError(e.what());
        }
        const Json j = detail::first_json_object(raw);
        if (j.is_discarded() || !j.is_object()) {
            throw JudgeError("judge returned no JSON object");
        }
        JudgeSignals s;
        s.stage = traj.stage;
        s.q = j.value("q", 0);
        s.m = j.value("m", 0);
        s.c = j.value("c", 0);
        s.p = j.value("p", 0);
        s.n = j.value("n", 0);
        s.u = j.value("u", 0);
        try {
            validate_signals(s, gold);
        } catch (const ArgumentError& e) {
            throw JudgeError(std::string("judge signals out of range: ") + e.what());
        }
        return s;
    }

private:
    std::string load_template(const std::string& file, std::string_view fallback) const {
        if (!prompts_dir_.empty()) {
            const std::string path = prompts_dir_ + "/" + file;
            if (std::filesystem::exists(path)) return read_text_file(path);
        }
        return std::string(fallback);
    }

    ChatClient client_;
    const Catalog* catalog_;
    std::string prompts_dir_;
};

/// LLM-backed user simulator for low/high hints.
class LlmUserSimulator final : public UserSimulator {
public:
    LlmUserSimulator(LlmConfig config, std::string prompts_dir = "")
        : client_(std::move(config)), prompts_dir_(std::move(prompts_dir)) {}

    Feedback feedback(const std::string& stage1_answer, const GoldAnnotation& gold,
                      HintLevel level) override {
        if (level == HintLevel::none) throw ArgumentError("user_feedback: level must not be none");
        std::string prompt;
        if (level == HintLevel::low) {
            prompt = load_template("user_sim_low.txt", prompt_text::kUserSimLow);
        } else {
            prompt = load_template("user_sim_high.txt", prompt_text::kUserSimHigh);
        }
        prompt = replace_all(std::move(prompt), "{reference}",
                             detail::gold_reference_text(gold, nullptr));
        prompt = replace_all(std::move(prompt), "{hypothesis}", stage1_answer);

        std::string raw;
        try {
            raw = client_.complete({{"user", prompt}});
        } catch (const BackendError& e) {
            throw JudgeError(e.what());
        }
        Feedback fb;
        fb.level = level;
        if (level == HintLevel::low) {
            const std::string verdict = to_lower_ascii(trim(raw));
            if (verdict != "missing" && verdict != "wrong" && verdict != "all matched") {
                throw JudgeError("low-hint simulator returned '" + verdict + "'");
            }
            fb.message = verdict;
            fb.all_matched = verdict == "all matched";
            return fb;
        }
        const Json j = detail::first_json_object(raw);
        if (j.is_discarded() || !j.is_object() || !j.contains("missing") || !j.contains("wrong")) {
            throw JudgeError("high-hint simulator returned no {missing, wrong} object");
        }
        fb.detail = Json{{"missing", j["missing"]}, {"wrong", j["wrong"]}};
        fb.message = fb.detail.dump();
        fb.all_matched = j["missing"].empty() && j["wrong"].empty();
        return fb;
    }

private:
    std::string load_template(const std::string& file, std::string_view fallback) const {
        if (!prompts_dir_.empty()) {
            const std::string path = prompts_dir_ + "/" + file;
            if (std::filesystem::exists(path)) return read_text_file(path);
        }
        return std::string(fallback);
    }

    ChatClient client_;
    std::string prompts_dir_;
};

/// LLM-backed synthesis generator; slots are rendered into the prompt and the
/// raw completion is returned for the pipeline's validators to accept or
/// regenerate.
class LlmGenerator final : public GeneratorBackend {
public:
    explicit LlmGenerator(LlmConfig config) : client_(std::move(config)) {}
    std::string identity() const override { return "llm:" + client_.config().model; }

    std::string generate(const std::string& template_id, const Json& slots) override {
        std::string prompt;
        if (template_id == "instruction_single") {
            prompt = replace_all(std::string(prompt_text::kInstructionSingle), "{product_name}",
                                 slots.at("product_name").get<std::string>());
        } else if (template_id == "instruction_addon") {
            std::string names;
            for (const auto& n : slots.at("product_names")) {
                names += n.get<std::string>() + "\n";
            }
            prompt = replace_all(std::string(prompt_text::kInstructionAddon), "{product_names}", names);
            prompt = replace_all(std::move(prompt), "{voucher}", slots.at("voucher").get<std::string>());
            prompt = replace_all(std::move(prompt), "{budget}", slots.at("budget").get<std::string>());
        } else if (template_id == "preference_dialogue") {
            std::string feats;
            for (const auto& f : slots.at("features")) {
                feats += f[0].get<std::string>() + ": " + f[1].get<std::string>() + "\n";
            }
            prompt = replace_all(std::string(prompt_text::kDialogueGen), "{number_of_features}",
                                 std::to_string(slots.at("n_features").get<int>()));
            prompt = replace_all(std::move(prompt), "{product_name}",
                                 slots.at("product_name").get<std::string>());
            prompt = replace_all(std::move(prompt), "{features}", feats);
        } else {
            throw BackendError("llm backend: unknown template '" + template_id + "'");
        }
        return client_.complete({{"user", prompt}});
    }

private:
    ChatClient client_;
};

/// LLM-backed session summarizer for mem_summarize_by_date.
class LlmSummarizer final : public Summarizer {
public:
    explicit LlmSummarizer(LlmConfig config) : client_(std::move(config)) {}
    std::string summarize(const Session& session) const override {
        std::string text = "Summarize this dialogue session in at most three sentences:\n";
        for (const auto& t : session.turns) {
            text += t.role + ": " + t.content + "\n";
        }
        return client_.complete({{"user", text}});
    }

private:
    ChatClient client_;
};

/// Remote embedding backend speaking `POST /embed {"texts": [...]}`.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string base_url, int dim, std::string name = "remote")
        : base_url_(std::move(base_url)), dim_(dim), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    int dim() const override { return dim_; }

    std::vector<double> embed(std::string_view text) const override {
        return embed_batch({std::string(text)}).front();
    }

    std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) const override {
        const auto [host, prefix] = detail::split_base_url(base_url_);
        httplib::Client client(host);
        Json body;
        body["texts"] = texts;
        const auto res = client.Post(prefix + "/embed", body.dump(), "application/json");
        if (!res || res->status != 200) {
            throw BackendError("remote embedder request failed");
        }
        const Json parsed = Json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("vectors")) {
            throw BackendError("remote embedder returned malformed response");
        }
        std::vector<std::vector<double>> out;
        for (const auto& vec : parsed["vectors"]) {
            std::vector<double> v;
            for (const auto& x : vec) v.push_back(x.get<double>());
            if (static_cast<int>(v.size()) != dim_) {
                throw BackendError("remote embedder returned wrong dimension");
            }
            out.push_back(std::move(v));
        }
        if (out.size() != texts.size()) {
            throw BackendError("remote embedder returned wrong batch size");
        }
        return out;
    }

private:
    std::string base_url_;
    int dim_;
    std::string name_;
};

} // namespace companion
