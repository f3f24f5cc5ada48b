#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <httplib.h>

#include "companion/episode.hpp"
#include "companion/eval.hpp"
#include "companion/instance.hpp"
#include "companion/llm_client.hpp"
#include "companion/scripted_policies.hpp"

namespace companion {

inline constexpr int kServiceApiVersion = 1;

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string catalog_path;
    std::string index_dir;   ///< optional; index is built from the catalog when empty
    std::string dataset_path;
    std::string judge_mode = "oracle"; ///< oracle | llm
    std::string prompts_dir;
    int workers = 8;
    int max_inflight = 64;
    int timeout_sec = 30;
    LlmConfig llm;

    static ServiceConfig from_json(const Json& j) {
        ServiceConfig c;
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.catalog_path = j.value("catalog", c.catalog_path);
        c.index_dir = j.value("index", c.index_dir);
        c.dataset_path = j.value("dataset", c.dataset_path);
        c.judge_mode = j.value("judge", c.judge_mode);
        c.prompts_dir = j.value("prompts_dir", c.prompts_dir);
        c.workers = j.value("workers", c.workers);
        c.max_inflight = j.value("max_inflight", c.max_inflight);
        c.timeout_sec = j.value("timeout_sec", c.timeout_sec);
        c.llm = LlmConfig::from_env();
        if (j.contains("llm") && j["llm"].is_object()) {
            const Json& l = j["llm"];
            c.llm.base_url = l.value("base_url", c.llm.base_url);
            c.llm.api_key = l.value("api_key", c.llm.api_key);
            c.llm.model = l.value("model", c.llm.model);
        }
        if (c.judge_mode == "llm" && c.llm.base_url.empty()) {
            throw ArgumentError("service: llm judge mode requires an endpoint "
                                "(COMPANION_LLM_BASE_URL)");
        }
        return c;
    }
};

/// Reward and environment service over immutable catalog/index/dataset state.
/// Per-request work touches only shared read-only structures except for the
/// episode table, which is mutex-guarded with per-episode locks.
class RewardService {
public:
    RewardService(ServiceConfig config, Catalog catalog, ProductIndex index,
                  std::vector<BenchmarkInstance> instances)
        : config_(std::move(config)),
          catalog_(std::move(catalog)),
          index_(std::move(index)),
          instances_(std::move(instances)) {
        for (const auto& inst : instances_) by_id_[inst.instance_id] = &inst;
        if (config_.judge_mode == "llm") {
            judge_ = std::make_unique<LlmJudge>(config_.llm, &catalog_, config_.prompts_dir);
        } else {
            judge_ = std::make_unique<OracleJudge>(&catalog_);
        }
    }

    const Catalog& catalog() const { return catalog_; }
    const ProductIndex& index() const { return index_; }

    void install_routes(httplib::Server& server) {
        server.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
            if (inflight_.fetch_add(1) >= config_.max_inflight) {
                inflight_.fetch_sub(1);
                res.status = 429;
                res.set_content(R"({"error":"too many in-flight requests"})", "application/json");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
        server.set_post_routing_handler(
            [this](const httplib::Request&, httplib::Response&) { inflight_.fetch_sub(1); });

        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            Json j;
            j["status"] = "ok";
            j["api_version"] = kServiceApiVersion;
            j["products"] = catalog_.size();
            j["index_docs"] = index_.doc_count();
            j["instances"] = instances_.size();
            j["judge"] = config_.judge_mode;
            res.set_content(j.dump(), "application/json");
        });

        server.Post("/v1/reward/tool", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> Json {
                const Json body = parse_body(req);
                const BenchmarkInstance& inst = instance_for(body);
                ToolCallRecord call;
                call.name = require_string(body, "tool_name", "reward/tool");
                call.arguments = body.contains("arguments") ? Json(body["arguments"]) : Json();
                call.payload = body.contains("results") ? Json(body["results"]) : Json();
                const auto score = score_tool_call(call, inst.gold);
                Json out;
                out["score"] = score ? Json(score->value()) : Json();
                return out;
            });
        });

        server.Post("/v1/reward/trajectory",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        handle(res, [&]() -> Json {
                            const Json body = parse_body(req);
                            const BenchmarkInstance& inst = instance_for(body);
                            const int stage = require_field(body, "stage", "reward/trajectory").get<int>();
                            const Json& traj_json =
                                require_field(body, "trajectory", "reward/trajectory");
                            const Trajectory traj = replay_for_scoring(inst, stage, traj_json);
                            return final_reward(traj, inst.gold, *judge_).to_json();
                        });
                    });

        server.Post("/v1/env/reset", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> Json {
                const Json body = parse_body(req);
                const BenchmarkInstance& inst = instance_for(body);
                const int stage = require_field(body, "stage", "env/reset").get<int>();
                EpisodeConfig config;
                config.one_stage = body.value("one_stage", false);
                std::string prefs;
                const std::string* prefs_ptr = nullptr;
                if (body.contains("preferences") && body["preferences"].is_string()) {
                    prefs = body["preferences"].get<std::string>();
                    prefs_ptr = &prefs;
                }
                auto episode = std::make_shared<EpisodeEntry>();
                episode->env_data = instance_env(inst);
                episode->instance = &inst;
                episode->state = reset(inst, stage, config, prefs_ptr);
                episode->env = make_tool_env(*episode->env_data);

                std::string id;
                {
                    std::lock_guard<std::mutex> lock(episodes_mu_);
                    id = "ep-" + std::to_string(next_episode_++);
                    episodes_[id] = episode;
                }
                Json out;
                out["episode_id"] = id;
                Json msgs = Json::array();
                for (const auto& m : episode->state.trajectory.messages) {
                    msgs.push_back(Json{{"role", m.role}, {"content", m.content}});
                }
                out["messages"] = msgs;
                return out;
            });
        });

        server.Post("/v1/env/step", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> Json {
                const Json body = parse_body(req);
                const std::string id = require_string(body, "episode_id", "env/step");
                const std::string output = require_string(body, "policy_output", "env/step");
                std::shared_ptr<EpisodeEntry> episode;
                {
                    std::lock_guard<std::mutex> lock(episodes_mu_);
                    const auto it = episodes_.find(id);
                    if (it == episodes_.end()) throw ArgumentError("unknown episode_id '" + id + "'");
                    episode = it->second;
                }
                std::lock_guard<std::mutex> lock(episode->mu);
                const StepResult result = step(episode->state, episode->env, output);
                Json out;
                out["observation"] = result.observation.empty() ? Json() : Json(result.observation);
                out["terminal"] = result.terminal;
                if (result.terminal) {
                    out["trajectory"] = trajectory_to_json(episode->state.trajectory);
                    std::lock_guard<std::mutex> table_lock(episodes_mu_);
                    episodes_.erase(id);
                }
                return out;
            });
        });
    }

    /// Deterministic replay: assistant turns run against this service's
    /// indices, rebuilding tool results for scoring.
    Trajectory replay_for_scoring(const BenchmarkInstance& inst, int stage, const Json& traj_json) {
        auto env_data = instance_env(inst);
        const ToolEnv env = make_tool_env(*env_data);

        EpisodeState st;
        st.stage = stage == 1 ? 1 : 2;
        st.mode = stage == 1 ? StageMode::stage1 : StageMode::stage2;
        st.trajectory.instance_id = inst.instance_id;
        st.trajectory.stage = st.stage;
        st.trajectory.messages.push_back({"user", inst.instruction});

        const Json& turns = require_field(traj_json, "turns", "trajectory");
        if (!turns.is_array()) throw SchemaError("trajectory: 'turns' must be an array");
        for (const auto& turn : turns) {
            if (!turn.is_object() || turn.value("role", "") != "assistant") continue;
            if (st.terminal) break;
            step(st, env, turn.value("content", ""));
        }
        return st.trajectory;
    }

private:
    struct InstanceEnv {
        MemoryStore store;
        MemoryIndex index;
    };
    struct EpisodeEntry {
        std::mutex mu;
        EpisodeState state;
        std::shared_ptr<InstanceEnv> env_data;
        const BenchmarkInstance* instance = nullptr;
        ToolEnv env;
    };

    static Json parse_body(const httplib::Request& req) {
        Json body = Json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            throw SchemaError("request body must be a JSON object");
        }
        return body;
    }

    const BenchmarkInstance& instance_for(const Json& body) const {
        const std::string id = require_string(body, "instance_id", "request");
        const auto it = by_id_.find(id);
        if (it == by_id_.end()) throw ArgumentError("unknown instance_id '" + id + "'");
        return *it->second;
    }

    std::shared_ptr<InstanceEnv> instance_env(const BenchmarkInstance& inst) {
        std::lock_guard<std::mutex> lock(mem_mu_);
        const auto it = mem_cache_.find(inst.instance_id);
        if (it != mem_cache_.end()) return it->second;
        auto env = std::make_shared<InstanceEnv>();
        env->store = inst.memory_store();
        env->index = MemoryIndex::build(env->store, embedder_);
        mem_cache_[inst.instance_id] = env;
        return env;
    }

    ToolEnv make_tool_env(InstanceEnv& data) {
        ToolEnv env;
        env.catalog = &catalog_;
        env.product_index = &index_;
        env.memory = &data.store;
        env.memory_index = &data.index;
        env.embedder = &embedder_;
        env.summarizer = &summarizer_;
        return env;
    }

    template <typename Fn>
    void handle(httplib::Response& res, Fn&& fn) {
        try {
            res.set_content(fn().dump(), "application/json");
        } catch (const ArgumentError& e) {
            res.status = 404;
            res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
        } catch (const SchemaError& e) {
            res.status = 400;
            res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
        }
    }

    ServiceConfig config_;
    Catalog catalog_;
    ProductIndex index_;
    std::vector<BenchmarkInstance> instances_;
    std::map<std::string, const BenchmarkInstance*> by_id_;
    HashingEmbedder embedder_;
    ExtractiveSummarizer summarizer_;
    std::unique_ptr<Judge> judge_;

    std::atomic<int> inflight_{0};
    mutable std::mutex mem_mu_;
    std::map<std::string, std::shared_ptr<InstanceEnv>> mem_cache_;
    std::mutex episodes_mu_;
    std::map<std::string, std::shared_ptr<EpisodeEntry>> episodes_;
    std::uint64_t next_episode_ = 1;
};

/// Loads state per the config and blocks serving requests. Returns only when
/// the listener stops.
inline int serve(const ServiceConfig& config) {
    Catalog catalog = ingest_products(config.catalog_path);
    ProductIndex index = config.index_dir.empty() ? ProductIndex::build(catalog)
                                                  : ProductIndex::load(config.index_dir);
    std::vector<BenchmarkInstance> instances;
    if (!config.dataset_path.empty()) instances = load_instances(config.dataset_path);

    RewardService service(config, std::move(catalog), std::move(index), std::move(instances));
    httplib::Server server;
    const int workers = config.workers;
    server.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
    service.install_routes(server);
    if (!server.listen(config.host, config.port)) {
        throw IoError("cannot bind " + config.host + ":" + std::to_string(config.port));
    }
    return 0;
}

} // namespace companion
