#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "companion/episode.hpp"
#include "companion/eval.hpp"
#include "companion/instance.hpp"
#include "companion/llm_client.hpp"
#include "companion/scripted_policies.hpp"
#include "companion/service.hpp"
#include "companion/synth.hpp"

namespace companion {

namespace cli_detail {

inline void print_error(const std::string& type, const std::string& message) {
    Json j;
    j["error"] = Json{{"type", type}, {"message", message}};
    std::cerr << j.dump() << "\n";
}

inline std::unique_ptr<Judge> make_judge(const std::string& mode, const Catalog& catalog,
                                         const std::string& prompts_dir) {
    if (mode == "llm") {
        return std::make_unique<LlmJudge>(LlmConfig::from_env(), &catalog, prompts_dir);
    }
    if (mode == "oracle") return std::make_unique<OracleJudge>(&catalog);
    throw ArgumentError("unknown judge mode '" + mode + "'");
}

inline std::unique_ptr<Policy> make_policy(const std::string& mode,
                                           const BenchmarkInstance& instance,
                                           const Catalog& catalog) {
    if (mode == "perfect") return std::make_unique<PerfectPolicy>(instance, catalog);
    if (mode == "empty") return std::make_unique<EmptyPolicy>();
    if (mode == "http") return std::make_unique<HttpPolicy>(LlmConfig::from_env());
    throw ArgumentError("unknown policy mode '" + mode + "'");
}

/// "config file overrides flags": values present in the JSON file win.
inline Json load_config_file(const std::string& path) {
    if (path.empty()) return Json::object();
    Json j = Json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw SchemaError(path + ": config must be a JSON object");
    }
    return j;
}

template <typename T>
void override_from(const Json& config, const char* key, T& value) {
    if (config.contains(key)) value = config[key].get<T>();
}

struct RunOptions {
    std::string dataset;
    std::string catalog_path;
    std::string index_dir;
    std::string out_dir = "runs";
    std::string stage = "both"; ///< 1 | 2 | both | one-stage
    std::string hint = "none";
    std::string judge = "oracle";
    std::string policy = "http";
    std::string prompts_dir;
    std::string config_path;
    std::string instance_filter;
    int max_turns = 20;
    int workers = 1;
};

inline int cmd_run(const RunOptions& raw) {
    RunOptions opts = raw;
    const Json config = load_config_file(opts.config_path);
    override_from(config, "dataset", opts.dataset);
    override_from(config, "catalog", opts.catalog_path);
    override_from(config, "index", opts.index_dir);
    override_from(config, "out", opts.out_dir);
    override_from(config, "stage", opts.stage);
    override_from(config, "hint", opts.hint);
    override_from(config, "judge", opts.judge);
    override_from(config, "policy", opts.policy);
    override_from(config, "max_turns", opts.max_turns);
    override_from(config, "workers", opts.workers);
    if (opts.workers < 1) throw ArgumentError("run: --workers must be >= 1");

    Catalog catalog = ingest_products(opts.catalog_path);
    ProductIndex index = opts.index_dir.empty() ? ProductIndex::build(catalog)
                                                : ProductIndex::load(opts.index_dir);
    std::vector<BenchmarkInstance> instances = load_instances(opts.dataset);
    if (!opts.instance_filter.empty()) {
        std::vector<BenchmarkInstance> selected;
        for (auto& inst : instances) {
            if (opts.instance_filter.find(inst.instance_id) != std::string::npos) {
                selected.push_back(std::move(inst));
            }
        }
        instances = std::move(selected);
    }
    if (instances.empty()) throw ArgumentError("run: no instances selected");

    EpisodeConfig episode_config;
    episode_config.max_turns = opts.max_turns;
    episode_config.hint = hint_level_from_string(opts.hint);
    episode_config.one_stage = opts.stage == "one-stage";
    episode_config.prompts_dir = opts.prompts_dir;

    HashingEmbedder embedder;
    ExtractiveSummarizer summarizer;
    OracleUserSimulator oracle_sim;
    std::unique_ptr<LlmUserSimulator> llm_sim;
    UserSimulator* simulator = &oracle_sim;
    if (opts.judge == "llm") {
        llm_sim = std::make_unique<LlmUserSimulator>(LlmConfig::from_env(), opts.prompts_dir);
        simulator = llm_sim.get();
    }

    if (opts.stage != "both" && opts.stage != "1" && opts.stage != "2" &&
        opts.stage != "one-stage") {
        throw ArgumentError("run: --stage must be one of 1, 2, both, one-stage");
    }

    // Episodes are independent; workers pull instances off a shared cursor
    // and write into per-instance slots so output order never depends on
    // completion order.
    struct Slot {
        std::optional<Trajectory> stage1;
        std::optional<Trajectory> stage2;
        std::vector<Json> feedback;
        std::string error;
    };
    std::vector<Slot> slots(instances.size());
    std::atomic<std::size_t> cursor{0};

    auto run_one = [&](std::size_t i) {
        const BenchmarkInstance& inst = instances[i];
        Slot& slot = slots[i];
        const MemoryStore store = inst.memory_store();
        const MemoryIndex mem_index = MemoryIndex::build(store, embedder);
        ToolEnv env;
        env.catalog = &catalog;
        env.product_index = &index;
        env.memory = &store;
        env.memory_index = &mem_index;
        env.embedder = &embedder;
        env.summarizer = &summarizer;

        const auto policy = make_policy(opts.policy, inst, catalog);
        if (opts.stage == "both") {
            TwoStageResult result = run_two_stage(inst, *policy, env, episode_config, simulator);
            for (const auto& fb : result.feedback) {
                Json j;
                j["instance_id"] = inst.instance_id;
                j["round"] = fb.round;
                j["hint"] = opts.hint;
                j["message"] = fb.message;
                j["all_matched"] = fb.all_matched;
                slot.feedback.push_back(j);
            }
            slot.stage1 = std::move(result.stage1);
            slot.stage2 = std::move(result.stage2);
        } else if (opts.stage == "1") {
            slot.stage1 = run_episode(inst, 1, *policy, env, episode_config);
        } else if (opts.stage == "2") {
            // standalone stage 2 receives the annotated preferences, the
            // ground-truth-context ablation
            std::string prefs = "Confirmed preferences:";
            for (const auto& f : inst.gold.all_wanted_features()) prefs += "\n- " + f;
            slot.stage2 = run_episode(inst, 2, *policy, env, episode_config, &prefs);
        } else { // one-stage
            slot.stage2 = run_episode(inst, 1, *policy, env, episode_config);
        }
    };

    auto worker = [&] {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= instances.size()) return;
            try {
                run_one(i);
            } catch (const std::exception& e) {
                slots[i].error = e.what();
            }
        }
    };
    const int worker_count = std::min<int>(opts.workers, static_cast<int>(instances.size()));
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].error.empty()) {
            throw ArgumentError("run: instance " + instances[i].instance_id + " failed: " +
                                slots[i].error);
        }
    }

    std::vector<Trajectory> stage1_logs;
    std::vector<Trajectory> stage2_logs;
    std::vector<Json> feedback_logs;
    for (auto& slot : slots) {
        if (slot.stage1) stage1_logs.push_back(std::move(*slot.stage1));
        if (slot.stage2) stage2_logs.push_back(std::move(*slot.stage2));
        for (auto& j : slot.feedback) feedback_logs.push_back(std::move(j));
    }

    std::filesystem::create_directories(opts.out_dir);
    if (!stage1_logs.empty()) save_trajectories(opts.out_dir + "/stage1.jsonl", stage1_logs);
    if (!stage2_logs.empty()) save_trajectories(opts.out_dir + "/stage2.jsonl", stage2_logs);
    if (!feedback_logs.empty()) {
        std::string out;
        for (const auto& j : feedback_logs) {
            out += j.dump();
            out.push_back('\n');
        }
        write_text_file(opts.out_dir + "/feedback.jsonl", out);
    }
    std::cout << "wrote " << stage1_logs.size() << " stage-1 and " << stage2_logs.size()
              << " stage-2 trajectories to " << opts.out_dir << "\n";
    return 0;
}

} // namespace cli_detail

/// CLI entry point; argv[0] is the program name.
inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"companion-gym: tool-interactive shopping-agent environment"};
    app.require_subcommand(1);

    // --- index -------------------------------------------------------------
    auto* index_cmd = app.add_subcommand("index", "build the sparse product index");
    std::string index_products;
    std::string index_out = "index";
    Bm25Params bm25;
    index_cmd->add_option("--products", index_products, "product JSONL path")->required();
    index_cmd->add_option("--out", index_out, "output index directory");
    index_cmd->add_option("--k1", bm25.k1, "BM25 k1");
    index_cmd->add_option("--b", bm25.b, "BM25 b");
    index_cmd->add_flag("--stem", bm25.stem, "enable light plural stemming");

    // --- gen ---------------------------------------------------------------
    auto* gen_cmd = app.add_subcommand("gen", "synthesize benchmark instances");
    std::string gen_out = "dataset";
    std::string gen_catalog;
    std::string gen_pool;
    std::string gen_backend = "mock";
    std::string gen_config;
    int gen_n = -1;
    int gen_single = 10;
    int gen_addon = 10;
    int gen_synthetic_products = 300;
    int gen_turns_min = 15;
    int gen_turns_max = 50;
    std::uint64_t gen_seed = 1;
    double gen_split = 0.8;
    gen_cmd->add_option("--out", gen_out, "output directory");
    gen_cmd->add_option("--catalog", gen_catalog,
                        "product JSONL (omit to generate a synthetic catalog)");
    gen_cmd->add_option("--pool", gen_pool, "distractor session pool JSON");
    gen_cmd->add_option("--n", gen_n, "total instance count, split evenly across tasks");
    gen_cmd->add_option("--single", gen_single, "single-product instance count");
    gen_cmd->add_option("--addon", gen_addon, "add-on-deal instance count");
    gen_cmd->add_option("--seed", gen_seed, "base RNG seed");
    gen_cmd->add_option("--split", gen_split, "train fraction");
    gen_cmd->add_option("--backend", gen_backend, "generation backend: mock | llm");
    gen_cmd->add_option("--synthetic-products", gen_synthetic_products,
                        "size of the generated catalog when --catalog is omitted");
    gen_cmd->add_option("--turns-min", gen_turns_min, "minimum history turns per instance");
    gen_cmd->add_option("--turns-max", gen_turns_max, "maximum history turns per instance");
    gen_cmd->add_option("--config", gen_config, "JSON config file (overrides flags)");

    // --- run ---------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "run episodes against a policy");
    cli_detail::RunOptions run_opts;
    run_cmd->add_option("--dataset", run_opts.dataset, "instance JSONL")->required();
    run_cmd->add_option("--catalog", run_opts.catalog_path, "product JSONL")->required();
    run_cmd->add_option("--index", run_opts.index_dir, "prebuilt index directory");
    run_cmd->add_option("--out", run_opts.out_dir, "output directory");
    run_cmd->add_option("--stage", run_opts.stage, "1 | 2 | both | one-stage");
    run_cmd->add_option("--hint", run_opts.hint, "none | low | high");
    run_cmd->add_option("--judge", run_opts.judge, "oracle | llm (drives feedback)");
    run_cmd->add_option("--policy", run_opts.policy, "http | perfect | empty");
    run_cmd->add_option("--prompts-dir", run_opts.prompts_dir, "prompt template overrides");
    run_cmd->add_option("--max-turns", run_opts.max_turns, "assistant turn cap");
    run_cmd->add_option("--workers", run_opts.workers, "parallel episode workers");
    run_cmd->add_option("--instances", run_opts.instance_filter,
                        "comma-separated instance ids to run");
    run_cmd->add_option("--config", run_opts.config_path, "JSON config file (overrides flags)");

    // --- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "score trajectory logs");
    std::string eval_dataset;
    std::string eval_catalog;
    std::string eval_judge = "oracle";
    std::string eval_report;
    std::string eval_prompts;
    std::vector<std::string> eval_logs;
    eval_cmd->add_option("--dataset", eval_dataset, "instance JSONL")->required();
    eval_cmd->add_option("--catalog", eval_catalog, "product JSONL")->required();
    eval_cmd->add_option("--traj", eval_logs, "trajectory JSONL file(s)")->required();
    eval_cmd->add_option("--judge", eval_judge, "oracle | llm");
    eval_cmd->add_option("--report", eval_report, "write the JSON report here");
    eval_cmd->add_option("--prompts-dir", eval_prompts, "prompt template overrides");

    // --- serve -------------------------------------------------------------
    auto* serve_cmd = app.add_subcommand("serve", "HTTP reward/environment service");
    ServiceConfig serve_config;
    std::string serve_config_path;
    serve_cmd->add_option("--host", serve_config.host, "bind address");
    serve_cmd->add_option("--port", serve_config.port, "bind port");
    serve_cmd->add_option("--catalog", serve_config.catalog_path, "product JSONL");
    serve_cmd->add_option("--index", serve_config.index_dir, "prebuilt index directory");
    serve_cmd->add_option("--dataset", serve_config.dataset_path, "instance JSONL");
    serve_cmd->add_option("--judge", serve_config.judge_mode, "oracle | llm");
    serve_cmd->add_option("--workers", serve_config.workers, "worker threads");
    serve_cmd->add_option("--max-inflight", serve_config.max_inflight, "in-flight request cap");
    serve_cmd->add_option("--config", serve_config_path, "JSON config file (overrides flags)");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) {
            cli_detail::print_error("usage", e.what());
            return e.get_exit_code();
        }
        return app.exit(e); // --help and friends
    }

    try {
        if (index_cmd->parsed()) {
            Catalog catalog = ingest_products(index_products);
            ProductIndex index = ProductIndex::build(catalog, bm25);
            index.save(index_out);
            std::cout << "indexed " << index.doc_count() << " products into " << index_out << "\n";
            return 0;
        }

        if (gen_cmd->parsed()) {
            const Json config = cli_detail::load_config_file(gen_config);
            cli_detail::override_from(config, "out", gen_out);
            cli_detail::override_from(config, "catalog", gen_catalog);
            cli_detail::override_from(config, "seed", gen_seed);
            cli_detail::override_from(config, "split", gen_split);
            cli_detail::override_from(config, "single", gen_single);
            cli_detail::override_from(config, "addon", gen_addon);
            cli_detail::override_from(config, "backend", gen_backend);
            cli_detail::override_from(config, "turns_min", gen_turns_min);
            cli_detail::override_from(config, "turns_max", gen_turns_max);
            if (config.contains("n")) gen_n = config["n"].get<int>();
            if (gen_n >= 0) {
                gen_single = gen_n - gen_n / 2;
                gen_addon = gen_n / 2;
            }

            std::filesystem::create_directories(gen_out);
            Catalog catalog;
            if (gen_catalog.empty()) {
                catalog = make_synthetic_catalog(gen_synthetic_products, gen_seed);
                catalog.save_jsonl(gen_out + "/catalog.jsonl");
            } else {
                catalog = ingest_products(gen_catalog);
            }
            ProductIndex index = ProductIndex::build(catalog);

            SynthConfig synth_config;
            synth_config.single_count = gen_single;
            synth_config.addon_count = gen_addon;
            synth_config.train_split = gen_split;
            synth_config.seed = gen_seed;
            synth_config.target_turns = {gen_turns_min, gen_turns_max};

            HashingEmbedder embedder;
            std::unique_ptr<GeneratorBackend> backend;
            if (gen_backend == "mock") {
                backend = std::make_unique<MockGenerator>();
            } else if (gen_backend == "llm") {
                backend = std::make_unique<LlmGenerator>(LlmConfig::from_env());
            } else {
                throw ArgumentError("gen: --backend must be mock or llm");
            }
            const auto pool =
                gen_pool.empty() ? default_distractor_pool() : distractor_pool_from_file(gen_pool);

            DatasetResult result =
                generate_dataset(catalog, index, embedder, *backend, synth_config, pool);
            save_instances(gen_out + "/train.jsonl", result.train);
            save_instances(gen_out + "/test.jsonl", result.test);
            write_text_file(gen_out + "/stats.json", result.stats.to_json().dump(2) + "\n");
            std::cout << "emitted " << result.stats.emitted << " instances (" << result.train.size()
                      << " train, " << result.test.size() << " test) to " << gen_out << "\n";
            if (result.stats.emitted < result.stats.requested) {
                cli_detail::print_error("generation",
                                        "generation budget exhausted before target count");
                return 1;
            }
            return 0;
        }

        if (run_cmd->parsed()) return cli_detail::cmd_run(run_opts);

        if (eval_cmd->parsed()) {
            Catalog catalog = ingest_products(eval_catalog);
            std::vector<BenchmarkInstance> instances = load_instances(eval_dataset);
            std::vector<Trajectory> trajectories;
            for (const auto& path : eval_logs) {
                for (auto& t : load_trajectories(path)) trajectories.push_back(std::move(t));
            }
            const auto judge = cli_detail::make_judge(eval_judge, catalog, eval_prompts);
            const EvalReport report = evaluate_logs(trajectories, instances, catalog, *judge);
            if (report.has_accuracy) std::printf("Acc: %.1f\n", report.accuracy);
            if (report.has_success) std::printf("Succ: %.1f\n", report.success_rate);
            std::printf("Turns: %.2f  ToolUses: %.2f  RespChars: %.2f\n",
                        report.behavioral.mean_turns, report.behavioral.mean_tool_uses,
                        report.behavioral.mean_response_chars);
            if (!eval_report.empty()) {
                write_text_file(eval_report, report.to_json().dump(2) + "\n");
            }
            return 0;
        }

        if (serve_cmd->parsed()) {
            ServiceConfig config = serve_config;
            if (!serve_config_path.empty()) {
                config = ServiceConfig::from_json(
                    cli_detail::load_config_file(serve_config_path));
            }
            std::cout << "serving on " << config.host << ":" << config.port << "\n";
            return serve(config);
        }
    } catch (const SchemaError& e) {
        cli_detail::print_error("schema", e.what());
        return 1;
    } catch (const ArgumentError& e) {
        cli_detail::print_error("argument", e.what());
        return 1;
    } catch (const BackendError& e) {
        cli_detail::print_error("backend", e.what());
        return 1;
    } catch (const IoError& e) {
        cli_detail::print_error("io", e.what());
        return 1;
    } catch (const std::exception& e) {
        cli_detail::print_error("internal", e.what());
        return 1;
    }
    return 0;
}

} // namespace companion
