#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <thread>

#include "companion/cli.hpp"
#include "companion/eval.hpp"
#include "companion/scripted_policies.hpp"
#include "companion/synth.hpp"

using namespace companion;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    std::string str(const std::string& child = "") const {
        return child.empty() ? path.string() : (path / child).string();
    }
};

struct World {
    Catalog catalog = make_synthetic_catalog(120, 21);
    ProductIndex index = ProductIndex::build(catalog);
    HashingEmbedder embedder;
    ExtractiveSummarizer summarizer;
    MockGenerator backend;
    std::vector<BenchmarkInstance> instances;

    World() {
        SynthConfig config;
        config.single_count = 3;
        config.addon_count = 1;
        config.seed = 77;
        const DatasetResult result = generate_dataset(catalog, index, embedder, backend, config);
        for (const auto& inst : result.train) instances.push_back(inst);
        for (const auto& inst : result.test) instances.push_back(inst);
    }

    TwoStageResult run_instance(const BenchmarkInstance& inst, Policy& policy) {
        const MemoryStore store = inst.memory_store();
        const MemoryIndex mem_index = MemoryIndex::build(store, embedder);
        ToolEnv env;
        env.catalog = &catalog;
        env.product_index = &index;
        env.memory = &store;
        env.memory_index = &mem_index;
        env.embedder = &embedder;
        env.summarizer = &summarizer;
        return run_two_stage(inst, policy, env, EpisodeConfig{});
    }
};

} // namespace

TEST_CASE("accuracy and success metrics over perfect and empty policies") {
    World w;
    REQUIRE(w.instances.size() == 4);
    OracleJudge judge(&w.catalog);

    std::vector<Trajectory> stage1_perfect;
    std::vector<Trajectory> stage2_perfect;
    std::vector<Trajectory> stage1_empty;
    std::vector<Trajectory> stage2_empty;
    for (const auto& inst : w.instances) {
        PerfectPolicy perfect(inst, w.catalog);
        TwoStageResult good = w.run_instance(inst, perfect);
        stage1_perfect.push_back(std::move(good.stage1));
        stage2_perfect.push_back(std::move(good.stage2));
        EmptyPolicy empty;
        TwoStageResult bad = w.run_instance(inst, empty);
        stage1_empty.push_back(std::move(bad.stage1));
        stage2_empty.push_back(std::move(bad.stage2));
    }
    const auto by_id = index_instances(w.instances);
    CHECK(accuracy_metric(stage1_perfect, by_id, judge) == 100.0);
    CHECK(success_metric(stage2_perfect, by_id, w.catalog, judge) == 100.0);
    CHECK(accuracy_metric(stage1_empty, by_id, judge) == 0.0);
    CHECK(success_metric(stage2_empty, by_id, w.catalog, judge) == 0.0);

    SUBCASE("partial accuracy averages m/F per instance") {
        // craft two stage-1 logs: one perfect, one half-covered
        const BenchmarkInstance* single = nullptr;
        for (const auto& inst : w.instances) {
            if (inst.task_bit == 0 && inst.gold.feature_count() % 2 == 0) single = &inst;
        }
        if (single != nullptr) {
            Trajectory full;
            full.instance_id = single->instance_id;
            full.stage = 1;
            full.terminal = true;
            std::string text = "preferences:";
            for (const auto& f : single->gold.all_wanted_features()) text += " " + f + ";";
            full.final_answer = text;

            Trajectory half = full;
            std::string half_text = "preferences:";
            const auto feats = single->gold.all_wanted_features();
            for (std::size_t i = 0; i < feats.size() / 2; ++i) half_text += " " + feats[i] + ";";
            half.final_answer = half_text;

            const double acc = accuracy_metric({full, half}, by_id, judge);
            CHECK(acc == 75.0);
        }
    }
    SUBCASE("empty sets and unknown instances are errors") {
        CHECK_THROWS_AS(accuracy_metric({}, by_id, judge), ArgumentError);
        CHECK_THROWS_AS(success_metric({}, by_id, w.catalog, judge), ArgumentError);
        Trajectory stray;
        stray.instance_id = "nope";
        stray.stage = 1;
        CHECK_THROWS_AS(accuracy_metric({stray}, by_id, judge), ArgumentError);
    }
}

TEST_CASE("trajectory JSONL round trip preserves scoring inputs") {
    World w;
    const BenchmarkInstance& inst = w.instances[0];
    PerfectPolicy policy(inst, w.catalog);
    TwoStageResult result = w.run_instance(inst, policy);

    TempDir dir("companion_eval_roundtrip");
    save_trajectories(dir.str("stage2.jsonl"), {result.stage2});
    const auto loaded = load_trajectories(dir.str("stage2.jsonl"));
    REQUIRE(loaded.size() == 1);
    const Trajectory& back = loaded[0];
    CHECK(back.instance_id == result.stage2.instance_id);
    CHECK(back.stage == 2);
    CHECK(back.terminal);
    CHECK(back.final_answer == result.stage2.final_answer);
    CHECK(back.recommendation == result.stage2.recommendation);
    REQUIRE(back.tool_log.size() == result.stage2.tool_log.size());
    for (std::size_t i = 0; i < back.tool_log.size(); ++i) {
        CHECK(back.tool_log[i].payload == result.stage2.tool_log[i].payload);
    }
    OracleJudge judge(&w.catalog);
    const RewardBreakdown a = final_reward(result.stage2, inst.gold, judge);
    const RewardBreakdown b = final_reward(back, inst.gold, judge);
    REQUIRE(a.total.has_value());
    REQUIRE(b.total.has_value());
    CHECK(*a.total == *b.total);
}

TEST_CASE("cli: gen is deterministic and eval reports the metrics") {
    TempDir gen_a("companion_cli_gen_a");
    TempDir gen_b("companion_cli_gen_b");
    CHECK(run_cli({"companion", "gen", "--n", "4", "--seed", "1", "--out", gen_a.str(),
                   "--synthetic-products", "120"}) == 0);
    CHECK(run_cli({"companion", "gen", "--n", "4", "--seed", "1", "--out", gen_b.str(),
                   "--synthetic-products", "120"}) == 0);
    for (const char* file : {"train.jsonl", "test.jsonl", "stats.json", "catalog.jsonl"}) {
        CHECK(read_text_file(gen_a.str(file)) == read_text_file(gen_b.str(file)));
    }
    const Json stats = Json::parse(read_text_file(gen_a.str("stats.json")));
    CHECK(stats["emitted"] == 4);
    for (const auto& t : stats["turn_counts"]) {
        CHECK(t.get<int>() >= 15);
        CHECK(t.get<int>() <= 50);
    }

    // index subcommand over the generated catalog
    TempDir index_dir("companion_cli_index");
    CHECK(run_cli({"companion", "index", "--products", gen_a.str("catalog.jsonl"), "--out",
                   index_dir.str()}) == 0);
    CHECK(fs::exists(index_dir.path / "index-meta.json"));

    // run the perfect policy over both stages, then eval the logs
    TempDir run_dir("companion_cli_run");
    CHECK(run_cli({"companion", "run", "--dataset", gen_a.str("train.jsonl"), "--catalog",
                   gen_a.str("catalog.jsonl"), "--index", index_dir.str(), "--stage", "both",
                   "--hint", "high", "--policy", "perfect", "--out", run_dir.str()}) == 0);
    CHECK(fs::exists(run_dir.path / "stage1.jsonl"));
    CHECK(fs::exists(run_dir.path / "stage2.jsonl"));
    CHECK(fs::exists(run_dir.path / "feedback.jsonl"));

    TempDir report_dir("companion_cli_report");
    CHECK(run_cli({"companion", "eval", "--dataset", gen_a.str("train.jsonl"), "--catalog",
                   gen_a.str("catalog.jsonl"), "--traj", run_dir.str("stage1.jsonl"), "--traj",
                   run_dir.str("stage2.jsonl"), "--report", report_dir.str("report.json")}) == 0);
    const Json report = Json::parse(read_text_file(report_dir.str("report.json")));
    CHECK(report["accuracy"].get<double>() == 100.0);
    CHECK(report["success_rate"].get<double>() == 100.0);

    // unknown flags exit non-zero
    CHECK(run_cli({"companion", "eval", "--nonsense"}) != 0);
    CHECK(run_cli({"companion", "run", "--dataset", "missing.jsonl", "--catalog",
                   "missing.jsonl"}) != 0);
}

TEST_CASE("prompt files ship verbatim copies of the embedded defaults") {
    const std::string repo_prompts = std::string(TEST_SOURCE_DIR) + "/../prompts";
    REQUIRE(fs::exists(repo_prompts + "/stage1_system.txt"));
    CHECK(read_text_file(repo_prompts + "/stage1_system.txt") ==
          std::string(prompt_text::kStage1System));
    CHECK(read_text_file(repo_prompts + "/stage2_system.txt") ==
          std::string(prompt_text::kStage2System));
    CHECK(read_text_file(repo_prompts + "/one_stage_system.txt") ==
          std::string(prompt_text::kOneStageSystem));
    CHECK(read_text_file(repo_prompts + "/judge_stage1.txt") ==
          std::string(prompt_text::kJudgeStage1));
    CHECK(read_text_file(repo_prompts + "/judge_stage2.txt") ==
          std::string(prompt_text::kJudgeStage2));
    CHECK(read_text_file(repo_prompts + "/eval_single.txt") ==
          std::string(prompt_text::kEvalSingle));
    CHECK(read_text_file(repo_prompts + "/eval_addon.txt") == std::string(prompt_text::kEvalAddon));
    CHECK(read_text_file(repo_prompts + "/user_sim_low.txt") ==
          std::string(prompt_text::kUserSimLow));
    CHECK(read_text_file(repo_prompts + "/user_sim_high.txt") ==
          std::string(prompt_text::kUserSimHigh));
}

TEST_CASE("cli: run drives an http policy through a chat-completions endpoint") {
    // mock chat endpoint that always answers immediately
    httplib::Server server;
    server.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
        Json out;
        out["choices"] = Json::array(
            {Json{{"message", Json{{"role", "assistant"},
                                   {"content", "<answer>nothing to report</answer>"}}}}});
        res.set_content(out.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&server] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    setenv("COMPANION_LLM_BASE_URL", base.c_str(), 1);

    TempDir data("companion_cli_http_data");
    REQUIRE(run_cli({"companion", "gen", "--single", "1", "--addon", "0", "--seed", "3", "--out",
                     data.str(), "--synthetic-products", "120", "--split", "1.0"}) == 0);
    TempDir runs("companion_cli_http_runs");
    CHECK(run_cli({"companion", "run", "--dataset", data.str("train.jsonl"), "--catalog",
                   data.str("catalog.jsonl"), "--stage", "1", "--policy", "http", "--out",
                   runs.str()}) == 0);
    const auto logs = load_trajectories(runs.str("stage1.jsonl"));
    REQUIRE(logs.size() == 1);
    CHECK(logs[0].terminal);
    CHECK(logs[0].final_answer == "nothing to report");

    unsetenv("COMPANION_LLM_BASE_URL");
    server.stop();
    listener.join();
}

TEST_CASE("cli: one-stage mode and instance filtering") {
    TempDir data("companion_cli_onestage_data");
    REQUIRE(run_cli({"companion", "gen", "--single", "2", "--addon", "0", "--seed", "11", "--out",
                     data.str(), "--synthetic-products", "120", "--split", "1.0"}) == 0);
    const auto instances = load_instances(data.str("train.jsonl"));
    REQUIRE(instances.size() == 2);

    TempDir runs("companion_cli_onestage_runs");
    CHECK(run_cli({"companion", "run", "--dataset", data.str("train.jsonl"), "--catalog",
                   data.str("catalog.jsonl"), "--stage", "one-stage", "--policy", "perfect",
                   "--out", runs.str(), "--instances", instances[0].instance_id}) == 0);
    // one-stage trajectories land in the stage-2 log, only the filtered instance ran
    CHECK(!fs::exists(runs.path / "stage1.jsonl"));
    const auto logs = load_trajectories(runs.str("stage2.jsonl"));
    REQUIRE(logs.size() == 1);
    CHECK(logs[0].instance_id == instances[0].instance_id);
    CHECK(logs[0].stage == 2);
    CHECK(logs[0].recommendation.has_value());

    TempDir report_dir("companion_cli_onestage_report");
    CHECK(run_cli({"companion", "eval", "--dataset", data.str("train.jsonl"), "--catalog",
                   data.str("catalog.jsonl"), "--traj", runs.str("stage2.jsonl"), "--report",
                   report_dir.str("report.json")}) == 0);
    const Json report = Json::parse(read_text_file(report_dir.str("report.json")));
    CHECK(report["success_rate"].get<double>() == 100.0);
    CHECK(report["accuracy"].is_null()); // no stage-1 records in this log
}

TEST_CASE("trajectory logs carry the documented schema keys") {
    World w;
    const BenchmarkInstance& inst = w.instances[0];
    PerfectPolicy policy(inst, w.catalog);
    TwoStageResult result = w.run_instance(inst, policy);
    const Json j = trajectory_to_json(result.stage2);
    for (const char* key :
         {"instance_id", "stage", "turns", "tool_calls", "final_answer", "recommendation"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["turns"].is_array());
    REQUIRE(!j["turns"].empty());
    CHECK(j["turns"][0].contains("role"));
    CHECK(j["turns"][0].contains("content"));
    for (const auto& call : j["tool_calls"]) {
        CHECK(call.contains("name"));
        CHECK(call.contains("arguments"));
    }
    CHECK(j["recommendation"].is_array());
}

TEST_CASE("cli: parallel episode workers produce the same logs as serial runs") {
    TempDir data("companion_cli_workers_data");
    REQUIRE(run_cli({"companion", "gen", "--single", "3", "--addon", "2", "--seed", "6", "--out",
                     data.str(), "--synthetic-products", "120", "--split", "1.0"}) == 0);
    TempDir serial("companion_cli_workers_serial");
    TempDir parallel("companion_cli_workers_parallel");
    REQUIRE(run_cli({"companion", "run", "--dataset", data.str("train.jsonl"), "--catalog",
                     data.str("catalog.jsonl"), "--stage", "both", "--policy", "perfect",
                     "--hint", "high", "--out", serial.str(), "--workers", "1"}) == 0);
    REQUIRE(run_cli({"companion", "run", "--dataset", data.str("train.jsonl"), "--catalog",
                     data.str("catalog.jsonl"), "--stage", "both", "--policy", "perfect",
                     "--hint", "high", "--out", parallel.str(), "--workers", "3"}) == 0);
    for (const char* file : {"stage1.jsonl", "stage2.jsonl", "feedback.jsonl"}) {
        CHECK(read_text_file(serial.str(file)) == read_text_file(parallel.str(file)));
    }
    CHECK(run_cli({"companion", "run", "--dataset", data.str("train.jsonl"), "--catalog",
                   data.str("catalog.jsonl"), "--stage", "1", "--policy", "perfect", "--out",
                   parallel.str(), "--workers", "0"}) != 0);
}
