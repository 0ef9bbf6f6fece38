#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <thread>

#include <httplib.h>
#include <sys/wait.h>

#include "mock_world.hpp"
#include "rpbench/commands.hpp"

using namespace rpbench;
namespace fs = std::filesystem;

namespace {

fs::path workspace_root() {
    return fs::temp_directory_path() / "rpbench_cmd_test";
}

commands::BuildArgs build_args(const mock_world::Workspace& ws, const std::string& out) {
    commands::BuildArgs args;
    args.characters = {ws.character_file};
    args.pool_dir = ws.pool_dir;
    args.tau = ws.tau;
    args.out_dir = out;
    return args;
}

commands::EvalArgs eval_args(const mock_world::Workspace& ws, const std::string& dataset,
                             const std::string& out) {
    commands::EvalArgs args;
    args.dataset = dataset;
    args.pool_dir = ws.pool_dir;
    args.test_endpoint = "src";
    args.base_endpoint = "base";
    args.judge_endpoint = "judge";
    args.out_dir = out;
    return args;
}

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("build, eval, analyze, and stats run end to end on mock scripts") {
    mock_world::Workspace ws = mock_world::create(workspace_root(), 1);
    config::RunConfig cfg = config::load_run_config(ws.config_path);

    CHECK(commands::cmd_build(cfg, build_args(ws, "out_build")) == 0);
    fs::path out = ws.root / "out_build";
    REQUIRE(fs::exists(out / "dataset.jsonl"));
    REQUIRE(fs::exists(out / "manifest.json"));
    REQUIRE(fs::exists(out / "build.log"));
    std::vector<BenchmarkInstance> instances =
        decode_dataset(config::read_file(out / "dataset.jsonl"));
    REQUIRE(instances.size() == 5);
    std::set<Dimension> dims;
    for (const auto& inst : instances) {
        dims.insert(inst.dimension);
        CHECK(inst.selection_score <= 2);
        CHECK(inst.source_model == "src-model");
    }
    CHECK(dims.size() == 5);
    CHECK(fs::exists(out / "transcripts" / "conversation_0000.json"));
    CHECK(fs::exists(out / "checkpoints" / "miles-ryan.json"));

    CHECK(commands::cmd_eval(cfg, eval_args(ws, "out_build/dataset.jsonl", "out_eval")) == 0);
    fs::path eval_out = ws.root / "out_eval";
    std::vector<evaluator::EvalRecord> records =
        evaluator::decode_records(config::read_file(eval_out / "records.jsonl"));
    REQUIRE(records.size() == 5);
    json report = parse_json_text(config::read_file(eval_out / "report.json"), "report");
    CHECK(report["overall"]["n"] == 5);
    CHECK(report["resamples"] == 200);
    CHECK(fs::exists(eval_out / "report.csv"));

    commands::AnalyzeArgs aargs;
    aargs.records = "out_eval/records.jsonl";
    aargs.dataset = "out_build/dataset.jsonl";
    aargs.out_dir = "out_analyze";
    CHECK(commands::cmd_analyze(cfg, aargs) == 0);
    fs::path analyze_out = ws.root / "out_analyze";
    json hall = parse_json_text(config::read_file(analyze_out / "hallucination.json"), "hall");
    // tau=1: one FR-tagged instance, flagged Yes/Yes by the scripted checker
    REQUIRE(hall["groups"].contains("EC-en"));
    CHECK(hall["groups"]["EC-en"]["n"] == 1);
    CHECK(hall["groups"]["EC-en"]["flagged"] == 1);
    CHECK(fs::exists(analyze_out / "hallucination.csv"));
    CHECK(fs::exists(analyze_out / "reliability.csv"));

    commands::StatsArgs sargs;
    sargs.dataset = "out_build/dataset.jsonl";
    sargs.transcripts_dir = "out_build/transcripts";
    sargs.out_dir = "out_stats";
    CHECK(commands::cmd_stats(cfg, sargs) == 0);
    json stats = parse_json_text(config::read_file(ws.root / "out_stats" / "stats.json"),
                                 "stats");
    CHECK(stats["per_language"]["EN"]["conversations"] == 1);
    CHECK(stats["per_language"]["EN"]["total_evaluations"] == 5);
    CHECK(stats["dimension_histogram"]["CR"] == 1);
    CHECK(stats["source_model_histogram"]["src-model"] == 5);

    fs::remove_all(ws.root);
}

TEST_CASE("rule-fallback analyze needs no checker endpoint") {
    mock_world::Workspace ws = mock_world::create(workspace_root(), 1);
    config::RunConfig cfg = config::load_run_config(ws.config_path);
    REQUIRE(commands::cmd_build(cfg, build_args(ws, "out_build")) == 0);
    REQUIRE(commands::cmd_eval(cfg, eval_args(ws, "out_build/dataset.jsonl", "out_eval")) == 0);

    commands::AnalyzeArgs aargs;
    aargs.records = "out_eval/records.jsonl";
    aargs.dataset = "out_build/dataset.jsonl";
    aargs.rule_fallback = true;
    aargs.out_dir = "out_analyze_rule";
    CHECK(commands::cmd_analyze(cfg, aargs) == 0);
    json hall = parse_json_text(
        config::read_file(ws.root / "out_analyze_rule" / "hallucination.json"), "hall");
    CHECK(hall["groups"]["EC-en"]["flagged"] == 0);  // scripted explanations are clean
    fs::remove_all(ws.root);
}

TEST_CASE("identical config and seed reproduce byte-identical artifacts") {
    mock_world::Workspace ws = mock_world::create(workspace_root(), 2);
    config::RunConfig cfg = config::load_run_config(ws.config_path);

    REQUIRE(commands::cmd_build(cfg, build_args(ws, "run_a")) == 0);
    REQUIRE(commands::cmd_eval(cfg, eval_args(ws, "run_a/dataset.jsonl", "eval_a")) == 0);
    REQUIRE(commands::cmd_build(cfg, build_args(ws, "run_b")) == 0);
    REQUIRE(commands::cmd_eval(cfg, eval_args(ws, "run_b/dataset.jsonl", "eval_b")) == 0);

    auto bytes = [&](const std::string& rel) { return config::read_file(ws.root / rel); };
    CHECK(bytes("run_a/dataset.jsonl") == bytes("run_b/dataset.jsonl"));
    CHECK(bytes("eval_a/records.jsonl") == bytes("eval_b/records.jsonl"));
    CHECK(bytes("eval_a/report.json") == bytes("eval_b/report.json"));
    CHECK(bytes("eval_a/report.csv") == bytes("eval_b/report.csv"));
    for (int i = 0; i < 2; ++i) {
        std::string name = "transcripts/conversation_000" + std::to_string(i) + ".json";
        CHECK(bytes("run_a/" + name) == bytes("run_b/" + name));
    }
    fs::remove_all(ws.root);
}

TEST_CASE("config validation rejects a bad tau") {
    json bad = {{"seed", 1}, {"builder", {{"tau", 0}}}};
    CHECK_THROWS_AS(config::decode_run_config(bad, ""), ValidationFailed);
}

TEST_CASE("unknown config fields are rejected with their path") {
    json bad = {{"seed", 1}, {"surprise", true}};
    CHECK_THROWS_AS(config::decode_run_config(bad, ""), ParseError);
}

TEST_CASE("endpoint role lookup flags ambiguity") {
    mock_world::Workspace ws = mock_world::create(workspace_root(), 1);
    config::RunConfig cfg = config::load_run_config(ws.config_path);
    CHECK(cfg.endpoint_for_role(gateway::ModelRole::Judge) == "judge");
    config::EndpointEntry extra;
    extra.endpoint.id = "judge2";
    extra.endpoint.role = gateway::ModelRole::Judge;
    extra.endpoint.backend = gateway::Backend::Mock;
    cfg.endpoints.push_back(extra);
    CHECK_THROWS_AS(cfg.endpoint_for_role(gateway::ModelRole::Judge), Error);
    fs::remove_all(ws.root);
}

TEST_CASE("ingest turns a toy book into a scenario pool") {
    fs::path root = fs::temp_directory_path() / "rpbench_ingest_test";
    fs::remove_all(root);
    fs::create_directories(root);

    config::write_file(root / "book.txt", "Chapter 1\n" + std::string(100, 'a') + "\n");
    config::write_file(root / "ingest_manifest.json",
                       json::array({{{"path", "book.txt"},
                                     {"title", "Test Book"},
                                     {"language", "EN"}}})
                           .dump(2));
    Scenario fragment = mock_world::whaler("extracted-0");
    json script = {{"rules",
                    {mock_world::mock_rule("Scene",
                                           {"=== SCENARIO ===\nsketch of a deck argument"},
                                           "Excerpt from"),
                     mock_world::mock_rule("Scene", {encode_text(fragment)},
                                           "Scene sketch")}}};
    config::write_file(root / "extract.mock", script.dump(2));
    json cfg_json = {{"seed", 1},
                     {"endpoints", json::array({{{"id", "extractor"},
                                                 {"role", "Scene"},
                                                 {"backend", "mock"},
                                                 {"script", "extract.mock"}}})}};
    config::write_file(root / "config.json", cfg_json.dump(2));

    config::RunConfig cfg = config::load_run_config(root / "config.json");
    commands::IngestArgs args;
    args.manifest = "ingest_manifest.json";
    args.out_dir = "pool_out";
    args.min_len = 50;
    args.max_len = 150;
    CHECK(commands::cmd_ingest(cfg, args) == 0);

    pool::Pool loaded = pool::load_pool(root / "pool_out");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded.scenarios[0].source.book_title == "Test Book");
    CHECK(loaded.scenarios[0].find_character("Starbuck") != nullptr);
    fs::remove_all(root);
}

TEST_CASE("synth writes the character, debut scene, and audit files") {
    fs::path root = fs::temp_directory_path() / "rpbench_synth_cmd_test";
    fs::remove_all(root);
    fs::create_directories(root);

    json rules = json::array();
    rules.push_back(mock_world::mock_rule(
        "Source", {"seed: the unfeeling few"}, "thematic seeds"));
    rules.push_back(mock_world::mock_rule(
        "Source", {"A world where emotion is mined as crystal."},
        "coherent fictional worldview"));
    rules.push_back(mock_world::mock_rule(
        "Source",
        {R"({"name":"Zero","language":"EN","attributes":[
             {"key":"Name","value":"Zero","visibility":"Public"},
             {"key":"Persona","value":"Pure logic","visibility":"Public"},
             {"key":"Public Background","value":"A fugitive","visibility":"Public"}]})"},
        "Create one original character"));
    rules.push_back(mock_world::mock_rule(
        "Source",
        {R"({"background":"A checkpoint at the wastes.",
             "motivations":{"Lyra Vex":"Corner the anomaly."},
             "scene_characters":[{"name":"Lyra Vex","language":"EN",
               "attributes":[{"key":"Persona","value":"Auditor","visibility":"Public"}]}]})"},
        "Create the debut scene"));
    rules.push_back(mock_world::mock_rule(
        "Source", {"Lyra Vex: (scans) I know you're here.\nZero: Your sensors measure nothing."},
        "Write the opening dialogue"));
    config::write_file(root / "synth.mock", json{{"rules", rules}}.dump(2));
    json cfg_json = {{"seed", 2},
                     {"endpoints", json::array({{{"id", "writer"},
                                                 {"role", "Source"},
                                                 {"backend", "mock"},
                                                 {"script", "synth.mock"}}})}};
    config::write_file(root / "config.json", cfg_json.dump(2));

    config::RunConfig cfg = config::load_run_config(root / "config.json");
    commands::SynthArgs args;
    args.language = Language::EN;
    args.n_seeds = 3;
    args.review_rounds = 0;
    args.out_dir = "characters";
    CHECK(commands::cmd_synth(cfg, args) == 0);

    CharacterProfile profile = decode_profile(parse_json_text(
        config::read_file(root / "characters" / "zero.json"), "profile"));
    CHECK(profile.name == "Zero");
    CHECK(profile.kind == CharacterKind::Synthesized);
    Scenario debut = decode_scenario(parse_json_text(
        config::read_file(root / "characters" / "zero-debut.json"), "debut"));
    CHECK(debut.find_character("Zero") != nullptr);
    json audit = parse_json_text(config::read_file(root / "characters" / "zero-audit.json"),
                                 "audit");
    CHECK(audit["calls_made"] == 5);
    fs::remove_all(root);
}

TEST_CASE("eval fans out over http endpoints in parallel") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request& req, httplib::Response& res) {
                    ++hits;
                    json body = json::parse(req.body);
                    std::string model = body["model"].get<std::string>();
                    std::string content =
                        model == "arbiter" ? "Explanation: even match\nScore: 3"
                                           : "A measured reply from " + model + ".";
                    res.set_content(
                        json{{"choices",
                              json::array({{{"message", {{"content", content}}}}})}}
                            .dump(),
                        "application/json");
                });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    std::string url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";

    fs::path root = fs::temp_directory_path() / "rpbench_http_eval_test";
    fs::remove_all(root);
    fs::create_directories(root);
    pool::Pool scenario_pool;
    scenario_pool.add(mock_world::whaler("voyage"));
    pool::save_pool(scenario_pool, root / "pool");
    std::vector<BenchmarkInstance> instances;
    for (int i = 0; i < 8; ++i) {
        BenchmarkInstance inst;
        inst.id = "i" + std::to_string(i);
        inst.language = Language::EN;
        inst.test_character = mock_world::miles();
        inst.scenario_id = "voyage";
        inst.history = {{"Starbuck", std::nullopt, std::nullopt, "The sea is restless."}};
        inst.dimension = kAllDimensions[i % 5];
        inst.reference_utterance = {"Miles Ryan", std::nullopt, std::nullopt, "Aye."};
        inst.source_model = "src-model";
        inst.selection_score = 2;
        instances.push_back(std::move(inst));
    }
    config::write_file(root / "dataset.jsonl", encode_dataset(instances));

    config::RunConfig cfg;
    cfg.seed = 3;
    cfg.parallel = 4;
    cfg.base_dir = root;
    auto endpoint = [&](const char* id, gateway::ModelRole role, const char* name) {
        config::EndpointEntry e;
        e.endpoint.id = id;
        e.endpoint.role = role;
        e.endpoint.backend = gateway::Backend::Http;
        e.endpoint.url = url;
        e.endpoint.model_name = name;
        e.endpoint.backoff_base_ms = 1;
        return e;
    };
    cfg.endpoints.push_back(endpoint("t", gateway::ModelRole::Source, "contender"));
    cfg.endpoints.push_back(endpoint("b", gateway::ModelRole::Base, "anchor"));
    cfg.endpoints.push_back(endpoint("j", gateway::ModelRole::Judge, "arbiter"));

    commands::EvalArgs args;
    args.dataset = "dataset.jsonl";
    args.pool_dir = "pool";
    args.test_endpoint = "t";
    args.base_endpoint = "b";
    args.judge_endpoint = "j";
    args.resamples = 50;
    args.out_dir = "out";
    CHECK(commands::cmd_eval(cfg, args) == 0);
    CHECK(hits.load() == 8 * 4);  // two generations + two judgments per instance

    std::vector<evaluator::EvalRecord> records =
        evaluator::decode_records(config::read_file(root / "out" / "records.jsonl"));
    REQUIRE(records.size() == 8);
    for (const auto& r : records) CHECK(r.score == 0.5);  // ties both ways

    server.stop();
    listener.join();
    fs::remove_all(root);
}

#ifdef RPBENCH_CLI_PATH
namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(RPBENCH_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("the cli binary drives the full pipeline") {
    mock_world::Workspace ws = mock_world::create(
        fs::temp_directory_path() / "rpbench_cli_test", 1);
    std::string config_flag = "--config " + ws.config_path.string();

    CHECK(run_cli(config_flag + " build --characters miles.json --tau 1 --seed 7 --out cli_build") == 0);
    CHECK(fs::exists(ws.root / "cli_build" / "dataset.jsonl"));
    CHECK(decode_dataset(config::read_file(ws.root / "cli_build" / "dataset.jsonl")).size() ==
          5);

    CHECK(run_cli(config_flag +
                  " eval --dataset cli_build/dataset.jsonl --test src --base base "
                  "--judge judge --out cli_eval") == 0);
    CHECK(fs::exists(ws.root / "cli_eval" / "report.json"));

    CHECK(run_cli(config_flag +
                  " analyze --records cli_eval/records.jsonl --dataset "
                  "cli_build/dataset.jsonl --rule-fallback --out cli_analyze") == 0);
    CHECK(fs::exists(ws.root / "cli_analyze" / "hallucination.csv"));

    CHECK(run_cli(config_flag + " stats --dataset cli_build/dataset.jsonl --transcripts "
                                "cli_build/transcripts --out cli_stats") == 0);
    CHECK(fs::exists(ws.root / "cli_stats" / "stats.json"));

    fs::remove_all(ws.root);
}

TEST_CASE("the cli rejects a zero tau as a usage error") {
    CHECK(run_cli("build --tau 0 --characters nothing.json") == 2);
}

TEST_CASE("the cli surfaces missing required flags") {
    CHECK(run_cli("analyze --records only.jsonl") != 0);  // --dataset is required
    CHECK(run_cli("eval") == 2);                          // dataset or manifest required
}
#endif

TEST_CASE("a record that cannot be judged is excluded and counted") {
    fs::path root = fs::temp_directory_path() / "rpbench_failed_record_test";
    fs::remove_all(root);
    fs::create_directories(root);
    pool::Pool scenario_pool;
    scenario_pool.add(mock_world::whaler("voyage"));
    pool::save_pool(scenario_pool, root / "pool");

    std::vector<BenchmarkInstance> instances;
    for (int i = 0; i < 2; ++i) {
        BenchmarkInstance inst;
        inst.id = "i" + std::to_string(i);
        inst.language = Language::EN;
        inst.test_character = mock_world::miles();
        inst.scenario_id = "voyage";
        inst.dimension = Dimension::CA;
        inst.reference_utterance = {"Miles Ryan", std::nullopt, std::nullopt, "Aye."};
        inst.source_model = "src-model";
        inst.selection_score = 2;
        instances.push_back(std::move(inst));
    }
    config::write_file(root / "dataset.jsonl", encode_dataset(instances));
    config::write_file(root / "test.mock",
                       json{{"rules", {mock_world::mock_rule("Source", {"r1", "r2"})}}}.dump());
    config::write_file(root / "base.mock",
                       json{{"rules", {mock_world::mock_rule("Base", {"b1", "b2"})}}}.dump());
    config::write_file(
        root / "judge.mock",
        json{{"rules",
              {mock_world::mock_rule(
                  "Judge", {"Score: 3", "Score: 3", "no verdict", "still no verdict"})}}}
            .dump());
    json cfg_json = {
        {"seed", 4},
        {"paths", {{"pool_dir", "pool"}}},
        {"endpoints",
         json::array(
             {{{"id", "t"}, {"role", "Source"}, {"backend", "mock"}, {"script", "test.mock"}},
              {{"id", "b"}, {"role", "Base"}, {"backend", "mock"}, {"script", "base.mock"}},
              {{"id", "j"}, {"role", "Judge"}, {"backend", "mock"}, {"script", "judge.mock"}}})}};
    config::write_file(root / "config.json", cfg_json.dump(2));

    config::RunConfig cfg = config::load_run_config(root / "config.json");
    commands::EvalArgs args;
    args.dataset = "dataset.jsonl";
    args.test_endpoint = "t";
    args.base_endpoint = "b";
    args.judge_endpoint = "j";
    args.resamples = 20;
    args.out_dir = "out";
    CHECK(commands::cmd_eval(cfg, args) == 0);

    std::vector<evaluator::EvalRecord> records =
        evaluator::decode_records(config::read_file(root / "out" / "records.jsonl"));
    REQUIRE(records.size() == 1);
    CHECK(records[0].instance_id == "i0");
    json report = parse_json_text(config::read_file(root / "out" / "report.json"), "report");
    CHECK(report["failed_records"] == 1);
    CHECK(report["overall"]["n"] == 1);
    fs::remove_all(root);
}

TEST_CASE("eval manifests feed the eval arguments") {
    json manifest = {{"dataset", "d.jsonl"},   {"pool_dir", "pool"},
                     {"test_endpoint", "t"},   {"base_endpoint", "b"},
                     {"judge_endpoint", "j"},  {"seed", 9},
                     {"resamples", 123},       {"out", "somewhere"}};
    commands::EvalArgs args = commands::decode_eval_manifest(manifest);
    CHECK(args.dataset == "d.jsonl");
    CHECK(args.pool_dir == "pool");
    CHECK(args.test_endpoint == "t");
    CHECK(args.base_endpoint == "b");
    CHECK(args.judge_endpoint == "j");
    CHECK(args.seed == 9);
    CHECK(args.resamples == 123);
    CHECK(args.out_dir == "somewhere");
}

TEST_CASE("build manifest files feed the build arguments") {
    json manifest = {{"characters", {"c1.json", "c2.json"}},
                     {"pool_dir", "pool"},
                     {"tau", 3},
                     {"seed", 11},
                     {"max_turns", 12},
                     {"source_models", {"alpha", "beta"}},
                     {"out_dir", "somewhere"}};
    commands::BuildArgs args = commands::decode_build_manifest(manifest);
    CHECK(args.characters.size() == 2);
    CHECK(args.pool_dir == "pool");
    CHECK(args.tau == 3);
    CHECK(args.seed == 11);
    CHECK(args.max_turns == 12);
    CHECK(args.source_endpoints == std::vector<std::string>{"alpha", "beta"});
    CHECK(args.out_dir == "somewhere");
}

}  // TEST_SUITE
