#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rpbench/analysis.hpp"
#include "rpbench/builder.hpp"
#include "rpbench/config.hpp"
#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/evaluator.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/pool.hpp"
#include "rpbench/prompts.hpp"
#include "rpbench/synth.hpp"

namespace rpbench::commands {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

// Line-structured run log: "ts=<epoch_ms> component=<c> event=<e> k=v ...".
class RunLog {
public:
    void add(const std::string& component, const std::string& event,
             std::initializer_list<std::pair<std::string, std::string>> fields = {}) {
        std::ostringstream line;
        auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
        line << "ts=" << now << " component=" << component << " event=" << event;
        for (const auto& [k, v] : fields) line << " " << k << "=" << v;
        lines_.push_back(line.str());
    }

    void save(const fs::path& path) const {
        std::string out;
        for (const auto& l : lines_) {
            out += l;
            out += '\n';
        }
        config::write_file(path, out);
    }

private:
    std::vector<std::string> lines_;
};

inline gateway::Gateway build_gateway(const config::RunConfig& cfg) {
    gateway::Gateway gw;
    for (const auto& entry : cfg.endpoints) {
        if (entry.endpoint.backend == gateway::Backend::Mock) {
            gateway::MockScript script;
            if (entry.script_path) {
                json j = parse_json_text(
                    config::read_file(config::resolve(cfg, *entry.script_path)),
                    "mock script " + *entry.script_path);
                script = gateway::decode_mock_script(j);
            }
            gw.add(entry.endpoint, std::move(script));
        } else {
            gw.add(entry.endpoint);
        }
    }
    return gw;
}

inline prompts::TemplateRegistry build_registry(const config::RunConfig& cfg) {
    prompts::TemplateRegistry registry = prompts::TemplateRegistry::with_defaults();
    if (!cfg.templates_dir.empty()) {
        registry.load_directory(config::resolve(cfg, cfg.templates_dir));
    }
    if (auto missing = registry.missing_mandatory(); !missing.empty()) {
        throw ValidationFailed(missing);
    }
    return registry;
}

// Every command leaves a manifest echoing the resolved configuration.
inline void write_manifest(const fs::path& out_dir, const config::RunConfig& cfg,
                           const std::string& command, const json& args) {
    json manifest = {{"command", command},
                     {"seed", cfg.seed},
                     {"args", args},
                     {"config", config::encode_run_config(cfg)}};
    config::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

inline std::vector<CharacterProfile> load_characters(const config::RunConfig& cfg,
                                                     const std::vector<std::string>& files) {
    std::vector<CharacterProfile> characters;
    characters.reserve(files.size());
    for (const auto& f : files) {
        json j = parse_json_text(config::read_file(config::resolve(cfg, f)),
                                 "character file " + f);
        characters.push_back(decode_profile(j));
        if (auto violations = validate_profile(characters.back()); !violations.empty()) {
            throw ValidationFailed(std::move(violations));
        }
    }
    return characters;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string manifest;            // ingestion manifest path
    std::string out_dir;             // pool directory to write
    std::string extractor_endpoint;  // defaults to the Scene-role endpoint
    size_t min_len = 2000;
    size_t max_len = 20000;
};

inline int cmd_ingest(const config::RunConfig& cfg, const IngestArgs& args) {
    prompts::TemplateRegistry registry = build_registry(cfg);
    gateway::Gateway gw = build_gateway(cfg);
    std::string endpoint_id = args.extractor_endpoint.empty()
                                  ? cfg.endpoint_for_role(gateway::ModelRole::Scene)
                                  : args.extractor_endpoint;
    gateway::ModelClient& model = gw.client(endpoint_id);

    json manifest_json = parse_json_text(
        config::read_file(config::resolve(cfg, args.manifest)), "ingest manifest");
    std::vector<pool::IngestItem> items = pool::decode_ingest_manifest(manifest_json);

    RunLog log;
    pool::Pool out_pool;
    int fragment_counter = 0;
    for (const auto& item : items) {
        pool::SegmentConfig seg_cfg = pool::SegmentConfig::defaults();
        if (!item.chapter_patterns.empty()) seg_cfg.chapter_patterns = item.chapter_patterns;
        seg_cfg.min_len = args.min_len;
        seg_cfg.max_len = args.max_len;
        seg_cfg.chapter_first = item.chapter_first;
        seg_cfg.chapter_last = item.chapter_last;
        std::string text = config::read_file(config::resolve(cfg, item.path));
        std::vector<pool::Chunk> chunks = pool::segment_book(text, seg_cfg, item.title);
        log.add("pool", "segmented",
                {{"book", item.title}, {"chunks", std::to_string(chunks.size())}});
        for (const auto& chunk : chunks) {
            std::vector<std::string> sketches =
                pool::extract_scenarios(chunk, model, registry, item.language);
            for (const auto& sketch : sketches) {
                Scenario s =
                    pool::build_fragment(sketch, model, registry, item.title, item.language);
                if (out_pool.find(s.id) != nullptr) {
                    s.id += "-" + std::to_string(fragment_counter);
                }
                ++fragment_counter;
                out_pool.add(std::move(s));
            }
        }
    }
    fs::path out_dir = config::resolve(cfg, args.out_dir);
    pool::save_pool(out_pool, out_dir);
    log.add("pool", "saved", {{"scenarios", std::to_string(out_pool.size())}});
    log.save(out_dir / "ingest.log");
    write_manifest(out_dir, cfg, "ingest",
                   {{"manifest", args.manifest}, {"out_dir", args.out_dir}});
    std::cout << "ingested " << out_pool.size() << " scenarios into " << out_dir.string()
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string endpoint;  // defaults to the Source-role endpoint
    Language language = Language::EN;
    int n_seeds = 5;
    int review_rounds = 1;
    std::string out_dir;
};

inline int cmd_synth(const config::RunConfig& cfg, const SynthArgs& args) {
    prompts::TemplateRegistry registry = build_registry(cfg);
    gateway::Gateway gw = build_gateway(cfg);
    std::string endpoint_id = args.endpoint.empty()
                                  ? cfg.endpoint_for_role(gateway::ModelRole::Source)
                                  : args.endpoint;
    synth::SynthJob job;
    job.language = args.language;
    job.n_seeds = args.n_seeds;
    job.review_rounds = args.review_rounds;
    synth::SynthResult result = synth::synthesize_character(registry, job, gw.client(endpoint_id));

    fs::path out_dir = config::resolve(cfg, args.out_dir.empty() ? cfg.out_dir : args.out_dir);
    std::string slug = builder::detail_build::slug(result.profile.name);
    config::write_file(out_dir / (slug + ".json"), encode(result.profile).dump(2) + "\n");
    config::write_file(out_dir / (slug + "-debut.json"),
                       encode(result.debut_scene).dump(2) + "\n");
    config::write_file(out_dir / (slug + "-audit.json"),
                       synth::encode_audit(result).dump(2) + "\n");
    write_manifest(out_dir, cfg, "synth",
                   {{"endpoint", endpoint_id},
                    {"language", to_string(args.language)},
                    {"n_seeds", args.n_seeds},
                    {"review_rounds", args.review_rounds}});
    std::cout << "synthesized character '" << result.profile.name << "' (" << result.calls_made
              << " model calls)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

struct BuildArgs {
    std::vector<std::string> characters;  // character file paths
    std::string pool_dir;
    std::optional<long long> tau;
    std::optional<uint64_t> seed;
    std::optional<int> max_turns;
    std::vector<std::string> source_endpoints;
    std::string director_endpoint;
    std::string scene_endpoint;
    std::string base_endpoint;
    std::string judge_endpoint;
    std::string out_dir;
};

inline BuildArgs decode_build_manifest(const json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"characters", "pool_dir", "tau", "seed", "max_turns",
                                    "source_models", "out_dir"});
    BuildArgs args;
    for (const auto& c : detail::require_field(j, "$", "characters")) {
        args.characters.push_back(c.get<std::string>());
    }
    args.pool_dir = detail::get_string(j, "$", "pool_dir");
    if (j.contains("tau")) args.tau = detail::get_int(j, "$", "tau");
    if (j.contains("seed")) args.seed = static_cast<uint64_t>(detail::get_int(j, "$", "seed"));
    if (j.contains("max_turns")) {
        args.max_turns = static_cast<int>(detail::get_int(j, "$", "max_turns"));
    }
    if (j.contains("source_models")) {
        for (const auto& s : j["source_models"]) {
            args.source_endpoints.push_back(s.get<std::string>());
        }
    }
    if (j.contains("out_dir")) args.out_dir = j["out_dir"].get<std::string>();
    return args;
}

inline int cmd_build(const config::RunConfig& cfg, const BuildArgs& args) {
    prompts::TemplateRegistry registry = build_registry(cfg);
    gateway::Gateway gw = build_gateway(cfg);

    builder::BuildConfig build_cfg;
    build_cfg.tau = args.tau.value_or(cfg.tau);
    build_cfg.seed = args.seed.value_or(cfg.seed);
    build_cfg.limits.max_turns = args.max_turns.value_or(cfg.max_turns);
    build_cfg.limits.min_turns = cfg.min_turns;
    build_cfg.attempt_budget = cfg.attempt_budget;
    if (build_cfg.tau < 1) throw Error("tau must be >= 1");

    builder::BuildModelSet models;
    models.director = &gw.client(args.director_endpoint.empty()
                                     ? cfg.endpoint_for_role(gateway::ModelRole::Director)
                                     : args.director_endpoint);
    models.scene = &gw.client(args.scene_endpoint.empty()
                                  ? cfg.endpoint_for_role(gateway::ModelRole::Scene)
                                  : args.scene_endpoint);
    models.base = &gw.client(args.base_endpoint.empty()
                                 ? cfg.endpoint_for_role(gateway::ModelRole::Base)
                                 : args.base_endpoint);
    models.judge = &gw.client(args.judge_endpoint.empty()
                                  ? cfg.endpoint_for_role(gateway::ModelRole::Judge)
                                  : args.judge_endpoint);
    std::vector<std::string> source_ids = args.source_endpoints;
    if (source_ids.empty()) {
        for (const auto& e : cfg.endpoints) {
            if (e.endpoint.role == gateway::ModelRole::Source) source_ids.push_back(e.endpoint.id);
        }
    }
    if (source_ids.empty()) throw Error("no source endpoints configured");
    for (const auto& id : source_ids) models.sources.push_back(&gw.client(id));

    std::vector<CharacterProfile> characters = load_characters(cfg, args.characters);
    if (characters.empty()) throw Error("no characters given");
    std::string pool_dir = args.pool_dir.empty() ? cfg.pool_dir : args.pool_dir;
    pool::Pool scenario_pool = pool::load_pool(config::resolve(cfg, pool_dir));

    builder::BuildResult result =
        builder::build_benchmark(registry, models, characters, scenario_pool, build_cfg);

    fs::path out_dir = config::resolve(cfg, args.out_dir.empty() ? cfg.out_dir : args.out_dir);
    config::write_file(out_dir / "dataset.jsonl", encode_dataset(result.instances));
    for (size_t i = 0; i < result.conversations.size(); ++i) {
        std::ostringstream name;
        name << "conversation_" << std::setfill('0') << std::setw(4) << i << ".json";
        config::write_file(out_dir / "transcripts" / name.str(),
                           builder::encode(result.conversations[i]).dump(2) + "\n");
    }
    RunLog log;
    for (const auto& [character, state] : result.coverage) {
        config::write_file(out_dir / "checkpoints" /
                               (builder::detail_build::slug(character) + ".json"),
                           dwrs::encode_checkpoint(character, state).dump(2) + "\n");
    }
    for (const auto& conv : result.conversations) {
        for (const auto& turn : conv.turns) {
            if (!turn.sigma) continue;
            log.add("builder", "test_turn",
                    {{"character", conv.test_character},
                     {"sigma", std::to_string(*turn.sigma)},
                     {"dimension", to_code(*turn.judge_dimension)},
                     {"retained", turn.retained ? "true" : "false"}});
        }
    }
    log.add("builder", "done",
            {{"instances", std::to_string(result.instances.size())},
             {"conversations", std::to_string(result.conversations.size())}});
    log.save(out_dir / "build.log");
    write_manifest(out_dir, cfg, "build",
                   {{"characters", args.characters},
                    {"pool_dir", pool_dir},
                    {"tau", build_cfg.tau},
                    {"seed", build_cfg.seed},
                    {"max_turns", build_cfg.limits.max_turns},
                    {"source_models", source_ids}});
    std::cout << "built " << result.instances.size() << " instances from "
              << result.conversations.size() << " conversations\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string dataset;
    std::string pool_dir;  // resolves scenario backgrounds and casts
    std::string test_endpoint;
    std::string base_endpoint;
    std::string judge_endpoint;
    std::optional<uint64_t> seed;
    std::optional<int> resamples;
    std::string out_dir;
};

inline EvalArgs decode_eval_manifest(const json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"dataset", "pool_dir", "test_endpoint", "base_endpoint",
                                    "judge_endpoint", "seed", "resamples", "out"});
    EvalArgs args;
    args.dataset = detail::get_string(j, "$", "dataset");
    if (j.contains("pool_dir")) args.pool_dir = j["pool_dir"].get<std::string>();
    if (j.contains("test_endpoint")) args.test_endpoint = j["test_endpoint"].get<std::string>();
    if (j.contains("base_endpoint")) args.base_endpoint = j["base_endpoint"].get<std::string>();
    if (j.contains("judge_endpoint")) {
        args.judge_endpoint = j["judge_endpoint"].get<std::string>();
    }
    if (j.contains("seed")) args.seed = static_cast<uint64_t>(detail::get_int(j, "$", "seed"));
    if (j.contains("resamples")) {
        args.resamples = static_cast<int>(detail::get_int(j, "$", "resamples"));
    }
    if (j.contains("out")) args.out_dir = j["out"].get<std::string>();
    return args;
}

inline int cmd_eval(const config::RunConfig& cfg, const EvalArgs& args) {
    prompts::TemplateRegistry registry = build_registry(cfg);
    gateway::Gateway gw = build_gateway(cfg);
    gateway::ModelClient& test_model = gw.client(
        args.test_endpoint.empty() ? cfg.endpoint_for_role(gateway::ModelRole::Source)
                                   : args.test_endpoint);
    gateway::ModelClient& base_model = gw.client(
        args.base_endpoint.empty() ? cfg.endpoint_for_role(gateway::ModelRole::Base)
                                   : args.base_endpoint);
    gateway::ModelClient& judge_model = gw.client(
        args.judge_endpoint.empty() ? cfg.endpoint_for_role(gateway::ModelRole::Judge)
                                    : args.judge_endpoint);

    std::vector<BenchmarkInstance> instances =
        decode_dataset(config::read_file(config::resolve(cfg, args.dataset)));
    if (instances.empty()) throw Error("dataset is empty");
    std::string pool_dir = args.pool_dir.empty() ? cfg.pool_dir : args.pool_dir;
    pool::Pool scenario_pool = pool::load_pool(config::resolve(cfg, pool_dir));

    uint64_t seed = args.seed.value_or(cfg.seed);
    int resamples = args.resamples.value_or(cfg.resamples);

    std::vector<std::optional<evaluator::EvalRecord>> slots(instances.size());
    std::atomic<size_t> failed{0};
    auto run_one = [&](size_t i) {
        const BenchmarkInstance& inst = instances[i];
        const Scenario* scenario = scenario_pool.find(inst.scenario_id);
        if (scenario == nullptr) {
            throw Error("instance '" + inst.id + "' references unknown scenario '" +
                        inst.scenario_id + "'");
        }
        try {
            slots[i] = evaluator::evaluate_instance(registry, inst, *scenario, test_model,
                                                    base_model, judge_model);
        } catch (const Error&) {
            failed.fetch_add(1);
        }
    };

    // Mock-backed runs stay sequential so scripted queues replay identically.
    int workers = gw.any_mock() ? 1 : std::max(1, cfg.parallel);
    if (workers == 1) {
        for (size_t i = 0; i < instances.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < instances.size();
                     i = next.fetch_add(1)) {
                    run_one(i);
                }
            });
        }
        for (auto& t : threads) t.join();
    }

    std::vector<evaluator::EvalRecord> records;
    records.reserve(instances.size());
    for (auto& slot : slots) {
        if (slot) records.push_back(std::move(*slot));
    }
    if (records.empty()) throw Error("every instance failed to evaluate");
    evaluator::AggregateReport report =
        evaluator::aggregate(records, instances, resamples, cfg.ci_level,
                             builder::derive_seed(seed, "bootstrap"), failed.load());

    fs::path out_dir = config::resolve(cfg, args.out_dir.empty() ? cfg.out_dir : args.out_dir);
    config::write_file(out_dir / "records.jsonl", evaluator::encode_records(records));
    config::write_file(out_dir / "report.json", evaluator::encode(report).dump(2) + "\n");
    config::write_file(out_dir / "report.csv",
                       evaluator::report_csv(test_model.config().model_name, report));
    write_manifest(out_dir, cfg, "eval",
                   {{"dataset", args.dataset},
                    {"pool_dir", pool_dir},
                    {"test", test_model.config().id},
                    {"base", base_model.config().id},
                    {"judge", judge_model.config().id},
                    {"seed", seed},
                    {"resamples", resamples}});
    std::cout << "evaluated " << records.size() << " instances; performance "
              << report.performance << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string records;
    std::string dataset;
    std::string checker_endpoint;  // defaults to the Checker-role endpoint
    std::string test_model;        // name shown to the checker; defaults to the
                                   // Source-role endpoint's model name
    bool rule_fallback = false;    // keyword scan instead of a checker model
    std::string scores_file;       // optional: JSON array for the separation index
    std::string out_dir;
};

inline int cmd_analyze(const config::RunConfig& cfg, const AnalyzeArgs& args) {
    prompts::TemplateRegistry registry = build_registry(cfg);
    std::vector<evaluator::EvalRecord> records =
        evaluator::decode_records(config::read_file(config::resolve(cfg, args.records)));
    std::vector<BenchmarkInstance> instances =
        decode_dataset(config::read_file(config::resolve(cfg, args.dataset)));
    std::map<std::string, const BenchmarkInstance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;

    std::map<std::string, analysis::HallucinationFlags> flags;
    size_t warnings = 0;
    if (args.rule_fallback) {
        for (const auto& r : records) flags[r.instance_id] = analysis::rule_based_check(r);
    } else {
        gateway::Gateway gw = build_gateway(cfg);
        gateway::ModelClient& checker = gw.client(
            args.checker_endpoint.empty() ? cfg.endpoint_for_role(gateway::ModelRole::Checker)
                                          : args.checker_endpoint);
        std::string test_model = args.test_model;
        if (test_model.empty()) {
            const config::EndpointEntry* e =
                cfg.find_endpoint(cfg.endpoint_for_role(gateway::ModelRole::Source));
            test_model = e != nullptr ? e->endpoint.model_name : "test model";
        }
        for (const auto& r : records) {
            auto it = by_id.find(r.instance_id);
            if (it == by_id.end()) throw analysis::UnknownInstance(r.instance_id);
            flags[r.instance_id] = analysis::check_hallucination(
                registry, r, checker, test_model, it->second->language, &warnings);
        }
    }
    analysis::HallucinationReport report = analysis::hallucination_rates(flags, instances);
    report.checker_warnings = warnings;

    // Per-group performance pairs with reliability for the trade-off table.
    std::map<analysis::GroupKey, std::vector<double>> group_scores;
    for (const auto& r : records) {
        auto it = by_id.find(r.instance_id);
        if (it == by_id.end()) continue;
        if (auto key = analysis::group_for(*it->second)) group_scores[*key].push_back(r.score);
    }
    std::map<analysis::GroupKey, double> group_performance;
    for (const auto& [key, scores] : group_scores) {
        group_performance[key] = evaluator::performance_of(scores);
    }

    fs::path out_dir = config::resolve(cfg, args.out_dir.empty() ? cfg.out_dir : args.out_dir);
    config::write_file(out_dir / "hallucination.json",
                       analysis::encode(report).dump(2) + "\n");
    config::write_file(out_dir / "hallucination.csv", analysis::hallucination_csv(report));
    config::write_file(out_dir / "reliability.csv",
                       analysis::reliability_table_csv(group_performance, report));
    if (!args.scores_file.empty()) {
        json scores_json = parse_json_text(
            config::read_file(config::resolve(cfg, args.scores_file)), "scores file");
        std::vector<double> scores;
        for (const auto& s : scores_json) scores.push_back(s.get<double>());
        double si = analysis::separation_index(scores);
        config::write_file(out_dir / "si.json",
                           json{{"separation_index", si}, {"n", scores.size()}}.dump(2) + "\n");
    }
    write_manifest(out_dir, cfg, "analyze",
                   {{"records", args.records},
                    {"dataset", args.dataset},
                    {"rule_fallback", args.rule_fallback}});
    std::cout << "analyzed " << records.size() << " records over " << report.groups.size()
              << " groups\n";
    return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsArgs {
    std::string dataset;
    std::string transcripts_dir;
    std::string out_dir;
};

inline int cmd_stats(const config::RunConfig& cfg, const StatsArgs& args) {
    std::vector<BenchmarkInstance> instances =
        decode_dataset(config::read_file(config::resolve(cfg, args.dataset)));
    std::vector<builder::ConversationRecord> transcripts;
    if (!args.transcripts_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& entry :
             fs::directory_iterator(config::resolve(cfg, args.transcripts_dir))) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            transcripts.push_back(builder::decode_conversation(
                parse_json_text(config::read_file(f), "transcript " + f.string())));
        }
    }
    analysis::DatasetStats stats = analysis::dataset_stats(instances, transcripts);
    json out = analysis::encode(stats);
    std::cout << out.dump(2) << "\n";
    if (!args.out_dir.empty()) {
        fs::path out_dir = config::resolve(cfg, args.out_dir);
        config::write_file(out_dir / "stats.json", out.dump(2) + "\n");
        write_manifest(out_dir, cfg, "stats",
                       {{"dataset", args.dataset}, {"transcripts", args.transcripts_dir}});
    }
    return 0;
}

}  // namespace rpbench::commands
