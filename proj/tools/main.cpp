#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rpbench/commands.hpp"
#include "rpbench/config.hpp"

namespace {

rpbench::config::RunConfig load_config(const std::string& path) {
    if (path.empty()) return rpbench::config::RunConfig{};
    return rpbench::config::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace rpbench;

    CLI::App app{"role-play benchmark toolkit: forge dialogue benchmarks and evaluate chat "
                 "models against them"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "run configuration file (JSON)");
    int parallel = -1;
    app.add_option("--parallel", parallel, "cross-instance concurrency cap")
        ->check(CLI::PositiveNumber);

    commands::IngestArgs ingest_args;
    CLI::App* ingest = app.add_subcommand("ingest", "turn book texts into a scenario pool");
    ingest->add_option("--manifest", ingest_args.manifest, "ingestion manifest path")
        ->required();
    ingest->add_option("--out", ingest_args.out_dir, "pool output directory")->required();
    ingest->add_option("--extractor", ingest_args.extractor_endpoint,
                       "endpoint id for extraction");
    ingest->add_option("--min-len", ingest_args.min_len, "minimum chunk length");
    ingest->add_option("--max-len", ingest_args.max_len, "maximum chunk length");

    commands::SynthArgs synth_args;
    std::string synth_language = "EN";
    CLI::App* synth = app.add_subcommand("synth", "synthesize an original test character");
    synth->add_option("--endpoint", synth_args.endpoint, "endpoint id for generation");
    synth->add_option("--language", synth_language, "EN or ZH")
        ->check(CLI::IsMember({"EN", "ZH"}));
    synth->add_option("--seeds", synth_args.n_seeds, "number of thematic seeds")
        ->check(CLI::PositiveNumber);
    synth->add_option("--review-rounds", synth_args.review_rounds,
                      "critique-and-revise rounds per stage")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--out", synth_args.out_dir, "output directory");

    commands::BuildArgs build_args;
    std::string build_manifest;
    long long build_tau = -1;
    long long build_seed = -1;
    int build_max_turns = -1;
    CLI::App* build = app.add_subcommand("build", "forge a benchmark dataset");
    build->add_option("--manifest", build_manifest, "build manifest file");
    build->add_option("--characters", build_args.characters, "character file paths");
    build->add_option("--pool", build_args.pool_dir, "scenario pool directory");
    build->add_option("--tau", build_tau, "per-dimension coverage threshold");
    build->add_option("--seed", build_seed, "run seed");
    build->add_option("--max-turns", build_max_turns, "conversation turn cap");
    build->add_option("--source", build_args.source_endpoints, "source endpoint ids");
    build->add_option("--director", build_args.director_endpoint, "director endpoint id");
    build->add_option("--scene", build_args.scene_endpoint, "scene endpoint id");
    build->add_option("--base", build_args.base_endpoint, "base endpoint id");
    build->add_option("--judge", build_args.judge_endpoint, "judge endpoint id");
    build->add_option("--out", build_args.out_dir, "output directory");

    commands::EvalArgs eval_args;
    std::string eval_manifest;
    long long eval_seed = -1;
    int eval_resamples = -1;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a model against a dataset");
    eval->add_option("--manifest", eval_manifest, "eval manifest file");
    eval->add_option("--dataset", eval_args.dataset, "benchmark dataset (jsonl)");
    eval->add_option("--pool", eval_args.pool_dir, "scenario pool directory");
    eval->add_option("--test", eval_args.test_endpoint, "endpoint id of the model under test");
    eval->add_option("--base", eval_args.base_endpoint, "base endpoint id");
    eval->add_option("--judge", eval_args.judge_endpoint, "judge endpoint id");
    eval->add_option("--seed", eval_seed, "run seed");
    eval->add_option("--resamples", eval_resamples, "bootstrap resamples");
    eval->add_option("--out", eval_args.out_dir, "output directory");

    commands::AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "hallucination and separability reports");
    analyze->add_option("--records", analyze_args.records, "eval records (jsonl)")->required();
    analyze->add_option("--dataset", analyze_args.dataset, "benchmark dataset (jsonl)")
        ->required();
    analyze->add_option("--checker", analyze_args.checker_endpoint, "checker endpoint id");
    analyze->add_option("--test-model", analyze_args.test_model,
                        "model name shown to the checker");
    analyze->add_flag("--rule-fallback", analyze_args.rule_fallback,
                      "keyword scan instead of a checker model");
    analyze->add_option("--scores", analyze_args.scores_file,
                        "JSON array of model scores for the separation index");
    analyze->add_option("--out", analyze_args.out_dir, "output directory");

    commands::StatsArgs stats_args;
    CLI::App* stats = app.add_subcommand("stats", "dataset statistics table");
    stats->add_option("--dataset", stats_args.dataset, "benchmark dataset (jsonl)")->required();
    stats->add_option("--transcripts", stats_args.transcripts_dir, "transcripts directory");
    stats->add_option("--out", stats_args.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        config::RunConfig cfg = load_config(config_path);
        if (parallel > 0) cfg.parallel = parallel;
        if (ingest->parsed()) return commands::cmd_ingest(cfg, ingest_args);
        if (synth->parsed()) {
            synth_args.language = language_from_string(synth_language);
            return commands::cmd_synth(cfg, synth_args);
        }
        if (build->parsed()) {
            if (!build_manifest.empty()) {
                json j = parse_json_text(
                    config::read_file(config::resolve(cfg, build_manifest)), "build manifest");
                commands::BuildArgs from_manifest = commands::decode_build_manifest(j);
                if (build_args.characters.empty()) {
                    build_args.characters = from_manifest.characters;
                }
                if (build_args.pool_dir.empty()) build_args.pool_dir = from_manifest.pool_dir;
                if (build_tau < 0 && from_manifest.tau) build_args.tau = from_manifest.tau;
                if (build_seed < 0 && from_manifest.seed) build_args.seed = from_manifest.seed;
                if (build_max_turns < 0 && from_manifest.max_turns) {
                    build_args.max_turns = from_manifest.max_turns;
                }
                if (build_args.source_endpoints.empty()) {
                    build_args.source_endpoints = from_manifest.source_endpoints;
                }
                if (build_args.out_dir.empty()) build_args.out_dir = from_manifest.out_dir;
            }
            if (build_tau >= 0) {
                if (build_tau < 1) {
                    std::cerr << "usage error: tau must be >= 1\n";
                    return 2;
                }
                build_args.tau = build_tau;
            }
            if (build_seed >= 0) build_args.seed = static_cast<uint64_t>(build_seed);
            if (build_max_turns >= 0) build_args.max_turns = build_max_turns;
            if (build_args.characters.empty()) {
                std::cerr << "usage error: --characters (or a manifest) is required\n";
                return 2;
            }
            return commands::cmd_build(cfg, build_args);
        }
        if (eval->parsed()) {
            if (!eval_manifest.empty()) {
                json j = parse_json_text(
                    config::read_file(config::resolve(cfg, eval_manifest)), "eval manifest");
                commands::EvalArgs from_manifest = commands::decode_eval_manifest(j);
                if (eval_args.dataset.empty()) eval_args.dataset = from_manifest.dataset;
                if (eval_args.pool_dir.empty()) eval_args.pool_dir = from_manifest.pool_dir;
                if (eval_args.test_endpoint.empty()) {
                    eval_args.test_endpoint = from_manifest.test_endpoint;
                }
                if (eval_args.base_endpoint.empty()) {
                    eval_args.base_endpoint = from_manifest.base_endpoint;
                }
                if (eval_args.judge_endpoint.empty()) {
                    eval_args.judge_endpoint = from_manifest.judge_endpoint;
                }
                if (eval_seed < 0 && from_manifest.seed) eval_args.seed = from_manifest.seed;
                if (eval_resamples < 0 && from_manifest.resamples) {
                    eval_args.resamples = from_manifest.resamples;
                }
                if (eval_args.out_dir.empty()) eval_args.out_dir = from_manifest.out_dir;
            }
            if (eval_args.dataset.empty()) {
                std::cerr << "usage error: --dataset (or a manifest) is required\n";
                return 2;
            }
            if (eval_seed >= 0) eval_args.seed = static_cast<uint64_t>(eval_seed);
            if (eval_resamples >= 0) eval_args.resamples = eval_resamples;
            return commands::cmd_eval(cfg, eval_args);
        }
        if (analyze->parsed()) return commands::cmd_analyze(cfg, analyze_args);
        if (stats->parsed()) return commands::cmd_stats(cfg, stats_args);
    } catch (const rpbench::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
