#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rpbench/builder.hpp"
#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/prompts.hpp"

namespace rpbench::evaluator {

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Unbalanced mapping from Likert verdicts to points: sub-baseline responses
// earn nothing, decisive wins earn triple.
inline double f_map(int sigma) {
    switch (sigma) {
        case 1: return 3.0;
        case 2: return 1.0;
        case 3: return 0.5;
        case 4: return 0.0;
        case 5: return 0.0;
        default: throw OutOfRange(sigma, "sigma " + std::to_string(sigma) + " outside 1..5");
    }
}

inline double pair_score(int sigma1, int sigma2) {
    return 0.5 * (f_map(sigma1) + f_map(6 - sigma2));
}

struct EvalRecord {
    std::string instance_id;
    Utterance test_response;
    Utterance base_response;
    int sigma1 = 3;  // test presented first
    int sigma2 = 3;  // base presented first
    double point1 = 0.0;
    double point2 = 0.0;
    double score = 0.0;
    std::pair<std::string, std::string> judge_explanations;

    bool operator==(const EvalRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Prompt + judging
// ---------------------------------------------------------------------------

// Same assembly as the builder's test prompt, with the instance's pre-assigned
// dimension driving the reply strategy. Both contestants answer it verbatim.
inline gateway::ChatRequest build_eval_prompt(const prompts::TemplateRegistry& registry,
                                              const BenchmarkInstance& instance,
                                              const Scenario& scenario) {
    builder::SimulationSetup setup;
    setup.scenario = scenario;
    setup.test_character = instance.test_character;
    setup.target_dimension = instance.dimension;
    return builder::build_test_prompt(registry, setup, instance.history, instance.dimension);
}

inline int judge_pairwise(const prompts::TemplateRegistry& registry,
                          gateway::ModelClient& judge, const BenchmarkInstance& instance,
                          const Scenario& scenario, const std::string& model_a,
                          const std::string& response_a, const std::string& model_b,
                          const std::string& response_b, std::string* explanation) {
    Language lang = instance.language;
    // Full test profile, public projections of the scene cast.
    std::vector<CharacterProfile> profiles{instance.test_character};
    for (const auto& c : scenario.scene_characters) profiles.push_back(project_public(c));
    std::string prompt = registry.render(
        "judge_pairwise", lang,
        {{"criteria", prompts::criteria_text(registry, instance.dimension, lang)},
         {"dialogue_history", builder::render_history(instance.history)},
         {"profiles", builder::render_profile_blocks(profiles)},
         {"model_a", model_a},
         {"response_a", response_a},
         {"model_b", model_b},
         {"response_b", response_b}});
    std::string text_out;
    int sigma = gateway::complete_parsed(
        judge,
        gateway::ChatRequest::user(std::move(prompt),
                                   gateway::default_temperature(gateway::ModelRole::Judge)),
        [&](const std::string& text) {
            int s = gateway::parse_likert(text);
            text_out = text;
            return s;
        });
    if (explanation != nullptr) *explanation = text_out;
    return sigma;
}

// Bidirectional pairwise judging of one instance: both contestants answer the
// identical prompt; the judge scores both presentation orders.
inline EvalRecord evaluate_instance(const prompts::TemplateRegistry& registry,
                                    const BenchmarkInstance& instance,
                                    const Scenario& scenario,
                                    gateway::ModelClient& test_model,
                                    gateway::ModelClient& base_model,
                                    gateway::ModelClient& judge_model) {
    gateway::ChatRequest prompt = build_eval_prompt(registry, instance, scenario);
    const std::string& speaker = instance.test_character.name;
    auto as_utterance = [&](const std::string& text) {
        return gateway::parse_utterance(text, speaker);
    };
    EvalRecord record;
    record.instance_id = instance.id;
    record.test_response = gateway::complete_parsed(test_model, prompt, as_utterance);
    record.base_response = gateway::complete_parsed(base_model, prompt, as_utterance);

    std::string test_text = builder::render_utterance_inline(record.test_response);
    std::string base_text = builder::render_utterance_inline(record.base_response);
    const std::string& test_name = test_model.config().model_name;
    const std::string& base_name = base_model.config().model_name;

    record.sigma1 = judge_pairwise(registry, judge_model, instance, scenario, test_name,
                                   test_text, base_name, base_text,
                                   &record.judge_explanations.first);
    record.sigma2 = judge_pairwise(registry, judge_model, instance, scenario, base_name,
                                   base_text, test_name, test_text,
                                   &record.judge_explanations.second);
    record.point1 = f_map(record.sigma1);
    record.point2 = f_map(6 - record.sigma2);
    record.score = 0.5 * (record.point1 + record.point2);
    return record;
}

// ---------------------------------------------------------------------------
// Aggregation and bootstrap confidence intervals
// ---------------------------------------------------------------------------

struct CiOffsets {
    double low_offset = 0.0;   // <= 0, relative to the point estimate
    double high_offset = 0.0;  // >= 0
};

inline double performance_of(const std::vector<double>& scores) {
    if (scores.empty()) throw Error("no scores to aggregate");
    double total = 0.0;
    for (double s : scores) total += s;
    return total / (3.0 * static_cast<double>(scores.size()));
}

inline CiOffsets bootstrap_ci(const std::vector<double>& scores, int resamples = 1000,
                              double level = 0.95, uint64_t seed = 0) {
    if (scores.empty()) throw Error("no scores to bootstrap");
    if (level <= 0.0 || level >= 1.0) throw Error("ci level must be in (0, 1)");
    double point = performance_of(scores);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, scores.size() - 1);
    std::vector<double> stats(static_cast<size_t>(resamples));
    for (auto& stat : stats) {
        double total = 0.0;
        for (size_t i = 0; i < scores.size(); ++i) total += scores[pick(rng)];
        stat = total / (3.0 * static_cast<double>(scores.size()));
    }
    std::sort(stats.begin(), stats.end());
    auto percentile = [&](double q) {
        double idx = q * static_cast<double>(stats.size() - 1);
        size_t lo = static_cast<size_t>(std::floor(idx));
        size_t hi = static_cast<size_t>(std::ceil(idx));
        double frac = idx - static_cast<double>(lo);
        return stats[lo] + (stats[hi] - stats[lo]) * frac;
    };
    double alpha = (1.0 - level) / 2.0;
    CiOffsets out;
    out.low_offset = std::min(0.0, percentile(alpha) - point);
    out.high_offset = std::max(0.0, percentile(1.0 - alpha) - point);
    return out;
}

struct DimensionSummary {
    size_t n = 0;
    double performance = 0.0;
};

struct AggregateReport {
    std::map<Dimension, DimensionSummary> per_dimension;
    size_t n = 0;
    double performance = 0.0;
    CiOffsets ci;
    int resamples = 1000;
    double ci_level = 0.95;
    size_t failed_records = 0;  // excluded from n, reported separately
};

inline AggregateReport aggregate(const std::vector<EvalRecord>& records,
                                 const std::vector<BenchmarkInstance>& instances,
                                 int resamples = 1000, double ci_level = 0.95,
                                 uint64_t seed = 0, size_t failed_records = 0) {
    if (records.empty()) throw Error("no records to aggregate");
    std::map<std::string, Dimension> dimension_of;
    for (const auto& inst : instances) dimension_of[inst.id] = inst.dimension;

    AggregateReport report;
    report.resamples = resamples;
    report.ci_level = ci_level;
    report.failed_records = failed_records;
    std::map<Dimension, std::vector<double>> by_dimension;
    std::vector<double> all;
    all.reserve(records.size());
    for (const auto& r : records) {
        auto it = dimension_of.find(r.instance_id);
        if (it == dimension_of.end()) {
            throw Error("record references unknown instance '" + r.instance_id + "'");
        }
        by_dimension[it->second].push_back(r.score);
        all.push_back(r.score);
    }
    for (const auto& [dim, scores] : by_dimension) {
        report.per_dimension[dim] = {scores.size(), performance_of(scores)};
    }
    report.n = all.size();
    report.performance = performance_of(all);
    report.ci = bootstrap_ci(all, resamples, ci_level, seed);
    return report;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline json encode(const EvalRecord& r) {
    json j = json::object();
    j["instance_id"] = r.instance_id;
    j["test_response"] = rpbench::encode(r.test_response);
    j["base_response"] = rpbench::encode(r.base_response);
    j["sigma1"] = r.sigma1;
    j["sigma2"] = r.sigma2;
    j["point1"] = r.point1;
    j["point2"] = r.point2;
    j["score"] = r.score;
    j["judge_explanations"] = {r.judge_explanations.first, r.judge_explanations.second};
    return j;
}

inline EvalRecord decode_eval_record(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path,
                           {"instance_id", "test_response", "base_response", "sigma1",
                            "sigma2", "point1", "point2", "score", "judge_explanations"});
    EvalRecord r;
    r.instance_id = detail::get_string(j, path, "instance_id");
    r.test_response = decode_utterance(detail::require_field(j, path, "test_response"),
                                       path + ".test_response");
    r.base_response = decode_utterance(detail::require_field(j, path, "base_response"),
                                       path + ".base_response");
    r.sigma1 = static_cast<int>(detail::get_int(j, path, "sigma1"));
    r.sigma2 = static_cast<int>(detail::get_int(j, path, "sigma2"));
    r.point1 = detail::require_field(j, path, "point1").get<double>();
    r.point2 = detail::require_field(j, path, "point2").get<double>();
    r.score = detail::require_field(j, path, "score").get<double>();
    const json& e = detail::require_field(j, path, "judge_explanations");
    if (!e.is_array() || e.size() != 2) {
        throw ParseError(path + ".judge_explanations", "expected a two-element array");
    }
    r.judge_explanations = {e[0].get<std::string>(), e[1].get<std::string>()};
    return r;
}

inline std::string encode_records(const std::vector<EvalRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += encode(r).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<EvalRecord> decode_records(const std::string& text) {
    std::vector<EvalRecord> out;
    size_t pos = 0;
    size_t line_no = 1;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        if (!line.empty()) {
            try {
                out.push_back(decode_eval_record(parse_json_text(line, "records line")));
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + " " + e.path(), e.what());
            }
        }
        pos = end + 1;
        ++line_no;
    }
    return out;
}

inline json encode(const AggregateReport& report) {
    json per_dim = json::object();
    for (const auto& [dim, summary] : report.per_dimension) {
        per_dim[to_code(dim)] = {{"n", summary.n}, {"performance", summary.performance}};
    }
    return json{{"per_dimension", per_dim},
                {"overall",
                 {{"n", report.n},
                  {"performance", report.performance},
                  {"ci_low_offset", report.ci.low_offset},
                  {"ci_high_offset", report.ci.high_offset}}},
                {"resamples", report.resamples},
                {"ci_level", report.ci_level},
                {"failed_records", report.failed_records}};
}

// CSV table: one row per model run; five dimension columns, the weighted
// average, and the CI offsets in bracket style.
inline std::string report_csv(const std::string& model_name, const AggregateReport& report) {
    std::ostringstream out;
    out << "model,CR,FR,RR,CA,PA,weighted_average,ci_95\n";
    out << model_name;
    out << std::fixed << std::setprecision(4);
    for (Dimension d : kAllDimensions) {
        auto it = report.per_dimension.find(d);
        out << ",";
        if (it != report.per_dimension.end()) out << it->second.performance;
    }
    out << "," << report.performance;
    out << ",\"[" << report.ci.low_offset << ", +" << report.ci.high_offset << "]\"\n";
    return out.str();
}

}  // namespace rpbench::evaluator
