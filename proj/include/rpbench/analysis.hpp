#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpbench/builder.hpp"
#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/evaluator.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/prompts.hpp"

namespace rpbench::analysis {

// ---------------------------------------------------------------------------
// Hallucination detection
// ---------------------------------------------------------------------------

struct HallucinationFlags {
    bool flag1 = false;
    bool flag2 = false;
    bool counted = false;  // both judgments flag at once

    static HallucinationFlags from(bool f1, bool f2) {
        return HallucinationFlags{f1, f2, f1 && f2};
    }
};

// Asks the checker once per judge explanation; a turn counts as hallucinated
// only when both judgments flag it. Unparseable checker replies count as a
// clean verdict and bump the warning counter.
inline HallucinationFlags check_hallucination(const prompts::TemplateRegistry& registry,
                                              const evaluator::EvalRecord& record,
                                              gateway::ModelClient& checker,
                                              const std::string& test_model,
                                              Language language, size_t* warnings = nullptr) {
    auto check_one = [&](const std::string& explanation) {
        std::string prompt = registry.render("checker", language,
                                             {{"judge_response", explanation},
                                              {"test_model", test_model}});
        try {
            return gateway::complete_parsed(
                checker,
                gateway::ChatRequest::user(std::move(prompt),
                                           gateway::default_temperature(
                                               gateway::ModelRole::Checker)),
                [](const std::string& text) { return gateway::parse_judgment(text); });
        } catch (const Error&) {
            if (warnings != nullptr) ++*warnings;
            return false;
        }
    };
    bool f1 = check_one(record.judge_explanations.first);
    bool f2 = check_one(record.judge_explanations.second);
    return HallucinationFlags::from(f1, f2);
}

// Offline fallback: substring scan over the checker's keyword hints. Not the
// model-backed path; enable explicitly for runs without a checker endpoint.
inline bool rule_based_flag(const std::string& explanation) {
    static const std::vector<std::string> keywords = {
        "hallucination", "fabrication", "fiction", "inconsistent with setting",
        "beyond character background", "made-up"};
    std::string lower = gateway::detail_parse::lowercase(explanation);
    return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
        return lower.find(k) != std::string::npos;
    });
}

inline HallucinationFlags rule_based_check(const evaluator::EvalRecord& record) {
    return HallucinationFlags::from(rule_based_flag(record.judge_explanations.first),
                                    rule_based_flag(record.judge_explanations.second));
}

// ---------------------------------------------------------------------------
// Rates and reliability
// ---------------------------------------------------------------------------

struct GroupKey {
    CharacterKind kind = CharacterKind::Established;
    Language language = Language::EN;

    auto operator<=>(const GroupKey&) const = default;
};

inline std::string to_string(const GroupKey& key) {
    std::string kind = key.kind == CharacterKind::Established ? "EC" : "SC";
    return kind + "-" + (key.language == Language::EN ? "en" : "zh");
}

struct GroupRates {
    size_t n = 0;
    size_t flagged = 0;
    double rate_percent = 0.0;
    std::optional<double> reliability;  // 100 / rate, absent at rate 0
};

struct HallucinationReport {
    std::map<GroupKey, GroupRates> groups;
    size_t checker_warnings = 0;
};

class UnknownInstance : public Error {
public:
    explicit UnknownInstance(const std::string& id)
        : Error("flags reference unknown instance '" + id + "'") {}
};

// Established characters are measured on Factual Recall instances, synthesized
// characters on Context Reliance instances; other combinations are skipped.
inline std::optional<GroupKey> group_for(const BenchmarkInstance& instance) {
    CharacterKind kind = instance.test_character.kind;
    if (kind == CharacterKind::Established && instance.dimension == Dimension::FR) {
        return GroupKey{kind, instance.language};
    }
    if (kind == CharacterKind::Synthesized && instance.dimension == Dimension::CR) {
        return GroupKey{kind, instance.language};
    }
    return std::nullopt;
}

inline HallucinationReport hallucination_rates(
    const std::map<std::string, HallucinationFlags>& flags_by_instance,
    const std::vector<BenchmarkInstance>& instances) {
    std::map<std::string, const BenchmarkInstance*> by_id;
    for (const auto& inst : instances) by_id[inst.id] = &inst;
    for (const auto& [id, flags] : flags_by_instance) {
        (void)flags;
        if (by_id.count(id) == 0U) throw UnknownInstance(id);
    }
    HallucinationReport report;
    for (const auto& inst : instances) {
        std::optional<GroupKey> key = group_for(inst);
        if (!key) continue;
        auto it = flags_by_instance.find(inst.id);
        if (it == flags_by_instance.end()) continue;  // unchecked instances don't count
        GroupRates& g = report.groups[*key];
        g.n += 1;
        if (it->second.counted) g.flagged += 1;
    }
    for (auto it = report.groups.begin(); it != report.groups.end();) {
        GroupRates& g = it->second;
        if (g.n == 0) {
            it = report.groups.erase(it);
            continue;
        }
        g.rate_percent = 100.0 * static_cast<double>(g.flagged) / static_cast<double>(g.n);
        if (g.rate_percent > 0.0) g.reliability = 100.0 / g.rate_percent;
        ++it;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Separation index
// ---------------------------------------------------------------------------

class DegenerateRange : public Error {
public:
    DegenerateRange() : Error("all scores are equal; range is zero") {}
};

class TooFew : public Error {
public:
    TooFew() : Error("separation index needs at least two scores") {}
};

// Population standard deviation of the scores divided by their range.
inline double separation_index(const std::vector<double>& scores) {
    if (scores.size() < 2) throw TooFew();
    auto [min_it, max_it] = std::minmax_element(scores.begin(), scores.end());
    double range = *max_it - *min_it;
    if (range == 0.0) throw DegenerateRange();
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double variance = 0.0;
    for (double s : scores) variance += (s - mean) * (s - mean);
    variance /= static_cast<double>(scores.size());
    return std::sqrt(variance) / range;
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

struct LanguageStats {
    size_t test_characters = 0;
    size_t unique_characters = 0;
    size_t conversations = 0;
    double avg_conv_length = 0.0;
    size_t total_evaluations = 0;
    double evaluations_per_conv = 0.0;
};

struct DatasetStats {
    std::map<Language, LanguageStats> per_language;
    std::map<Dimension, size_t> dimension_histogram;
    std::map<std::string, size_t> source_model_histogram;
};

inline DatasetStats dataset_stats(const std::vector<BenchmarkInstance>& instances,
                                  const std::vector<builder::ConversationRecord>& transcripts) {
    DatasetStats stats;
    std::map<Language, std::set<std::string>> test_chars;
    std::map<Language, std::set<std::string>> all_chars;
    std::map<Language, size_t> conversations;
    std::map<Language, size_t> total_turns;
    std::map<Language, size_t> evaluations;

    for (const auto& t : transcripts) {
        conversations[t.language] += 1;
        total_turns[t.language] += t.turns.size();
        test_chars[t.language].insert(t.test_character);
        for (const auto& name : t.cast) all_chars[t.language].insert(name);
    }
    for (const auto& inst : instances) {
        evaluations[inst.language] += 1;
        test_chars[inst.language].insert(inst.test_character.name);
        stats.dimension_histogram[inst.dimension] += 1;
        stats.source_model_histogram[inst.source_model] += 1;
    }

    std::set<Language> languages;
    for (const auto& [lang, n] : conversations) {
        (void)n;
        languages.insert(lang);
    }
    for (const auto& [lang, n] : evaluations) {
        (void)n;
        languages.insert(lang);
    }
    for (Language lang : languages) {
        LanguageStats s;
        s.test_characters = test_chars[lang].size();
        s.unique_characters = all_chars[lang].size();
        s.conversations = conversations[lang];
        s.total_evaluations = evaluations[lang];
        if (s.conversations > 0) {
            s.avg_conv_length = static_cast<double>(total_turns[lang]) /
                                static_cast<double>(s.conversations);
            s.evaluations_per_conv = static_cast<double>(s.total_evaluations) /
                                     static_cast<double>(s.conversations);
        }
        stats.per_language[lang] = s;
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline json encode(const HallucinationReport& report) {
    json groups = json::object();
    for (const auto& [key, g] : report.groups) {
        json entry = {{"n", g.n}, {"flagged", g.flagged}, {"rate_percent", g.rate_percent}};
        if (g.reliability) entry["reliability"] = *g.reliability;
        groups[to_string(key)] = entry;
    }
    return json{{"groups", groups}, {"checker_warnings", report.checker_warnings}};
}

inline std::string hallucination_csv(const HallucinationReport& report) {
    std::ostringstream out;
    out << "group,n,flagged,rate_percent,reliability\n";
    for (const auto& [key, g] : report.groups) {
        out << to_string(key) << "," << g.n << "," << g.flagged << ",";
        out << std::fixed << std::setprecision(4) << g.rate_percent << ",";
        if (g.reliability) out << *g.reliability;
        out << "\n";
    }
    return out.str();
}

// Two columns per group for external plotting of performance vs reliability.
inline std::string reliability_table_csv(
    const std::map<GroupKey, double>& performance_by_group,
    const HallucinationReport& report) {
    std::ostringstream out;
    out << "group,performance,reliability\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& [key, g] : report.groups) {
        out << to_string(key) << ",";
        auto it = performance_by_group.find(key);
        if (it != performance_by_group.end()) out << it->second;
        out << ",";
        if (g.reliability) out << *g.reliability;
        out << "\n";
    }
    return out.str();
}

inline json encode(const DatasetStats& stats) {
    json per_language = json::object();
    for (const auto& [lang, s] : stats.per_language) {
        // Lengths are conventionally quoted to one decimal place.
        double avg_len = std::round(s.avg_conv_length * 10.0) / 10.0;
        per_language[rpbench::to_string(lang)] = {
            {"test_characters", s.test_characters},
            {"unique_characters", s.unique_characters},
            {"conversations", s.conversations},
            {"avg_conv_length", avg_len},
            {"total_evaluations", s.total_evaluations},
            {"evaluations_per_conv", s.evaluations_per_conv}};
    }
    json dims = json::object();
    for (Dimension d : kAllDimensions) {
        auto it = stats.dimension_histogram.find(d);
        dims[to_code(d)] = it == stats.dimension_histogram.end() ? 0 : it->second;
    }
    json sources = json::object();
    for (const auto& [model, count] : stats.source_model_histogram) sources[model] = count;
    return json{{"per_language", per_language},
                {"dimension_histogram", dims},
                {"source_model_histogram", sources}};
}

}  // namespace rpbench::analysis
