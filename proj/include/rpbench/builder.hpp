#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpbench/core.hpp"
#include "rpbench/dwrs.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/pool.hpp"
#include "rpbench/prompts.hpp"

namespace rpbench::builder {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct SimulationLimits {
    int max_turns = 30;
    int min_turns = 6;
};

struct SimulationSetup {
    Scenario scenario;
    CharacterProfile test_character;
    Dimension target_dimension = Dimension::CR;
    SimulationLimits limits;

    std::vector<std::string> cast_names() const {
        std::vector<std::string> names{test_character.name};
        for (const auto& c : scenario.scene_characters) names.push_back(c.name);
        return names;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> violations;
        if (scenario.find_character(test_character.name) != nullptr) {
            violations.push_back("test character '" + test_character.name +
                                 "' already appears in the scenario cast");
        }
        std::set<std::string> seen;
        for (const auto& n : cast_names()) {
            if (!seen.insert(n).second) violations.push_back("duplicate cast name '" + n + "'");
        }
        if (limits.max_turns <= 0) violations.push_back("max_turns must be positive");
        if (limits.min_turns < 0) violations.push_back("min_turns must be nonnegative");
        return violations;
    }
};

enum class TurnOrigin { SceneModel, SourceModel, BaseModel, Director };

inline std::string to_string(TurnOrigin o) {
    switch (o) {
        case TurnOrigin::SceneModel: return "SceneModel";
        case TurnOrigin::SourceModel: return "SourceModel";
        case TurnOrigin::BaseModel: return "BaseModel";
        case TurnOrigin::Director: return "Director";
    }
    return "?";
}

inline TurnOrigin turn_origin_from_string(std::string_view s) {
    if (s == "SceneModel") return TurnOrigin::SceneModel;
    if (s == "SourceModel") return TurnOrigin::SourceModel;
    if (s == "BaseModel") return TurnOrigin::BaseModel;
    if (s == "Director") return TurnOrigin::Director;
    throw ParseError("$", "unknown turn origin '" + std::string(s) + "'");
}

struct TurnRecord {
    Utterance utterance;
    TurnOrigin origin = TurnOrigin::SceneModel;
    std::optional<int> sigma;
    std::optional<Dimension> judge_dimension;
    std::optional<std::string> judge_explanation;
    bool retained = false;
};

enum class Quality { Poor, Moderate, High, Unrated };

inline std::string to_string(Quality q) {
    switch (q) {
        case Quality::Poor: return "Poor";
        case Quality::Moderate: return "Moderate";
        case Quality::High: return "High";
        case Quality::Unrated: return "Unrated";
    }
    return "?";
}

inline Quality quality_from_string(std::string_view s) {
    if (s == "Poor") return Quality::Poor;
    if (s == "Moderate") return Quality::Moderate;
    if (s == "High") return Quality::High;
    if (s == "Unrated") return Quality::Unrated;
    throw ParseError("$", "unknown quality '" + std::string(s) + "'");
}

enum class Termination { Director, MaxTurns };

struct ConversationRecord {
    std::string scenario_id;
    std::string test_character;
    Language language = Language::EN;
    std::string source_model;
    std::vector<std::string> cast;
    std::vector<TurnRecord> turns;
    Quality quality = Quality::Unrated;
    Termination terminated_by = Termination::MaxTurns;
};

// ---------------------------------------------------------------------------
// Text blocks shared by prompt assembly
// ---------------------------------------------------------------------------

inline std::string render_profile_block(const CharacterProfile& profile) {
    std::string out;
    if (profile.find("Name") == nullptr) out += "- Name: " + profile.name + "\n";
    for (const auto& a : profile.attributes) {
        out += "- " + a.key + ": " + a.value + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

inline std::string render_profile_blocks(const std::vector<CharacterProfile>& profiles) {
    std::string out;
    for (const auto& p : profiles) {
        if (!out.empty()) out += "\n\n";
        out += render_profile_block(p);
    }
    return out;
}

// Dialogue-history lines carry action and text only; thoughts stay private.
inline std::string render_history(const std::vector<Utterance>& history) {
    std::string out;
    for (const auto& u : history) {
        out += u.speaker + ":";
        if (u.action && !u.action->empty()) out += " (" + *u.action + ")";
        if (!u.text.empty()) out += " " + u.text;
        out += "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

// A single reply as shown to the judge: action and text, no speaker prefix.
inline std::string render_utterance_inline(const Utterance& u) {
    std::string out;
    if (u.action && !u.action->empty()) out += "(" + *u.action + ")";
    if (!u.text.empty()) {
        if (!out.empty()) out += " ";
        out += u.text;
    }
    return out;
}

// Reference dialogue keeps the authorial inner thoughts.
inline std::string render_reference_dialogue(const std::vector<Utterance>& dialogue) {
    std::string out;
    for (const auto& u : dialogue) {
        out += u.speaker + ":";
        if (u.thought && !u.thought->empty()) out += " [" + *u.thought + "]";
        if (u.action && !u.action->empty()) out += " (" + *u.action + ")";
        if (!u.text.empty()) out += " " + u.text;
        out += "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

inline std::string response_language_name(Language lang) {
    return lang == Language::EN ? "English" : "Chinese";
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

// Reply prompt for the test character: background, own full profile, public
// projections of the scene cast, history, and the dimension-targeted strategy.
inline gateway::ChatRequest build_test_prompt(const prompts::TemplateRegistry& registry,
                                              const SimulationSetup& setup,
                                              const std::vector<Utterance>& history,
                                              Dimension d_star) {
    Language lang = setup.test_character.language;
    std::vector<CharacterProfile> others;
    others.reserve(setup.scenario.scene_characters.size());
    for (const auto& c : setup.scenario.scene_characters) {
        others.push_back(project_public(c));
    }
    std::string prompt =
        registry.render("roleplay_test", lang,
                        {{"worldview", setup.scenario.background},
                         {"my_profile", render_profile_block(setup.test_character)},
                         {"other_profiles", render_profile_blocks(others)},
                         {"dialogue_history", render_history(history)},
                         {"reply_strategy", registry.strategy_for(d_star, lang).body},
                         {"response_language", response_language_name(lang)}});
    return gateway::ChatRequest::user(std::move(prompt),
                                      gateway::default_temperature(gateway::ModelRole::Source));
}

class MissingMotivation : public Error {
public:
    explicit MissingMotivation(const std::string& name)
        : Error("scenario has no motivation for '" + name + "'") {}
};

// Reply prompt for a scene character: adds the character's motivation, the
// original dialogue reference, and the dimension-targeted question instruction.
inline gateway::ChatRequest build_scene_prompt(const prompts::TemplateRegistry& registry,
                                               const SimulationSetup& setup,
                                               const std::string& character_name,
                                               const std::vector<Utterance>& history,
                                               Dimension d_star) {
    const CharacterProfile* self = setup.scenario.find_character(character_name);
    if (self == nullptr) {
        throw Error("'" + character_name + "' is not a scene character of " +
                    setup.scenario.id);
    }
    auto mot = setup.scenario.motivations.find(character_name);
    if (mot == setup.scenario.motivations.end()) throw MissingMotivation(character_name);

    Language lang = setup.scenario.source.language;
    std::vector<CharacterProfile> others;
    others.push_back(project_public(setup.test_character));
    for (const auto& c : setup.scenario.scene_characters) {
        if (c.name != character_name) others.push_back(project_public(c));
    }
    std::string prompt = registry.render(
        "roleplay_scene", lang,
        {{"worldview", setup.scenario.background},
         {"my_profile", render_profile_block(*self)},
         {"other_profiles", render_profile_blocks(others)},
         {"motivation", mot->second},
         {"original_dialogue", render_reference_dialogue(setup.scenario.original_dialogue)},
         {"dialogue_history", render_history(history)},
         {"instruction", registry.instruction_for(d_star, lang).body},
         {"response_language", response_language_name(lang)}});
    return gateway::ChatRequest::user(std::move(prompt),
                                      gateway::default_temperature(gateway::ModelRole::Scene));
}

// ---------------------------------------------------------------------------
// Judge and filter calls
// ---------------------------------------------------------------------------

struct BuilderModels {
    gateway::ModelClient* director = nullptr;
    gateway::ModelClient* scene = nullptr;
    gateway::ModelClient* source = nullptr;
    gateway::ModelClient* base = nullptr;
    gateway::ModelClient* judge = nullptr;
};

struct JudgeVerdict {
    Dimension dimension = Dimension::CR;
    int sigma = 3;
    std::string explanation;
};

// One judge call returns both the dimension tag and the Likert score.
inline JudgeVerdict judge_select_and_score(const prompts::TemplateRegistry& registry,
                                           gateway::ModelClient& judge,
                                           const SimulationSetup& setup,
                                           const std::vector<Utterance>& history,
                                           const std::string& source_name,
                                           const std::string& source_text,
                                           const std::string& base_name,
                                           const std::string& base_text) {
    Language lang = setup.test_character.language;
    // Full test profile (the judge checks persona fidelity against it), but
    // only public projections of the scene cast.
    std::vector<CharacterProfile> profiles{setup.test_character};
    for (const auto& c : setup.scenario.scene_characters) {
        profiles.push_back(project_public(c));
    }
    std::string prompt = registry.render(
        "judge_select", lang,
        {{"dimension_definitions", prompts::all_definitions_text(registry, lang)},
         {"dialogue_history", render_history(history)},
         {"profiles", render_profile_blocks(profiles)},
         {"model_a", source_name},
         {"response_a", source_text},
         {"model_b", base_name},
         {"response_b", base_text}});
    auto parse = [](const std::string& text) {
        JudgeVerdict v;
        v.dimension = gateway::parse_dimension_tag(text);
        v.sigma = gateway::parse_likert(text);
        v.explanation = text;
        return v;
    };
    return gateway::complete_parsed(
        judge,
        gateway::ChatRequest::user(std::move(prompt),
                                   gateway::default_temperature(gateway::ModelRole::Judge)),
        parse);
}

struct TestTurnResult {
    TurnRecord record;          // the appended turn
    Utterance source_response;  // kept for auditing
    Utterance base_response;
};

// Source and base answer the same prompt; the judge tags a dimension and
// scores the pair; the history keeps the source reply iff sigma <= 3.
inline TestTurnResult test_turn(const prompts::TemplateRegistry& registry,
                                const BuilderModels& models, const SimulationSetup& setup,
                                const std::vector<Utterance>& history, Dimension d_star) {
    gateway::ChatRequest prompt = build_test_prompt(registry, setup, history, d_star);
    const std::string& name = setup.test_character.name;
    auto as_utterance = [&](const std::string& text) {
        return gateway::parse_utterance(text, name);
    };
    Utterance source = gateway::complete_parsed(*models.source, prompt, as_utterance);
    Utterance base = gateway::complete_parsed(*models.base, prompt, as_utterance);

    JudgeVerdict verdict = judge_select_and_score(
        registry, *models.judge, setup, history, models.source->config().model_name,
        render_utterance_inline(source), models.base->config().model_name,
        render_utterance_inline(base));

    TestTurnResult result;
    result.source_response = source;
    result.base_response = base;
    result.record.origin =
        verdict.sigma <= 3 ? TurnOrigin::SourceModel : TurnOrigin::BaseModel;
    result.record.utterance = verdict.sigma <= 3 ? source : base;
    result.record.sigma = verdict.sigma;
    result.record.judge_dimension = verdict.dimension;
    result.record.judge_explanation = verdict.explanation;
    result.record.retained =
        result.record.origin == TurnOrigin::SourceModel && verdict.sigma <= 2;
    return result;
}

inline Quality quality_filter(const prompts::TemplateRegistry& registry,
                              const ConversationRecord& record,
                              gateway::ModelClient& judge) {
    std::vector<Utterance> lines;
    lines.reserve(record.turns.size());
    for (const auto& t : record.turns) lines.push_back(t.utterance);
    std::string prompt =
        registry.render("quality_filter", record.language, {{"transcript", render_history(lines)}});
    auto parse = [](const std::string& text) {
        auto after = gateway::detail_parse::after_last_marker(text, "quality:");
        if (!after) throw UnparseableReply("no 'Quality:' marker in reply");
        std::string rest = gateway::detail_parse::lowercase(
            gateway::trim(text.substr(*after)).substr(0, 8));
        if (rest.rfind("poor", 0) == 0) return Quality::Poor;
        if (rest.rfind("moderate", 0) == 0) return Quality::Moderate;
        if (rest.rfind("high", 0) == 0) return Quality::High;
        throw UnparseableReply("'Quality:' marker not followed by a known label");
    };
    try {
        return gateway::complete_parsed(
            judge,
            gateway::ChatRequest::user(std::move(prompt),
                                       gateway::default_temperature(gateway::ModelRole::Judge)),
            parse);
    } catch (const Error&) {
        return Quality::Unrated;
    }
}

// Rule-based screen for formatting defects in a final utterance.
inline std::vector<std::string> format_filter(const Utterance& u) {
    std::vector<std::string> issues;
    int depth = 0;
    bool negative = false;
    for (char c : u.text) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth < 0) negative = true;
    }
    if (depth != 0 || negative) issues.push_back("unbalanced parenthesis");
    size_t quotes = static_cast<size_t>(std::count(u.text.begin(), u.text.end(), '"'));
    if (quotes % 2 != 0) issues.push_back("unbalanced quote");
    if (u.text.rfind(u.speaker + ":", 0) == 0 || u.text.rfind(u.speaker + "：", 0) == 0) {
        issues.push_back("speaker echo");
    }
    if (u.text.empty() && (!u.action || u.action->empty())) issues.push_back("empty text");
    return issues;
}

// ---------------------------------------------------------------------------
// Conversation loop
// ---------------------------------------------------------------------------

struct SimulationOutcome {
    ConversationRecord record;
    dwrs::DwrsState state;
    std::optional<std::string> abort_reason;
};

namespace detail_sim {

// Next emphasis dimension: DWRS proposal, or uniform once coverage is done.
inline Dimension propose_dimension(dwrs::DwrsState& state) {
    if (!dwrs::done(state)) return dwrs::select(state);
    std::mt19937_64 rng(state.rng_seed);
    rng.discard(state.draws);
    state.draws += 1;
    std::uniform_int_distribution<size_t> pick(0, kAllDimensions.size() - 1);
    return kAllDimensions[pick(rng)];
}

inline std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

}  // namespace detail_sim

// How many consecutive scene turns before the director is nudged toward the
// test character.
inline constexpr int kTestTurnNudgeAfter = 3;

inline SimulationOutcome simulate_conversation(const prompts::TemplateRegistry& registry,
                                               const BuilderModels& models,
                                               SimulationSetup setup,
                                               dwrs::DwrsState state) {
    if (auto violations = setup.validate(); !violations.empty()) {
        throw ValidationFailed(std::move(violations));
    }
    SimulationOutcome outcome;
    outcome.record.scenario_id = setup.scenario.id;
    outcome.record.test_character = setup.test_character.name;
    outcome.record.language = setup.test_character.language;
    if (models.source != nullptr) {
        outcome.record.source_model = models.source->config().model_name;
    }
    outcome.record.cast = setup.cast_names();
    outcome.record.terminated_by = Termination::MaxTurns;

    std::vector<Utterance> history;
    std::string last_speaker;
    int scene_streak = 0;
    Dimension d_star = detail_sim::propose_dimension(state);
    setup.target_dimension = d_star;
    Language lang = setup.test_character.language;

    auto ask_director = [&](const std::set<std::string>& eligible, const std::string& nudge) {
        std::string prompt = registry.render(
            "director", lang,
            {{"background", setup.scenario.background},
             {"cast", detail_sim::join_names(setup.cast_names())},
             {"dialogue_history", render_history(history)},
             {"eligible", detail_sim::join_names({eligible.begin(), eligible.end()})},
             {"nudge", nudge}});
        auto parse = [&](const std::string& text) {
            return gateway::parse_speaker(text, eligible);
        };
        return gateway::complete_parsed(
            *models.director,
            gateway::ChatRequest::user(std::move(prompt),
                                       gateway::default_temperature(gateway::ModelRole::Director)),
            parse);
    };

    for (int turn = 0; turn < setup.limits.max_turns; ++turn) {
        std::set<std::string> eligible;
        for (const auto& n : setup.cast_names()) {
            if (n != last_speaker) eligible.insert(n);
        }
        std::string nudge;
        if (scene_streak >= kTestTurnNudgeAfter &&
            eligible.count(setup.test_character.name) != 0U) {
            nudge = "The test character " + setup.test_character.name +
                    " has not spoken for a while; strongly prefer giving them the next turn.\n\n";
        }

        gateway::TurnDecision decision;
        try {
            decision = ask_director(eligible, nudge);
            if (decision.terminate &&
                static_cast<int>(outcome.record.turns.size()) < setup.limits.min_turns) {
                decision = ask_director(
                    eligible, "The conversation is still too short to end; pick a speaker.\n\n");
            }
            // a long scene-only streak earns one insistent re-ask
            if (!decision.terminate && scene_streak >= kTestTurnNudgeAfter &&
                decision.next_speaker != setup.test_character.name &&
                eligible.count(setup.test_character.name) != 0U) {
                decision = ask_director(
                    eligible, "Give the test character " + setup.test_character.name +
                                  " the next turn unless it breaks the scene.\n\n");
            }
        } catch (const Error& e) {
            outcome.abort_reason = std::string("director: ") + e.what();
            outcome.state = state;
            return outcome;
        }

        if (decision.terminate) {
            outcome.record.terminated_by = Termination::Director;
            break;
        }

        try {
            if (decision.next_speaker == setup.test_character.name) {
                TestTurnResult result = test_turn(registry, models, setup, history, d_star);
                history.push_back(result.record.utterance);
                if (result.record.retained) {
                    state = dwrs::commit(state, *result.record.judge_dimension);
                }
                outcome.record.turns.push_back(std::move(result.record));
                scene_streak = 0;
                d_star = detail_sim::propose_dimension(state);
                setup.target_dimension = d_star;
            } else {
                gateway::ChatRequest prompt =
                    build_scene_prompt(registry, setup, decision.next_speaker, history, d_star);
                Utterance reply = gateway::complete_parsed(
                    *models.scene, prompt, [&](const std::string& text) {
                        return gateway::parse_utterance(text, decision.next_speaker);
                    });
                history.push_back(reply);
                TurnRecord record;
                record.utterance = std::move(reply);
                record.origin = TurnOrigin::SceneModel;
                outcome.record.turns.push_back(std::move(record));
                ++scene_streak;
            }
        } catch (const Error& e) {
            outcome.abort_reason = std::string("turn ") + std::to_string(turn) + ": " + e.what();
            outcome.state = state;
            return outcome;
        }
        last_speaker = decision.next_speaker;
    }

    outcome.state = state;
    return outcome;
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

class Starvation : public Error {
public:
    Starvation(std::string character, Dimension dimension, int attempts)
        : Error("coverage starved for character '" + character + "' on dimension " +
                to_code(dimension) + " after " + std::to_string(attempts) + " conversations"),
          character_(std::move(character)), dimension_(dimension), attempts_(attempts) {}

    const std::string& character() const { return character_; }
    Dimension dimension() const { return dimension_; }
    int attempts() const { return attempts_; }

private:
    std::string character_;
    Dimension dimension_;
    int attempts_;
};

struct BuildConfig {
    long long tau = 10;
    uint64_t seed = 0;
    SimulationLimits limits;
    int attempt_budget = 64;  // conversations per character before giving up
};

struct BuildModelSet {
    gateway::ModelClient* director = nullptr;
    gateway::ModelClient* scene = nullptr;
    std::vector<gateway::ModelClient*> sources;  // round-robin per conversation
    gateway::ModelClient* base = nullptr;
    gateway::ModelClient* judge = nullptr;
};

struct BuildResult {
    std::vector<BenchmarkInstance> instances;
    std::vector<ConversationRecord> conversations;
    std::map<std::string, dwrs::DwrsState> coverage;  // per character
};

inline uint64_t derive_seed(uint64_t base, std::string_view component) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(base >> (i * 8)));
    mix('|');
    for (char c : component) mix(static_cast<unsigned char>(c));
    return h;
}

namespace detail_build {

inline std::string slug(const std::string& name) {
    std::string out;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!out.empty() && out.back() != '-') {
            out += '-';
        }
    }
    while (!out.empty() && out.back() == '-') out.pop_back();
    return out.empty() ? "character" : out;
}

}  // namespace detail_build

// Instances banked from one quality-approved conversation: the retained test
// turns that also pass the rule-based format screen. Histories are rebuilt by
// replaying the record, so each instance's history prefix matches the
// transcript exactly.
inline std::vector<BenchmarkInstance> instances_from_record(
    const ConversationRecord& record, const CharacterProfile& test_character,
    int* next_serial) {
    std::vector<BenchmarkInstance> out;
    std::vector<Utterance> history;
    for (const auto& turn : record.turns) {
        if (turn.retained && format_filter(turn.utterance).empty()) {
            BenchmarkInstance inst;
            std::ostringstream id;
            id << detail_build::slug(test_character.name) << "-"
               << (test_character.language == Language::EN ? "en" : "zh") << "-"
               << std::setfill('0') << std::setw(4) << (*next_serial)++;
            inst.id = id.str();
            inst.language = test_character.language;
            inst.test_character = test_character;
            inst.scenario_id = record.scenario_id;
            inst.history = history;
            inst.dimension = *turn.judge_dimension;
            inst.reference_utterance = turn.utterance;
            inst.source_model = record.source_model;
            inst.selection_score = *turn.sigma;
            out.push_back(std::move(inst));
        }
        history.push_back(turn.utterance);
    }
    return out;
}

// Runs conversations for every character until each dimension has banked at
// least tau instances. Conversations that fail the quality filter leave the
// authoritative coverage untouched; commits made inside the simulation only
// steer that conversation's emphasis proposals.
inline BuildResult build_benchmark(const prompts::TemplateRegistry& registry,
                                   const BuildModelSet& models,
                                   const std::vector<CharacterProfile>& characters,
                                   const pool::Pool& scenario_pool, const BuildConfig& cfg) {
    if (cfg.tau < 1) throw Error("tau must be >= 1");
    if (models.sources.empty()) throw Error("at least one source endpoint is required");
    BuildResult result;
    size_t conversation_counter = 0;

    for (const auto& character : characters) {
        if (auto violations = validate_profile(character); !violations.empty()) {
            throw ValidationFailed(std::move(violations));
        }
        dwrs::DwrsState coverage = dwrs::DwrsState::fresh(
            cfg.tau, derive_seed(cfg.seed, "dwrs:" + character.name));
        std::mt19937_64 pool_rng(derive_seed(cfg.seed, "pool:" + character.name));
        int attempts = 0;
        int serial = 0;
        std::string last_scenario_id;

        while (!dwrs::done(coverage)) {
            if (attempts >= cfg.attempt_budget) {
                Dimension starved = Dimension::CR;
                long long lowest = coverage.counts.at(Dimension::CR);
                for (Dimension d : kAllDimensions) {
                    if (coverage.counts.at(d) < lowest) {
                        lowest = coverage.counts.at(d);
                        starved = d;
                    }
                }
                throw Starvation(character.name, starved, attempts);
            }

            pool::SampleFilter filter;
            filter.language = character.language;
            if (!last_scenario_id.empty()) filter.exclude_ids.insert(last_scenario_id);
            const Scenario* scenario = nullptr;
            try {
                scenario = &pool::sample(scenario_pool, filter, pool_rng);
            } catch (const pool::EmptyPool&) {
                filter.exclude_ids.clear();
                scenario = &pool::sample(scenario_pool, filter, pool_rng);
            }
            last_scenario_id = scenario->id;

            SimulationSetup setup;
            setup.scenario = *scenario;
            setup.test_character = character;
            setup.limits = cfg.limits;
            if (!setup.validate().empty()) {
                ++attempts;
                continue;  // e.g. the character natively appears in this scenario
            }

            BuilderModels conv_models;
            conv_models.director = models.director;
            conv_models.scene = models.scene;
            conv_models.source = models.sources[conversation_counter % models.sources.size()];
            conv_models.base = models.base;
            conv_models.judge = models.judge;
            ++conversation_counter;
            ++attempts;

            SimulationOutcome outcome =
                simulate_conversation(registry, conv_models, setup, coverage);
            if (outcome.abort_reason) {
                outcome.record.quality = Quality::Unrated;
                result.conversations.push_back(std::move(outcome.record));
                continue;
            }
            outcome.record.quality = quality_filter(registry, outcome.record, *models.judge);
            if (outcome.record.quality == Quality::High) {
                for (auto& inst :
                     instances_from_record(outcome.record, character, &serial)) {
                    coverage = dwrs::commit(coverage, inst.dimension);
                    result.instances.push_back(std::move(inst));
                }
            }
            result.conversations.push_back(std::move(outcome.record));
        }
        result.coverage.emplace(character.name, std::move(coverage));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Transcript serialization
// ---------------------------------------------------------------------------

inline json encode(const TurnRecord& t) {
    json j = json::object();
    j["utterance"] = rpbench::encode(t.utterance);
    j["origin"] = to_string(t.origin);
    if (t.sigma) j["sigma"] = *t.sigma;
    if (t.judge_dimension) j["judge_dimension"] = to_code(*t.judge_dimension);
    if (t.judge_explanation) j["judge_explanation"] = *t.judge_explanation;
    j["retained"] = t.retained;
    return j;
}

inline TurnRecord decode_turn_record(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"utterance", "origin", "sigma", "judge_dimension",
                                     "judge_explanation", "retained"});
    TurnRecord t;
    t.utterance = decode_utterance(detail::require_field(j, path, "utterance"),
                                   path + ".utterance");
    t.origin = turn_origin_from_string(detail::get_string(j, path, "origin"));
    if (j.contains("sigma")) t.sigma = static_cast<int>(detail::get_int(j, path, "sigma"));
    if (j.contains("judge_dimension")) {
        t.judge_dimension = dimension_from_code(detail::get_string(j, path, "judge_dimension"));
    }
    if (j.contains("judge_explanation")) {
        t.judge_explanation = detail::get_string(j, path, "judge_explanation");
    }
    const json& retained = detail::require_field(j, path, "retained");
    if (!retained.is_boolean()) throw ParseError(path + ".retained", "expected a boolean");
    t.retained = retained.get<bool>();
    return t;
}

inline json encode(const ConversationRecord& r) {
    json j = json::object();
    j["scenario_id"] = r.scenario_id;
    j["test_character"] = r.test_character;
    j["language"] = rpbench::to_string(r.language);
    j["source_model"] = r.source_model;
    j["cast"] = r.cast;
    j["turns"] = json::array();
    for (const auto& t : r.turns) j["turns"].push_back(encode(t));
    j["quality"] = to_string(r.quality);
    j["terminated_by"] = r.terminated_by == Termination::Director ? "Director" : "MaxTurns";
    return j;
}

inline ConversationRecord decode_conversation(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"scenario_id", "test_character", "language",
                                     "source_model", "cast", "turns", "quality",
                                     "terminated_by"});
    ConversationRecord r;
    r.scenario_id = detail::get_string(j, path, "scenario_id");
    r.test_character = detail::get_string(j, path, "test_character");
    r.language = language_from_string(detail::get_string(j, path, "language"));
    r.source_model = detail::get_string(j, path, "source_model");
    for (const auto& name : detail::require_field(j, path, "cast")) {
        r.cast.push_back(name.get<std::string>());
    }
    const json& turns = detail::require_field(j, path, "turns");
    if (!turns.is_array()) throw ParseError(path + ".turns", "expected an array");
    for (size_t i = 0; i < turns.size(); ++i) {
        r.turns.push_back(
            decode_turn_record(turns[i], path + ".turns[" + std::to_string(i) + "]"));
    }
    r.quality = quality_from_string(detail::get_string(j, path, "quality"));
    std::string term = detail::get_string(j, path, "terminated_by");
    r.terminated_by = term == "Director" ? Termination::Director : Termination::MaxTurns;
    return r;
}

}  // namespace rpbench::builder
