#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rpbench/builder.hpp"
#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/pool.hpp"
#include "rpbench/prompts.hpp"

namespace rpbench::synth {

// Staged character synthesis: thematic seeds grow into a worldview, a profile,
// a debut scene, and opening dialogue, with a critique-and-revise pass after
// each stage.

enum class Stage { Seeds, Worldview, Profiles, Scene, Dialogue };

inline constexpr std::array<Stage, 5> kStages = {Stage::Seeds, Stage::Worldview,
                                                 Stage::Profiles, Stage::Scene,
                                                 Stage::Dialogue};

inline std::string to_string(Stage s) {
    switch (s) {
        case Stage::Seeds: return "seeds";
        case Stage::Worldview: return "worldview";
        case Stage::Profiles: return "profiles";
        case Stage::Scene: return "scene";
        case Stage::Dialogue: return "dialogue";
    }
    return "?";
}

class StageFailed : public Error {
public:
    StageFailed(Stage stage, std::vector<std::string> violations)
        : Error(describe(stage, violations)),
          stage_(stage), violations_(std::move(violations)) {}

    Stage stage() const { return stage_; }
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string describe(Stage stage, const std::vector<std::string>& violations) {
        std::string out = "stage '" + to_string(stage) + "' failed:";
        for (const auto& v : violations) out += " [" + v + "]";
        return out;
    }
    Stage stage_;
    std::vector<std::string> violations_;
};

struct SynthJob {
    Language language = Language::EN;
    int n_seeds = 5;
    int review_rounds = 1;
    std::map<Stage, std::string> stage_outputs;  // final text per stage
};

struct AuditEntry {
    Stage stage = Stage::Seeds;
    std::string step;  // "generate", "review1", ...
    std::string text;
};

struct SynthResult {
    CharacterProfile profile;
    std::string worldview;
    Scenario debut_scene;
    std::vector<AuditEntry> audit;
    int calls_made = 0;
};

inline constexpr std::string_view kApprovedToken = "APPROVED";

namespace detail_synth {

// "Speaker: [thought] (action) text" script line into an Utterance.
inline Utterance parse_script_line(const std::string& line) {
    size_t colon = line.find(':');
    size_t colon_wide = line.find("：");
    if (colon_wide != std::string::npos && (colon == std::string::npos || colon_wide < colon)) {
        colon = colon_wide;
    }
    if (colon == std::string::npos) throw UnparseableReply("script line has no speaker: " + line);
    std::string speaker = gateway::trim(line.substr(0, colon));
    std::string rest = gateway::trim(
        line.substr(colon + (line.compare(colon, 3, "：") == 0 ? 3 : 1)));
    Utterance u;
    u.speaker = speaker;
    if (!rest.empty() && rest.front() == '[') {
        size_t close = rest.find(']');
        if (close != std::string::npos) {
            u.thought = gateway::trim(rest.substr(1, close - 1));
            rest = gateway::trim(rest.substr(close + 1));
        }
    }
    Utterance parsed = gateway::parse_utterance(rest, speaker);
    u.action = parsed.action;
    u.text = parsed.text;
    return u;
}

inline std::vector<Utterance> parse_script(const std::string& text) {
    std::vector<Utterance> lines;
    std::istringstream in(pool::strip_code_fence(text));
    std::string line;
    while (std::getline(in, line)) {
        if (gateway::trim(line).empty()) continue;
        lines.push_back(parse_script_line(line));
    }
    if (lines.empty()) throw UnparseableReply("dialogue stage produced no lines");
    return lines;
}

}  // namespace detail_synth

// Scene-stage decode: structure without the full-scenario validation, since
// the dialogue is merged in by the next stage.
inline Scenario decode_scenario_fields(const json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"id", "source", "background", "motivations",
                                    "original_dialogue", "scene_characters"});
    Scenario s;
    if (j.contains("id")) s.id = j["id"].get<std::string>();
    if (j.contains("source") && j["source"].is_object()) {
        if (j["source"].contains("book_title")) {
            s.source.book_title = j["source"]["book_title"].get<std::string>();
        }
        if (j["source"].contains("language")) {
            s.source.language = language_from_string(j["source"]["language"].get<std::string>());
        }
    }
    s.background = detail::get_string(j, "$", "background");
    if (j.contains("motivations")) {
        for (auto it = j["motivations"].begin(); it != j["motivations"].end(); ++it) {
            s.motivations[it.key()] = it.value().get<std::string>();
        }
    }
    if (j.contains("original_dialogue")) {
        for (size_t i = 0; i < j["original_dialogue"].size(); ++i) {
            s.original_dialogue.push_back(decode_utterance(
                j["original_dialogue"][i],
                "$.original_dialogue[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("scene_characters")) {
        for (size_t i = 0; i < j["scene_characters"].size(); ++i) {
            CharacterProfile c = decode_profile(
                j["scene_characters"][i], "$.scene_characters[" + std::to_string(i) + "]");
            c.kind = CharacterKind::Scene;
            s.scene_characters.push_back(std::move(c));
        }
    }
    return s;
}

inline SynthResult synthesize_character(const prompts::TemplateRegistry& registry,
                                        SynthJob& job, gateway::ModelClient& model) {
    SynthResult result;
    std::string last_prompt;

    auto run_stage = [&](Stage stage, const std::string& template_id,
                         const std::map<std::string, std::string>& bindings) {
        std::string draft;
        try {
            last_prompt = registry.render(template_id, job.language, bindings);
            gateway::Completion reply = model.complete(gateway::ChatRequest::user(
                last_prompt, gateway::default_temperature(model.config().role)));
            ++result.calls_made;
            draft = reply.text;
        } catch (const Error& e) {
            throw StageFailed(stage, {e.what()});
        }
        result.audit.push_back({stage, "generate", draft});
        for (int round = 1; round <= job.review_rounds; ++round) {
            std::string review_prompt =
                registry.render("synth_review", job.language,
                                {{"stage", to_string(stage)}, {"draft", draft}});
            gateway::Completion reply = model.complete(gateway::ChatRequest::user(
                review_prompt, gateway::default_temperature(model.config().role)));
            ++result.calls_made;
            std::string text = gateway::trim(reply.text);
            result.audit.push_back({stage, "review" + std::to_string(round), text});
            if (text == kApprovedToken) break;
            draft = reply.text;
        }
        job.stage_outputs[stage] = draft;
        return draft;
    };

    // Structured stage outputs get one re-ask before the stage fails.
    auto parse_stage = [&](Stage stage, const std::string& draft, auto parser) {
        try {
            return parser(draft);
        } catch (const Error&) {
            gateway::ChatRequest retry = gateway::ChatRequest::user(
                last_prompt, gateway::default_temperature(model.config().role));
            retry.messages.push_back({gateway::MessageRole::Assistant, draft});
            retry.messages.push_back(
                {gateway::MessageRole::User,
                 "Please answer again, strictly in the required format."});
            gateway::Completion reply = model.complete(retry);
            ++result.calls_made;
            result.audit.push_back({stage, "reask", reply.text});
            try {
                return parser(reply.text);
            } catch (const Error& e) {
                throw StageFailed(stage, {e.what()});
            }
        }
    };

    std::string seeds = run_stage(Stage::Seeds, "synth_seeds",
                                  {{"n_seeds", std::to_string(job.n_seeds)}});
    std::string worldview =
        run_stage(Stage::Worldview, "synth_worldview", {{"seeds", seeds}});
    result.worldview = worldview;

    std::string profile_text =
        run_stage(Stage::Profiles, "synth_profile",
                  {{"worldview", worldview}, {"language", to_string(job.language)}});
    result.profile = parse_stage(Stage::Profiles, profile_text, [&](const std::string& text) {
        CharacterProfile p =
            decode_profile(parse_json_text(pool::strip_code_fence(text), "profile"));
        std::vector<std::string> violations = validate_profile(p);
        for (const char* required : {"Name", "Persona", "Public Background"}) {
            if (p.find(required) == nullptr) {
                violations.push_back(std::string("missing attribute '") + required + "'");
            }
        }
        if (!violations.empty()) throw ValidationFailed(std::move(violations));
        return p;
    });
    result.profile.kind = CharacterKind::Synthesized;
    result.profile.language = job.language;

    std::string scene_text =
        run_stage(Stage::Scene, "synth_scene",
                  {{"worldview", worldview},
                   {"profile", builder::render_profile_block(result.profile)}});
    Scenario scene = parse_stage(Stage::Scene, scene_text, [&](const std::string& text) {
        return decode_scenario_fields(
            parse_json_text(pool::strip_code_fence(text), "debut scene"));
    });

    std::string dialogue_text =
        run_stage(Stage::Dialogue, "synth_dialogue",
                  {{"scene", scene.background},
                   {"profile", builder::render_profile_block(result.profile)}});
    scene.original_dialogue = parse_stage(
        Stage::Dialogue, dialogue_text,
        [&](const std::string& text) { return detail_synth::parse_script(text); });

    // The debut character belongs to the finished scene's cast.
    CharacterProfile debut = result.profile;
    debut.kind = CharacterKind::Scene;
    scene.scene_characters.insert(scene.scene_characters.begin(), debut);
    if (scene.motivations.count(debut.name) == 0U) {
        scene.motivations[debut.name] = "Introduce yourself through this scene.";
    }
    scene.source.language = job.language;
    if (scene.id.empty()) scene.id = builder::detail_build::slug(debut.name) + "-debut";
    if (auto violations = validate_scenario(scene); !violations.empty()) {
        throw StageFailed(Stage::Dialogue, std::move(violations));
    }
    result.debut_scene = std::move(scene);
    return result;
}

// Audit file: the full stage-by-stage transcript.
inline json encode_audit(const SynthResult& result) {
    json entries = json::array();
    for (const auto& e : result.audit) {
        entries.push_back({{"stage", to_string(e.stage)}, {"step", e.step}, {"text", e.text}});
    }
    return json{{"entries", entries}, {"calls_made", result.calls_made}};
}

}  // namespace rpbench::synth
