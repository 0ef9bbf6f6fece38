#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rpbench/errors.hpp"

namespace rpbench {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

enum class Visibility { Public, Private };

enum class Language { EN, ZH };

enum class CharacterKind { Established, Synthesized, Scene };

// The five evaluation dimensions, with stable two-letter codes.
enum class Dimension { CR, FR, RR, CA, PA };

inline constexpr std::array<Dimension, 5> kAllDimensions = {
    Dimension::CR, Dimension::FR, Dimension::RR, Dimension::CA, Dimension::PA};

inline std::string to_code(Dimension d) {
    switch (d) {
        case Dimension::CR: return "CR";
        case Dimension::FR: return "FR";
        case Dimension::RR: return "RR";
        case Dimension::CA: return "CA";
        case Dimension::PA: return "PA";
    }
    return "??";
}

inline Dimension dimension_from_code(std::string_view code) {
    for (Dimension d : kAllDimensions) {
        if (to_code(d) == code) return d;
    }
    throw ParseError("$", "unknown dimension '" + std::string(code) + "'");
}

inline std::string to_string(Language lang) {
    return lang == Language::EN ? "EN" : "ZH";
}

inline Language language_from_string(std::string_view s) {
    if (s == "EN") return Language::EN;
    if (s == "ZH") return Language::ZH;
    throw ParseError("$", "unknown language '" + std::string(s) + "'");
}

inline std::string to_string(CharacterKind k) {
    switch (k) {
        case CharacterKind::Established: return "Established";
        case CharacterKind::Synthesized: return "Synthesized";
        case CharacterKind::Scene: return "Scene";
    }
    return "?";
}

inline CharacterKind kind_from_string(std::string_view s) {
    if (s == "Established") return CharacterKind::Established;
    if (s == "Synthesized") return CharacterKind::Synthesized;
    if (s == "Scene") return CharacterKind::Scene;
    throw ParseError("$", "unknown character kind '" + std::string(s) + "'");
}

inline std::string to_string(Visibility v) {
    return v == Visibility::Public ? "Public" : "Private";
}

inline Visibility visibility_from_string(std::string_view s) {
    if (s == "Public") return Visibility::Public;
    if (s == "Private") return Visibility::Private;
    throw ParseError("$", "unknown visibility '" + std::string(s) + "'");
}

// Attribute keys treated as private when a character file does not say.
inline const std::set<std::string>& default_private_keys() {
    static const std::set<std::string> keys = {
        "Relationships", "Hobbies", "Speech Pattern", "Private Background"};
    return keys;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct ProfileAttribute {
    std::string key;
    std::string value;
    Visibility visibility = Visibility::Public;

    bool operator==(const ProfileAttribute&) const = default;
};

struct CharacterProfile {
    std::string name;
    Language language = Language::EN;
    CharacterKind kind = CharacterKind::Established;
    std::vector<ProfileAttribute> attributes;

    bool operator==(const CharacterProfile&) const = default;

    const ProfileAttribute* find(std::string_view key) const {
        for (const auto& a : attributes) {
            if (a.key == key) return &a;
        }
        return nullptr;
    }
};

// One line of dialogue. The speaker is a character name or "Environment".
struct Utterance {
    std::string speaker;
    std::optional<std::string> thought;
    std::optional<std::string> action;
    std::string text;

    bool operator==(const Utterance&) const = default;
};

inline constexpr std::string_view kEnvironmentSpeaker = "Environment";

struct ScenarioSource {
    std::string book_title;
    Language language = Language::EN;

    bool operator==(const ScenarioSource&) const = default;
};

// A sampled scene: background, per-character motivations, the original
// dialogue used as reference material, and the cast native to the scene.
struct Scenario {
    std::string id;
    ScenarioSource source;
    std::string background;
    std::map<std::string, std::string> motivations;
    std::vector<Utterance> original_dialogue;
    std::vector<CharacterProfile> scene_characters;

    bool operator==(const Scenario&) const = default;

    const CharacterProfile* find_character(std::string_view name) const {
        for (const auto& c : scene_characters) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

// One dataset record: a dialogue prefix, the reference reply the test
// character should match, and the dimension the judge assigned to it.
struct BenchmarkInstance {
    std::string id;
    Language language = Language::EN;
    CharacterProfile test_character;
    std::string scenario_id;
    std::vector<Utterance> history;
    Dimension dimension = Dimension::CR;
    Utterance reference_utterance;
    std::string source_model;
    int selection_score = 1;

    bool operator==(const BenchmarkInstance&) const = default;
};

// ---------------------------------------------------------------------------
// Visibility projection and validation
// ---------------------------------------------------------------------------

// Keeps only the Public attributes, preserving order and the name.
inline CharacterProfile project_public(const CharacterProfile& profile) {
    CharacterProfile out;
    out.name = profile.name;
    out.language = profile.language;
    out.kind = profile.kind;
    for (const auto& a : profile.attributes) {
        if (a.visibility == Visibility::Public) out.attributes.push_back(a);
    }
    return out;
}

inline std::vector<std::string> validate_profile(const CharacterProfile& profile) {
    std::vector<std::string> violations;
    if (profile.name.empty()) violations.push_back("name empty");
    std::set<std::string> seen;
    for (const auto& a : profile.attributes) {
        if (a.key.empty()) {
            violations.push_back("attribute key empty");
            continue;
        }
        if (a.key.find('\n') != std::string::npos) {
            violations.push_back("attribute key contains newline: '" + a.key + "'");
        }
        if (a.value.empty()) {
            violations.push_back("attribute value empty for key '" + a.key + "'");
        }
        if (!seen.insert(a.key).second) {
            violations.push_back("duplicate attribute key '" + a.key + "'");
        }
        if (a.key == "Name" && a.visibility != Visibility::Public) {
            violations.push_back("attribute 'Name' must be Public");
        }
    }
    return violations;
}

inline std::vector<std::string> validate_scenario(const Scenario& scenario) {
    std::vector<std::string> violations;
    if (scenario.id.empty()) violations.push_back("id empty");
    if (scenario.background.empty()) violations.push_back("background empty");
    if (scenario.scene_characters.empty()) violations.push_back("scene_characters empty");
    if (scenario.original_dialogue.empty()) violations.push_back("original_dialogue empty");
    for (const auto& c : scenario.scene_characters) {
        for (auto& v : validate_profile(c)) {
            violations.push_back("scene character '" + c.name + "': " + v);
        }
    }
    for (const auto& [name, motivation] : scenario.motivations) {
        if (scenario.find_character(name) == nullptr) {
            violations.push_back("motivation for unknown character '" + name + "'");
        }
        if (motivation.empty()) {
            violations.push_back("empty motivation for '" + name + "'");
        }
    }
    for (const auto& u : scenario.original_dialogue) {
        if (u.speaker != kEnvironmentSpeaker &&
            scenario.find_character(u.speaker) == nullptr) {
            violations.push_back("dialogue speaker '" + u.speaker +
                                 "' is not a scene character");
        }
    }
    return violations;
}

// ---------------------------------------------------------------------------
// Strict JSON decoding helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ParseError(path, "expected an object");
}

inline const json& require_field(const json& j, const std::string& path,
                                 const std::string& field) {
    auto it = j.find(field);
    if (it == j.end()) throw ParseError(path, "missing field '" + field + "'");
    return *it;
}

inline void reject_unknown(const json& j, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = std::any_of(allowed.begin(), allowed.end(),
                                 [&](std::string_view a) { return a == it.key(); });
        if (!known) throw ParseError(path, "unknown field '" + it.key() + "'");
    }
}

inline std::string get_string(const json& j, const std::string& path,
                              const std::string& field) {
    const json& v = require_field(j, path, field);
    if (!v.is_string()) throw ParseError(path + "." + field, "expected a string");
    return v.get<std::string>();
}

inline long long get_int(const json& j, const std::string& path,
                         const std::string& field) {
    const json& v = require_field(j, path, field);
    if (!v.is_number_integer()) throw ParseError(path + "." + field, "expected an integer");
    return v.get<long long>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonical serialization (sorted keys, UTF-8, compact dumps)
// ---------------------------------------------------------------------------

inline json encode(const Utterance& u) {
    json j = json::object();
    j["speaker"] = u.speaker;
    if (u.thought) j["thought"] = *u.thought;
    if (u.action) j["action"] = *u.action;
    j["text"] = u.text;
    return j;
}

inline Utterance decode_utterance(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"speaker", "thought", "action", "text"});
    Utterance u;
    u.speaker = detail::get_string(j, path, "speaker");
    u.text = detail::get_string(j, path, "text");
    if (j.contains("thought")) u.thought = detail::get_string(j, path, "thought");
    if (j.contains("action")) u.action = detail::get_string(j, path, "action");
    if (u.text.empty() && !u.action) {
        throw ParseError(path + ".text", "text empty and no action present");
    }
    return u;
}

inline json encode(const ProfileAttribute& a) {
    json j = json::object();
    j["key"] = a.key;
    j["value"] = a.value;
    j["visibility"] = to_string(a.visibility);
    return j;
}

inline ProfileAttribute decode_attribute(const json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"key", "value", "visibility"});
    ProfileAttribute a;
    a.key = detail::get_string(j, path, "key");
    a.value = detail::get_string(j, path, "value");
    if (j.contains("visibility")) {
        try {
            a.visibility = visibility_from_string(j["visibility"].get<std::string>());
        } catch (const ParseError& e) {
            throw ParseError(path + ".visibility", e.what());
        }
    } else {
        // Unlabeled attributes fall back to the conventional private set.
        a.visibility = default_private_keys().count(a.key) != 0U ? Visibility::Private
                                                                 : Visibility::Public;
    }
    return a;
}

inline json encode(const CharacterProfile& p) {
    json j = json::object();
    j["name"] = p.name;
    j["language"] = to_string(p.language);
    j["kind"] = to_string(p.kind);
    j["attributes"] = json::array();
    for (const auto& a : p.attributes) j["attributes"].push_back(encode(a));
    return j;
}

inline CharacterProfile decode_profile(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"name", "language", "kind", "attributes"});
    CharacterProfile p;
    p.name = detail::get_string(j, path, "name");
    try {
        p.language = language_from_string(detail::get_string(j, path, "language"));
        if (j.contains("kind")) {
            p.kind = kind_from_string(j["kind"].get<std::string>());
        }
    } catch (const ParseError& e) {
        throw ParseError(path, e.what());
    }
    const json& attrs = detail::require_field(j, path, "attributes");
    if (!attrs.is_array()) throw ParseError(path + ".attributes", "expected an array");
    for (size_t i = 0; i < attrs.size(); ++i) {
        p.attributes.push_back(
            decode_attribute(attrs[i], path + ".attributes[" + std::to_string(i) + "]"));
    }
    return p;
}

inline json encode(const Scenario& s) {
    json j = json::object();
    j["id"] = s.id;
    j["source"] = {{"book_title", s.source.book_title},
                   {"language", to_string(s.source.language)}};
    j["background"] = s.background;
    j["motivations"] = json::object();
    for (const auto& [name, m] : s.motivations) j["motivations"][name] = m;
    j["original_dialogue"] = json::array();
    for (const auto& u : s.original_dialogue) j["original_dialogue"].push_back(encode(u));
    j["scene_characters"] = json::array();
    for (const auto& c : s.scene_characters) j["scene_characters"].push_back(encode(c));
    return j;
}

inline Scenario decode_scenario(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path, {"id", "source", "background", "motivations",
                                     "original_dialogue", "scene_characters"});
    Scenario s;
    s.id = detail::get_string(j, path, "id");
    const json& src = detail::require_field(j, path, "source");
    detail::require_object(src, path + ".source");
    detail::reject_unknown(src, path + ".source", {"book_title", "language"});
    s.source.book_title = detail::get_string(src, path + ".source", "book_title");
    try {
        s.source.language =
            language_from_string(detail::get_string(src, path + ".source", "language"));
    } catch (const ParseError& e) {
        throw ParseError(path + ".source", e.what());
    }
    s.background = detail::get_string(j, path, "background");
    const json& mots = detail::require_field(j, path, "motivations");
    detail::require_object(mots, path + ".motivations");
    for (auto it = mots.begin(); it != mots.end(); ++it) {
        if (!it.value().is_string()) {
            throw ParseError(path + ".motivations." + it.key(), "expected a string");
        }
        s.motivations[it.key()] = it.value().get<std::string>();
    }
    const json& dlg = detail::require_field(j, path, "original_dialogue");
    if (!dlg.is_array()) throw ParseError(path + ".original_dialogue", "expected an array");
    for (size_t i = 0; i < dlg.size(); ++i) {
        s.original_dialogue.push_back(decode_utterance(
            dlg[i], path + ".original_dialogue[" + std::to_string(i) + "]"));
    }
    const json& chars = detail::require_field(j, path, "scene_characters");
    if (!chars.is_array()) throw ParseError(path + ".scene_characters", "expected an array");
    for (size_t i = 0; i < chars.size(); ++i) {
        CharacterProfile c = decode_profile(
            chars[i], path + ".scene_characters[" + std::to_string(i) + "]");
        c.kind = CharacterKind::Scene;
        s.scene_characters.push_back(std::move(c));
    }
    if (auto violations = validate_scenario(s); !violations.empty()) {
        throw ValidationFailed(std::move(violations));
    }
    return s;
}

inline json encode(const BenchmarkInstance& b) {
    json j = json::object();
    j["id"] = b.id;
    j["language"] = to_string(b.language);
    j["test_character"] = encode(b.test_character);
    j["scenario_id"] = b.scenario_id;
    j["history"] = json::array();
    for (const auto& u : b.history) j["history"].push_back(encode(u));
    j["dimension"] = to_code(b.dimension);
    j["reference_utterance"] = encode(b.reference_utterance);
    j["source_model"] = b.source_model;
    j["selection_score"] = b.selection_score;
    return j;
}

inline BenchmarkInstance decode_instance(const json& j, const std::string& path = "$") {
    detail::require_object(j, path);
    detail::reject_unknown(j, path,
                           {"id", "language", "test_character", "scenario_id", "history",
                            "dimension", "reference_utterance", "source_model",
                            "selection_score"});
    BenchmarkInstance b;
    b.id = detail::get_string(j, path, "id");
    try {
        b.language = language_from_string(detail::get_string(j, path, "language"));
        b.dimension = dimension_from_code(detail::get_string(j, path, "dimension"));
    } catch (const ParseError& e) {
        throw ParseError(path, e.what());
    }
    b.test_character =
        decode_profile(detail::require_field(j, path, "test_character"), path + ".test_character");
    b.scenario_id = detail::get_string(j, path, "scenario_id");
    const json& hist = detail::require_field(j, path, "history");
    if (!hist.is_array()) throw ParseError(path + ".history", "expected an array");
    for (size_t i = 0; i < hist.size(); ++i) {
        b.history.push_back(
            decode_utterance(hist[i], path + ".history[" + std::to_string(i) + "]"));
    }
    b.reference_utterance = decode_utterance(
        detail::require_field(j, path, "reference_utterance"), path + ".reference_utterance");
    b.source_model = detail::get_string(j, path, "source_model");
    b.selection_score = static_cast<int>(detail::get_int(j, path, "selection_score"));
    if (b.selection_score < 1 || b.selection_score > 2) {
        throw ParseError(path + ".selection_score",
                         "retained instances carry a selection score of 1 or 2");
    }
    if (b.reference_utterance.speaker != b.test_character.name) {
        throw ParseError(path + ".reference_utterance",
                         "speaker must be the test character");
    }
    if (!b.history.empty() && b.history.back().speaker == b.test_character.name) {
        throw ParseError(path + ".history",
                         "the last history speaker cannot be the test character");
    }
    return b;
}

// Canonical text form: compact dump with lexicographically sorted keys.
template <typename T>
std::string encode_text(const T& value) {
    return encode(value).dump();
}

inline json parse_json_text(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("$", "malformed JSON in " + what);
    return j;
}

// Line-delimited dataset: one BenchmarkInstance per line.
inline std::string encode_dataset(const std::vector<BenchmarkInstance>& instances) {
    std::string out;
    for (const auto& b : instances) {
        out += encode_text(b);
        out += '\n';
    }
    return out;
}

inline std::vector<BenchmarkInstance> decode_dataset(const std::string& text) {
    std::vector<BenchmarkInstance> out;
    size_t pos = 0;
    size_t line_no = 1;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        if (!line.empty()) {
            try {
                out.push_back(decode_instance(parse_json_text(line, "dataset line")));
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + " " + e.path(),
                                 e.what());
            }
        }
        pos = end + 1;
        ++line_no;
    }
    return out;
}

}  // namespace rpbench
