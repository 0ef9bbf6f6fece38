#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/prompt_texts.hpp"

namespace rpbench::prompts {

enum class TemplateLanguage { EN, ZH, Any };

inline std::string to_string(TemplateLanguage lang) {
    switch (lang) {
        case TemplateLanguage::EN: return "EN";
        case TemplateLanguage::ZH: return "ZH";
        case TemplateLanguage::Any: return "Any";
    }
    return "?";
}

inline TemplateLanguage template_language_from_string(std::string_view s) {
    if (s == "EN") return TemplateLanguage::EN;
    if (s == "ZH") return TemplateLanguage::ZH;
    if (s == "Any") return TemplateLanguage::Any;
    throw ParseError("$", "unknown template language '" + std::string(s) + "'");
}

class MissingTemplate : public Error {
public:
    MissingTemplate(const std::string& id, const std::string& lang)
        : Error("no template '" + id + "' for language " + lang) {}
};

class MissingBinding : public Error {
public:
    explicit MissingBinding(const std::string& name)
        : Error("missing binding '" + name + "'"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnusedBinding : public Error {
public:
    explicit UnusedBinding(const std::string& name)
        : Error("unused binding '" + name + "'"), name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

struct Template {
    std::string id;
    TemplateLanguage language = TemplateLanguage::Any;
    std::string body;
};

namespace detail {

inline bool is_ident_start(char c) {
    return (std::isalpha(static_cast<unsigned char>(c)) != 0) || c == '_';
}

inline bool is_ident_char(char c) {
    return (std::isalnum(static_cast<unsigned char>(c)) != 0) || c == '_';
}

// Placeholders are "{identifier}" groups; any other brace content is literal.
inline std::set<std::string> find_placeholders(const std::string& body) {
    std::set<std::string> names;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        if (j >= body.size() || !is_ident_start(body[j])) continue;
        while (j < body.size() && is_ident_char(body[j])) ++j;
        if (j < body.size() && body[j] == '}') {
            names.insert(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return names;
}

}  // namespace detail

struct RenderResult {
    std::string text;
    bool language_fallback = false;  // ZH request served by the EN body
};

class TemplateRegistry {
public:
    // Registry preloaded with the bundled default bodies.
    static TemplateRegistry with_defaults() {
        TemplateRegistry reg;
        reg.load_defaults();
        return reg;
    }

    void put(Template t) {
        if (t.body.empty()) throw Error("template '" + t.id + "' has an empty body");
        templates_[{t.id, t.language}] = std::move(t);
    }

    const Template& get(const std::string& id, Language lang) const {
        return resolve(id, lang).first;
    }

    bool has(const std::string& id, Language lang) const {
        TemplateLanguage tl = lang == Language::EN ? TemplateLanguage::EN : TemplateLanguage::ZH;
        return templates_.count({id, tl}) != 0U || templates_.count({id, TemplateLanguage::Any}) != 0U ||
               templates_.count({id, TemplateLanguage::EN}) != 0U;
    }

    RenderResult render_traced(const std::string& id, Language lang,
                               const std::map<std::string, std::string>& bindings) const {
        auto [tmpl, fallback] = resolve(id, lang);
        std::set<std::string> placeholders = detail::find_placeholders(tmpl.body);
        for (const auto& [name, value] : bindings) {
            (void)value;
            if (placeholders.count(name) == 0U) throw UnusedBinding(name);
        }
        for (const auto& name : placeholders) {
            if (bindings.count(name) == 0U) throw MissingBinding(name);
        }
        RenderResult out;
        out.language_fallback = fallback;
        out.text = substitute(tmpl.body, bindings);
        return out;
    }

    std::string render(const std::string& id, Language lang,
                       const std::map<std::string, std::string>& bindings) const {
        return render_traced(id, lang, bindings).text;
    }

    const Template& strategy_for(Dimension d, Language lang = Language::EN) const {
        return get("strategy_" + to_code(d), lang);
    }

    const Template& instruction_for(Dimension d, Language lang = Language::EN) const {
        return get("instruction_" + to_code(d), lang);
    }

    const Template& definition_for(Dimension d, Language lang = Language::EN) const {
        return get("definition_" + to_code(d), lang);
    }

    // Ids that must resolve (at least for EN) in a usable registry.
    static std::vector<std::string> mandatory_ids() {
        std::vector<std::string> ids;
        for (Dimension d : kAllDimensions) {
            ids.push_back("definition_" + to_code(d));
            ids.push_back("strategy_" + to_code(d));
            ids.push_back("instruction_" + to_code(d));
        }
        ids.insert(ids.end(), {"roleplay_test", "roleplay_scene", "judge_pairwise",
                               "checker", "director", "quality_filter"});
        return ids;
    }

    std::vector<std::string> missing_mandatory() const {
        std::vector<std::string> missing;
        for (const auto& id : mandatory_ids()) {
            if (!has(id, Language::EN)) missing.push_back(id);
        }
        return missing;
    }

    // Template file: first line "id=<id> lang=<EN|ZH|Any>", remainder the body.
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open template file " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        std::string content = buf.str();
        size_t nl = content.find('\n');
        std::string header = content.substr(0, nl == std::string::npos ? content.size() : nl);
        std::string body = nl == std::string::npos ? "" : content.substr(nl + 1);
        Template t = parse_header(header, path.string());
        t.body = std::move(body);
        put(std::move(t));
    }

    void load_directory(const std::filesystem::path& dir) {
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) load_file(f);
    }

    size_t size() const { return templates_.size(); }

private:
    static Template parse_header(const std::string& header, const std::string& where) {
        Template t;
        std::istringstream iss(header);
        std::string token;
        while (iss >> token) {
            if (token.rfind("id=", 0) == 0) {
                t.id = token.substr(3);
            } else if (token.rfind("lang=", 0) == 0) {
                t.language = template_language_from_string(token.substr(5));
            } else {
                throw Error("bad template header token '" + token + "' in " + where);
            }
        }
        if (t.id.empty()) throw Error("template header missing id= in " + where);
        return t;
    }

    std::pair<const Template&, bool> resolve(const std::string& id, Language lang) const {
        TemplateLanguage exact = lang == Language::EN ? TemplateLanguage::EN : TemplateLanguage::ZH;
        if (auto it = templates_.find({id, exact}); it != templates_.end()) {
            return {it->second, false};
        }
        if (auto it = templates_.find({id, TemplateLanguage::Any}); it != templates_.end()) {
            return {it->second, false};
        }
        // ZH requests fall back to the EN body when no ZH variant exists.
        if (lang == Language::ZH) {
            if (auto it = templates_.find({id, TemplateLanguage::EN}); it != templates_.end()) {
                return {it->second, true};
            }
        }
        throw MissingTemplate(id, rpbench::to_string(lang));
    }

    static std::string substitute(const std::string& body,
                                  const std::map<std::string, std::string>& bindings) {
        std::string out;
        out.reserve(body.size());
        for (size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '{') {
                size_t j = i + 1;
                if (j < body.size() && detail::is_ident_start(body[j])) {
                    while (j < body.size() && detail::is_ident_char(body[j])) ++j;
                    if (j < body.size() && body[j] == '}') {
                        out += bindings.at(body.substr(i + 1, j - i - 1));
                        i = j;
                        continue;
                    }
                }
            }
            out += body[i];
        }
        return out;
    }

    void load_defaults() {
        using namespace prompt_texts;
        auto any = [&](const char* id, const char* body) {
            put(Template{id, TemplateLanguage::Any, body});
        };
        any("definition_CR", kDefinitionCR);
        any("definition_FR", kDefinitionFR);
        any("definition_RR", kDefinitionRR);
        any("definition_CA", kDefinitionCA);
        any("definition_PA", kDefinitionPA);
        any("strategy_CR", kStrategyCR);
        any("strategy_FR", kStrategyFR);
        any("strategy_RR", kStrategyRR);
        any("strategy_CA", kStrategyCA);
        any("strategy_PA", kStrategyPA);
        any("instruction_CR", kInstructionCR);
        any("instruction_FR", kInstructionFR);
        any("instruction_RR", kInstructionRR);
        any("instruction_CA", kInstructionCA);
        any("instruction_PA", kInstructionPA);
        any("roleplay_test", kRoleplayTest);
        any("roleplay_scene", kRoleplayScene);
        any("judge_pairwise", kJudgePairwise);
        any("judge_select", kJudgeSelect);
        any("checker", kChecker);
        any("director", kDirector);
        any("quality_filter", kQualityFilter);
        any("extract_scenarios", kExtractScenarios);
        any("refine_boundary", kRefineBoundary);
        any("build_fragment", kBuildFragment);
        any("synth_seeds", kSynthSeeds);
        any("synth_worldview", kSynthWorldview);
        any("synth_profile", kSynthProfile);
        any("synth_scene", kSynthScene);
        any("synth_dialogue", kSynthDialogue);
        any("synth_review", kSynthReview);
    }

    std::map<std::pair<std::string, TemplateLanguage>, Template> templates_;
};

inline std::string dimension_long_name(Dimension d) {
    switch (d) {
        case Dimension::CR: return "Context Reliance";
        case Dimension::FR: return "Factual Recall";
        case Dimension::RR: return "Reflective Reasoning";
        case Dimension::CA: return "Conversational Ability";
        case Dimension::PA: return "Preference Alignment";
    }
    return "?";
}

// Criteria block for judge prompts: "<Long Name> Definition: ..." text.
inline std::string criteria_text(const TemplateRegistry& registry, Dimension d,
                                 Language lang) {
    return dimension_long_name(d) + " " + registry.definition_for(d, lang).body;
}

inline std::string all_definitions_text(const TemplateRegistry& registry, Language lang) {
    std::string out;
    for (Dimension d : kAllDimensions) {
        if (!out.empty()) out += "\n\n";
        out += "## " + dimension_long_name(d) + " (" + to_code(d) + ")\n";
        out += registry.definition_for(d, lang).body;
    }
    return out;
}

}  // namespace rpbench::prompts
