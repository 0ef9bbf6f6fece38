#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rpbench/prompts.hpp"

using namespace rpbench;
namespace fs = std::filesystem;

TEST_SUITE("prompts") {

TEST_CASE("registry resolves every mandatory template for EN") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    CHECK(reg.missing_mandatory().empty());
    for (const auto& id : prompts::TemplateRegistry::mandatory_ids()) {
        CHECK_NOTHROW(reg.get(id, Language::EN));
    }
}

TEST_CASE("checker render contains the answer-format instructions") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    std::string text = reg.render("checker", Language::EN,
                                  {{"judge_response", "the reply fabricates a sister"},
                                   {"test_model", "m"}});
    CHECK(text.find("Judgment: Yes") != std::string::npos);
    CHECK(text.find("Judgment: No") != std::string::npos);
    CHECK(text.find("the reply fabricates a sister") != std::string::npos);
    CHECK(text.find("Target Model: m") != std::string::npos);
    CHECK(text.find("{judge_response}") == std::string::npos);
    CHECK(text.find("{test_model}") == std::string::npos);
}

TEST_CASE("placeholder-free body renders unchanged with empty bindings") {
    prompts::TemplateRegistry reg;
    reg.put({"plain", prompts::TemplateLanguage::Any, "no markers here"});
    CHECK(reg.render("plain", Language::EN, {}) == "no markers here");
}

TEST_CASE("CA strategy speaks of dynamic, coherent, natural dialogue") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    std::string text = reg.render("strategy_CA", Language::EN, {});
    CHECK(text.find("dynamic, coherent, and natural dialogue") != std::string::npos);
}

TEST_CASE("CR strategy opens with context-adherence requirements") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    const prompts::Template& t = reg.strategy_for(Dimension::CR);
    CHECK(t.body.rfind("When replying, focus on accurately using and reflecting information", 0)
          == 0);
}

TEST_CASE("FR instruction probes world facts") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    const prompts::Template& t = reg.instruction_for(Dimension::FR);
    CHECK(t.body.find("grasp of world facts or commonsense knowledge") != std::string::npos);
}

TEST_CASE("strategy and instruction are total over the dimensions") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    for (Dimension d : kAllDimensions) {
        CHECK(!reg.strategy_for(d).body.empty());
        CHECK(!reg.instruction_for(d).body.empty());
        CHECK(!reg.definition_for(d).body.empty());
    }
}

TEST_CASE("missing template, missing binding, unused binding") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    CHECK_THROWS_AS(reg.render("no_such_id", Language::EN, {}), prompts::MissingTemplate);
    CHECK_THROWS_AS(reg.render("checker", Language::EN, {{"judge_response", "x"}}),
                    prompts::MissingBinding);
    CHECK_THROWS_AS(reg.render("checker", Language::EN,
                               {{"judge_response", "x"},
                                {"test_model", "m"},
                                {"extra", "y"}}),
                    prompts::UnusedBinding);
}

TEST_CASE("ZH render falls back to the EN body and records it") {
    prompts::TemplateRegistry reg;
    reg.put({"only_en", prompts::TemplateLanguage::EN, "english body"});
    prompts::RenderResult r = reg.render_traced("only_en", Language::ZH, {});
    CHECK(r.text == "english body");
    CHECK(r.language_fallback);
    prompts::RenderResult en = reg.render_traced("only_en", Language::EN, {});
    CHECK_FALSE(en.language_fallback);
}

TEST_CASE("render is deterministic") {
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    std::map<std::string, std::string> bindings = {{"judge_response", "abc"},
                                                   {"test_model", "m1"}};
    CHECK(reg.render("checker", Language::EN, bindings) ==
          reg.render("checker", Language::EN, bindings));
}

TEST_CASE("repeated placeholders are all substituted") {
    prompts::TemplateRegistry reg;
    reg.put({"rep", prompts::TemplateLanguage::Any, "{who} and {who} again"});
    CHECK(reg.render("rep", Language::EN, {{"who", "Ishmael"}}) ==
          "Ishmael and Ishmael again");
}

TEST_CASE("literal braces that are not identifiers survive rendering") {
    prompts::TemplateRegistry reg;
    reg.put({"braces", prompts::TemplateLanguage::Any,
             R"(object {"key": "value"} with {slot})"});
    std::string text = reg.render("braces", Language::EN, {{"slot", "X"}});
    CHECK(text == R"(object {"key": "value"} with X)");
}

TEST_CASE("template files load and override defaults") {
    fs::path dir = fs::temp_directory_path() / "rpbench_templates_test";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "director_zh.txt");
        out << "id=director lang=ZH\n自定义导演模板 {background} {cast} {dialogue_history} "
               "{eligible} {nudge}";
    }
    prompts::TemplateRegistry reg = prompts::TemplateRegistry::with_defaults();
    reg.load_directory(dir);
    std::string text = reg.render("director", Language::ZH,
                                  {{"background", "b"},
                                   {"cast", "c"},
                                   {"dialogue_history", "h"},
                                   {"eligible", "e"},
                                   {"nudge", ""}});
    CHECK(text.find("自定义导演模板") != std::string::npos);
    // EN still served by the bundled default
    CHECK(reg.render("director", Language::EN,
                     {{"background", "b"},
                      {"cast", "c"},
                      {"dialogue_history", "h"},
                      {"eligible", "e"},
                      {"nudge", ""}})
              .find("TERMINATE") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("bad template headers are rejected") {
    fs::path dir = fs::temp_directory_path() / "rpbench_templates_bad";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "bad.txt");
        out << "lang=EN\nbody without id";
    }
    prompts::TemplateRegistry reg;
    CHECK_THROWS_AS(reg.load_directory(dir), Error);
    fs::remove_all(dir);
}

}  // TEST_SUITE
