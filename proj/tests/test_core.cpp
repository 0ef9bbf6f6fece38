#include <doctest.h>

#include <random>
#include <set>
#include <string>

#include "rpbench/core.hpp"

using namespace rpbench;

namespace {

CharacterProfile harry_profile() {
    CharacterProfile p;
    p.name = "Harry Potter";
    p.language = Language::EN;
    p.kind = CharacterKind::Established;
    p.attributes = {
        {"Name", "Harry Potter", Visibility::Public},
        {"Persona", "Modest and fiercely brave teenager", Visibility::Public},
        {"Relationships", "Values Ron Weasley and Hermione Granger", Visibility::Private},
        {"Hobbies", "Flying, Quidditch", Visibility::Private},
    };
    return p;
}

std::string random_word(std::mt19937_64& rng, size_t min_len = 1, size_t max_len = 12) {
    std::uniform_int_distribution<size_t> len(min_len, max_len);
    std::uniform_int_distribution<int> ch('a', 'z');
    std::string out;
    size_t n = len(rng);
    for (size_t i = 0; i < n; ++i) out += static_cast<char>(ch(rng));
    return out;
}

CharacterProfile random_profile(std::mt19937_64& rng) {
    CharacterProfile p;
    p.name = random_word(rng, 3, 10);
    p.language = rng() % 2 == 0 ? Language::EN : Language::ZH;
    p.kind = rng() % 2 == 0 ? CharacterKind::Established : CharacterKind::Synthesized;
    std::uniform_int_distribution<int> n_attrs(1, 6);
    std::set<std::string> used;
    int n = n_attrs(rng);
    for (int i = 0; i < n; ++i) {
        std::string key = random_word(rng, 2, 8);
        if (!used.insert(key).second) continue;
        Visibility vis = rng() % 2 == 0 ? Visibility::Public : Visibility::Private;
        if (key == "Name") vis = Visibility::Public;
        p.attributes.push_back({key, random_word(rng, 1, 20), vis});
    }
    return p;
}

Utterance random_utterance(std::mt19937_64& rng, const std::string& speaker) {
    Utterance u;
    u.speaker = speaker;
    u.text = random_word(rng, 1, 30);
    if (rng() % 3 == 0) u.action = random_word(rng, 1, 15);
    if (rng() % 4 == 0) u.thought = random_word(rng, 1, 15);
    return u;
}

Scenario random_scenario(std::mt19937_64& rng) {
    Scenario s;
    s.id = random_word(rng, 4, 10);
    s.source.book_title = random_word(rng, 3, 15);
    s.source.language = rng() % 2 == 0 ? Language::EN : Language::ZH;
    s.background = random_word(rng, 10, 60);
    std::uniform_int_distribution<int> n_chars(1, 4);
    int n = n_chars(rng);
    std::set<std::string> names;
    for (int i = 0; i < n; ++i) {
        CharacterProfile c = random_profile(rng);
        c.kind = CharacterKind::Scene;
        if (!names.insert(c.name).second) continue;
        s.scene_characters.push_back(std::move(c));
    }
    for (const auto& c : s.scene_characters) {
        if (rng() % 2 == 0) s.motivations[c.name] = random_word(rng, 5, 30);
    }
    std::uniform_int_distribution<int> n_lines(1, 8);
    int lines = n_lines(rng);
    for (int i = 0; i < lines; ++i) {
        const auto& who = s.scene_characters[rng() % s.scene_characters.size()];
        s.original_dialogue.push_back(random_utterance(rng, who.name));
    }
    return s;
}

BenchmarkInstance random_instance(std::mt19937_64& rng) {
    BenchmarkInstance b;
    b.id = random_word(rng, 6, 12);
    b.language = rng() % 2 == 0 ? Language::EN : Language::ZH;
    b.test_character = random_profile(rng);
    b.scenario_id = random_word(rng, 4, 10);
    std::uniform_int_distribution<int> n_hist(0, 6);
    int n = n_hist(rng);
    for (int i = 0; i < n; ++i) {
        b.history.push_back(random_utterance(rng, "npc " + random_word(rng, 3, 8)));
    }
    b.dimension = kAllDimensions[rng() % kAllDimensions.size()];
    b.reference_utterance = random_utterance(rng, b.test_character.name);
    b.source_model = random_word(rng, 3, 12);
    b.selection_score = 1 + static_cast<int>(rng() % 2);
    return b;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("project_public keeps public attributes in order") {
    CharacterProfile p = harry_profile();
    CharacterProfile pub = project_public(p);
    REQUIRE(pub.attributes.size() == 2);
    CHECK(pub.attributes[0].key == "Name");
    CHECK(pub.attributes[1].key == "Persona");
    CHECK(pub.name == "Harry Potter");
}

TEST_CASE("project_public identity on all-public profile") {
    CharacterProfile p = harry_profile();
    for (auto& a : p.attributes) a.visibility = Visibility::Public;
    CHECK(project_public(p) == p);
}

TEST_CASE("project_public of all-private profile keeps only the name") {
    CharacterProfile p = harry_profile();
    for (auto& a : p.attributes) a.visibility = Visibility::Private;
    CharacterProfile pub = project_public(p);
    CHECK(pub.attributes.empty());
    CHECK(pub.name == "Harry Potter");
}

TEST_CASE("project_public is idempotent and leak-free") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 200; ++i) {
        CharacterProfile p = random_profile(rng);
        CharacterProfile pub = project_public(p);
        CHECK(project_public(pub) == pub);
        for (const auto& a : p.attributes) {
            if (a.visibility != Visibility::Private) continue;
            for (const auto& kept : pub.attributes) {
                CHECK(kept.value != a.value);
            }
        }
    }
}

TEST_CASE("validate_profile flags duplicates by key") {
    CharacterProfile p = harry_profile();
    p.attributes.push_back({"Hobbies", "Dueling", Visibility::Public});
    auto violations = validate_profile(p);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].find("Hobbies") != std::string::npos);
}

TEST_CASE("validate_profile accepts a well-formed profile") {
    CHECK(validate_profile(harry_profile()).empty());
}

TEST_CASE("validate_profile flags an empty name") {
    CharacterProfile p = harry_profile();
    p.name.clear();
    auto violations = validate_profile(p);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0] == "name empty");
}

TEST_CASE("validate_profile flags newline keys and empty values") {
    CharacterProfile p;
    p.name = "X";
    p.attributes = {{"bad\nkey", "v", Visibility::Public}, {"k", "", Visibility::Public}};
    auto violations = validate_profile(p);
    CHECK(violations.size() == 2);
}

TEST_CASE("dimension codes are stable") {
    CHECK(to_code(Dimension::CR) == "CR");
    CHECK(to_code(Dimension::FR) == "FR");
    CHECK(to_code(Dimension::RR) == "RR");
    CHECK(to_code(Dimension::CA) == "CA");
    CHECK(to_code(Dimension::PA) == "PA");
    CHECK(dimension_from_code("RR") == Dimension::RR);
}

TEST_CASE("every non-member two-letter code is rejected") {
    std::set<std::string> valid = {"CR", "FR", "RR", "CA", "PA"};
    int rejected = 0;
    for (char a = 'A'; a <= 'Z'; ++a) {
        for (char b = 'A'; b <= 'Z'; ++b) {
            std::string code{a, b};
            if (valid.count(code) != 0U) {
                CHECK(to_code(dimension_from_code(code)) == code);
            } else {
                CHECK_THROWS_AS(dimension_from_code(code), ParseError);
                ++rejected;
            }
        }
    }
    CHECK(rejected == 26 * 26 - 5);
}

TEST_CASE("profile round-trips through canonical text") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        CharacterProfile p = random_profile(rng);
        std::string text = encode_text(p);
        CharacterProfile back = decode_profile(parse_json_text(text, "test"));
        CHECK(back == p);
        CHECK(encode_text(back) == text);
    }
}

TEST_CASE("scenario round-trips byte-identically after canonical re-encode") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 60; ++i) {
        Scenario s = random_scenario(rng);
        std::string text = encode_text(s);
        Scenario back = decode_scenario(parse_json_text(text, "test"));
        CHECK(back == s);
        CHECK(encode_text(back) == text);
    }
}

TEST_CASE("instance round-trips through the dataset format") {
    std::mt19937_64 rng(13);
    std::vector<BenchmarkInstance> instances;
    for (int i = 0; i < 40; ++i) instances.push_back(random_instance(rng));
    std::string text = encode_dataset(instances);
    std::vector<BenchmarkInstance> back = decode_dataset(text);
    REQUIRE(back.size() == instances.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == instances[i]);
    CHECK(encode_dataset(back) == text);
}

TEST_CASE("decode rejects unknown fields with a path") {
    json j = encode(harry_profile());
    j["surprise"] = 1;
    try {
        decode_profile(j);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("surprise") != std::string::npos);
    }
}

TEST_CASE("instance decode names the missing field") {
    std::mt19937_64 rng(17);
    json j = encode(random_instance(rng));
    j.erase("dimension");
    try {
        decode_instance(j);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("dimension") != std::string::npos);
    }
}

TEST_CASE("unknown dimension code in an instance is rejected") {
    std::mt19937_64 rng(19);
    json j = encode(random_instance(rng));
    j["dimension"] = "XX";
    try {
        decode_instance(j);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("unknown dimension") != std::string::npos);
    }
}

TEST_CASE("attributes without a visibility label fall back to the private set") {
    json j = {{"name", "X"},
              {"language", "EN"},
              {"attributes",
               json::array({{{"key", "Persona"}, {"value", "calm"}},
                            {{"key", "Relationships"}, {"value", "secret"}}})}};
    CharacterProfile p = decode_profile(j);
    CHECK(p.attributes[0].visibility == Visibility::Public);
    CHECK(p.attributes[1].visibility == Visibility::Private);
}

TEST_CASE("scenario with a motivation for an unknown character fails validation") {
    std::mt19937_64 rng(23);
    Scenario s = random_scenario(rng);
    s.motivations["Nobody Known"] = "wants things";
    auto violations = validate_scenario(s);
    bool found = false;
    for (const auto& v : violations) {
        if (v.find("Nobody Known") != std::string::npos) found = true;
    }
    CHECK(found);
}

TEST_CASE("utterance text may be empty only when an action is present") {
    json j = {{"speaker", "A"}, {"text", ""}};
    CHECK_THROWS_AS(decode_utterance(j), ParseError);
    j["action"] = "nods";
    CHECK(decode_utterance(j).action == "nods");
}

}  // TEST_SUITE
