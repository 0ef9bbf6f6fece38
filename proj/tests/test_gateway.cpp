#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "rpbench/gateway.hpp"

using namespace rpbench;
using namespace rpbench::gateway;

namespace {

EndpointConfig mock_endpoint(ModelRole role, const std::string& id = "m") {
    EndpointConfig cfg;
    cfg.id = id;
    cfg.role = role;
    cfg.backend = Backend::Mock;
    return cfg;
}

MockScript single_rule(ModelRole role, std::vector<std::string> responses,
                       std::optional<std::string> match = std::nullopt) {
    MockRule rule;
    rule.role = role;
    rule.match = std::move(match);
    for (auto& r : responses) rule.responses.push_back(std::move(r));
    return MockScript{{rule}};
}

}  // namespace

TEST_SUITE("gateway") {

TEST_CASE("mock passthrough returns the scripted text once") {
    ModelClient client(mock_endpoint(ModelRole::Judge),
                       single_rule(ModelRole::Judge, {"Score: 4"}));
    Completion c = client.complete(ChatRequest::user("judge this"));
    CHECK(c.text == "Score: 4");
    CHECK(c.attempts == 1);
    CHECK_THROWS_AS(client.complete(ChatRequest::user("judge this")), MockUnderflow);
}

TEST_CASE("mock rules route by match substring") {
    MockScript script;
    script.rules.push_back({ModelRole::Judge, std::string("Quality"), {"Quality: high"}});
    script.rules.push_back({ModelRole::Judge, std::nullopt, {"Score: 2"}});
    ModelClient client(mock_endpoint(ModelRole::Judge), script);
    CHECK(client.complete(ChatRequest::user("Score the pair")).text == "Score: 2");
    CHECK(client.complete(ChatRequest::user("Quality check please")).text == "Quality: high");
}

TEST_CASE("mock determinism: same script and sequence, same outputs") {
    auto run = [] {
        ModelClient client(mock_endpoint(ModelRole::Scene),
                           single_rule(ModelRole::Scene, {"a", "b", "c"}));
        std::string out;
        for (int i = 0; i < 3; ++i) out += client.complete(ChatRequest::user("x")).text;
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("empty-queue rules at load time are rejected") {
    MockScript script;
    script.rules.push_back({ModelRole::Judge, std::nullopt, {}});
    CHECK_THROWS_AS(ModelClient(mock_endpoint(ModelRole::Judge), script), ValidationFailed);
}

TEST_CASE("http endpoint without url is invalid") {
    EndpointConfig cfg = mock_endpoint(ModelRole::Base);
    cfg.backend = Backend::Http;
    CHECK_THROWS_AS((ModelClient{cfg}), ValidationFailed);
}

TEST_CASE("http client retries through failures then succeeds") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request&, httplib::Response& res) {
                    if (++hits <= 2) {
                        res.status = 500;
                        return;
                    }
                    res.set_content(R"({"choices":[{"message":{"content":"pong"}}]})",
                                    "application/json");
                });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EndpointConfig cfg;
    cfg.id = "http_test";
    cfg.role = ModelRole::Base;
    cfg.backend = Backend::Http;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    ModelClient client(cfg);
    Completion c = client.complete(ChatRequest::user("ping"));
    CHECK(c.text == "pong");
    CHECK(c.attempts == 3);
    CHECK(hits.load() == 3);

    server.stop();
    listener.join();
}

TEST_CASE("http client gives up after max_retries + 1 attempts") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions",
                [&](const httplib::Request&, httplib::Response& res) {
                    ++hits;
                    res.status = 503;
                });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EndpointConfig cfg;
    cfg.id = "http_down";
    cfg.role = ModelRole::Base;
    cfg.backend = Backend::Http;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    cfg.max_retries = 2;
    cfg.backoff_base_ms = 1;
    ModelClient client(cfg);
    try {
        client.complete(ChatRequest::user("ping"));
        FAIL("expected Exhausted");
    } catch (const Exhausted& e) {
        CHECK(e.attempts() == 3);
    }
    CHECK(hits.load() == 3);

    server.stop();
    listener.join();
}

TEST_CASE("request body follows the chat-completions shape") {
    httplib::Server server;
    std::string seen_body;
    std::string seen_auth;
    server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        if (req.has_header("Authorization")) seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("RPBENCH_TEST_KEY", "sk-test", 1);
    EndpointConfig cfg;
    cfg.id = "http_echo";
    cfg.role = ModelRole::Judge;
    cfg.backend = Backend::Http;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/chat";
    cfg.model_name = "judge-1";
    cfg.auth_ref = "RPBENCH_TEST_KEY";
    ModelClient client(cfg);
    ChatRequest req;
    req.messages = {{MessageRole::System, "be brief"}, {MessageRole::User, "hi"}};
    req.temperature = 0.0;
    req.max_tokens = 64;
    client.complete(req);

    json body = json::parse(seen_body);
    CHECK(body["model"] == "judge-1");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["max_tokens"] == 64);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hi");
    CHECK(seen_auth == "Bearer sk-test");

    server.stop();
    listener.join();
}

TEST_CASE("in-flight requests stay within max_concurrency") {
    httplib::Server server;
    std::atomic<int> current{0};
    std::atomic<int> peak{0};
    server.Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
        int now = ++current;
        int prev = peak.load();
        while (now > prev && !peak.compare_exchange_weak(prev, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        --current;
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    EndpointConfig cfg;
    cfg.id = "capped";
    cfg.role = ModelRole::Base;
    cfg.backend = Backend::Http;
    cfg.url = "http://127.0.0.1:" + std::to_string(port) + "/chat";
    cfg.max_concurrency = 2;
    ModelClient client(cfg);
    std::vector<std::thread> callers;
    for (int i = 0; i < 6; ++i) {
        callers.emplace_back([&] { client.complete(ChatRequest::user("hi")); });
    }
    for (auto& t : callers) t.join();
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);

    server.stop();
    listener.join();
}

TEST_CASE("parse_likert reads the last Score marker") {
    CHECK(parse_likert("Explanation: solid reply on both counts\nScore: 4") == 4);
    CHECK(parse_likert("score:  2") == 2);
    CHECK(parse_likert("Score: 1 ... revised ... Score: 3") == 3);
    CHECK_THROWS_AS(parse_likert("Score: 7"), OutOfRange);
    CHECK_THROWS_AS(parse_likert("no verdict at all"), UnparseableReply);
    for (int n = 1; n <= 5; ++n) {
        CHECK(parse_likert("Score: " + std::to_string(n)) == n);
    }
}

TEST_CASE("parse_judgment reads Yes and No") {
    CHECK(parse_judgment("Judgment: Yes"));
    CHECK_FALSE(parse_judgment("Judgment: No"));
    CHECK(parse_judgment("judgment: YES, clearly"));
    CHECK_THROWS_AS(parse_judgment("I think yes"), UnparseableReply);
    CHECK_THROWS_AS(parse_judgment("Judgment: maybe"), UnparseableReply);
}

TEST_CASE("parse_dimension_tag accepts codes and long names") {
    CHECK(parse_dimension_tag("Dimension: RR") == Dimension::RR);
    CHECK(parse_dimension_tag("Dimension: <CA>") == Dimension::CA);
    CHECK(parse_dimension_tag("dimension: Context Reliance") == Dimension::CR);
    CHECK_THROWS_AS(parse_dimension_tag("Dimension: ZZ"), UnparseableReply);
    CHECK_THROWS_AS(parse_dimension_tag("Score: 4"), UnparseableReply);
}

TEST_CASE("parse_speaker picks the single eligible name") {
    std::set<std::string> eligible = {"Starbuck", "Stubb", "Miles Ryan"};
    TurnDecision d = parse_speaker("Starbuck", eligible);
    CHECK_FALSE(d.terminate);
    CHECK(d.next_speaker == "Starbuck");
    CHECK(parse_speaker("TERMINATE", eligible).terminate);
    CHECK(parse_speaker("  terminate  ", eligible).terminate);
    CHECK_THROWS_AS(parse_speaker("Starbuck or Stubb", eligible), AmbiguousSpeaker);
    CHECK_THROWS_AS(parse_speaker("Ahab", eligible), UnparseableReply);
    // names nested in longer names collapse to the longer mention
    std::set<std::string> nested = {"Miles", "Miles Ryan"};
    CHECK(parse_speaker("Miles Ryan should speak", nested).next_speaker == "Miles Ryan");
}

TEST_CASE("parse_utterance extracts actions and strips echoes") {
    Utterance u = parse_utterance(
        "(Bangs hand on the table) This is the grand gift you spoke of?", "Vernon Dursley");
    CHECK(u.action == "Bangs hand on the table");
    CHECK(u.text == "This is the grand gift you spoke of?");

    Utterance v = parse_utterance("Sit down. (Points at the bed)", "Marge");
    CHECK(v.action == "Points at the bed");
    CHECK(v.text == "Sit down.");

    Utterance w = parse_utterance("Miles Ryan: Storms come and go.", "Miles Ryan");
    CHECK(w.text == "Storms come and go.");

    CHECK_THROWS_AS(parse_utterance("   ", "X"), EmptyReply);

    Utterance action_only = parse_utterance("(stares at his plate)", "Harry Potter");
    CHECK(action_only.action == "stares at his plate");
    CHECK(action_only.text.empty());
}

TEST_CASE("think blocks are stripped from the front") {
    CHECK(strip_think_block("<think>internal</think>\nScore: 2") == "\nScore: 2");
    CHECK(strip_think_block("  <think>x</think>done") == "done");
    CHECK(strip_think_block("no think here") == "no think here");
    CHECK(strip_think_block("<think>unterminated") == "<think>unterminated");
}

TEST_CASE("complete_parsed re-asks once with a format reminder") {
    ModelClient client(mock_endpoint(ModelRole::Judge),
                       single_rule(ModelRole::Judge, {"gibberish", "Score: 2"}));
    int score = complete_parsed(client, ChatRequest::user("rate"), [](const std::string& t) {
        return parse_likert(t);
    });
    CHECK(score == 2);

    ModelClient hopeless(mock_endpoint(ModelRole::Judge),
                         single_rule(ModelRole::Judge, {"gibberish", "more gibberish"}));
    CHECK_THROWS_AS(complete_parsed(hopeless, ChatRequest::user("rate"),
                                    [](const std::string& t) { return parse_likert(t); }),
                    UnparseableReply);
}

TEST_CASE("gateway registry rejects duplicate ids and unknown lookups") {
    Gateway gw;
    gw.add(mock_endpoint(ModelRole::Judge, "j"), single_rule(ModelRole::Judge, {"Score: 3"}));
    CHECK_THROWS_AS(gw.add(mock_endpoint(ModelRole::Judge, "j"),
                           single_rule(ModelRole::Judge, {"x"})),
                    Error);
    CHECK_THROWS_AS(gw.client("nope"), Error);
    CHECK(gw.any_mock());
    CHECK(gw.complete("j", ChatRequest::user("x")).text == "Score: 3");
    CHECK(gw.log().count_for("j") == 1);
}

}  // TEST_SUITE
