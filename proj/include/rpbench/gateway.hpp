#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"

namespace rpbench::gateway {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

enum class ModelRole { Source, Base, Judge, Director, Scene, Checker };

inline std::string to_string(ModelRole r) {
    switch (r) {
        case ModelRole::Source: return "Source";
        case ModelRole::Base: return "Base";
        case ModelRole::Judge: return "Judge";
        case ModelRole::Director: return "Director";
        case ModelRole::Scene: return "Scene";
        case ModelRole::Checker: return "Checker";
    }
    return "?";
}

inline ModelRole role_from_string(std::string_view s) {
    if (s == "Source") return ModelRole::Source;
    if (s == "Base") return ModelRole::Base;
    if (s == "Judge") return ModelRole::Judge;
    if (s == "Director") return ModelRole::Director;
    if (s == "Scene") return ModelRole::Scene;
    if (s == "Checker") return ModelRole::Checker;
    throw ParseError("$", "unknown model role '" + std::string(s) + "'");
}

// Judging wants determinism; generation wants variety.
inline double default_temperature(ModelRole r) {
    return (r == ModelRole::Judge || r == ModelRole::Checker) ? 0.0 : 0.7;
}

enum class MessageRole { System, User, Assistant };

struct ChatMessage {
    MessageRole role = MessageRole::User;
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::optional<int> seed;

    static ChatRequest user(std::string content, double temperature = 0.7) {
        ChatRequest r;
        r.messages.push_back({MessageRole::User, std::move(content)});
        r.temperature = temperature;
        return r;
    }

    const std::string* last_user_message() const {
        for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
            if (it->role == MessageRole::User) return &it->content;
        }
        return nullptr;
    }
};

enum class Backend { Http, Mock };

struct EndpointConfig {
    std::string id;
    ModelRole role = ModelRole::Source;
    Backend backend = Backend::Mock;
    std::optional<std::string> url;
    std::string model_name = "mock";
    std::optional<std::string> auth_ref;  // env var holding the API key
    int max_retries = 3;
    int backoff_base_ms = 500;
    int max_concurrency = 4;
    int timeout_ms = 120000;
    bool strip_think = true;  // drop a leading <think>...</think> block

    std::vector<std::string> validate() const {
        std::vector<std::string> violations;
        if (id.empty()) violations.push_back("endpoint id empty");
        if (backend == Backend::Http && !url) violations.push_back("Http backend requires url");
        if (max_retries < 0 || max_retries > 10) violations.push_back("max_retries must be in 0..10");
        if (backoff_base_ms <= 0) violations.push_back("backoff_base_ms must be positive");
        if (max_concurrency <= 0) violations.push_back("max_concurrency must be positive");
        return violations;
    }
};

struct MockRule {
    ModelRole role = ModelRole::Source;
    std::optional<std::string> match;  // substring of the last user message
    std::deque<std::string> responses;
};

struct MockScript {
    std::vector<MockRule> rules;

    std::vector<std::string> validate() const {
        std::vector<std::string> violations;
        for (size_t i = 0; i < rules.size(); ++i) {
            if (rules[i].responses.empty()) {
                violations.push_back("rule " + std::to_string(i) + " has an empty response queue");
            }
        }
        return violations;
    }
};

inline MockScript decode_mock_script(const json& j) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"rules"});
    const json& rules = detail::require_field(j, "$", "rules");
    if (!rules.is_array()) throw ParseError("$.rules", "expected an array");
    MockScript script;
    for (size_t i = 0; i < rules.size(); ++i) {
        std::string path = "$.rules[" + std::to_string(i) + "]";
        detail::require_object(rules[i], path);
        detail::reject_unknown(rules[i], path, {"role", "match", "responses"});
        MockRule rule;
        rule.role = role_from_string(detail::get_string(rules[i], path, "role"));
        if (rules[i].contains("match")) {
            rule.match = detail::get_string(rules[i], path, "match");
        }
        const json& responses = detail::require_field(rules[i], path, "responses");
        if (!responses.is_array()) throw ParseError(path + ".responses", "expected an array");
        for (const auto& r : responses) rule.responses.push_back(r.get<std::string>());
        script.rules.push_back(std::move(rule));
    }
    if (auto violations = script.validate(); !violations.empty()) {
        throw ValidationFailed(std::move(violations));
    }
    return script;
}

struct Completion {
    std::string text;
    int attempts = 1;
};

class Exhausted : public Error {
public:
    Exhausted(int attempts, std::string detail)
        : Error("all " + std::to_string(attempts) + " attempts failed: " + detail),
          attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

class MockUnderflow : public Error {
public:
    explicit MockUnderflow(std::string message) : Error(std::move(message)) {}
};

// One request/response pair, recorded when a call log is attached.
struct CallRecord {
    std::string endpoint_id;
    ModelRole role = ModelRole::Source;
    ChatRequest request;
    std::string response;
};

class CallLog {
public:
    void add(CallRecord record) {
        std::lock_guard<std::mutex> lock(mutex_);
        records_.push_back(std::move(record));
    }

    std::vector<CallRecord> snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return records_;
    }

    size_t count_for(const std::string& endpoint_id) const {
        std::lock_guard<std::mutex> lock(mutex_);
        size_t n = 0;
        for (const auto& r : records_) {
            if (r.endpoint_id == endpoint_id) ++n;
        }
        return n;
    }

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

// ---------------------------------------------------------------------------
// Reply post-processing and parsers
// ---------------------------------------------------------------------------

inline std::string strip_think_block(const std::string& text) {
    size_t start = text.find_first_not_of(" \t\r\n");
    if (start == std::string::npos) return text;
    static constexpr std::string_view kOpen = "<think>";
    static constexpr std::string_view kClose = "</think>";
    if (text.compare(start, kOpen.size(), kOpen) != 0) return text;
    size_t close = text.find(kClose, start + kOpen.size());
    if (close == std::string::npos) return text;
    return text.substr(close + kClose.size());
}

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

namespace detail_parse {

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Position just past the last case-insensitive occurrence of the marker.
inline std::optional<size_t> after_last_marker(const std::string& text,
                                               std::string_view marker) {
    std::string lower = lowercase(text);
    std::string m = lowercase(marker);
    size_t pos = lower.rfind(m);
    if (pos == std::string::npos) return std::nullopt;
    return pos + m.size();
}

inline size_t skip_filler(const std::string& text, size_t pos) {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '<' || text[pos] == '*')) {
        ++pos;
    }
    return pos;
}

}  // namespace detail_parse

// The integer after the last "Score:" marker, required to lie in 1..5.
inline int parse_likert(const std::string& text) {
    auto after = detail_parse::after_last_marker(text, "score:");
    if (!after) throw UnparseableReply("no 'Score:' marker in reply");
    size_t pos = detail_parse::skip_filler(text, *after);
    if (pos >= text.size() || std::isdigit(static_cast<unsigned char>(text[pos])) == 0) {
        throw UnparseableReply("no score value after 'Score:' marker");
    }
    long long value = 0;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])) != 0) {
        value = value * 10 + (text[pos] - '0');
        ++pos;
    }
    if (value < 1 || value > 5) {
        throw OutOfRange(value, "score " + std::to_string(value) + " outside 1..5");
    }
    return static_cast<int>(value);
}

// True iff the last "Judgment:" marker is followed by Yes; false for No.
inline bool parse_judgment(const std::string& text) {
    auto after = detail_parse::after_last_marker(text, "judgment:");
    if (!after) throw UnparseableReply("no 'Judgment:' marker in reply");
    size_t pos = detail_parse::skip_filler(text, *after);
    std::string rest = detail_parse::lowercase(text.substr(pos, 3));
    if (rest.rfind("yes", 0) == 0) return true;
    if (rest.rfind("no", 0) == 0) return false;
    throw UnparseableReply("'Judgment:' marker not followed by Yes or No");
}

// Dimension tag after the last "Dimension:" marker; accepts the two-letter
// code or the long name.
inline Dimension parse_dimension_tag(const std::string& text) {
    auto after = detail_parse::after_last_marker(text, "dimension:");
    if (!after) throw UnparseableReply("no 'Dimension:' marker in reply");
    size_t eol = text.find('\n', *after);
    std::string line = text.substr(*after, eol == std::string::npos ? std::string::npos
                                                                    : eol - *after);
    for (Dimension d : kAllDimensions) {
        std::string code = to_code(d);
        size_t pos = line.find(code);
        while (pos != std::string::npos) {
            bool left_ok = pos == 0 || std::isalnum(static_cast<unsigned char>(line[pos - 1])) == 0;
            size_t end = pos + code.size();
            bool right_ok =
                end >= line.size() || std::isalnum(static_cast<unsigned char>(line[end])) == 0;
            if (left_ok && right_ok) return d;
            pos = line.find(code, pos + 1);
        }
    }
    std::string lower = detail_parse::lowercase(line);
    const std::pair<std::string, Dimension> names[] = {
        {"context reliance", Dimension::CR}, {"factual recall", Dimension::FR},
        {"reflective reasoning", Dimension::RR}, {"conversational ability", Dimension::CA},
        {"preference alignment", Dimension::PA}};
    for (const auto& [name, d] : names) {
        if (lower.find(name) != std::string::npos) return d;
    }
    throw UnparseableReply("no dimension after 'Dimension:' marker");
}

struct TurnDecision {
    bool terminate = false;
    std::string next_speaker;  // set when !terminate
};

class AmbiguousSpeaker : public Error {
public:
    explicit AmbiguousSpeaker(std::vector<std::string> names)
        : Error(describe(names)), names_(std::move(names)) {}
    const std::vector<std::string>& names() const { return names_; }

private:
    static std::string describe(const std::vector<std::string>& names) {
        std::string out = "ambiguous speaker choice:";
        for (const auto& n : names) out += " '" + n + "'";
        return out;
    }
    std::vector<std::string> names_;
};

inline constexpr std::string_view kTerminateToken = "TERMINATE";

// Director reply: either the terminate token or exactly one eligible name.
inline TurnDecision parse_speaker(const std::string& text,
                                  const std::set<std::string>& eligible) {
    std::string trimmed = trim(text);
    if (detail_parse::lowercase(trimmed) == detail_parse::lowercase(kTerminateToken)) {
        return TurnDecision{true, ""};
    }
    std::vector<std::string> found;
    for (const auto& name : eligible) {
        if (trimmed.find(name) != std::string::npos) found.push_back(name);
    }
    // A matched name fully contained in a longer match is the same mention.
    if (found.size() > 1) {
        std::vector<std::string> reduced;
        for (const auto& a : found) {
            bool contained = std::any_of(found.begin(), found.end(), [&](const std::string& b) {
                return a != b && b.find(a) != std::string::npos;
            });
            if (!contained) reduced.push_back(a);
        }
        found = std::move(reduced);
    }
    if (found.empty()) throw UnparseableReply("no eligible speaker named in reply: " + trimmed);
    if (found.size() > 1) throw AmbiguousSpeaker(std::move(found));
    return TurnDecision{false, found.front()};
}

class EmptyReply : public Error {
public:
    EmptyReply() : Error("reply has no content") {}
};

// "(action) text" or "text (action)" into an Utterance, dropping a leading
// "Name:" echo of the speaker.
inline Utterance parse_utterance(const std::string& text, const std::string& speaker) {
    std::string body = trim(text);
    for (std::string_view sep : {": ", ":", "： "}) {
        std::string echo = speaker + std::string(sep);
        if (body.rfind(echo, 0) == 0) {
            body = trim(body.substr(echo.size()));
            break;
        }
    }
    Utterance u;
    u.speaker = speaker;
    if (!body.empty() && body.front() == '(') {
        int depth = 0;
        size_t close = std::string::npos;
        for (size_t i = 0; i < body.size(); ++i) {
            if (body[i] == '(') ++depth;
            if (body[i] == ')' && --depth == 0) {
                close = i;
                break;
            }
        }
        if (close != std::string::npos) {
            u.action = trim(body.substr(1, close - 1));
            body = trim(body.substr(close + 1));
        }
    } else if (!body.empty() && body.back() == ')') {
        int depth = 0;
        size_t open = std::string::npos;
        for (size_t i = body.size(); i-- > 0;) {
            if (body[i] == ')') ++depth;
            if (body[i] == '(' && --depth == 0) {
                open = i;
                break;
            }
        }
        if (open != std::string::npos) {
            u.action = trim(body.substr(open + 1, body.size() - open - 2));
            body = trim(body.substr(0, open));
        }
    }
    u.text = body;
    if (u.text.empty() && (!u.action || u.action->empty())) throw EmptyReply();
    return u;
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

class ModelClient {
public:
    explicit ModelClient(EndpointConfig config)
        : config_(std::move(config)) {
        check_config();
    }

    ModelClient(EndpointConfig config, MockScript script)
        : config_(std::move(config)), script_(std::move(script)) {
        check_config();
        if (auto violations = script_.validate(); !violations.empty()) {
            throw ValidationFailed(std::move(violations));
        }
    }

    const EndpointConfig& config() const { return config_; }

    void attach_log(std::shared_ptr<CallLog> log) { log_ = std::move(log); }

    Completion complete(const ChatRequest& request) {
        ConcurrencyGuard guard(*this);
        Completion result = config_.backend == Backend::Mock ? complete_mock(request)
                                                             : complete_http(request);
        if (config_.strip_think) result.text = strip_think_block(result.text);
        if (log_) log_->add({config_.id, config_.role, request, result.text});
        return result;
    }

private:
    class ConcurrencyGuard {
    public:
        explicit ConcurrencyGuard(ModelClient& client) : client_(client) {
            std::unique_lock<std::mutex> lock(client_.slots_mutex_);
            client_.slots_cv_.wait(lock, [&] {
                return client_.in_flight_ < client_.config_.max_concurrency;
            });
            ++client_.in_flight_;
        }
        ~ConcurrencyGuard() {
            {
                std::lock_guard<std::mutex> lock(client_.slots_mutex_);
                --client_.in_flight_;
            }
            client_.slots_cv_.notify_one();
        }

    private:
        ModelClient& client_;
    };

    void check_config() {
        if (auto violations = config_.validate(); !violations.empty()) {
            throw ValidationFailed(std::move(violations));
        }
    }

    Completion complete_mock(const ChatRequest& request) {
        std::lock_guard<std::mutex> lock(mock_mutex_);
        const std::string* last_user = request.last_user_message();
        bool any_match = false;
        for (auto& rule : script_.rules) {
            if (rule.role != config_.role) continue;
            if (rule.match && (last_user == nullptr ||
                               last_user->find(*rule.match) == std::string::npos)) {
                continue;
            }
            any_match = true;
            if (rule.responses.empty()) continue;
            std::string text = std::move(rule.responses.front());
            rule.responses.pop_front();
            return Completion{std::move(text), 1};
        }
        throw MockUnderflow(any_match
                                ? "matching mock rule exhausted for role " +
                                      gateway::to_string(config_.role)
                                : "no mock rule matches role " + gateway::to_string(config_.role));
    }

    Completion complete_http(const ChatRequest& request) {
        auto [base, path] = split_url(*config_.url);
        std::string body = http_body(request).dump();
        std::string last_error = "no attempt made";
        int attempts = 0;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::milliseconds(
                    static_cast<long long>(config_.backoff_base_ms) << (attempt - 1));
                std::this_thread::sleep_for(delay);
            }
            ++attempts;
            httplib::Client client(base);
            client.set_connection_timeout(config_.timeout_ms / 1000,
                                          (config_.timeout_ms % 1000) * 1000);
            client.set_read_timeout(config_.timeout_ms / 1000,
                                    (config_.timeout_ms % 1000) * 1000);
            httplib::Headers headers;
            if (config_.auth_ref) {
                const char* key = std::getenv(config_.auth_ref->c_str());
                if (key == nullptr) {
                    throw Error("env var '" + *config_.auth_ref + "' is not set");
                }
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
            auto res = client.Post(path, headers, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500 || res->status == 429) {
                last_error = "HTTP status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw Error("HTTP status " + std::to_string(res->status) + " from " +
                            *config_.url + ": " + res->body);
            }
            return Completion{extract_content(res->body), attempts};
        }
        throw Exhausted(attempts, last_error);
    }

    static std::pair<std::string, std::string> split_url(const std::string& url) {
        size_t scheme = url.find("://");
        if (scheme == std::string::npos) throw Error("endpoint url missing scheme: " + url);
        size_t path = url.find('/', scheme + 3);
        if (path == std::string::npos) return {url, "/"};
        return {url.substr(0, path), url.substr(path)};
    }

    json http_body(const ChatRequest& request) const {
        json messages = json::array();
        for (const auto& m : request.messages) {
            const char* role = m.role == MessageRole::System
                                   ? "system"
                                   : (m.role == MessageRole::User ? "user" : "assistant");
            messages.push_back({{"role", role}, {"content", m.content}});
        }
        json body = {{"model", config_.model_name},
                     {"messages", messages},
                     {"temperature", request.temperature},
                     {"max_tokens", request.max_tokens}};
        if (request.seed) body["seed"] = *request.seed;
        return body;
    }

    static std::string extract_content(const std::string& body) {
        json j = json::parse(body, nullptr, false);
        if (j.is_discarded()) throw Error("endpoint returned malformed JSON");
        if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
            throw Error("endpoint response has no choices");
        }
        const json& msg = j["choices"][0];
        if (!msg.contains("message") || !msg["message"].contains("content")) {
            throw Error("endpoint response has no message content");
        }
        return msg["message"]["content"].get<std::string>();
    }

    EndpointConfig config_;
    MockScript script_;
    std::shared_ptr<CallLog> log_;
    std::mutex mock_mutex_;
    std::mutex slots_mutex_;
    std::condition_variable slots_cv_;
    int in_flight_ = 0;
};

// Named endpoints plus a shared call log.
class Gateway {
public:
    Gateway() : log_(std::make_shared<CallLog>()) {}

    void add(EndpointConfig config) {
        auto client = std::make_unique<ModelClient>(std::move(config));
        client->attach_log(log_);
        insert(std::move(client));
    }

    void add(EndpointConfig config, MockScript script) {
        auto client = std::make_unique<ModelClient>(std::move(config), std::move(script));
        client->attach_log(log_);
        insert(std::move(client));
    }

    bool has(const std::string& id) const { return clients_.count(id) != 0U; }

    ModelClient& client(const std::string& id) {
        auto it = clients_.find(id);
        if (it == clients_.end()) throw Error("unknown endpoint '" + id + "'");
        return *it->second;
    }

    Completion complete(const std::string& id, const ChatRequest& request) {
        return client(id).complete(request);
    }

    const CallLog& log() const { return *log_; }
    std::shared_ptr<CallLog> log_ptr() { return log_; }

    bool any_mock() const {
        return std::any_of(clients_.begin(), clients_.end(), [](const auto& kv) {
            return kv.second->config().backend == Backend::Mock;
        });
    }

private:
    void insert(std::unique_ptr<ModelClient> client) {
        const std::string id = client->config().id;
        if (clients_.count(id) != 0U) throw Error("duplicate endpoint id '" + id + "'");
        clients_.emplace(id, std::move(client));
    }

    std::map<std::string, std::unique_ptr<ModelClient>> clients_;
    std::shared_ptr<CallLog> log_;
};

// One re-ask with a format reminder before a parse failure surfaces.
template <typename Parser>
auto complete_parsed(ModelClient& client, const ChatRequest& request, Parser parse)
    -> decltype(parse(std::string{})) {
    Completion first = client.complete(request);
    try {
        return parse(first.text);
    } catch (const Error&) {
        ChatRequest retry = request;
        retry.messages.push_back({MessageRole::Assistant, first.text});
        retry.messages.push_back(
            {MessageRole::User, "Please answer again, strictly in the required format."});
        Completion second = client.complete(retry);
        return parse(second.text);
    }
}

}  // namespace rpbench::gateway
