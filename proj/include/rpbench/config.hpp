#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/gateway.hpp"

namespace rpbench::config {

struct EndpointEntry {
    gateway::EndpointConfig endpoint;
    std::optional<std::string> script_path;  // mock backend script, config-relative
};

struct RunConfig {
    uint64_t seed = 0;
    int parallel = 4;
    std::string pool_dir;
    std::string out_dir = "out";
    std::string templates_dir;
    long long tau = 10;
    int max_turns = 30;
    int min_turns = 6;
    int attempt_budget = 64;
    int resamples = 1000;
    double ci_level = 0.95;
    std::vector<EndpointEntry> endpoints;
    std::filesystem::path base_dir;  // directory of the config file

    const EndpointEntry* find_endpoint(const std::string& id) const {
        for (const auto& e : endpoints) {
            if (e.endpoint.id == id) return &e;
        }
        return nullptr;
    }

    // The single endpoint configured for a role; ambiguity is an error.
    std::string endpoint_for_role(gateway::ModelRole role) const {
        std::string found;
        for (const auto& e : endpoints) {
            if (e.endpoint.role != role) continue;
            if (!found.empty()) {
                throw Error("multiple endpoints have role " + gateway::to_string(role) +
                            "; pass an explicit endpoint id");
            }
            found = e.endpoint.id;
        }
        if (found.empty()) {
            throw Error("no endpoint configured for role " + gateway::to_string(role));
        }
        return found;
    }

    std::vector<std::string> validate() const {
        std::vector<std::string> violations;
        if (tau < 1) violations.push_back("tau must be >= 1");
        if (parallel < 1) violations.push_back("parallel must be >= 1");
        if (resamples < 1) violations.push_back("resamples must be >= 1");
        if (ci_level <= 0.0 || ci_level >= 1.0) violations.push_back("ci_level must be in (0, 1)");
        for (const auto& e : endpoints) {
            for (auto& v : e.endpoint.validate()) {
                violations.push_back("endpoint '" + e.endpoint.id + "': " + v);
            }
        }
        return violations;
    }
};

inline gateway::EndpointConfig decode_endpoint(const json& j, const std::string& path) {
    detail::require_object(j, path);
    detail::reject_unknown(j, path,
                           {"id", "role", "backend", "url", "model_name", "auth_ref",
                            "max_retries", "backoff_base_ms", "max_concurrency",
                            "timeout_ms", "strip_think", "script"});
    gateway::EndpointConfig cfg;
    cfg.id = detail::get_string(j, path, "id");
    cfg.role = gateway::role_from_string(detail::get_string(j, path, "role"));
    std::string backend = detail::get_string(j, path, "backend");
    if (backend == "http") {
        cfg.backend = gateway::Backend::Http;
    } else if (backend == "mock") {
        cfg.backend = gateway::Backend::Mock;
    } else {
        throw ParseError(path + ".backend", "expected 'http' or 'mock'");
    }
    if (j.contains("url")) cfg.url = detail::get_string(j, path, "url");
    if (j.contains("model_name")) cfg.model_name = detail::get_string(j, path, "model_name");
    if (j.contains("auth_ref")) cfg.auth_ref = detail::get_string(j, path, "auth_ref");
    if (j.contains("max_retries")) {
        cfg.max_retries = static_cast<int>(detail::get_int(j, path, "max_retries"));
    }
    if (j.contains("backoff_base_ms")) {
        cfg.backoff_base_ms = static_cast<int>(detail::get_int(j, path, "backoff_base_ms"));
    }
    if (j.contains("max_concurrency")) {
        cfg.max_concurrency = static_cast<int>(detail::get_int(j, path, "max_concurrency"));
    }
    if (j.contains("timeout_ms")) {
        cfg.timeout_ms = static_cast<int>(detail::get_int(j, path, "timeout_ms"));
    }
    if (j.contains("strip_think")) cfg.strip_think = j["strip_think"].get<bool>();
    return cfg;
}

inline json encode_endpoint(const EndpointEntry& e) {
    const gateway::EndpointConfig& cfg = e.endpoint;
    json j = json::object();
    j["id"] = cfg.id;
    j["role"] = gateway::to_string(cfg.role);
    j["backend"] = cfg.backend == gateway::Backend::Http ? "http" : "mock";
    if (cfg.url) j["url"] = *cfg.url;
    j["model_name"] = cfg.model_name;
    if (cfg.auth_ref) j["auth_ref"] = *cfg.auth_ref;
    j["max_retries"] = cfg.max_retries;
    j["backoff_base_ms"] = cfg.backoff_base_ms;
    j["max_concurrency"] = cfg.max_concurrency;
    j["timeout_ms"] = cfg.timeout_ms;
    j["strip_think"] = cfg.strip_think;
    if (e.script_path) j["script"] = *e.script_path;
    return j;
}

inline RunConfig decode_run_config(const json& j, const std::filesystem::path& base_dir) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"seed", "parallel", "paths", "builder", "evaluator",
                                    "endpoints"});
    RunConfig cfg;
    cfg.base_dir = base_dir;
    if (j.contains("seed")) cfg.seed = static_cast<uint64_t>(detail::get_int(j, "$", "seed"));
    if (j.contains("parallel")) cfg.parallel = static_cast<int>(detail::get_int(j, "$", "parallel"));
    if (j.contains("paths")) {
        const json& p = j["paths"];
        detail::require_object(p, "$.paths");
        detail::reject_unknown(p, "$.paths", {"pool_dir", "out_dir", "templates_dir"});
        if (p.contains("pool_dir")) cfg.pool_dir = p["pool_dir"].get<std::string>();
        if (p.contains("out_dir")) cfg.out_dir = p["out_dir"].get<std::string>();
        if (p.contains("templates_dir")) cfg.templates_dir = p["templates_dir"].get<std::string>();
    }
    if (j.contains("builder")) {
        const json& b = j["builder"];
        detail::require_object(b, "$.builder");
        detail::reject_unknown(b, "$.builder",
                               {"tau", "max_turns", "min_turns", "attempt_budget"});
        if (b.contains("tau")) cfg.tau = detail::get_int(b, "$.builder", "tau");
        if (b.contains("max_turns")) {
            cfg.max_turns = static_cast<int>(detail::get_int(b, "$.builder", "max_turns"));
        }
        if (b.contains("min_turns")) {
            cfg.min_turns = static_cast<int>(detail::get_int(b, "$.builder", "min_turns"));
        }
        if (b.contains("attempt_budget")) {
            cfg.attempt_budget =
                static_cast<int>(detail::get_int(b, "$.builder", "attempt_budget"));
        }
    }
    if (j.contains("evaluator")) {
        const json& e = j["evaluator"];
        detail::require_object(e, "$.evaluator");
        detail::reject_unknown(e, "$.evaluator", {"resamples", "ci_level"});
        if (e.contains("resamples")) {
            cfg.resamples = static_cast<int>(detail::get_int(e, "$.evaluator", "resamples"));
        }
        if (e.contains("ci_level")) cfg.ci_level = e["ci_level"].get<double>();
    }
    if (j.contains("endpoints")) {
        const json& eps = j["endpoints"];
        if (!eps.is_array()) throw ParseError("$.endpoints", "expected an array");
        for (size_t i = 0; i < eps.size(); ++i) {
            std::string path = "$.endpoints[" + std::to_string(i) + "]";
            EndpointEntry entry;
            if (eps[i].contains("script")) {
                entry.script_path = eps[i]["script"].get<std::string>();
            }
            entry.endpoint = decode_endpoint(eps[i], path);
            cfg.endpoints.push_back(std::move(entry));
        }
    }
    if (auto violations = cfg.validate(); !violations.empty()) {
        throw ValidationFailed(std::move(violations));
    }
    return cfg;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    json j = parse_json_text(read_file(path), "config file " + path.string());
    return decode_run_config(j, path.parent_path());
}

// Resolve a possibly config-relative path.
inline std::filesystem::path resolve(const RunConfig& cfg, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute() || cfg.base_dir.empty()) return p;
    return cfg.base_dir / p;
}

inline json encode_run_config(const RunConfig& cfg) {
    json endpoints = json::array();
    for (const auto& e : cfg.endpoints) endpoints.push_back(encode_endpoint(e));
    return json{{"seed", cfg.seed},
                {"parallel", cfg.parallel},
                {"paths",
                 {{"pool_dir", cfg.pool_dir},
                  {"out_dir", cfg.out_dir},
                  {"templates_dir", cfg.templates_dir}}},
                {"builder",
                 {{"tau", cfg.tau},
                  {"max_turns", cfg.max_turns},
                  {"min_turns", cfg.min_turns},
                  {"attempt_budget", cfg.attempt_budget}}},
                {"evaluator", {{"resamples", cfg.resamples}, {"ci_level", cfg.ci_level}}},
                {"endpoints", endpoints}};
}

}  // namespace rpbench::config
