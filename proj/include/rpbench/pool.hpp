#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"
#include "rpbench/gateway.hpp"
#include "rpbench/prompts.hpp"

namespace rpbench::pool {

// ---------------------------------------------------------------------------
// Book segmentation
// ---------------------------------------------------------------------------

struct Chunk {
    std::string book_title;
    int index = 0;
    std::string text;
    size_t char_len = 0;
};

struct SegmentConfig {
    std::vector<std::string> chapter_patterns;  // matched at line starts
    size_t min_len = 2000;
    size_t max_len = 20000;
    // Optional chapter-range restriction (0-based, inclusive) applied to the
    // raw chapter segments before merging; chapter 0 is any preamble text.
    std::optional<size_t> chapter_first;
    std::optional<size_t> chapter_last;

    static SegmentConfig defaults() {
        SegmentConfig cfg;
        cfg.chapter_patterns = {R"(Chapter\s+([0-9]+|[IVXLCDM]+))",
                                "第[0-9零一二三四五六七八九十百千]+[章回]"};
        return cfg;
    }
};

class NoContent : public Error {
public:
    NoContent() : Error("book text is empty or whitespace") {}
};

namespace detail_seg {

inline std::string normalize_newlines(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            out += '\n';
        } else {
            out += text[i];
        }
    }
    return out;
}

// Offsets of lines that begin with a chapter pattern match.
inline std::vector<size_t> chapter_boundaries(const std::string& text,
                                              const std::vector<std::string>& patterns) {
    std::vector<std::regex> regexes;
    regexes.reserve(patterns.size());
    for (const auto& p : patterns) {
        regexes.emplace_back(p, std::regex::ECMAScript);
    }
    std::vector<size_t> boundaries;
    size_t line_start = 0;
    while (line_start < text.size()) {
        size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string line = text.substr(line_start, line_end - line_start);
        for (const auto& re : regexes) {
            std::smatch m;
            if (std::regex_search(line, m, re) && m.position(0) == 0) {
                boundaries.push_back(line_start);
                break;
            }
        }
        line_start = line_end + 1;
    }
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());
    if (!boundaries.empty() && boundaries.front() == 0) boundaries.erase(boundaries.begin());
    return boundaries;
}

// Candidate split offsets inside [lo, hi]: positions just after a blank line,
// falling back to positions after any newline, then the exact midpoint.
inline size_t pick_split_offset(const std::string& text, size_t lo, size_t hi) {
    size_t mid = text.size() / 2;
    auto better = [&](size_t a, size_t b) {
        auto dist = [&](size_t x) { return x > mid ? x - mid : mid - x; };
        return dist(a) < dist(b);
    };
    std::optional<size_t> best_para;
    std::optional<size_t> best_line;
    for (size_t i = 0; i + 1 < text.size(); ++i) {
        if (text[i] != '\n') continue;
        size_t offset = i + 1;
        if (offset < lo || offset > hi) continue;
        if (!best_line || better(offset, *best_line)) best_line = offset;
        if (text[i + 1] == '\n') {
            size_t after_blank = offset + 1;
            if (after_blank >= lo && after_blank <= hi &&
                (!best_para || better(after_blank, *best_para))) {
                best_para = after_blank;
            }
        }
    }
    if (best_para) return *best_para;
    if (best_line) return *best_line;
    return std::clamp(mid, lo, hi);
}

inline void split_to_fit(const std::string& text, size_t min_len, size_t max_len,
                         std::vector<std::string>& out) {
    if (text.size() <= max_len) {
        out.push_back(text);
        return;
    }
    size_t lo = min_len;
    size_t hi = text.size() - min_len;
    size_t cut = pick_split_offset(text, lo, hi);
    split_to_fit(text.substr(0, cut), min_len, max_len, out);
    split_to_fit(text.substr(cut), min_len, max_len, out);
}

}  // namespace detail_seg

inline std::vector<Chunk> segment_book(const std::string& raw_text, const SegmentConfig& cfg,
                                       const std::string& book_title = "") {
    if (cfg.min_len >= cfg.max_len) throw Error("min_len must be below max_len");
    if (cfg.max_len < 2 * cfg.min_len) throw Error("max_len must be at least twice min_len");
    std::string text = detail_seg::normalize_newlines(raw_text);
    if (text.find_first_not_of(" \t\n") == std::string::npos) throw NoContent();

    std::vector<size_t> boundaries = detail_seg::chapter_boundaries(text, cfg.chapter_patterns);
    std::vector<std::string> segments;
    size_t prev = 0;
    for (size_t b : boundaries) {
        segments.push_back(text.substr(prev, b - prev));
        prev = b;
    }
    segments.push_back(text.substr(prev));

    if (cfg.chapter_first || cfg.chapter_last) {
        size_t first = cfg.chapter_first.value_or(0);
        size_t last = cfg.chapter_last.value_or(segments.size() - 1);
        if (first >= segments.size() || first > last) throw Error("chapter range out of bounds");
        last = std::min(last, segments.size() - 1);
        segments = std::vector<std::string>(segments.begin() + static_cast<long>(first),
                                            segments.begin() + static_cast<long>(last) + 1);
    }

    // Merge forward while under min_len; a short tail merges backward.
    std::vector<std::string> merged;
    std::string pending;
    for (auto& seg : segments) {
        pending += seg;
        if (pending.size() >= cfg.min_len) {
            merged.push_back(std::move(pending));
            pending.clear();
        }
    }
    if (!pending.empty()) {
        if (!merged.empty()) {
            merged.back() += pending;
        } else {
            merged.push_back(std::move(pending));
        }
    }

    std::vector<std::string> sized;
    for (const auto& seg : merged) {
        detail_seg::split_to_fit(seg, cfg.min_len, cfg.max_len, sized);
    }

    std::vector<Chunk> chunks;
    chunks.reserve(sized.size());
    for (size_t i = 0; i < sized.size(); ++i) {
        Chunk c;
        c.book_title = book_title;
        c.index = static_cast<int>(i);
        c.char_len = sized[i].size();
        c.text = std::move(sized[i]);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// ---------------------------------------------------------------------------
// Pool
// ---------------------------------------------------------------------------

class EmptyPool : public Error {
public:
    EmptyPool() : Error("no scenario matches the filter") {}
};

struct Pool {
    std::vector<Scenario> scenarios;

    void add(Scenario s) {
        if (auto violations = validate_scenario(s); !violations.empty()) {
            throw ValidationFailed(std::move(violations));
        }
        if (find(s.id) != nullptr) throw Error("duplicate scenario id '" + s.id + "'");
        scenarios.push_back(std::move(s));
    }

    const Scenario* find(std::string_view id) const {
        for (const auto& s : scenarios) {
            if (s.id == id) return &s;
        }
        return nullptr;
    }

    size_t size() const { return scenarios.size(); }
};

struct SampleFilter {
    std::optional<Language> language;
    std::set<std::string> exclude_ids;
};

inline const Scenario& sample(const Pool& pool, const SampleFilter& filter,
                              std::mt19937_64& rng) {
    std::vector<const Scenario*> candidates;
    for (const auto& s : pool.scenarios) {
        if (filter.language && s.source.language != *filter.language) continue;
        if (filter.exclude_ids.count(s.id) != 0U) continue;
        candidates.push_back(&s);
    }
    if (candidates.empty()) throw EmptyPool();
    std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
    return *candidates[pick(rng)];
}

inline const Scenario& sample_seeded(const Pool& pool, const SampleFilter& filter,
                                     uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample(pool, filter, rng);
}

// Pool directory: one "<id>.json" per scenario plus an "index.json" listing.
inline void save_pool(const Pool& pool, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json index = json::array();
    for (const auto& s : pool.scenarios) {
        index.push_back({{"id", s.id},
                         {"language", to_string(s.source.language)},
                         {"book_title", s.source.book_title}});
        std::ofstream out(dir / (s.id + ".json"));
        out << encode(s).dump(2) << "\n";
    }
    std::ofstream out(dir / "index.json");
    out << index.dump(2) << "\n";
}

inline Pool load_pool(const std::filesystem::path& dir) {
    std::ifstream index_in(dir / "index.json");
    if (!index_in) throw Error("pool index not found in " + dir.string());
    std::stringstream buf;
    buf << index_in.rdbuf();
    json index = parse_json_text(buf.str(), "pool index");
    Pool pool;
    for (const auto& entry : index) {
        std::string id = entry.at("id").get<std::string>();
        std::ifstream in(dir / (id + ".json"));
        if (!in) throw Error("pool scenario file missing: " + id);
        std::stringstream sbuf;
        sbuf << in.rdbuf();
        pool.add(decode_scenario(parse_json_text(sbuf.str(), "scenario " + id)));
    }
    return pool;
}

// ---------------------------------------------------------------------------
// Model-assisted extraction
// ---------------------------------------------------------------------------

class ExtractionError : public Error {
public:
    ExtractionError(int chunk_index, std::string detail)
        : Error("chunk " + std::to_string(chunk_index) + ": " + std::move(detail)),
          chunk_index_(chunk_index) {}
    int chunk_index() const { return chunk_index_; }

private:
    int chunk_index_;
};

inline constexpr std::string_view kScenarioMarker = "=== SCENARIO ===";
inline constexpr std::string_view kNoScenarioToken = "NONE";

// Raw sketch blocks for one chunk; an empty list is a normal outcome.
inline std::vector<std::string> extract_scenarios(const Chunk& chunk,
                                                  gateway::ModelClient& model,
                                                  const prompts::TemplateRegistry& registry,
                                                  Language language) {
    std::string prompt = registry.render("extract_scenarios", language,
                                         {{"book_title", chunk.book_title},
                                          {"chunk", chunk.text}});
    gateway::Completion reply = model.complete(
        gateway::ChatRequest::user(prompt, gateway::default_temperature(model.config().role)));
    std::string text = gateway::trim(reply.text);
    if (text == kNoScenarioToken) return {};
    if (text.find(kScenarioMarker) == std::string::npos) {
        throw ExtractionError(chunk.index, "reply has neither scenario blocks nor NONE");
    }
    std::vector<std::string> blocks;
    size_t pos = 0;
    while ((pos = text.find(kScenarioMarker, pos)) != std::string::npos) {
        pos += kScenarioMarker.size();
        size_t next = text.find(kScenarioMarker, pos);
        std::string block = gateway::trim(
            text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
        if (!block.empty()) blocks.push_back(std::move(block));
        pos = next == std::string::npos ? text.size() : next;
    }
    return blocks;
}

// Optional plot-aware post-pass: for every adjacent chunk pair, the model may
// move the boundary when the static split interrupts a storyline. Off by
// default; the static pipeline stays fully reproducible without it.
inline std::vector<Chunk> refine_boundaries(std::vector<Chunk> chunks,
                                            gateway::ModelClient& model,
                                            const prompts::TemplateRegistry& registry,
                                            Language language, const SegmentConfig& cfg,
                                            size_t window = 600) {
    for (size_t i = 0; i + 1 < chunks.size(); ++i) {
        std::string& left = chunks[i].text;
        std::string& right = chunks[i + 1].text;
        size_t tail_len = std::min(window, left.size());
        std::string tail = left.substr(left.size() - tail_len);
        std::string head = right.substr(0, std::min(window, right.size()));
        std::string prompt = registry.render("refine_boundary", language,
                                             {{"tail", tail}, {"head", head}});
        gateway::Completion reply = model.complete(gateway::ChatRequest::user(
            prompt, gateway::default_temperature(model.config().role)));
        std::string text = gateway::trim(reply.text);
        if (text == "KEEP") continue;
        auto after = gateway::detail_parse::after_last_marker(text, "offset:");
        if (!after) continue;  // unusable suggestion; the static boundary stands
        size_t pos = gateway::detail_parse::skip_filler(text, *after);
        size_t offset = 0;
        bool any_digit = false;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos])) != 0) {
            offset = offset * 10 + static_cast<size_t>(text[pos] - '0');
            any_digit = true;
            ++pos;
        }
        if (!any_digit || offset >= tail_len) continue;
        // chars after the suggested point move from the left chunk to the right
        size_t cut = left.size() - tail_len + offset;
        if (cut < cfg.min_len || right.size() + (left.size() - cut) > cfg.max_len) continue;
        right.insert(0, left.substr(cut));
        left.erase(cut);
        chunks[i].char_len = left.size();
        chunks[i + 1].char_len = right.size();
    }
    return chunks;
}

inline std::string strip_code_fence(const std::string& text) {
    std::string t = gateway::trim(text);
    if (t.rfind("```", 0) != 0) return t;
    size_t first_nl = t.find('\n');
    if (first_nl == std::string::npos) return t;
    size_t closing = t.rfind("```");
    if (closing <= first_nl) return t;
    return gateway::trim(t.substr(first_nl + 1, closing - first_nl - 1));
}

// Sketch -> structured Scenario via one model call, re-asked once on bad output.
inline Scenario build_fragment(const std::string& sketch, gateway::ModelClient& model,
                               const prompts::TemplateRegistry& registry,
                               const std::string& book_title, Language language) {
    if (gateway::trim(sketch).empty()) throw Error("empty scenario sketch");
    std::string prompt = registry.render("build_fragment", language,
                                         {{"book_title", book_title},
                                          {"language", to_string(language)},
                                          {"sketch", sketch}});
    auto parse = [&](const std::string& text) {
        Scenario s = decode_scenario(parse_json_text(strip_code_fence(text), "scenario fragment"));
        s.source.book_title = book_title;
        s.source.language = language;
        return s;
    };
    return gateway::complete_parsed(
        model,
        gateway::ChatRequest::user(prompt, gateway::default_temperature(model.config().role)),
        parse);
}

// ---------------------------------------------------------------------------
// Ingestion manifest
// ---------------------------------------------------------------------------

struct IngestItem {
    std::string path;
    std::string title;
    Language language = Language::EN;
    std::vector<std::string> chapter_patterns;  // empty means defaults
    std::optional<size_t> chapter_first;
    std::optional<size_t> chapter_last;
};

inline std::vector<IngestItem> decode_ingest_manifest(const json& j) {
    if (!j.is_array()) throw ParseError("$", "ingest manifest must be an array");
    std::vector<IngestItem> items;
    for (size_t i = 0; i < j.size(); ++i) {
        std::string path = "$[" + std::to_string(i) + "]";
        detail::require_object(j[i], path);
        detail::reject_unknown(j[i], path,
                               {"path", "title", "language", "chapter_patterns",
                                "chapter_first", "chapter_last"});
        IngestItem item;
        item.path = detail::get_string(j[i], path, "path");
        item.title = detail::get_string(j[i], path, "title");
        item.language = language_from_string(detail::get_string(j[i], path, "language"));
        if (j[i].contains("chapter_patterns")) {
            for (const auto& p : j[i]["chapter_patterns"]) {
                item.chapter_patterns.push_back(p.get<std::string>());
            }
        }
        if (j[i].contains("chapter_first")) {
            item.chapter_first = static_cast<size_t>(detail::get_int(j[i], path, "chapter_first"));
        }
        if (j[i].contains("chapter_last")) {
            item.chapter_last = static_cast<size_t>(detail::get_int(j[i], path, "chapter_last"));
        }
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace rpbench::pool
