#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpbench/core.hpp"
#include "rpbench/errors.hpp"

namespace rpbench::dwrs {

// Inverse-frequency weighted selection over category usage counts.
//
// Each category i with usage count c_i gets weight w_i = c_max - c_i + 1,
// normalized into a distribution; the next pick is the argmax of that
// distribution (equivalently the min-count set), ties broken uniformly.
// Selection runs until every count reaches the coverage threshold tau.

class Done : public Error {
public:
    Done() : Error("all counts have reached the coverage threshold") {}
};

// --- Generic core over plain count vectors ---------------------------------

inline std::vector<long long> weights(const std::vector<long long>& counts) {
    long long c_max = *std::max_element(counts.begin(), counts.end());
    std::vector<long long> w;
    w.reserve(counts.size());
    for (long long c : counts) w.push_back(c_max - c + 1);
    return w;
}

inline std::vector<double> probabilities(const std::vector<long long>& counts) {
    std::vector<long long> w = weights(counts);
    long long total = std::accumulate(w.begin(), w.end(), 0LL);
    std::vector<double> p;
    p.reserve(w.size());
    for (long long wi : w) p.push_back(static_cast<double>(wi) / static_cast<double>(total));
    return p;
}

// Index of the next pick: uniform over the argmax set of the distribution.
inline size_t select_index(const std::vector<long long>& counts, std::mt19937_64& rng) {
    long long c_min = *std::min_element(counts.begin(), counts.end());
    std::vector<size_t> argmax;
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == c_min) argmax.push_back(i);
    }
    if (argmax.size() == 1) return argmax.front();
    std::uniform_int_distribution<size_t> pick(0, argmax.size() - 1);
    return argmax[pick(rng)];
}

// Fused select+commit loop from zero counts; returns the pick sequence.
// At termination every count equals tau exactly.
inline std::vector<size_t> run_balanced(size_t n, long long tau, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<long long> counts(n, 0);
    std::vector<size_t> sequence;
    while (*std::min_element(counts.begin(), counts.end()) < tau) {
        size_t i = select_index(counts, rng);
        counts[i] += 1;
        sequence.push_back(i);
    }
    return sequence;
}

// --- Dimension-typed state ---------------------------------------------------

struct DwrsState {
    std::map<Dimension, long long> counts;
    long long tau = 1;
    uint64_t rng_seed = 0;
    uint64_t draws = 0;  // selections made so far; replayed on load

    static DwrsState fresh(long long tau, uint64_t seed) {
        DwrsState s;
        for (Dimension d : kAllDimensions) s.counts[d] = 0;
        s.tau = tau;
        s.rng_seed = seed;
        return s;
    }
};

inline std::vector<long long> count_vector(const DwrsState& state) {
    std::vector<long long> v;
    v.reserve(kAllDimensions.size());
    for (Dimension d : kAllDimensions) v.push_back(state.counts.at(d));
    return v;
}

inline std::map<Dimension, long long> weights(const DwrsState& state) {
    std::vector<long long> w = weights(count_vector(state));
    std::map<Dimension, long long> out;
    for (size_t i = 0; i < kAllDimensions.size(); ++i) out[kAllDimensions[i]] = w[i];
    return out;
}

inline std::map<Dimension, double> probabilities(const DwrsState& state) {
    std::vector<double> p = probabilities(count_vector(state));
    std::map<Dimension, double> out;
    for (size_t i = 0; i < kAllDimensions.size(); ++i) out[kAllDimensions[i]] = p[i];
    return out;
}

inline bool done(const DwrsState& state) {
    for (Dimension d : kAllDimensions) {
        if (state.counts.at(d) < state.tau) return false;
    }
    return true;
}

// Proposes the next dimension without changing any count. Tie-breaks come
// from the state's seeded generator; the draw counter advances so repeated
// calls do not reuse the same draw.
inline Dimension select(DwrsState& state) {
    if (done(state)) throw Done();
    std::mt19937_64 rng(state.rng_seed);
    rng.discard(state.draws);
    state.draws += 1;
    size_t i = select_index(count_vector(state), rng);
    return kAllDimensions[i];
}

inline DwrsState commit(DwrsState state, Dimension d) {
    state.counts.at(d) += 1;
    return state;
}

// --- Checkpointing -----------------------------------------------------------

inline json encode_checkpoint(const std::string& character, const DwrsState& state) {
    json counts = json::object();
    for (Dimension d : kAllDimensions) counts[to_code(d)] = state.counts.at(d);
    return json{{"character", character},
                {"counts", counts},
                {"tau", state.tau},
                {"seed", state.rng_seed},
                {"draws", state.draws}};
}

inline DwrsState decode_checkpoint(const json& j, std::string* character = nullptr) {
    detail::require_object(j, "$");
    detail::reject_unknown(j, "$", {"character", "counts", "tau", "seed", "draws"});
    DwrsState s;
    if (character != nullptr) *character = detail::get_string(j, "$", "character");
    const json& counts = detail::require_field(j, "$", "counts");
    for (Dimension d : kAllDimensions) {
        s.counts[d] = detail::get_int(counts, "$.counts", to_code(d));
    }
    s.tau = detail::get_int(j, "$", "tau");
    s.rng_seed = static_cast<uint64_t>(detail::get_int(j, "$", "seed"));
    s.draws = static_cast<uint64_t>(detail::get_int(j, "$", "draws"));
    return s;
}

}  // namespace rpbench::dwrs
