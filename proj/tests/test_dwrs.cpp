#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "rpbench/dwrs.hpp"

using namespace rpbench;

TEST_SUITE("dwrs") {

TEST_CASE("worked example: counts {2,5,1}") {
    std::vector<long long> counts = {2, 5, 1};
    std::vector<long long> w = dwrs::weights(counts);
    CHECK(w == std::vector<long long>{4, 1, 5});
    CHECK(w[0] + w[1] + w[2] == 10);
    std::vector<double> p = dwrs::probabilities(counts);
    CHECK(p[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.5).epsilon(1e-12));
    std::mt19937_64 rng(1);
    CHECK(dwrs::select_index(counts, rng) == 2);  // singleton argmax
}

TEST_CASE("equal counts give unit weights") {
    for (long long k : {0LL, 1LL, 7LL}) {
        std::vector<long long> counts(5, k);
        for (long long w : dwrs::weights(counts)) CHECK(w == 1);
    }
}

TEST_CASE("probabilities sum to one and follow the exact ratios") {
    std::vector<long long> counts = {0, 9};
    std::vector<double> p = dwrs::probabilities(counts);
    CHECK(p[0] == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 11.0).epsilon(1e-12));

    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<long long> random_counts;
        size_t n = 2 + rng() % 7;
        for (size_t i = 0; i < n; ++i) random_counts.push_back(static_cast<long long>(rng() % 30));
        std::vector<double> probs = dwrs::probabilities(random_counts);
        double total = 0.0;
        for (double v : probs) total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        // argmax of probabilities is the min-count set
        double max_p = *std::max_element(probs.begin(), probs.end());
        long long min_c = *std::min_element(random_counts.begin(), random_counts.end());
        for (size_t i = 0; i < n; ++i) {
            CHECK((probs[i] == max_p) == (random_counts[i] == min_c));
        }
    }
}

TEST_CASE("typed state: select targets a minimum-count dimension") {
    dwrs::DwrsState state = dwrs::DwrsState::fresh(3, 4);
    state.counts[Dimension::CR] = 2;
    state.counts[Dimension::FR] = 5;
    state.counts[Dimension::RR] = 1;
    state.counts[Dimension::CA] = 2;
    state.counts[Dimension::PA] = 2;
    CHECK(dwrs::select(state) == Dimension::RR);
}

TEST_CASE("select leaves counts unchanged; commit bumps exactly one") {
    dwrs::DwrsState state = dwrs::DwrsState::fresh(2, 0);
    auto before = state.counts;
    Dimension d = dwrs::select(state);
    CHECK(state.counts == before);
    dwrs::DwrsState after = dwrs::commit(state, d);
    for (Dimension k : kAllDimensions) {
        CHECK(after.counts.at(k) == before.at(k) + (k == d ? 1 : 0));
    }
    auto w_before = dwrs::weights(state);
    auto w_after = dwrs::weights(after);
    for (Dimension k : kAllDimensions) {
        if (k != d) CHECK(w_after.at(k) >= w_before.at(k));
    }
}

TEST_CASE("select on a finished state reports done") {
    dwrs::DwrsState state = dwrs::DwrsState::fresh(3, 0);
    for (Dimension d : kAllDimensions) state.counts[d] = 3;
    CHECK(dwrs::done(state));
    CHECK_THROWS_AS(dwrs::select(state), dwrs::Done);
}

TEST_CASE("tie-break is uniform across seeds") {
    // all-zero counts: each dimension should win roughly 1/5 of 10,000 seeds
    std::map<size_t, int> hits;
    const int trials = 10000;
    for (int seed = 0; seed < trials; ++seed) {
        std::mt19937_64 rng(static_cast<uint64_t>(seed));
        hits[dwrs::select_index(std::vector<long long>(5, 0), rng)] += 1;
    }
    // 3 sigma around p=0.2: sqrt(10000*0.2*0.8) = 40
    for (size_t i = 0; i < 5; ++i) {
        CHECK(hits[i] > 2000 - 3 * 40);
        CHECK(hits[i] < 2000 + 3 * 40);
    }
}

TEST_CASE("fixed seed gives a fixed selection") {
    dwrs::DwrsState a = dwrs::DwrsState::fresh(1, 1234);
    dwrs::DwrsState b = dwrs::DwrsState::fresh(1, 1234);
    CHECK(dwrs::select(a) == dwrs::select(b));
}

TEST_CASE("fused loop balances to exactly tau everywhere") {
    // max-min never exceeds 1 along the way; final counts all equal tau
    std::mt19937_64 seed_rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        size_t n = 2 + seed_rng() % 7;
        long long tau = 1 + static_cast<long long>(seed_rng() % 6);
        uint64_t seed = seed_rng();
        std::vector<long long> counts(n, 0);
        std::mt19937_64 rng(seed);
        while (*std::min_element(counts.begin(), counts.end()) < tau) {
            size_t i = dwrs::select_index(counts, rng);
            counts[i] += 1;
            auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
            CHECK(*hi - *lo <= 1);
        }
        for (long long c : counts) CHECK(c == tau);
        CHECK(dwrs::run_balanced(n, tau, seed).size() == n * static_cast<size_t>(tau));
    }
}

TEST_CASE("select never returns an above-minimum dimension") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<long long> counts;
        size_t n = 2 + rng() % 7;
        for (size_t i = 0; i < n; ++i) counts.push_back(static_cast<long long>(rng() % 10));
        size_t picked = dwrs::select_index(counts, rng);
        CHECK(counts[picked] == *std::min_element(counts.begin(), counts.end()));
    }
}

TEST_CASE("checkpoints round-trip") {
    dwrs::DwrsState state = dwrs::DwrsState::fresh(10, 99);
    state = dwrs::commit(state, Dimension::CA);
    state = dwrs::commit(state, Dimension::CA);
    state = dwrs::commit(state, Dimension::FR);
    (void)dwrs::select(state);
    json j = dwrs::encode_checkpoint("Miles Ryan", state);
    std::string character;
    dwrs::DwrsState back = dwrs::decode_checkpoint(j, &character);
    CHECK(character == "Miles Ryan");
    CHECK(back.counts == state.counts);
    CHECK(back.tau == state.tau);
    CHECK(back.rng_seed == state.rng_seed);
    CHECK(back.draws == state.draws);
    // restored stream continues identically
    dwrs::DwrsState copy = state;
    CHECK(dwrs::select(back) == dwrs::select(copy));
}

}  // TEST_SUITE
