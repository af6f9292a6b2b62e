#pragma once

#include <random>
#include <string>
#include <vector>

#include "sandhiseg/lattice.hpp"
#include "sandhiseg/text.hpp"

namespace testsupport {

using sandhiseg::Text;

inline Text u(const char* utf8) { return sandhiseg::normalize(utf8); }

/// Random string over a small alphabet with optional spaces.
inline Text random_text(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, double space_rate,
                        const Text& alphabet = U"aāikmtś") {
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::bernoulli_distribution space(space_rate);
    Text out;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) out.push_back(space(rng) ? U' ' : alphabet[pick(rng)]);
    return out;
}

/// Random non-empty input whose first and last characters are not spaces.
inline Text random_input(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, double space_rate) {
    for (;;) {
        Text t = random_text(rng, min_len, max_len, space_rate);
        if (!t.empty() && t.front() != U' ' && t.back() != U' ') return t;
    }
}

/// The PRCP case study: input, gold, and the listed candidate space with
/// surface spans.
inline const char* case_study_input() { return "kimetadīśe bahuśobhamāne vāṃbike yakṣavapuścakāsti"; }
inline const char* case_study_gold() { return "kim etat īśe bahu śobhamāne vā ambike yakṣa vapuḥ cakāsti"; }
inline const char* case_study_corrupted() { return "kim etat īśe bahu śobhamāne vā aambike yakṣa vapuḥ cakāsti"; }

inline std::vector<sandhiseg::CandidateRecord> case_study_candidates() {
    return {{"kim", 0, 2},         {"etat", 3, 6},    {"īśe", 7, 9},    {"bahu", 11, 14},  {"śobhamāne", 15, 23},
            {"śobham", 15, 20},    {"āne", 21, 23},   {"śobha", 15, 19}, {"māne", 20, 23}, {"mā", 20, 21},
            {"vā", 25, 26},        {"ambike", 26, 31}, {"yakṣa", 33, 37}, {"vapuḥ", 38, 42}, {"cakāsti", 43, 49},
            {"ca", 43, 44},        {"kā", 45, 46},    {"asti", 46, 49}};
}

}  // namespace testsupport
