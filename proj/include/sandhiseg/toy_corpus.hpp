#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sandhiseg/lattice.hpp"
#include "sandhiseg/sandhi.hpp"

namespace sandhiseg {

/// Where a rewrite fired while building a surface string.
struct RuleSite {
    std::size_t rule = 0;      // index into the generator's rule list
    std::size_t position = 0;  // surface index of the first character of f
};

struct ToySentence {
    std::string input;
    std::string gold;
    std::vector<CandidateRecord> candidates;  // gold spans plus lexicon distractors
    std::vector<RuleSite> sites;
};

struct ToyCorpusOptions {
    std::size_t n = 50;
    std::uint64_t seed = 7;
    std::size_t min_words = 2;
    std::size_t max_words = 5;
    std::size_t max_chunk_words = 3;
    bool distractors = true;
    /// Shift claimed candidate indices by up to this much so ingestion has
    /// something to rectify.
    std::size_t jitter = 0;
};

/// Five rewrite rules: a|a->ā, ā|a->ā, ā|ā->ā, aḥ|->o, t|c->cc.
std::vector<SandhiRule> toy_rules();

/// The ambiguous-ā family used for rule-node and per-rule analyses:
/// ā, ā|ā, ā|a, a|a and aḥ all surfacing as ā.
std::vector<SandhiRule> long_a_rules();

std::vector<std::string> toy_lexicon();

/// Join words of one chunk, applying the first matching rule at each juncture.
/// Returns the surface plus the (head, tail) span each word occupies in it.
struct JoinedChunk {
    Text surface;
    std::vector<Span> spans;
    std::vector<RuleSite> sites;
};
JoinedChunk apply_sandhi(const std::vector<Text>& words, const std::vector<SandhiRule>& rules);

/// Deterministic for a given seed; surfaces are unique within the corpus.
std::vector<ToySentence> generate_toy_corpus(const ToyCorpusOptions& options,
                                             const std::vector<SandhiRule>& rules = toy_rules(),
                                             const std::vector<std::string>& lexicon = toy_lexicon());

}  // namespace sandhiseg
