#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sandhiseg/sandhi.hpp"

namespace sandhiseg {

using WordList = std::vector<std::string>;

struct PRF {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

double harmonic_f1(double p, double r);

/// Size of the multiset intersection of two word lists.
std::size_t multiset_overlap(const WordList& gold, const WordList& pred);

PRF sentence_prf(const WordList& gold, const WordList& pred);

/// Macro average of per-sentence P, R, F. Throws AlignmentMismatch on
/// unequal corpus sizes.
PRF word_prf(const std::vector<WordList>& gold, const std::vector<WordList>& pred);

/// Percentage of sentences whose word multisets match exactly.
double perfect_match(const std::vector<WordList>& gold, const std::vector<WordList>& pred);

/// (sentence id, surface index of the first character of f).
using RuleLocation = std::pair<std::size_t, std::size_t>;

struct RuleLocationSets {
    std::set<RuleLocation> gold;
    std::set<RuleLocation> predicted;
};

struct RuleMetrics {
    PRF prf;
    bool precision_undefined = false;
    std::size_t gold_count = 0;
    std::size_t predicted_count = 0;
    std::size_t common = 0;
};

/// Surface positions where the segmentation realizes rule: f (with context x)
/// appears in the surface and the labels aligned to it spell the rule's
/// underlying form.
std::set<std::size_t> locate_rule(const SandhiRule& rule, const std::string& surface,
                                  const std::string& segmentation);

RuleLocationSets rule_locations(const SandhiRule& rule, const std::vector<std::string>& surfaces,
                                const std::vector<std::string>& gold, const std::vector<std::string>& pred);

RuleMetrics set_metrics(const std::set<RuleLocation>& gold, const std::set<RuleLocation>& predicted);

RuleMetrics rule_char_metrics(const SandhiRule& rule, const std::vector<std::string>& gold,
                              const std::vector<std::string>& pred, const std::vector<std::string>& surfaces);

struct SentenceResult {
    std::size_t index = 0;
    std::size_t length = 0;  // non-space characters of the surface
    PRF prf;
    bool perfect = false;
};

/// Mean F per bucket of `bucket_width` characters, keyed by the bucket's
/// lower bound; empty buckets are absent.
std::map<std::size_t, double> length_bucket_f1(const std::vector<SentenceResult>& results, std::size_t bucket_width);

struct EvalReport {
    PRF prf;
    double perfect_match = 0;
    std::map<std::string, RuleMetrics> per_rule;
    std::map<std::size_t, double> length_buckets;
    std::size_t n_sentences = 0;
    std::vector<SentenceResult> sentences;

    nlohmann::json to_json() const;
    std::string sentences_csv() const;
};

EvalReport evaluate(const std::vector<std::string>& surfaces, const std::vector<std::string>& gold,
                    const std::vector<std::string>& pred, const std::vector<SandhiRule>& rules = {},
                    std::size_t bucket_width = 10);

}  // namespace sandhiseg
