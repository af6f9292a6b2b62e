#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "sandhiseg/text.hpp"

namespace sandhiseg {

/// Add-lambda smoothed character n-gram model. Contexts are the previous
/// `order` symbols, padded with a begin marker; every string ends with an
/// end marker that is scored like a character.
class CharLM {
public:
    static constexpr char32_t kBegin = 0xE000;
    static constexpr char32_t kEnd = 0xE001;
    static constexpr char32_t kUnknown = 0xE002;

    static CharLM train(const std::vector<std::string>& corpus, int order, double lambda);
    /// No counts at all: every conditional is 1/|vocab|.
    static CharLM uniform(const std::vector<char32_t>& characters, int order = 1, double lambda = 1.0);

    int order() const { return order_; }
    double lambda() const { return lambda_; }
    /// Predicted symbols: characters, end marker, unknown marker.
    const std::vector<char32_t>& vocab() const { return vocab_; }
    std::size_t vocab_size() const { return vocab_.size(); }

    char32_t map_symbol(char32_t c) const;
    double prob(const Text& context, char32_t symbol) const;
    double log_prob(const Text& context, char32_t symbol) const;

    /// Sum of log p over the characters of text plus the end marker.
    double log_likelihood(const Text& text) const;
    std::size_t events(const Text& text) const { return text.size() + 1; }

    double perplexity(const Text& text) const;
    double perplexity(const std::string& utf8) const;

    nlohmann::json to_json() const;
    static CharLM from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static CharLM load(const std::string& path);

    CharLM with_lambda(double lambda) const;

private:
    CharLM(int order, double lambda, std::vector<char32_t> vocab);
    Text context_at(const Text& symbols, std::size_t pos) const;

    int order_ = 1;
    double lambda_ = 1.0;
    std::vector<char32_t> vocab_;
    std::map<Text, std::map<char32_t, std::uint64_t>> counts_;
    std::map<Text, std::uint64_t> totals_;
};

/// Perplexity pooled over several strings (events summed before averaging).
double corpus_perplexity(const CharLM& lm, const std::vector<std::string>& texts);

}  // namespace sandhiseg
