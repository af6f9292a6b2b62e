#include "sandhiseg/charlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

std::string symbol_name(char32_t c) {
    if (c == CharLM::kBegin) return "<s>";
    if (c == CharLM::kEnd) return "</s>";
    if (c == CharLM::kUnknown) return "<unk>";
    return text_to_utf8(c);
}

char32_t symbol_from_name(const std::string& s) {
    if (s == "<s>") return CharLM::kBegin;
    if (s == "</s>") return CharLM::kEnd;
    if (s == "<unk>") return CharLM::kUnknown;
    const Text t = utf8_to_text(s);
    if (t.size() != 1) throw Error(ErrorCode::ParseError, "language model symbol '" + s + "' is not one character");
    return t[0];
}

}  // namespace

CharLM::CharLM(int order, double lambda, std::vector<char32_t> vocab)
    : order_(order), lambda_(lambda), vocab_(std::move(vocab)) {
    if (order_ < 1) throw Error(ErrorCode::InvalidConfig, "language model order must be at least 1");
    if (!(lambda_ > 0)) throw Error(ErrorCode::InvalidConfig, "smoothing lambda must be positive");
}

CharLM CharLM::train(const std::vector<std::string>& corpus, int order, double lambda) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot train a language model on no text");
    std::vector<Text> texts;
    std::set<char32_t> chars;
    for (const auto& s : corpus) {
        texts.push_back(normalize(s));
        chars.insert(texts.back().begin(), texts.back().end());
    }
    std::vector<char32_t> vocab(chars.begin(), chars.end());
    vocab.push_back(kEnd);
    vocab.push_back(kUnknown);
    CharLM lm(order, lambda, std::move(vocab));
    for (const auto& t : texts) {
        Text symbols = t;
        symbols.push_back(kEnd);
        for (std::size_t i = 0; i < symbols.size(); ++i) {
            const Text ctx = lm.context_at(symbols, i);
            ++lm.counts_[ctx][symbols[i]];
            ++lm.totals_[ctx];
        }
    }
    return lm;
}

CharLM CharLM::uniform(const std::vector<char32_t>& characters, int order, double lambda) {
    std::set<char32_t> chars(characters.begin(), characters.end());
    std::vector<char32_t> vocab(chars.begin(), chars.end());
    vocab.push_back(kEnd);
    vocab.push_back(kUnknown);
    return CharLM(order, lambda, std::move(vocab));
}

CharLM CharLM::with_lambda(double lambda) const {
    CharLM copy = *this;
    if (!(lambda > 0)) throw Error(ErrorCode::InvalidConfig, "smoothing lambda must be positive");
    copy.lambda_ = lambda;
    return copy;
}

char32_t CharLM::map_symbol(char32_t c) const {
    if (c == kEnd) return kEnd;
    return std::binary_search(vocab_.begin(), vocab_.end() - 2, c) ? c : kUnknown;
}

Text CharLM::context_at(const Text& symbols, std::size_t pos) const {
    Text ctx;
    const auto k = static_cast<std::size_t>(order_);
    for (std::size_t back = k; back > 0; --back) ctx.push_back(pos >= back ? symbols[pos - back] : kBegin);
    return ctx;
}

double CharLM::prob(const Text& context, char32_t symbol) const {
    const double v = static_cast<double>(vocab_.size());
    std::uint64_t c = 0, total = 0;
    if (auto it = totals_.find(context); it != totals_.end()) {
        total = it->second;
        const auto& row = counts_.at(context);
        if (auto jt = row.find(symbol); jt != row.end()) c = jt->second;
    }
    return (static_cast<double>(c) + lambda_) / (static_cast<double>(total) + lambda_ * v);
}

double CharLM::log_prob(const Text& context, char32_t symbol) const { return std::log(prob(context, symbol)); }

double CharLM::log_likelihood(const Text& text) const {
    Text symbols;
    for (char32_t c : text) symbols.push_back(map_symbol(c));
    symbols.push_back(kEnd);
    double ll = 0;
    for (std::size_t i = 0; i < symbols.size(); ++i) ll += log_prob(context_at(symbols, i), symbols[i]);
    return ll;
}

double CharLM::perplexity(const Text& text) const {
    if (text.empty()) throw Error(ErrorCode::EmptyText, "perplexity of empty text");
    return std::exp(-log_likelihood(text) / static_cast<double>(events(text)));
}

double CharLM::perplexity(const std::string& utf8) const { return perplexity(normalize(utf8)); }

double corpus_perplexity(const CharLM& lm, const std::vector<std::string>& texts) {
    double ll = 0;
    std::size_t events = 0;
    for (const auto& s : texts) {
        const Text t = normalize(s);
        if (t.empty()) continue;
        ll += lm.log_likelihood(t);
        events += lm.events(t);
    }
    if (events == 0) throw Error(ErrorCode::EmptyText, "perplexity of empty corpus");
    return std::exp(-ll / static_cast<double>(events));
}

nlohmann::json CharLM::to_json() const {
    nlohmann::json j;
    j["format"] = "sandhiseg-charlm";
    j["version"] = 1;
    j["order"] = order_;
    j["lambda"] = lambda_;
    auto& vocab = j["vocab"] = nlohmann::json::array();
    for (char32_t c : vocab_) vocab.push_back(symbol_name(c));
    auto& counts = j["counts"] = nlohmann::json::array();
    for (const auto& [ctx, row] : counts_) {
        nlohmann::json entry;
        auto& context = entry["context"] = nlohmann::json::array();
        for (char32_t c : ctx) context.push_back(symbol_name(c));
        auto& next = entry["next"] = nlohmann::json::object();
        for (const auto& [sym, n] : row) next[symbol_name(sym)] = n;
        counts.push_back(std::move(entry));
    }
    return j;
}

CharLM CharLM::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "sandhiseg-charlm") throw Error(ErrorCode::ParseError, "not a language model file");
        if (j.at("version").get<int>() != 1) throw Error(ErrorCode::ParseError, "unsupported language model version");
        std::vector<char32_t> vocab;
        for (const auto& s : j.at("vocab")) vocab.push_back(symbol_from_name(s.get<std::string>()));
        CharLM lm(j.at("order").get<int>(), j.at("lambda").get<double>(), std::move(vocab));
        for (const auto& entry : j.at("counts")) {
            Text ctx;
            for (const auto& s : entry.at("context")) ctx.push_back(symbol_from_name(s.get<std::string>()));
            if (ctx.size() != static_cast<std::size_t>(lm.order_))
                throw Error(ErrorCode::ParseError, "context length differs from model order");
            for (const auto& [name, n] : entry.at("next").items()) {
                const auto count = n.get<std::uint64_t>();
                lm.counts_[ctx][symbol_from_name(name)] += count;
                lm.totals_[ctx] += count;
            }
        }
        return lm;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed language model: ") + e.what());
    }
}

void CharLM::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << to_json().dump() << '\n';
}

CharLM CharLM::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("language model is not valid JSON: ") + e.what());
    }
}

}  // namespace sandhiseg
