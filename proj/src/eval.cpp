#include "sandhiseg/eval.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "sandhiseg/error.hpp"
#include "sandhiseg/labels.hpp"

namespace sandhiseg {

double harmonic_f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::size_t multiset_overlap(const WordList& gold, const WordList& pred) {
    std::unordered_map<std::string, long> counts;
    for (const auto& w : gold) ++counts[w];
    std::size_t common = 0;
    for (const auto& w : pred) {
        auto it = counts.find(w);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    return common;
}

PRF sentence_prf(const WordList& gold, const WordList& pred) {
    PRF out;
    const auto common = static_cast<double>(multiset_overlap(gold, pred));
    out.precision = pred.empty() ? 0.0 : common / static_cast<double>(pred.size());
    out.recall = gold.empty() ? 0.0 : common / static_cast<double>(gold.size());
    out.f1 = harmonic_f1(out.precision, out.recall);
    return out;
}

PRF word_prf(const std::vector<WordList>& gold, const std::vector<WordList>& pred) {
    if (gold.size() != pred.size()) throw Error(ErrorCode::AlignmentMismatch, "gold and prediction sizes differ");
    PRF total;
    if (gold.empty()) return total;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const PRF s = sentence_prf(gold[i], pred[i]);
        total.precision += s.precision;
        total.recall += s.recall;
        total.f1 += s.f1;
    }
    const auto n = static_cast<double>(gold.size());
    total.precision /= n;
    total.recall /= n;
    total.f1 /= n;
    return total;
}

double perfect_match(const std::vector<WordList>& gold, const std::vector<WordList>& pred) {
    if (gold.size() != pred.size()) throw Error(ErrorCode::AlignmentMismatch, "gold and prediction sizes differ");
    if (gold.empty()) return 0.0;
    std::size_t perfect = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        WordList a = gold[i], b = pred[i];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a == b) ++perfect;
    }
    return 100.0 * static_cast<double>(perfect) / static_cast<double>(gold.size());
}

std::set<std::size_t> locate_rule(const SandhiRule& rule, const std::string& surface, const std::string& segmentation) {
    std::set<std::size_t> out;
    const Text input = normalize(surface);
    ChunkedSegmentation chunks_seg;
    try {
        chunks_seg = split_by_chunks(input, segmentation);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::AlignmentMismatch) return out;
        throw;
    }
    const auto chunks = split_chunks(input);
    const Text underlying = rule.underlying();
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        const Chunk& chunk = chunks[c];
        std::vector<Text> labels;
        try {
            labels = align_gold_labels(chunk.text, normalize(join(chunks_seg[c], " ")), chunk.text.size() + 64);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::AlignmentOverflow) continue;
            throw;
        }
        for (std::size_t pos = chunk.start; pos <= chunk.end; ++pos) {
            if (!rule_matches_at(rule, input, chunk, pos)) continue;
            Text spelled;
            for (std::size_t k = 0; k < rule.f.size(); ++k) spelled += labels[pos - chunk.start + k];
            bool hit = spelled == underlying;
            if (!hit && rule.v.empty() && !spelled.empty() && spelled.back() == kWordSeparator)
                hit = spelled.substr(0, spelled.size() - 1) == underlying;
            if (hit) out.insert(pos);
        }
    }
    return out;
}

RuleLocationSets rule_locations(const SandhiRule& rule, const std::vector<std::string>& surfaces,
                                const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
    if (surfaces.size() != gold.size() || gold.size() != pred.size())
        throw Error(ErrorCode::AlignmentMismatch, "surface, gold and prediction sizes differ");
    RuleLocationSets sets;
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
        for (std::size_t p : locate_rule(rule, surfaces[i], gold[i])) sets.gold.emplace(i, p);
        for (std::size_t p : locate_rule(rule, surfaces[i], pred[i])) sets.predicted.emplace(i, p);
    }
    return sets;
}

RuleMetrics set_metrics(const std::set<RuleLocation>& gold, const std::set<RuleLocation>& predicted) {
    RuleMetrics m;
    m.gold_count = gold.size();
    m.predicted_count = predicted.size();
    std::vector<RuleLocation> both;
    std::set_intersection(gold.begin(), gold.end(), predicted.begin(), predicted.end(), std::back_inserter(both));
    m.common = both.size();
    m.precision_undefined = predicted.empty();
    m.prf.precision = predicted.empty() ? 0.0 : static_cast<double>(m.common) / static_cast<double>(predicted.size());
    m.prf.recall = gold.empty() ? 0.0 : static_cast<double>(m.common) / static_cast<double>(gold.size());
    m.prf.f1 = harmonic_f1(m.prf.precision, m.prf.recall);
    return m;
}

RuleMetrics rule_char_metrics(const SandhiRule& rule, const std::vector<std::string>& gold,
                              const std::vector<std::string>& pred, const std::vector<std::string>& surfaces) {
    const RuleLocationSets sets = rule_locations(rule, surfaces, gold, pred);
    return set_metrics(sets.gold, sets.predicted);
}

std::map<std::size_t, double> length_bucket_f1(const std::vector<SentenceResult>& results, std::size_t bucket_width) {
    if (bucket_width == 0) throw Error(ErrorCode::InvalidConfig, "bucket width must be positive");
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& r : results) {
        auto& [sum, count] = acc[(r.length / bucket_width) * bucket_width];
        sum += r.prf.f1;
        ++count;
    }
    std::map<std::size_t, double> out;
    for (const auto& [bucket, sc] : acc) out[bucket] = sc.first / static_cast<double>(sc.second);
    return out;
}

EvalReport evaluate(const std::vector<std::string>& surfaces, const std::vector<std::string>& gold,
                    const std::vector<std::string>& pred, const std::vector<SandhiRule>& rules,
                    std::size_t bucket_width) {
    if (surfaces.size() != gold.size() || gold.size() != pred.size())
        throw Error(ErrorCode::AlignmentMismatch, "surface, gold and prediction sizes differ");
    EvalReport report;
    report.n_sentences = gold.size();
    std::vector<WordList> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        g.push_back(split_words(normalize_utf8(gold[i])));
        p.push_back(split_words(normalize_utf8(pred[i])));
        SentenceResult r;
        r.index = i;
        for (char32_t c : normalize(surfaces[i]))
            if (!is_space(c)) ++r.length;
        r.prf = sentence_prf(g.back(), p.back());
        r.perfect = perfect_match({g.back()}, {p.back()}) == 100.0;
        report.sentences.push_back(r);
    }
    report.prf = word_prf(g, p);
    report.perfect_match = perfect_match(g, p);
    for (const auto& rule : rules) report.per_rule[rule.name()] = rule_char_metrics(rule, gold, pred, surfaces);
    report.length_buckets = length_bucket_f1(report.sentences, bucket_width);
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["P"] = prf.precision;
    j["R"] = prf.recall;
    j["F"] = prf.f1;
    j["PM"] = perfect_match;
    j["n_sentences"] = n_sentences;
    auto& rules = j["per_rule"] = nlohmann::json::object();
    for (const auto& [name, m] : per_rule) {
        rules[name] = {{"P", m.prf.precision}, {"R", m.prf.recall}, {"F", m.prf.f1},
                       {"precision_undefined", m.precision_undefined}, {"gold", m.gold_count},
                       {"predicted", m.predicted_count}, {"common", m.common}};
    }
    auto& buckets = j["length_buckets"] = nlohmann::json::object();
    for (const auto& [b, f] : length_buckets) buckets[std::to_string(b)] = f;
    return j;
}

std::string EvalReport::sentences_csv() const {
    std::ostringstream out;
    out << "index,length,P,R,F,perfect\n";
    for (const auto& s : sentences)
        out << s.index << ',' << s.length << ',' << s.prf.precision << ',' << s.prf.recall << ',' << s.prf.f1 << ','
            << (s.perfect ? 1 : 0) << '\n';
    return out.str();
}

}  // namespace sandhiseg
