#include "sandhiseg/toy_corpus.hpp"

#include <random>
#include <set>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

SandhiRule rule(const char* u, const char* v, const char* f, const char* x = "") {
    return SandhiRule{normalize(u), normalize(v), normalize(f), normalize(x)};
}

bool ends_with(const Text& s, const Text& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool starts_with(const Text& s, const Text& prefix) {
    return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

std::vector<SandhiRule> toy_rules() {
    return {rule("a", "a", "ā"), rule("ā", "a", "ā"), rule("ā", "ā", "ā"), rule("aḥ", "", "o"), rule("t", "c", "cc")};
}

std::vector<SandhiRule> long_a_rules() {
    return {rule("ā", "", "ā"), rule("ā", "ā", "ā"), rule("ā", "a", "ā"), rule("a", "a", "ā"), rule("aḥ", "", "ā")};
}

std::vector<std::string> toy_lexicon() {
    return {"rāma",   "vana",    "deva",   "nara",    "jala",   "phala",   "gaja",   "putra",  "mitra",
            "sītā",   "latā",    "mālā",   "kanyā",   "gaṅgā",  "atra",    "asti",   "api",    "aśva",
            "agni",   "ālaya",   "ākāśa",  "ānanda",  "bālaḥ",  "nṛpaḥ",   "saḥ",    "vṛkṣaḥ", "śiṣyaḥ",
            "tat",    "etat",    "yat",    "jagat",   "ca",     "candra",  "cakra",  "carati", "gacchati",
            "paśyati", "vadati", "pibati", "khādati", "iti",    "eva",     "bahu",   "kim"};
}

JoinedChunk apply_sandhi(const std::vector<Text>& words, const std::vector<SandhiRule>& rules) {
    JoinedChunk out;
    for (std::size_t w = 0; w < words.size(); ++w) {
        const Text& word = words[w];
        if (w == 0) {
            out.surface = word;
            out.spans.push_back(Span{0, word.size() - 1});
            continue;
        }
        const SandhiRule* fired = nullptr;
        std::size_t rule_index = 0;
        for (std::size_t r = 0; r < rules.size(); ++r) {
            const SandhiRule& cand = rules[r];
            if (!ends_with(out.surface, cand.u) || !starts_with(word, cand.v)) continue;
            const Text before = out.surface.substr(0, out.surface.size() - cand.u.size());
            if (!cand.x.empty() && !ends_with(before, cand.x)) continue;
            // u must lie inside the left word's own span.
            if (out.surface.size() - cand.u.size() < out.spans.back().head) continue;
            fired = &cand;
            rule_index = r;
            break;
        }
        if (!fired) {
            const std::size_t head = out.surface.size();
            out.surface += word;
            out.spans.push_back(Span{head, out.surface.size() - 1});
            continue;
        }
        const std::size_t pos = out.surface.size() - fired->u.size();
        out.surface.resize(pos);
        out.surface += fired->f;
        out.surface += word.substr(fired->v.size());
        std::size_t left_tail, right_head;
        if (fired->v.empty()) {
            left_tail = pos + fired->f.size() - 1;
            right_head = pos + fired->f.size();
        } else if (fired->f.size() == 1) {
            left_tail = pos;
            right_head = pos;
        } else {
            left_tail = pos + fired->f.size() - 2;
            right_head = pos + fired->f.size() - 1;
        }
        out.spans.back().tail = left_tail;
        out.spans.push_back(Span{right_head, out.surface.size() - 1});
        out.sites.push_back(RuleSite{rule_index, pos});
    }
    return out;
}

std::vector<ToySentence> generate_toy_corpus(const ToyCorpusOptions& options, const std::vector<SandhiRule>& rules,
                                             const std::vector<std::string>& lexicon) {
    if (lexicon.empty()) throw Error(ErrorCode::EmptyCorpus, "empty lexicon");
    if (options.min_words == 0 || options.min_words > options.max_words || options.max_chunk_words == 0)
        throw Error(ErrorCode::InvalidConfig, "invalid toy corpus word counts");
    std::vector<Text> lex;
    for (const auto& w : lexicon) lex.push_back(normalize(w));

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick_word(0, lex.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_len(options.min_words, options.max_words);
    std::uniform_int_distribution<std::size_t> pick_chunk(1, options.max_chunk_words);
    std::uniform_int_distribution<long long> pick_jitter(-static_cast<long long>(options.jitter),
                                                         static_cast<long long>(options.jitter));

    std::vector<ToySentence> out;
    std::set<Text> seen;
    std::size_t attempts = 0;
    while (out.size() < options.n) {
        if (++attempts > options.n * 1000 + 1000)
            throw Error(ErrorCode::InvalidConfig, "could not generate enough distinct toy sentences");
        std::vector<Text> words(pick_len(rng));
        for (auto& w : words) w = lex[pick_word(rng)];

        ToySentence s;
        Text surface;
        std::vector<Text> chunk_surfaces;
        std::size_t w = 0;
        while (w < words.size()) {
            const std::size_t len = std::min(pick_chunk(rng), words.size() - w);
            std::vector<Text> group(words.begin() + static_cast<long>(w), words.begin() + static_cast<long>(w + len));
            JoinedChunk joined = apply_sandhi(group, rules);
            if (!surface.empty()) surface.push_back(U' ');
            const std::size_t offset = surface.size();
            surface += joined.surface;
            for (std::size_t k = 0; k < group.size(); ++k) {
                s.candidates.push_back(CandidateRecord{text_to_utf8(group[k]),
                                                       static_cast<long long>(offset + joined.spans[k].head),
                                                       static_cast<long long>(offset + joined.spans[k].tail)});
            }
            for (const auto& site : joined.sites) s.sites.push_back(RuleSite{site.rule, offset + site.position});
            chunk_surfaces.push_back(joined.surface);
            w += len;
        }
        if (!seen.insert(surface).second) continue;

        if (options.distractors) {
            for (const Chunk& chunk : split_chunks(surface)) {
                for (const Text& lw : lex) {
                    for (std::size_t at = chunk.text.find(lw); at != Text::npos; at = chunk.text.find(lw, at + 1)) {
                        s.candidates.push_back(CandidateRecord{text_to_utf8(lw),
                                                               static_cast<long long>(chunk.start + at),
                                                               static_cast<long long>(chunk.start + at + lw.size() - 1)});
                    }
                }
            }
        }
        if (options.jitter > 0) {
            for (auto& c : s.candidates) {
                const long long d = pick_jitter(rng);
                c.head = std::max(0LL, c.head + d);
                c.tail = std::max(c.head, c.tail + d);
                c.tail = std::min<long long>(c.tail, static_cast<long long>(surface.size()) - 1);
                c.head = std::min(c.head, c.tail);
            }
        }
        std::vector<Text> gold_words = words;
        s.input = text_to_utf8(surface);
        s.gold = text_to_utf8(join(gold_words, U' '));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace sandhiseg
