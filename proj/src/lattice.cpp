#include "sandhiseg/lattice.hpp"

#include <algorithm>
#include <tuple>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

bool span_less(const SpanNode& a, const SpanNode& b) {
    return std::tie(a.head, a.tail, a.text) < std::tie(b.head, b.tail, b.text);
}

std::string to_string(LatticeSource source) {
    switch (source) {
        case LatticeSource::External: return "external";
        case LatticeSource::NGram: return "ngram";
        case LatticeSource::SandhiRules: return "rules";
        case LatticeSource::None: return "none";
    }
    return "none";
}

LatticeSource lattice_source_from_string(const std::string& name) {
    if (name == "external") return LatticeSource::External;
    if (name == "ngram") return LatticeSource::NGram;
    if (name == "rules") return LatticeSource::SandhiRules;
    if (name == "none") return LatticeSource::None;
    throw Error(ErrorCode::InvalidConfig, "unknown lattice source '" + name + "'");
}

std::vector<Chunk> split_chunks(const Text& input) {
    std::vector<Chunk> chunks;
    std::size_t i = 0;
    while (i < input.size()) {
        if (is_space(input[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < input.size() && !is_space(input[j])) ++j;
        chunks.push_back(Chunk{i, j - 1, input.substr(i, j - i)});
        i = j;
    }
    if (chunks.empty()) throw Error(ErrorCode::EmptyInput, "input has no non-space characters");
    return chunks;
}

std::vector<SpanNode> build_char_nodes(const Text& input) {
    std::vector<SpanNode> nodes;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (is_space(input[i])) continue;
        nodes.push_back(SpanNode{Text(1, input[i]), i, i, NodeKind::InputChar});
    }
    if (nodes.empty()) throw Error(ErrorCode::EmptyInput, "input has no non-space characters");
    return nodes;
}

std::vector<SpanNode> build_ngram_candidates(const Text& input, int n_max) {
    if (n_max < 2) throw Error(ErrorCode::InvalidConfig, "n-gram order must be at least 2");
    std::vector<SpanNode> out;
    for (const Chunk& chunk : split_chunks(input)) {
        for (std::size_t head = chunk.start; head <= chunk.end; ++head) {
            for (std::size_t len = 2; len <= static_cast<std::size_t>(n_max); ++len) {
                const std::size_t tail = head + len - 1;
                if (tail > chunk.end) break;
                out.push_back(SpanNode{input.substr(head, len), head, tail, NodeKind::Candidate});
            }
        }
    }
    return out;
}

Lattice::Lattice(Text input, std::vector<SpanNode> candidates, LatticeSource source)
    : input_(std::move(input)), source_(source) {
    chunks_ = split_chunks(input_);
    char_nodes_ = build_char_nodes(input_);
    for (auto& c : candidates) {
        c.kind = NodeKind::Candidate;
        if (c.text.empty()) throw Error(ErrorCode::InvalidConfig, "empty candidate text");
        if (c.head > c.tail || c.tail >= input_.size())
            throw Error(ErrorCode::InvalidConfig, "candidate span out of bounds: " + c.utf8());
        const auto ci = chunk_index(c.head);
        if (!ci || !chunks_[*ci].contains(c.head, c.tail))
            throw Error(ErrorCode::InvalidConfig, "candidate crosses a chunk boundary: " + c.utf8());
    }
    std::sort(candidates.begin(), candidates.end(), span_less);
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates_ = std::move(candidates);
}

std::vector<SpanNode> Lattice::nodes() const {
    std::vector<SpanNode> all = char_nodes_;
    all.insert(all.end(), candidates_.begin(), candidates_.end());
    return all;
}

std::optional<std::size_t> Lattice::chunk_index(std::size_t pos) const {
    for (std::size_t i = 0; i < chunks_.size(); ++i)
        if (chunks_[i].start <= pos && pos <= chunks_[i].end) return i;
    return std::nullopt;
}

std::vector<SpanNode> Lattice::candidates_in(const Chunk& chunk) const {
    std::vector<SpanNode> out;
    for (const auto& c : candidates_)
        if (chunk.contains(c.head, c.tail)) out.push_back(c);
    return out;
}

bool Lattice::has_candidate(const Chunk& chunk, const Text& word) const {
    return std::any_of(candidates_.begin(), candidates_.end(), [&](const SpanNode& c) {
        return c.text == word && chunk.contains(c.head, c.tail);
    });
}

std::size_t Lattice::char_offset(const Chunk& chunk) const {
    std::size_t offset = 0;
    for (const auto& c : chunks_) {
        if (c == chunk) return offset;
        offset += c.text.size();
    }
    throw Error(ErrorCode::AlignmentMismatch, "chunk does not belong to this lattice");
}

Span rectify_mapping(const Text& input, const Text& word, std::size_t claimed_head,
                     std::size_t claimed_tail, std::size_t window) {
    if (word.empty()) throw Error(ErrorCode::UnmappableCandidate, "empty word");
    if (input.empty()) throw Error(ErrorCode::UnmappableCandidate, "empty input");
    const std::size_t last = input.size() - 1;
    claimed_head = std::min(claimed_head, last);
    claimed_tail = std::min(std::max(claimed_tail, claimed_head), last);

    // One search step: best span in the window around (h0, t0), ranked by
    // edit distance, then distance from the claimed span, then head, then
    // length. Repeating the step until the span stops moving makes the
    // result a fixed point, so feeding it back is a no-op.
    auto search = [&](std::size_t h0, std::size_t t0) {
        using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>;
        std::optional<std::pair<Key, Span>> best;
        const std::size_t hlo = h0 > window ? h0 - window : 0;
        const std::size_t hhi = std::min(last, h0 + window);
        const std::size_t tlo = t0 > window ? t0 - window : 0;
        const std::size_t thi = std::min(last, t0 + window);
        for (std::size_t h = hlo; h <= hhi; ++h) {
            if (is_space(input[h])) continue;
            for (std::size_t t = std::max(h, tlo); t <= thi; ++t) {
                if (is_space(input[t])) break;
                const std::size_t d = edit_distance(input.substr(h, t - h + 1), word);
                const std::size_t offset = (h > h0 ? h - h0 : h0 - h) + (t > t0 ? t - t0 : t0 - t);
                Key key{d, offset, h, t - h + 1};
                if (!best || key < best->first) best = std::make_pair(key, Span{h, t});
            }
        }
        return best;
    };

    // The current span is always inside its own window and wins ties by
    // offset 0, so every move strictly lowers the edit distance.
    Span current{claimed_head, claimed_tail};
    for (;;) {
        auto found = search(current.head, current.tail);
        if (!found || std::get<0>(found->first) > word.size())
            throw Error(ErrorCode::UnmappableCandidate,
                        "no span near the claimed position matches '" + text_to_utf8(word) + "'");
        if (found->second == current) return current;
        current = found->second;
    }
}

Lattice ingest_candidate_space(const Text& input, const std::vector<CandidateRecord>& records,
                               IngestDiagnostics* diagnostics) {
    IngestDiagnostics diag;
    diag.records = records.size();
    std::vector<SpanNode> nodes;
    for (const auto& r : records) {
        try {
            const Text word = normalize(r.word);
            const auto clamp = [&](long long v) {
                if (v < 0) return std::size_t{0};
                return static_cast<std::size_t>(v);
            };
            const Span span = rectify_mapping(input, word, clamp(r.head), clamp(r.tail));
            if (static_cast<long long>(span.head) != r.head || static_cast<long long>(span.tail) != r.tail)
                ++diag.moved;
            nodes.push_back(SpanNode{word, span.head, span.tail, NodeKind::Candidate});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UnmappableCandidate && e.code() != ErrorCode::ParseError) throw;
            ++diag.dropped;
            diag.dropped_words.push_back(r.word);
        }
    }
    std::size_t before = nodes.size();
    Lattice lattice(input, std::move(nodes), LatticeSource::External);
    diag.duplicates = before - lattice.candidates().size();
    if (diagnostics) *diagnostics = std::move(diag);
    return lattice;
}

Lattice make_ngram_lattice(const Text& input, int n_max) {
    return Lattice(input, build_ngram_candidates(input, n_max), LatticeSource::NGram);
}

bool junction_ok(const SpanNode& prev, const SpanNode& next) {
    return (next.head == prev.tail + 1 || next.head == prev.tail) && next.tail > prev.tail;
}

std::vector<std::string> Path::word_strings() const {
    std::vector<std::string> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(w.utf8());
    return out;
}

Text Path::joined() const {
    std::vector<Text> texts;
    for (const auto& w : words) texts.push_back(w.text);
    return join(texts, U' ');
}

bool Path::valid() const {
    if (words.empty()) return false;
    if (words.front().head != chunk.start || words.back().tail != chunk.end) return false;
    for (std::size_t k = 1; k < words.size(); ++k)
        if (!junction_ok(words[k - 1], words[k])) return false;
    return true;
}

namespace {

struct PathSearch {
    const std::vector<SpanNode>& pool;
    const Chunk& chunk;
    std::size_t max_paths;
    PathEnumeration result;
    std::vector<SpanNode> stack;

    void extend() {
        if (result.truncated) return;
        const SpanNode& last = stack.back();
        if (last.tail == chunk.end) {
            if (result.paths.size() >= max_paths) {
                result.truncated = true;
                return;
            }
            result.paths.push_back(Path{stack, chunk});
            return;
        }
        for (const auto& next : pool) {
            if (!junction_ok(last, next)) continue;
            stack.push_back(next);
            extend();
            stack.pop_back();
            if (result.truncated) return;
        }
    }
};

}  // namespace

PathEnumeration enumerate_paths(const Lattice& lattice, const Chunk& chunk,
                                const EnumerateOptions& options) {
    std::vector<SpanNode> pool = lattice.candidates_in(chunk);
    if (options.promote_chars) {
        for (const auto& c : lattice.char_nodes()) {
            if (!chunk.contains(c.head, c.tail)) continue;
            SpanNode promoted = c;
            promoted.kind = NodeKind::Candidate;
            pool.push_back(promoted);
        }
        std::sort(pool.begin(), pool.end(), span_less);
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    }

    PathSearch search{pool, chunk, options.max_paths, {}, {}};
    for (const auto& first : pool) {
        if (first.head != chunk.start) continue;
        search.stack.push_back(first);
        search.extend();
        search.stack.pop_back();
        if (search.result.truncated) break;
    }
    if (search.result.paths.empty() && !search.result.truncated)
        throw Error(ErrorCode::NoPath, "no candidate path tiles chunk '" + text_to_utf8(chunk.text) + "'");
    return std::move(search.result);
}

}  // namespace sandhiseg
