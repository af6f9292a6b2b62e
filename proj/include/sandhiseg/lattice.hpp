#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sandhiseg/text.hpp"

namespace sandhiseg {

enum class NodeKind { InputChar, Candidate };

/// A lattice node: one input character or one candidate word, located by the
/// surface indices of its first (head) and last (tail) character.
struct SpanNode {
    Text text;
    std::size_t head = 0;
    std::size_t tail = 0;
    NodeKind kind = NodeKind::Candidate;

    std::size_t length() const { return tail - head + 1; }
    std::string utf8() const { return text_to_utf8(text); }

    friend bool operator==(const SpanNode&, const SpanNode&) = default;
};

/// Candidate ordering used everywhere a deterministic order is needed.
bool span_less(const SpanNode& a, const SpanNode& b);

struct Chunk {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    Text text;

    bool contains(std::size_t head, std::size_t tail) const { return start <= head && tail <= end; }
    friend bool operator==(const Chunk&, const Chunk&) = default;
};

enum class LatticeSource { External, NGram, SandhiRules, None };

std::string to_string(LatticeSource source);
LatticeSource lattice_source_from_string(const std::string& name);

/// Maximal whitespace-delimited substrings of input. Throws EmptyInput.
std::vector<Chunk> split_chunks(const Text& input);

/// One InputChar node per non-space character, head == tail == raw index.
std::vector<SpanNode> build_char_nodes(const Text& input);

/// Every within-chunk substring of length 2..n_max, ordered by (head, tail).
/// Throws InvalidConfig when n_max < 2.
std::vector<SpanNode> build_ngram_candidates(const Text& input, int n_max);

/// Immutable per-sentence container. The constructor enforces the structural
/// invariants: candidate spans in bounds and inside one chunk, no duplicate
/// (text, head, tail) triples, candidates sorted by span_less.
class Lattice {
public:
    Lattice(Text input, std::vector<SpanNode> candidates, LatticeSource source);

    const Text& input() const { return input_; }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const std::vector<SpanNode>& char_nodes() const { return char_nodes_; }
    const std::vector<SpanNode>& candidates() const { return candidates_; }
    LatticeSource source() const { return source_; }

    /// Char nodes first, then candidates; this is the encoder's node order.
    std::vector<SpanNode> nodes() const;

    /// Index of the chunk containing surface index pos, if any.
    std::optional<std::size_t> chunk_index(std::size_t pos) const;

    std::vector<SpanNode> candidates_in(const Chunk& chunk) const;
    bool has_candidate(const Chunk& chunk, const Text& word) const;

    /// Position of a chunk inside char_nodes(), i.e. the row offset of its
    /// first character among InputChar rows.
    std::size_t char_offset(const Chunk& chunk) const;

private:
    Text input_;
    std::vector<Chunk> chunks_;
    std::vector<SpanNode> char_nodes_;
    std::vector<SpanNode> candidates_;
    LatticeSource source_;
};

inline constexpr std::size_t kRectifyWindow = 5;
inline constexpr std::size_t kMaxPaths = 10000;

struct Span {
    std::size_t head = 0;
    std::size_t tail = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

/// Closest within-chunk match for a candidate word whose claimed surface
/// span may be off. Throws UnmappableCandidate.
Span rectify_mapping(const Text& input, const Text& word, std::size_t claimed_head,
                     std::size_t claimed_tail, std::size_t window = kRectifyWindow);

struct CandidateRecord {
    std::string word;
    long long head = 0;
    long long tail = 0;
};

struct IngestDiagnostics {
    std::size_t records = 0;
    std::size_t dropped = 0;
    std::size_t duplicates = 0;
    std::size_t moved = 0;  // records whose span changed under rectification
    std::vector<std::string> dropped_words;
};

Lattice ingest_candidate_space(const Text& input, const std::vector<CandidateRecord>& records,
                               IngestDiagnostics* diagnostics = nullptr);

Lattice make_ngram_lattice(const Text& input, int n_max);

/// Junction contract between consecutive path words: the next word starts
/// right after the previous one or shares its last character, and always
/// ends strictly later.
bool junction_ok(const SpanNode& prev, const SpanNode& next);

struct Path {
    std::vector<SpanNode> words;
    Chunk chunk;

    std::vector<std::string> word_strings() const;
    /// Words joined by single spaces.
    Text joined() const;
    bool valid() const;
};

struct PathEnumeration {
    std::vector<Path> paths;
    bool truncated = false;
};

struct EnumerateOptions {
    std::size_t max_paths = kMaxPaths;
    /// Let single characters act as one-character words.
    bool promote_chars = false;
};

/// Depth-first enumeration of every tiling of chunk by candidate nodes.
/// Throws NoPath when nothing tiles the chunk.
PathEnumeration enumerate_paths(const Lattice& lattice, const Chunk& chunk,
                                const EnumerateOptions& options = {});

}  // namespace sandhiseg
