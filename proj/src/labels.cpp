#include "sandhiseg/labels.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 4;

Text gold_to_label_form(const Text& gold) {
    Text out;
    for (const auto& w : split_words(gold)) {
        if (!out.empty()) out.push_back(kWordSeparator);
        out += w;
    }
    return out;
}

}  // namespace

std::vector<Text> align_gold_labels(const Text& surface, const Text& gold_split, std::size_t max_label) {
    const Text gold = gold_to_label_form(gold_split);
    const std::size_t n = surface.size();
    const std::size_t m = gold.size();
    if (n == 0) throw Error(ErrorCode::EmptyInput, "empty chunk surface");

    std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) dp[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) dp[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j)
            dp[i][j] = std::min({dp[i - 1][j - 1] + (surface[i - 1] == gold[j - 1] ? 0 : 1),
                                 dp[i - 1][j] + 1, dp[i][j - 1] + 1});

    // Backtrace from the end preferring insertion, then match/substitution,
    // then deletion. Insertions therefore land after the substituted
    // character they belong with.
    std::vector<Text> labels(n);
    Text pending;  // inserted gold characters, collected right to left
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (j > 0 && dp[i][j] == dp[i][j - 1] + 1) {
            pending.insert(pending.begin(), gold[j - 1]);
            --j;
        } else if (i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + (surface[i - 1] == gold[j - 1] ? 0 : 1)) {
            labels[i - 1] = Text(1, gold[j - 1]) + pending;
            pending.clear();
            --i;
            --j;
        } else {
            labels[i - 1] = pending;
            pending.clear();
            --i;
        }
    }
    labels[0] = pending + labels[0];

    for (std::size_t k = 0; k < n; ++k) {
        if (labels[k].empty() || labels[k].size() > max_label)
            throw Error(ErrorCode::AlignmentOverflow,
                        "label '" + text_to_utf8(labels[k]) + "' for surface character " + std::to_string(k) +
                            " of '" + text_to_utf8(surface) + "' is outside 1.." + std::to_string(max_label));
    }
    return labels;
}

ChunkedSegmentation split_by_chunks(const Text& input, const std::string& segmentation) {
    const std::vector<Chunk> chunks = split_chunks(input);
    std::vector<Text> surface_chunks;
    for (const auto& c : chunks) surface_chunks.push_back(c.text);
    const Text s = join(surface_chunks, U' ');
    const std::vector<Text> words = split_words(normalize(segmentation));
    if (words.empty()) throw Error(ErrorCode::AlignmentMismatch, "empty segmentation");
    const Text g = join(words, U' ');

    const std::size_t n = s.size(), m = g.size();
    std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1, kInf));
    dp[0][0] = 0;
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= m; ++j) {
            if (i == 0 && j == 0) continue;
            std::size_t best = kInf;
            if (i > 0 && j > 0) {
                const bool ss = s[i - 1] == U' ', gs = g[j - 1] == U' ';
                if (ss && gs) best = std::min(best, dp[i - 1][j - 1]);
                else if (!ss) best = std::min(best, dp[i - 1][j - 1] + (s[i - 1] == g[j - 1] ? 0 : 1));
            }
            if (i > 0 && s[i - 1] != U' ') best = std::min(best, dp[i - 1][j] + 1);
            if (j > 0) best = std::min(best, dp[i][j - 1] + 1);
            dp[i][j] = best;
        }
    }
    if (dp[n][m] >= kInf)
        throw Error(ErrorCode::AlignmentMismatch, "segmentation cannot be aligned to the input's chunks");

    // Collect the gold positions matched to surface spaces.
    std::vector<std::size_t> cuts;
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && s[i - 1] == U' ' && g[j - 1] == U' ' && dp[i][j] == dp[i - 1][j - 1]) {
            cuts.push_back(j - 1);
            --i;
            --j;
        } else if (i > 0 && j > 0 && s[i - 1] != U' ' &&
                   dp[i][j] == dp[i - 1][j - 1] + (s[i - 1] == g[j - 1] ? 0 : 1)) {
            --i;
            --j;
        } else if (j > 0 && dp[i][j] == dp[i][j - 1] + 1) {
            --j;
        } else {
            --i;
        }
    }
    std::reverse(cuts.begin(), cuts.end());

    ChunkedSegmentation out;
    std::size_t from = 0;
    cuts.push_back(m);
    for (std::size_t cut : cuts) {
        std::vector<std::string> piece = split_words(text_to_utf8(g.substr(from, cut - from)));
        if (piece.empty()) throw Error(ErrorCode::AlignmentMismatch, "a chunk received no words");
        out.push_back(std::move(piece));
        from = cut + 1;
    }
    if (out.size() != chunks.size())
        throw Error(ErrorCode::AlignmentMismatch, "chunk count differs from input");
    return out;
}

std::vector<std::string> decode_chunk_labels(const std::vector<Text>& labels) {
    Text joined;
    for (const auto& l : labels) joined += l;
    for (auto& c : joined)
        if (c == kWordSeparator) c = U' ';
    std::vector<std::string> out;
    for (const auto& w : split_words(joined)) out.push_back(text_to_utf8(w));
    return out;
}

std::string decode_labels(const std::vector<Text>& labels, const std::vector<Chunk>& chunks) {
    std::vector<std::string> words;
    std::size_t offset = 0;
    for (const auto& chunk : chunks) {
        const std::size_t len = chunk.text.size();
        if (offset + len > labels.size())
            throw Error(ErrorCode::AlignmentMismatch, "fewer labels than input characters");
        std::vector<Text> slice(labels.begin() + static_cast<long>(offset),
                                labels.begin() + static_cast<long>(offset + len));
        for (auto& w : decode_chunk_labels(slice)) words.push_back(std::move(w));
        offset += len;
    }
    return join(words, " ");
}

std::string decode_labels(const std::vector<Text>& labels) {
    return join(decode_chunk_labels(labels), " ");
}

std::string flatten(const ChunkedSegmentation& seg) {
    std::vector<std::string> words;
    for (const auto& chunk : seg) words.insert(words.end(), chunk.begin(), chunk.end());
    return join(words, " ");
}

LabelVocab::LabelVocab(std::vector<Text> labels, Fallback fallback)
    : labels_(std::move(labels)), fallback_(fallback) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!index_.emplace(labels_[i], i).second)
            throw Error(ErrorCode::InvalidConfig, "duplicate label '" + text_to_utf8(labels_[i]) + "'");
    }
}

LabelVocab LabelVocab::build(const std::vector<std::vector<Text>>& label_sequences,
                             const std::vector<Text>& surfaces) {
    std::set<Text> all;
    for (const auto& seq : label_sequences) all.insert(seq.begin(), seq.end());
    for (const auto& s : surfaces)
        for (char32_t c : s)
            if (!is_space(c)) all.insert(Text(1, c));
    return LabelVocab(std::vector<Text>(all.begin(), all.end()));
}

std::optional<std::size_t> LabelVocab::index(const Text& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

Text LabelVocab::decode(std::size_t idx, char32_t input_char) const {
    if (fallback_ == Fallback::CopyInput && !index(Text(1, input_char))) return Text(1, input_char);
    return labels_.at(idx);
}

}  // namespace sandhiseg
