#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sandhiseg/lattice.hpp"
#include "sandhiseg/text.hpp"

namespace sandhiseg {

inline constexpr char32_t kWordSeparator = U'_';
inline constexpr std::size_t kMaxLabelLength = 3;

/// Per-chunk segmentation: the words predicted (or gold) for each chunk.
using ChunkedSegmentation = std::vector<std::vector<std::string>>;

/// Labels for each surface character of one chunk, taken from a minimum
/// edit script against the gold split (spaces rendered as '_'). Inserted gold
/// characters attach to the preceding surface character; insertions before
/// the first character attach to it. Throws AlignmentOverflow when a label
/// would fall outside 1..kMaxLabelLength characters.
std::vector<Text> align_gold_labels(const Text& chunk_surface, const Text& gold_split,
                                    std::size_t max_label = kMaxLabelLength);

/// Assign gold words to the chunks of input: surface spaces must align with
/// gold spaces. Throws AlignmentMismatch when that is impossible.
ChunkedSegmentation split_by_chunks(const Text& input, const std::string& segmentation);

/// Inverse of alignment for one chunk: concatenate and split at '_'.
std::vector<std::string> decode_chunk_labels(const std::vector<Text>& labels);

/// Decode per-character labels of a whole sentence (surface order, one per
/// InputChar node) into a segmentation string.
std::string decode_labels(const std::vector<Text>& labels, const std::vector<Chunk>& chunks);
std::string decode_labels(const std::vector<Text>& labels);

std::string flatten(const ChunkedSegmentation& seg);

/// Output label inventory. Every single training character is a label; labels
/// with '_' come only from gold alignments.
class LabelVocab {
public:
    enum class Fallback { CopyInput };

    LabelVocab() = default;
    explicit LabelVocab(std::vector<Text> labels, Fallback fallback = Fallback::CopyInput);

    /// Build from aligned label sequences plus the surface characters seen.
    static LabelVocab build(const std::vector<std::vector<Text>>& label_sequences, const std::vector<Text>& surfaces);

    std::size_t size() const { return labels_.size(); }
    const std::vector<Text>& labels() const { return labels_; }
    const Text& label(std::size_t index) const { return labels_.at(index); }
    std::optional<std::size_t> index(const Text& label) const;
    Fallback fallback() const { return fallback_; }

    /// Decode a predicted index for an input character. Characters never seen
    /// in training are copied through under the CopyInput policy.
    Text decode(std::size_t index, char32_t input_char) const;

private:
    std::vector<Text> labels_;
    std::unordered_map<Text, std::size_t> index_;
    Fallback fallback_ = Fallback::CopyInput;
};

}  // namespace sandhiseg
