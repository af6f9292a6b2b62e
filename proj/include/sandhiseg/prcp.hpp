#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sandhiseg/charlm.hpp"
#include "sandhiseg/encoder.hpp"
#include "sandhiseg/labels.hpp"
#include "sandhiseg/lattice.hpp"

namespace sandhiseg {

/// Components of the path score S = geo / (rho * n_words), where geo is the
/// per-character geometric-mean label probability exp(LL / T).
struct PathScore {
    double S = 0;
    double LL = 0;
    double geo = 0;
    double rho = 1;
    std::size_t n_words = 0;
};

double combine_path_score(double geo, double rho, std::size_t n_words);

/// Indices of chunks containing a predicted word with no same-text candidate
/// inside that chunk. Throws AlignmentMismatch on a chunk-count mismatch.
std::vector<std::size_t> detect_corrupted(const ChunkedSegmentation& prediction, const Lattice& lattice);

/// Everything PRCP needs from the encoder for one sentence: per-character
/// label log-probabilities and the label inventory.
struct ModelView {
    const Matrix& char_log_probs;
    const LabelVocab& labels;
};

PathScore score_path(const Path& path, const Lattice& lattice, const ModelView& model, const CharLM& lm);
PathScore score_path(const Path& path, const Lattice& lattice, const EncoderParams& params, AttentionMode mode,
                     const CharLM& lm);

/// Strict ranking: higher S first, ties broken by the lexicographically
/// smallest word sequence.
bool path_ranks_before(const PathScore& a, const std::vector<std::string>& words_a, const PathScore& b,
                       const std::vector<std::string>& words_b);

enum class ChunkAction { Untouched, Replaced, KeptNoPath, KeptUnscorable };

std::string to_string(ChunkAction action);

struct ChunkDiagnostics {
    std::size_t chunk = 0;
    ChunkAction action = ChunkAction::Untouched;
    std::size_t n_paths = 0;
    bool truncated = false;
    std::optional<PathScore> chosen;
    std::vector<std::string> original;
    std::vector<std::string> replacement;
};

struct RectifyResult {
    ChunkedSegmentation segmentation;
    std::vector<std::size_t> corrupted;
    std::vector<ChunkDiagnostics> chunks;  // one entry per corrupted chunk

    bool applied() const;
    nlohmann::json diagnostics() const;
};

struct RectifyOptions {
    EnumerateOptions enumerate;
};

/// Replace every corrupted chunk with its best-scoring lattice path; all other
/// chunks pass through unchanged.
RectifyResult prcp_rectify(const ChunkedSegmentation& prediction, const Lattice& lattice, const ModelView& model,
                           const CharLM& lm, const RectifyOptions& options = {});
RectifyResult prcp_rectify(const ChunkedSegmentation& prediction, const Lattice& lattice,
                           const EncoderParams& params, AttentionMode mode, const CharLM& lm,
                           const RectifyOptions& options = {});

}  // namespace sandhiseg
