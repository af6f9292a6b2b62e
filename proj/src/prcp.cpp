#include "sandhiseg/prcp.hpp"

#include <cmath>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

double combine_path_score(double geo, double rho, std::size_t n_words) {
    if (n_words == 0 || !(rho > 0)) return 0.0;
    return geo / (rho * static_cast<double>(n_words));
}

std::vector<std::size_t> detect_corrupted(const ChunkedSegmentation& prediction, const Lattice& lattice) {
    const auto& chunks = lattice.chunks();
    if (prediction.size() != chunks.size())
        throw Error(ErrorCode::AlignmentMismatch, "prediction has " + std::to_string(prediction.size()) +
                                                      " chunks, input has " + std::to_string(chunks.size()));
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        for (const auto& word : prediction[c]) {
            if (!lattice.has_candidate(chunks[c], normalize(word))) {
                out.push_back(c);
                break;
            }
        }
    }
    return out;
}

PathScore score_path(const Path& path, const Lattice& lattice, const ModelView& model, const CharLM& lm) {
    PathScore s;
    s.n_words = path.words.size();
    s.LL = model_loglik(model.char_log_probs, lattice, model.labels, path);
    s.rho = lm.perplexity(path.joined());
    if (std::isinf(s.LL)) {
        s.geo = 0;
        s.S = 0;
        return s;
    }
    s.geo = std::exp(s.LL / static_cast<double>(path.chunk.text.size()));
    s.S = combine_path_score(s.geo, s.rho, s.n_words);
    return s;
}

PathScore score_path(const Path& path, const Lattice& lattice, const EncoderParams& params, AttentionMode mode,
                     const CharLM& lm) {
    const Matrix lp = log_softmax_rows(encoder_forward(lattice, params, mode).logits);
    return score_path(path, lattice, ModelView{lp, params.labels}, lm);
}

bool path_ranks_before(const PathScore& a, const std::vector<std::string>& words_a, const PathScore& b,
                       const std::vector<std::string>& words_b) {
    if (a.S != b.S) return a.S > b.S;
    return words_a < words_b;
}

std::string to_string(ChunkAction action) {
    switch (action) {
        case ChunkAction::Untouched: return "untouched";
        case ChunkAction::Replaced: return "replaced";
        case ChunkAction::KeptNoPath: return "kept_no_path";
        case ChunkAction::KeptUnscorable: return "kept_unscorable";
    }
    return "untouched";
}

bool RectifyResult::applied() const {
    for (const auto& c : chunks)
        if (c.action == ChunkAction::Replaced) return true;
    return false;
}

nlohmann::json RectifyResult::diagnostics() const {
    nlohmann::json j;
    j["corrupted"] = corrupted;
    j["applied"] = applied();
    auto& arr = j["chunks"] = nlohmann::json::array();
    for (const auto& c : chunks) {
        nlohmann::json e{{"chunk", c.chunk},       {"action", to_string(c.action)}, {"paths", c.n_paths},
                         {"truncated", c.truncated}, {"original", c.original},       {"replacement", c.replacement}};
        if (c.chosen) {
            e["S"] = c.chosen->S;
            e["LL"] = c.chosen->LL;
            e["geo"] = c.chosen->geo;
            e["rho"] = c.chosen->rho;
            e["words"] = c.chosen->n_words;
        }
        arr.push_back(std::move(e));
    }
    return j;
}

RectifyResult prcp_rectify(const ChunkedSegmentation& prediction, const Lattice& lattice, const ModelView& model,
                           const CharLM& lm, const RectifyOptions& options) {
    RectifyResult result;
    result.segmentation = prediction;
    result.corrupted = detect_corrupted(prediction, lattice);
    for (std::size_t c : result.corrupted) {
        ChunkDiagnostics diag;
        diag.chunk = c;
        diag.original = prediction[c];
        const Chunk& chunk = lattice.chunks()[c];

        PathEnumeration paths;
        try {
            paths = enumerate_paths(lattice, chunk, options.enumerate);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoPath) throw;
            diag.action = ChunkAction::KeptNoPath;
            result.chunks.push_back(std::move(diag));
            continue;
        }
        diag.n_paths = paths.paths.size();
        diag.truncated = paths.truncated;
        if (paths.paths.empty()) {
            diag.action = ChunkAction::KeptNoPath;
            result.chunks.push_back(std::move(diag));
            continue;
        }

        std::optional<PathScore> best;
        std::vector<std::string> best_words;
        for (const auto& path : paths.paths) {
            const PathScore s = score_path(path, lattice, model, lm);
            if (std::isinf(s.LL)) continue;
            auto words = path.word_strings();
            if (!best || path_ranks_before(s, words, *best, best_words)) {
                best = s;
                best_words = std::move(words);
            }
        }
        if (!best) {
            diag.action = ChunkAction::KeptUnscorable;
        } else {
            diag.action = ChunkAction::Replaced;
            diag.chosen = best;
            diag.replacement = best_words;
            result.segmentation[c] = best_words;
        }
        result.chunks.push_back(std::move(diag));
    }
    return result;
}

RectifyResult prcp_rectify(const ChunkedSegmentation& prediction, const Lattice& lattice,
                           const EncoderParams& params, AttentionMode mode, const CharLM& lm,
                           const RectifyOptions& options) {
    const Matrix lp = log_softmax_rows(encoder_forward(lattice, params, mode).logits);
    return prcp_rectify(prediction, lattice, ModelView{lp, params.labels}, lm, options);
}

}  // namespace sandhiseg
