#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sandhiseg/charlm.hpp"
#include "sandhiseg/checkpoint.hpp"
#include "sandhiseg/dataset.hpp"
#include "sandhiseg/labels.hpp"
#include "sandhiseg/lattice.hpp"
#include "sandhiseg/prcp.hpp"
#include "sandhiseg/sandhi.hpp"
#include "sandhiseg/training.hpp"

namespace sandhiseg {

/// Builds the lattice for an input according to the configured source. With
/// an external candidate file, inputs missing from it fall back to n-grams.
class LatticeBuilder {
public:
    LatticeBuilder(LatticeSource source, int n_max, std::vector<SandhiRule> rules = {},
                   CandidateIndex candidates = {});

    Lattice build(const Text& input) const;
    Lattice build(const std::string& utf8) const { return build(normalize(utf8)); }

    LatticeSource source() const { return source_; }
    int n_max() const { return n_max_; }
    const std::vector<SandhiRule>& rules() const { return rules_; }
    bool has_candidates(const std::string& normalized_input) const;

private:
    LatticeSource source_;
    int n_max_;
    std::vector<SandhiRule> rules_;
    CandidateIndex candidates_;
};

struct Segmentation {
    Lattice lattice;
    ChunkedSegmentation raw;    // encoder output
    ChunkedSegmentation final;  // after PRCP, or raw when PRCP is off
    std::optional<RectifyResult> rectify;

    std::string text() const { return flatten(final); }
};

/// Read-only once constructed, so one instance can serve concurrent callers.
class Segmenter {
public:
    Segmenter(Model model, LatticeBuilder builder, std::optional<CharLM> lm, bool use_prcp = true);

    Segmentation segment(const std::string& utf8) const;
    Segmentation segment(const Lattice& lattice) const;

    const Model& model() const { return model_; }
    const LatticeBuilder& builder() const { return builder_; }
    const std::optional<CharLM>& lm() const { return lm_; }
    bool prcp_enabled() const { return use_prcp_ && lm_.has_value(); }

private:
    Model model_;
    LatticeBuilder builder_;
    std::optional<CharLM> lm_;
    bool use_prcp_;
};

/// Lattices plus chunked gold for every record that has a gold segmentation.
std::vector<LabeledSentence> label_dataset(const std::vector<DatasetRecord>& records, const LatticeBuilder& builder);

/// Train the encoder and a character LM on the gold side of the data.
Model train_model(const std::vector<DatasetRecord>& records, const LatticeBuilder& builder,
                  const TrainConfig& config, TrainResult* stats = nullptr);

}  // namespace sandhiseg
