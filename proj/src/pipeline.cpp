#include "sandhiseg/pipeline.hpp"

#include "sandhiseg/error.hpp"

namespace sandhiseg {

LatticeBuilder::LatticeBuilder(LatticeSource source, int n_max, std::vector<SandhiRule> rules,
                               CandidateIndex candidates)
    : source_(source), n_max_(n_max), rules_(std::move(rules)), candidates_(std::move(candidates)) {
    if (n_max_ < 2) throw Error(ErrorCode::InvalidConfig, "n-gram maximum must be at least 2");
}

bool LatticeBuilder::has_candidates(const std::string& normalized_input) const {
    return candidates_.count(normalized_input) > 0;
}

Lattice LatticeBuilder::build(const Text& input) const {
    switch (source_) {
    case LatticeSource::External: {
        auto it = candidates_.find(text_to_utf8(input));
        if (it == candidates_.end()) return make_ngram_lattice(input, n_max_);
        return ingest_candidate_space(input, it->second);
    }
    case LatticeSource::NGram:
        return make_ngram_lattice(input, n_max_);
    case LatticeSource::SandhiRules:
        return make_rule_lattice(input, rules_);
    case LatticeSource::None:
        return Lattice(input, {}, LatticeSource::None);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown lattice source");
}

Segmenter::Segmenter(Model model, LatticeBuilder builder, std::optional<CharLM> lm, bool use_prcp)
    : model_(std::move(model)), builder_(std::move(builder)), lm_(std::move(lm)), use_prcp_(use_prcp) {}

Segmentation Segmenter::segment(const std::string& utf8) const { return segment(builder_.build(utf8)); }

Segmentation Segmenter::segment(const Lattice& lattice) const {
    const Matrix logits = encoder_forward(lattice, model_.params, model_.mode).logits;
    Segmentation out{lattice, predict_segmentation(lattice, model_.params.labels, logits), {}, std::nullopt};
    out.final = out.raw;
    // Only an external candidate space lists whole words; n-gram and rule
    // lattices cannot tell a corrupted word from a long one.
    if (prcp_enabled() && lattice.source() == LatticeSource::External) {
        const Matrix lp = log_softmax_rows(logits);
        out.rectify = prcp_rectify(out.raw, lattice, ModelView{lp, model_.params.labels}, *lm_);
        out.final = out.rectify->segmentation;
    }
    return out;
}

std::vector<LabeledSentence> label_dataset(const std::vector<DatasetRecord>& records, const LatticeBuilder& builder) {
    std::vector<LabeledSentence> out;
    for (const auto& r : records) {
        if (!r.gold) continue;
        Lattice lattice = builder.build(r.input);
        auto gold = split_by_chunks(lattice.input(), *r.gold);
        out.push_back(LabeledSentence{std::move(lattice), std::move(gold)});
    }
    return out;
}

Model train_model(const std::vector<DatasetRecord>& records, const LatticeBuilder& builder,
                  const TrainConfig& config, TrainResult* stats) {
    const auto data = label_dataset(records, builder);
    TrainResult result = train(data, config);
    std::vector<std::string> gold;
    for (const auto& r : records)
        if (r.gold) gold.push_back(*r.gold);

    Model model;
    model.params = std::move(result.params);
    model.mode = config.mode;
    model.source = builder.source();
    model.rules = builder.rules();
    model.lm = CharLM::train(gold, config.lm_order, config.lm_lambda);
    model.loss_trace = result.loss_trace;
    if (stats) {
        stats->loss_trace = result.loss_trace;
        stats->used = result.used;
        stats->excluded = result.excluded;
    }
    return model;
}

}  // namespace sandhiseg
