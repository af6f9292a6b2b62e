#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sandhiseg/charlm.hpp"
#include "sandhiseg/encoder.hpp"
#include "sandhiseg/sandhi.hpp"

namespace sandhiseg {

/// Everything needed to rebuild lattices and run the encoder at prediction time.
struct Model {
    EncoderParams params;
    AttentionMode mode = AttentionMode::SMA;
    LatticeSource source = LatticeSource::NGram;
    std::vector<SandhiRule> rules;    // used when source is SandhiRules
    std::optional<CharLM> lm;         // trained on the gold side of the training set
    std::vector<double> loss_trace;
};

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

/// Throws IoError / ParseError.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace sandhiseg
