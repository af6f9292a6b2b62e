#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "sandhiseg/encoder.hpp"
#include "sandhiseg/labels.hpp"
#include "sandhiseg/lattice.hpp"

namespace sandhiseg {

struct TrainConfig {
    int epochs = 50;
    double learning_rate = 0.001;
    double dropout = 0.3;
    int batch_size = 16;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    EncoderConfig encoder;
    AttentionMode mode = AttentionMode::SMA;
    LatticeSource lattice = LatticeSource::NGram;
    int lm_order = 5;
    double lm_lambda = 0.1;

    /// Throws InvalidConfig.
    void validate() const;

    /// `key = value` lines; '#' comments and [section] headers are ignored.
    static TrainConfig parse(std::istream& in, TrainConfig base);
    static TrainConfig parse(std::istream& in);
    static TrainConfig load(const std::string& path, TrainConfig base);
    static TrainConfig load(const std::string& path);
};

struct LabeledSentence {
    Lattice lattice;
    ChunkedSegmentation gold;
};

struct TrainingExample {
    const Lattice* lattice = nullptr;
    std::vector<std::size_t> gold;
};

/// Label alignment and vocabulary construction for a training set. Sentences
/// whose gold cannot be expressed in labels of length <= 3 are excluded.
struct PreparedData {
    LabelVocab labels;
    TokenVocab tokens;
    std::vector<TrainingExample> examples;
    std::size_t excluded = 0;
    std::vector<std::string> exclusion_reasons;
};

PreparedData prepare_training_data(const std::vector<LabeledSentence>& data);

struct TrainResult {
    EncoderParams params;
    std::vector<double> loss_trace;  // mean minibatch loss per epoch
    std::size_t used = 0;
    std::size_t excluded = 0;
};

TrainResult train(const std::vector<LabeledSentence>& data, const TrainConfig& config);

/// Mean loss over examples with dropout disabled.
double dataset_loss(const EncoderParams& params, const std::vector<TrainingExample>& examples, AttentionMode mode);

class AdamOptimizer {
public:
    AdamOptimizer(const EncoderParams& shape, double lr, double beta1, double beta2, double epsilon);
    void step(EncoderParams& params, EncoderParams& grads);
    std::uint64_t steps() const { return t_; }

private:
    EncoderParams m_, v_;
    double lr_, beta1_, beta2_, epsilon_;
    std::uint64_t t_ = 0;
};

struct GradCheckReport {
    double max_relative_error = 0;
    std::string worst_tensor;
    std::map<std::string, double> per_tensor;
    std::size_t checked = 0;
    /// Scalars whose +h and -h evaluations fall on different sides of a ReLU
    /// kink; the central difference is meaningless there and they are skipped.
    std::size_t kinks = 0;
    /// Plain central difference at step h with no allowances, for reference.
    double max_raw_relative_error = 0;
};

/// Relative error used by the gradient check: |a - n| / max(|a|, |n|), or 0
/// when both are below `floor`.
double relative_error(double analytic, double numeric, double floor = 1e-10);

/// Rounding error bound of a central difference (L+ - L-) / 2h in double
/// precision, allowing kRoundingUlps units of rounding per loss evaluation.
inline constexpr double kRoundingUlps = 16;
double central_difference_noise(double loss_plus, double loss_minus, double h);

/// Central finite differences against the analytic gradient of the loss for
/// every scalar of every tensor, Richardson-extrapolated over steps h and h/2.
/// Dropout is always off here. A difference no larger than the rounding bound
/// of the numeric estimate counts as agreement, and scalars whose stencil
/// crosses a ReLU kink are excluded and counted.
GradCheckReport grad_check(const EncoderParams& params, const Lattice& lattice, const std::vector<std::size_t>& gold,
                           AttentionMode mode, double epsilon = 1e-4);

}  // namespace sandhiseg
