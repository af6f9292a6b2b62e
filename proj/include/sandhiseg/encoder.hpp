#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sandhiseg/labels.hpp"
#include "sandhiseg/lattice.hpp"

namespace sandhiseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct EncoderConfig {
    int d_x = 32;
    int d_z = 32;
    int n_heads = 2;
    int n_layers = 1;
    double dropout = 0.3;
    int n_max = 4;
    std::uint64_t seed = 1;

    /// Throws InvalidConfig.
    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class AttentionMode { SMA, Vanilla };

std::string to_string(AttentionMode mode);
AttentionMode attention_mode_from_string(const std::string& name);

/// Node text -> embedding row. Row 0 is reserved for unknown text.
class TokenVocab {
public:
    TokenVocab();
    explicit TokenVocab(const std::vector<Text>& tokens);

    static TokenVocab build(const std::vector<Lattice>& lattices);

    std::size_t size() const { return tokens_.size(); }
    std::size_t index(const Text& token) const;
    const std::vector<Text>& tokens() const { return tokens_; }

    static const Text& unk();

private:
    std::vector<Text> tokens_;
    std::unordered_map<Text, std::size_t> index_;
};

struct LayerParams {
    Matrix wq, wk, wv;  // d_in x d_z
    Matrix wr;          // d_z x d_z, projects span encodings into key space
    Matrix ln1_gain, ln1_bias;  // 1 x d_z
    Matrix w1, b1;      // d_z x 4d_z, 1 x 4d_z
    Matrix w2, b2;      // 4d_z x d_z, 1 x d_z
    Matrix ln2_gain, ln2_bias;
};

struct TensorRef {
    std::string name;
    Matrix* tensor;
};

struct ConstTensorRef {
    std::string name;
    const Matrix* tensor;
};

/// Every learnable tensor plus the vocabularies that give rows and columns
/// their meaning.
struct EncoderParams {
    EncoderConfig config;
    TokenVocab tokens;
    LabelVocab labels;

    Matrix embedding;   // |tokens| x d_x
    std::vector<LayerParams> layers;
    Matrix span_weight; // 1 x 1 scalar w_s
    Matrix classifier;  // d_z x |labels|
    Matrix classifier_bias;  // 1 x |labels|

    static EncoderParams initialize(const EncoderConfig& config, TokenVocab tokens, LabelVocab labels);

    std::vector<TensorRef> tensors();
    std::vector<ConstTensorRef> tensors() const;

    /// Same shapes, all zeros; used to hold gradients and optimizer moments.
    EncoderParams zeros_like() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
};

// ---------------------------------------------------------------------------
// Span position encoding

struct SpanDistances {
    long long hh = 0, ht = 0, th = 0, tt = 0;
    friend bool operator==(const SpanDistances&, const SpanDistances&) = default;
};

SpanDistances span_distances(const SpanNode& a, const SpanNode& b);

/// Interleaved sin/cos of d at geometric frequencies base 10000:
/// out[2k] = sin(d / 10000^(2k/width)), out[2k+1] = cos(same).
Vector sinusoidal_pe(long long d, int width);

/// concat(pe(hh), pe(ht), pe(th), pe(tt)) before the scalar weight.
Vector span_pattern(const SpanDistances& rel, int d_z);

/// ReLU(w_s * span_pattern).
Vector span_encoding(const SpanDistances& rel, double w_s, int d_z);

// ---------------------------------------------------------------------------
// Attention pieces, exposed individually for testing

/// e = (x Wq)(x Wk)^T / sqrt(scale_dim).
Matrix attention_scores(const Matrix& x, const Matrix& wq, const Matrix& wk);

/// Per-query span encodings: spans[i].row(j) = s_ij.
using SpanTable = std::vector<Matrix>;
SpanTable build_span_table(const std::vector<SpanNode>& nodes, double w_s, int d_z);

/// Raw mask logits (x_i Wq)(s_ij Wr)^T / sqrt(d_z).
Matrix soft_mask_logits(const Matrix& x, const SpanTable& spans, const Matrix& wq, const Matrix& wr);

/// M = logistic(soft_mask_logits), entries in (0,1).
Matrix soft_mask(const Matrix& x, const SpanTable& spans, const Matrix& wq, const Matrix& wr);

/// Row-wise M_ij exp(e_ij) / sum_k M_ik exp(e_ik). Throws DegenerateRow when
/// a row of M has no positive entry.
Matrix sma(const Matrix& e, const Matrix& m);

Matrix softmax_rows(const Matrix& e);

// ---------------------------------------------------------------------------
// Full encoder

struct ForwardResult {
    Matrix hidden;  // n_chars x d_z, final-layer states at InputChar rows
    Matrix logits;  // n_chars x |labels|
};

/// Dropout is active only when rng is non-null.
ForwardResult encoder_forward(const Lattice& lattice, const EncoderParams& params, AttentionMode mode,
                              std::mt19937_64* dropout_rng = nullptr);

/// Attention weights of every layer and head, for inspection.
std::vector<std::vector<Matrix>> attention_maps(const Lattice& lattice, const EncoderParams& params,
                                                AttentionMode mode);

/// Which inputs of every ReLU (span encodings and feed-forward layers) are
/// positive, in a fixed order. Two parameter settings with different
/// patterns lie on opposite sides of a point where the loss has a kink.
std::vector<bool> relu_pattern(const Lattice& lattice, const EncoderParams& params, AttentionMode mode);

Matrix log_softmax_rows(const Matrix& logits);

/// Mean negative log-softmax of gold label indices. Throws UnknownLabel when
/// an index is out of range.
double cross_entropy(const Matrix& logits, const std::vector<std::size_t>& gold);

/// Loss of one example and its gradient w.r.t. every tensor, accumulated
/// (scaled by weight) into grads.
double loss_and_gradients(const Lattice& lattice, const std::vector<std::size_t>& gold,
                          const EncoderParams& params, AttentionMode mode, EncoderParams& grads,
                          double weight = 1.0, std::mt19937_64* dropout_rng = nullptr);

/// Map per-char label strings to vocabulary indices. Throws UnknownLabel.
std::vector<std::size_t> label_indices(const LabelVocab& vocab, const std::vector<Text>& labels);

/// Gold label strings for every input character of a lattice.
std::vector<Text> sentence_labels(const Lattice& lattice, const ChunkedSegmentation& gold);

/// Argmax decoding to per-char label strings.
std::vector<Text> predict_labels(const Lattice& lattice, const EncoderParams& params, AttentionMode mode);
std::vector<Text> predict_labels(const Lattice& lattice, const LabelVocab& labels, const Matrix& logits);
ChunkedSegmentation predict_segmentation(const Lattice& lattice, const EncoderParams& params, AttentionMode mode);
ChunkedSegmentation predict_segmentation(const Lattice& lattice, const LabelVocab& labels, const Matrix& logits);

/// Sum over the chunk's characters of the log-probability of the labels
/// implied by the path. -inf when the path cannot be expressed in the label
/// vocabulary.
double model_loglik(const Matrix& char_log_probs, const Lattice& lattice, const LabelVocab& labels,
                    const Path& path);
double model_loglik(const Lattice& lattice, const EncoderParams& params, AttentionMode mode, const Path& path);

}  // namespace sandhiseg
