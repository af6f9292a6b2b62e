#include "sandhiseg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

constexpr double kLayerNormEps = 1e-5;

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw Error(ErrorCode::NumericalError, std::string("non-finite values in ") + what);
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
}

// log(logistic(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct LayerNormCache {
    Matrix xhat;
    Vector inv_std;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache* cache) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Matrix xhat(n, d);
    Vector inv_std(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = x.row(i).mean();
        const RowVector centered = x.row(i).array() - mu;
        const double var = centered.squaredNorm() / static_cast<double>(d);
        inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(i) = centered * inv_std(i);
    }
    Matrix y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
    if (cache) *cache = LayerNormCache{std::move(xhat), std::move(inv_std)};
    return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gain, Matrix& dgain,
                           Matrix& dbias) {
    const Eigen::Index n = dy.rows(), d = dy.cols();
    dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    dbias += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
    Matrix dx(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s1 = dxhat.row(i).sum();
        const double s2 = dxhat.row(i).dot(cache.xhat.row(i));
        dx.row(i) = (cache.inv_std(i) / static_cast<double>(d)) *
                    (static_cast<double>(d) * dxhat.row(i).array() - s1 - cache.xhat.row(i).array() * s2).matrix();
    }
    return dx;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng) < p ? 0.0 : keep;
    return m;
}

// Position encodings for every distance in [-limit, limit], shared by all
// node pairs of one lattice.
class PeTable {
public:
    PeTable(long long limit, int width) : limit_(limit) {
        rows_.reserve(static_cast<std::size_t>(2 * limit + 1));
        for (long long d = -limit; d <= limit; ++d) rows_.push_back(sinusoidal_pe(d, width));
    }
    const Vector& operator()(long long d) const { return rows_[static_cast<std::size_t>(d + limit_)]; }

private:
    long long limit_;
    std::vector<Vector> rows_;
};

SpanTable build_span_patterns(const std::vector<SpanNode>& nodes, int d_z) {
    long long limit = 0;
    for (const auto& n : nodes) limit = std::max<long long>(limit, static_cast<long long>(n.tail));
    const int quarter = d_z / 4;
    const PeTable pe(limit, quarter);
    SpanTable patterns(nodes.size(), Matrix(nodes.size(), d_z));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Matrix& p = patterns[i];
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const SpanDistances r = span_distances(nodes[i], nodes[j]);
            const auto row = static_cast<Eigen::Index>(j);
            p.block(row, 0, 1, quarter) = pe(r.hh).transpose();
            p.block(row, quarter, 1, quarter) = pe(r.ht).transpose();
            p.block(row, 2 * quarter, 1, quarter) = pe(r.th).transpose();
            p.block(row, 3 * quarter, 1, quarter) = pe(r.tt).transpose();
        }
    }
    return patterns;
}

SpanTable apply_span_weight(const SpanTable& patterns, double w_s) {
    SpanTable out;
    out.reserve(patterns.size());
    for (const auto& p : patterns) out.push_back((w_s * p).cwiseMax(0.0));
    return out;
}

Matrix embed(const std::vector<SpanNode>& nodes, const EncoderParams& params, std::vector<std::size_t>& rows) {
    rows.clear();
    Matrix x(static_cast<Eigen::Index>(nodes.size()), params.embedding.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        rows.push_back(params.tokens.index(nodes[i].text));
        x.row(static_cast<Eigen::Index>(i)) = params.embedding.row(static_cast<Eigen::Index>(rows.back()));
    }
    return x;
}

struct LayerCache {
    Matrix x, q, k, v;
    Matrix u, mask;              // SMA only
    std::vector<Matrix> attn;    // per head, softmax output
    std::vector<Matrix> attn_dropout;
    bool residual = false;
    LayerNormCache ln1;
    Matrix h1, a1, ffn_dropout, r;
    LayerNormCache ln2;
};

struct ForwardCache {
    std::vector<SpanNode> nodes;
    std::vector<std::size_t> token_rows;
    SpanTable patterns, spans;
    std::vector<LayerCache> layers;
    Matrix final_hidden;
};

Matrix layer_forward(const Matrix& x, const LayerParams& lp, const EncoderConfig& cfg, AttentionMode mode,
                     const SpanTable& spans, std::mt19937_64* rng, LayerCache& c) {
    const Eigen::Index n = x.rows();
    const int d_z = cfg.d_z;
    const int dh = d_z / cfg.n_heads;
    c.x = x;
    c.q = x * lp.wq;
    c.k = x * lp.wk;
    c.v = x * lp.wv;

    Matrix log_mask;
    if (mode == AttentionMode::SMA) {
        c.u = c.q * lp.wr.transpose();
        Matrix raw(n, n);
        const double scale = 1.0 / std::sqrt(static_cast<double>(d_z));
        for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = (spans[static_cast<std::size_t>(i)] * c.u.row(i).transpose()).transpose() * scale;
        c.mask = raw.unaryExpr([](double r) { return sigmoid(r); });
        log_mask = raw.unaryExpr([](double r) { return log_sigmoid(r); });
    }

    Matrix z(n, d_z);
    c.attn.assign(static_cast<std::size_t>(cfg.n_heads), Matrix());
    c.attn_dropout.assign(static_cast<std::size_t>(cfg.n_heads), Matrix());
    const double head_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < cfg.n_heads; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        Matrix logits = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * head_scale;
        if (mode == AttentionMode::SMA) logits += log_mask;
        c.attn[hs] = softmax_rows(logits);
        Matrix weights = c.attn[hs];
        if (rng && cfg.dropout > 0) {
            c.attn_dropout[hs] = dropout_mask(n, n, cfg.dropout, *rng);
            weights = weights.cwiseProduct(c.attn_dropout[hs]);
        }
        z.middleCols(h * dh, dh) = weights * c.v.middleCols(h * dh, dh);
    }

    c.residual = x.cols() == d_z;
    const Matrix pre1 = c.residual ? Matrix(x + z) : z;
    c.h1 = layer_norm(pre1, lp.ln1_gain, lp.ln1_bias, &c.ln1);
    c.a1 = (c.h1 * lp.w1).rowwise() + lp.b1.row(0);
    c.r = c.a1.cwiseMax(0.0);
    if (rng && cfg.dropout > 0) {
        c.ffn_dropout = dropout_mask(c.r.rows(), c.r.cols(), cfg.dropout, *rng);
        c.r = c.r.cwiseProduct(c.ffn_dropout);
    }
    const Matrix f = (c.r * lp.w2).rowwise() + lp.b2.row(0);
    return layer_norm(c.h1 + f, lp.ln2_gain, lp.ln2_bias, &c.ln2);
}

Matrix layer_backward(const Matrix& dout, const LayerParams& lp, LayerParams& g, const EncoderConfig& cfg,
                      AttentionMode mode, const SpanTable& spans, const SpanTable& patterns, double w_s,
                      double& dw_s, const LayerCache& c) {
    const Eigen::Index n = c.x.rows();
    const int d_z = cfg.d_z;
    const int dh = d_z / cfg.n_heads;

    const Matrix dpre2 = layer_norm_backward(dout, c.ln2, lp.ln2_gain, g.ln2_gain, g.ln2_bias);
    Matrix dh1 = dpre2;
    g.w2 += c.r.transpose() * dpre2;
    g.b2 += dpre2.colwise().sum();
    Matrix da1 = dpre2 * lp.w2.transpose();
    if (c.ffn_dropout.size()) da1 = da1.cwiseProduct(c.ffn_dropout);
    da1 = da1.array() * (c.a1.array() > 0.0).cast<double>();
    g.w1 += c.h1.transpose() * da1;
    g.b1 += da1.colwise().sum();
    dh1 += da1 * lp.w1.transpose();

    const Matrix dpre1 = layer_norm_backward(dh1, c.ln1, lp.ln1_gain, g.ln1_gain, g.ln1_bias);
    Matrix dx = c.residual ? dpre1 : Matrix::Zero(n, c.x.cols());
    const Matrix& dz = dpre1;

    Matrix dq = Matrix::Zero(n, d_z), dk = Matrix::Zero(n, d_z), dv = Matrix::Zero(n, d_z);
    Matrix dlog_mask = Matrix::Zero(n, n);
    const double head_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int h = 0; h < cfg.n_heads; ++h) {
        const auto hs = static_cast<std::size_t>(h);
        const Matrix& a = c.attn[hs];
        const Matrix weights = c.attn_dropout[hs].size() ? Matrix(a.cwiseProduct(c.attn_dropout[hs])) : a;
        const auto dzh = dz.middleCols(h * dh, dh);
        Matrix dweights = dzh * c.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh) += weights.transpose() * dzh;
        if (c.attn_dropout[hs].size()) dweights = dweights.cwiseProduct(c.attn_dropout[hs]);
        const Vector row_dot = (a.array() * dweights.array()).rowwise().sum();
        const Matrix dlogits = a.array() * (dweights.colwise() - row_dot).array();
        dq.middleCols(h * dh, dh) += dlogits * c.k.middleCols(h * dh, dh) * head_scale;
        dk.middleCols(h * dh, dh) += dlogits.transpose() * c.q.middleCols(h * dh, dh) * head_scale;
        if (mode == AttentionMode::SMA) dlog_mask += dlogits;
    }

    if (mode == AttentionMode::SMA) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(d_z));
        const Matrix draw = dlog_mask.array() * (1.0 - c.mask.array());
        Matrix du(n, d_z);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto is = static_cast<std::size_t>(i);
            du.row(i) = draw.row(i) * spans[is] * scale;
            // d s_ij = draw_ij * u_i * scale; s = ReLU(w_s * p)
            const Matrix ds = draw.row(i).transpose() * c.u.row(i) * scale;
            dw_s += (ds.array() * patterns[is].array() * (w_s * patterns[is].array() > 0.0).cast<double>()).sum();
        }
        dq += du * lp.wr;
        g.wr += du.transpose() * c.q;
    }

    g.wq += c.x.transpose() * dq;
    g.wk += c.x.transpose() * dk;
    g.wv += c.x.transpose() * dv;
    dx += dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
    return dx;
}

Matrix run_forward(const Lattice& lattice, const EncoderParams& params, AttentionMode mode, std::mt19937_64* rng,
                   ForwardCache& cache) {
    const EncoderConfig& cfg = params.config;
    cache.nodes = lattice.nodes();
    Matrix x = embed(cache.nodes, params, cache.token_rows);
    require_finite(x, "embeddings");
    if (mode == AttentionMode::SMA) {
        cache.patterns = build_span_patterns(cache.nodes, cfg.d_z);
        cache.spans = apply_span_weight(cache.patterns, params.span_weight(0, 0));
    }
    cache.layers.assign(params.layers.size(), LayerCache{});
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        x = layer_forward(x, params.layers[l], cfg, mode, cache.spans, rng, cache.layers[l]);
    cache.final_hidden = x;
    const auto n_chars = static_cast<Eigen::Index>(lattice.char_nodes().size());
    Matrix logits = (x.topRows(n_chars) * params.classifier).rowwise() + params.classifier_bias.row(0);
    require_finite(logits, "logits");
    return logits;
}

}  // namespace

void EncoderConfig::validate() const {
    if (d_x <= 0 || d_z <= 0 || n_heads <= 0 || n_layers < 0)
        throw Error(ErrorCode::InvalidConfig, "dimensions must be positive");
    if (d_z % 4 != 0) throw Error(ErrorCode::InvalidConfig, "d_z must be divisible by 4");
    if ((d_z / 4) % 2 != 0) throw Error(ErrorCode::InvalidConfig, "d_z/4 must be even for sin/cos pairs");
    if (d_z % n_heads != 0) throw Error(ErrorCode::InvalidConfig, "d_z must be divisible by n_heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidConfig, "dropout must be in [0,1)");
    if (n_max < 2) throw Error(ErrorCode::InvalidConfig, "n_max must be at least 2");
}

std::string to_string(AttentionMode mode) { return mode == AttentionMode::SMA ? "sma" : "vanilla"; }

AttentionMode attention_mode_from_string(const std::string& name) {
    if (name == "sma") return AttentionMode::SMA;
    if (name == "vanilla") return AttentionMode::Vanilla;
    throw Error(ErrorCode::InvalidConfig, "unknown attention mode '" + name + "'");
}

const Text& TokenVocab::unk() {
    static const Text token = U"<unk>";
    return token;
}

TokenVocab::TokenVocab() : TokenVocab(std::vector<Text>{}) {}

TokenVocab::TokenVocab(const std::vector<Text>& tokens) {
    tokens_.push_back(unk());
    index_.emplace(unk(), 0);
    for (const auto& t : tokens) {
        if (index_.emplace(t, tokens_.size()).second) tokens_.push_back(t);
    }
}

TokenVocab TokenVocab::build(const std::vector<Lattice>& lattices) {
    std::vector<Text> all;
    for (const auto& l : lattices)
        for (const auto& n : l.nodes()) all.push_back(n.text);
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return TokenVocab(all);
}

std::size_t TokenVocab::index(const Text& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config, TokenVocab tokens, LabelVocab labels) {
    config.validate();
    if (labels.size() == 0) throw Error(ErrorCode::InvalidConfig, "empty label vocabulary");
    std::mt19937_64 rng(config.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_x));
    const Eigen::Index dz = config.d_z, ff = 4 * config.d_z;

    EncoderParams p;
    p.config = config;
    p.tokens = std::move(tokens);
    p.labels = std::move(labels);
    p.embedding = uniform_matrix(static_cast<Eigen::Index>(p.tokens.size()), config.d_x, bound, rng);
    for (int l = 0; l < config.n_layers; ++l) {
        const Eigen::Index d_in = l == 0 ? config.d_x : dz;
        LayerParams lp;
        lp.wq = uniform_matrix(d_in, dz, bound, rng);
        lp.wk = uniform_matrix(d_in, dz, bound, rng);
        lp.wv = uniform_matrix(d_in, dz, bound, rng);
        lp.wr = uniform_matrix(dz, dz, bound, rng);
        lp.ln1_gain = Matrix::Ones(1, dz);
        lp.ln1_bias = Matrix::Zero(1, dz);
        lp.w1 = uniform_matrix(dz, ff, bound, rng);
        lp.b1 = Matrix::Zero(1, ff);
        lp.w2 = uniform_matrix(ff, dz, bound, rng);
        lp.b2 = Matrix::Zero(1, dz);
        lp.ln2_gain = Matrix::Ones(1, dz);
        lp.ln2_bias = Matrix::Zero(1, dz);
        p.layers.push_back(std::move(lp));
    }
    p.span_weight = Matrix::Ones(1, 1);
    const Eigen::Index classifier_in = config.n_layers > 0 ? dz : config.d_x;
    p.classifier = uniform_matrix(classifier_in, static_cast<Eigen::Index>(p.labels.size()), bound, rng);
    p.classifier_bias = Matrix::Zero(1, static_cast<Eigen::Index>(p.labels.size()));
    return p;
}

std::vector<TensorRef> EncoderParams::tensors() {
    std::vector<TensorRef> out{{"embedding", &embedding}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        LayerParams& lp = layers[l];
        out.push_back({pre + "wq", &lp.wq});
        out.push_back({pre + "wk", &lp.wk});
        out.push_back({pre + "wv", &lp.wv});
        out.push_back({pre + "wr", &lp.wr});
        out.push_back({pre + "ln1_gain", &lp.ln1_gain});
        out.push_back({pre + "ln1_bias", &lp.ln1_bias});
        out.push_back({pre + "w1", &lp.w1});
        out.push_back({pre + "b1", &lp.b1});
        out.push_back({pre + "w2", &lp.w2});
        out.push_back({pre + "b2", &lp.b2});
        out.push_back({pre + "ln2_gain", &lp.ln2_gain});
        out.push_back({pre + "ln2_bias", &lp.ln2_bias});
    }
    out.push_back({"span_weight", &span_weight});
    out.push_back({"classifier", &classifier});
    out.push_back({"classifier_bias", &classifier_bias});
    return out;
}

std::vector<ConstTensorRef> EncoderParams::tensors() const {
    std::vector<ConstTensorRef> out;
    for (auto& t : const_cast<EncoderParams*>(this)->tensors()) out.push_back({t.name, t.tensor});
    return out;
}

EncoderParams EncoderParams::zeros_like() const {
    EncoderParams z = *this;
    for (auto& t : z.tensors()) t.tensor->setZero();
    return z;
}

std::size_t EncoderParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += static_cast<std::size_t>(t.tensor->size());
    return n;
}

bool EncoderParams::all_finite() const {
    for (const auto& t : tensors())
        if (!t.tensor->allFinite()) return false;
    return true;
}

SpanDistances span_distances(const SpanNode& a, const SpanNode& b) {
    const auto ah = static_cast<long long>(a.head), at = static_cast<long long>(a.tail);
    const auto bh = static_cast<long long>(b.head), bt = static_cast<long long>(b.tail);
    return SpanDistances{ah - bh, ah - bt, at - bh, at - bt};
}

Vector sinusoidal_pe(long long d, int width) {
    if (width <= 0 || width % 2 != 0) throw Error(ErrorCode::InvalidConfig, "position encoding width must be even");
    Vector out(width);
    for (int k = 0; k < width / 2; ++k) {
        const double freq = std::pow(10000.0, -2.0 * k / static_cast<double>(width));
        const double angle = static_cast<double>(d) * freq;
        out(2 * k) = std::sin(angle);
        out(2 * k + 1) = std::cos(angle);
    }
    return out;
}

Vector span_pattern(const SpanDistances& rel, int d_z) {
    const int q = d_z / 4;
    Vector out(d_z);
    out.segment(0, q) = sinusoidal_pe(rel.hh, q);
    out.segment(q, q) = sinusoidal_pe(rel.ht, q);
    out.segment(2 * q, q) = sinusoidal_pe(rel.th, q);
    out.segment(3 * q, q) = sinusoidal_pe(rel.tt, q);
    return out;
}

Vector span_encoding(const SpanDistances& rel, double w_s, int d_z) {
    return (w_s * span_pattern(rel, d_z)).cwiseMax(0.0);
}

Matrix attention_scores(const Matrix& x, const Matrix& wq, const Matrix& wk) {
    require_finite(x, "attention input");
    Matrix e = (x * wq) * (x * wk).transpose() / std::sqrt(static_cast<double>(wq.cols()));
    require_finite(e, "attention scores");
    return e;
}

SpanTable build_span_table(const std::vector<SpanNode>& nodes, double w_s, int d_z) {
    return apply_span_weight(build_span_patterns(nodes, d_z), w_s);
}

Matrix soft_mask_logits(const Matrix& x, const SpanTable& spans, const Matrix& wq, const Matrix& wr) {
    require_finite(x, "mask input");
    const Matrix u = (x * wq) * wr.transpose();
    const Eigen::Index n = x.rows();
    Matrix raw(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
    for (Eigen::Index i = 0; i < n; ++i) raw.row(i) = (spans[static_cast<std::size_t>(i)] * u.row(i).transpose()).transpose() * scale;
    require_finite(raw, "soft mask");
    return raw;
}

Matrix soft_mask(const Matrix& x, const SpanTable& spans, const Matrix& wq, const Matrix& wr) {
    return soft_mask_logits(x, spans, wq, wr).unaryExpr([](double r) { return sigmoid(r); });
}

Matrix sma(const Matrix& e, const Matrix& m) {
    if (e.rows() != m.rows() || e.cols() != m.cols())
        throw Error(ErrorCode::InvalidConfig, "score and mask shapes differ");
    Matrix out(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            if (m(i, j) > 0) top = std::max(top, e(i, j));
        if (!std::isfinite(top)) throw Error(ErrorCode::DegenerateRow, "mask row " + std::to_string(i) + " is all zero");
        double sum = 0;
        for (Eigen::Index j = 0; j < e.cols(); ++j) {
            out(i, j) = m(i, j) > 0 ? m(i, j) * std::exp(e(i, j) - top) : 0.0;
            sum += out(i, j);
        }
        out.row(i) /= sum;
    }
    return out;
}

Matrix softmax_rows(const Matrix& e) {
    Matrix out = e;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double top = out.row(i).maxCoeff();
        out.row(i) = (out.row(i).array() - top).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out = logits;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double top = out.row(i).maxCoeff();
        const double lse = top + std::log((out.row(i).array() - top).exp().sum());
        out.row(i).array() -= lse;
    }
    return out;
}

ForwardResult encoder_forward(const Lattice& lattice, const EncoderParams& params, AttentionMode mode,
                              std::mt19937_64* dropout_rng) {
    ForwardCache cache;
    Matrix logits = run_forward(lattice, params, mode, dropout_rng, cache);
    const auto n_chars = static_cast<Eigen::Index>(lattice.char_nodes().size());
    return ForwardResult{cache.final_hidden.topRows(n_chars), std::move(logits)};
}

std::vector<std::vector<Matrix>> attention_maps(const Lattice& lattice, const EncoderParams& params,
                                                AttentionMode mode) {
    ForwardCache cache;
    run_forward(lattice, params, mode, nullptr, cache);
    std::vector<std::vector<Matrix>> out;
    for (const auto& l : cache.layers) out.push_back(l.attn);
    return out;
}

std::vector<bool> relu_pattern(const Lattice& lattice, const EncoderParams& params, AttentionMode mode) {
    ForwardCache cache;
    run_forward(lattice, params, mode, nullptr, cache);
    std::vector<bool> out;
    const double w_s = params.span_weight(0, 0);
    for (const auto& p : cache.patterns)
        for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(w_s * p(i) > 0);
    for (const auto& l : cache.layers)
        for (Eigen::Index i = 0; i < l.a1.size(); ++i) out.push_back(l.a1(i) > 0);
    return out;
}

double cross_entropy(const Matrix& logits, const std::vector<std::size_t>& gold) {
    if (static_cast<Eigen::Index>(gold.size()) != logits.rows())
        throw Error(ErrorCode::UnknownLabel, "one gold label per input character is required");
    const Matrix lp = log_softmax_rows(logits);
    double total = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] >= static_cast<std::size_t>(logits.cols()))
            throw Error(ErrorCode::UnknownLabel, "gold label index out of range");
        total -= lp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gold[i]));
    }
    return gold.empty() ? 0.0 : total / static_cast<double>(gold.size());
}

double loss_and_gradients(const Lattice& lattice, const std::vector<std::size_t>& gold, const EncoderParams& params,
                          AttentionMode mode, EncoderParams& grads, double weight, std::mt19937_64* dropout_rng) {
    ForwardCache cache;
    const Matrix logits = run_forward(lattice, params, mode, dropout_rng, cache);
    const double loss = cross_entropy(logits, gold);

    const Eigen::Index n_chars = logits.rows();
    Matrix dlogits = softmax_rows(logits);
    for (Eigen::Index i = 0; i < n_chars; ++i) dlogits(i, static_cast<Eigen::Index>(gold[static_cast<std::size_t>(i)])) -= 1.0;
    dlogits *= weight / static_cast<double>(n_chars);

    const Matrix hc = cache.final_hidden.topRows(n_chars);
    grads.classifier += hc.transpose() * dlogits;
    grads.classifier_bias += dlogits.colwise().sum();
    Matrix dh = Matrix::Zero(cache.final_hidden.rows(), cache.final_hidden.cols());
    dh.topRows(n_chars) = dlogits * params.classifier.transpose();

    const double w_s = params.span_weight(0, 0);
    double dw_s = 0;
    for (std::size_t l = params.layers.size(); l-- > 0;)
        dh = layer_backward(dh, params.layers[l], grads.layers[l], params.config, mode, cache.spans, cache.patterns,
                            w_s, dw_s, cache.layers[l]);
    grads.span_weight(0, 0) += dw_s;
    for (std::size_t i = 0; i < cache.token_rows.size(); ++i)
        grads.embedding.row(static_cast<Eigen::Index>(cache.token_rows[i])) += dh.row(static_cast<Eigen::Index>(i));
    return loss;
}

std::vector<std::size_t> label_indices(const LabelVocab& vocab, const std::vector<Text>& labels) {
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        const auto idx = vocab.index(l);
        if (!idx) throw Error(ErrorCode::UnknownLabel, "label '" + text_to_utf8(l) + "' is not in the vocabulary");
        out.push_back(*idx);
    }
    return out;
}

std::vector<Text> sentence_labels(const Lattice& lattice, const ChunkedSegmentation& gold) {
    if (gold.size() != lattice.chunks().size())
        throw Error(ErrorCode::AlignmentMismatch, "gold chunk count differs from input");
    std::vector<Text> labels;
    for (std::size_t c = 0; c < gold.size(); ++c) {
        auto chunk_labels = align_gold_labels(lattice.chunks()[c].text, normalize(join(gold[c], " ")));
        labels.insert(labels.end(), chunk_labels.begin(), chunk_labels.end());
    }
    return labels;
}

std::vector<Text> predict_labels(const Lattice& lattice, const LabelVocab& labels, const Matrix& logits) {
    std::vector<Text> out;
    const auto& chars = lattice.char_nodes();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        out.push_back(labels.decode(static_cast<std::size_t>(best), chars[static_cast<std::size_t>(i)].text[0]));
    }
    return out;
}

std::vector<Text> predict_labels(const Lattice& lattice, const EncoderParams& params, AttentionMode mode) {
    return predict_labels(lattice, params.labels, encoder_forward(lattice, params, mode).logits);
}

ChunkedSegmentation predict_segmentation(const Lattice& lattice, const LabelVocab& labels, const Matrix& logits) {
    const std::vector<Text> predicted = predict_labels(lattice, labels, logits);
    ChunkedSegmentation out;
    std::size_t offset = 0;
    for (const auto& chunk : lattice.chunks()) {
        std::vector<Text> slice(predicted.begin() + static_cast<long>(offset),
                                predicted.begin() + static_cast<long>(offset + chunk.text.size()));
        auto words = decode_chunk_labels(slice);
        if (words.empty()) words.push_back(text_to_utf8(chunk.text));
        out.push_back(std::move(words));
        offset += chunk.text.size();
    }
    return out;
}

ChunkedSegmentation predict_segmentation(const Lattice& lattice, const EncoderParams& params, AttentionMode mode) {
    return predict_segmentation(lattice, params.labels, encoder_forward(lattice, params, mode).logits);
}

double model_loglik(const Matrix& char_log_probs, const Lattice& lattice, const LabelVocab& labels, const Path& path) {
    std::vector<Text> path_labels;
    try {
        path_labels = align_gold_labels(path.chunk.text, path.joined());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::AlignmentOverflow) return -std::numeric_limits<double>::infinity();
        throw;
    }
    const std::size_t offset = lattice.char_offset(path.chunk);
    double ll = 0;
    for (std::size_t i = 0; i < path_labels.size(); ++i) {
        const auto idx = labels.index(path_labels[i]);
        if (!idx) return -std::numeric_limits<double>::infinity();
        ll += char_log_probs(static_cast<Eigen::Index>(offset + i), static_cast<Eigen::Index>(*idx));
    }
    return ll;
}

double model_loglik(const Lattice& lattice, const EncoderParams& params, AttentionMode mode, const Path& path) {
    const Matrix lp = log_softmax_rows(encoder_forward(lattice, params, mode).logits);
    return model_loglik(lp, lattice, params.labels, path);
}

}  // namespace sandhiseg
