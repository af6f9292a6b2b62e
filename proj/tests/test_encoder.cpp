#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "sandhiseg/encoder.hpp"
#include "sandhiseg/error.hpp"

using namespace sandhiseg;
using oracles::random_matrix;
using testsupport::u;

namespace {

std::vector<SpanNode> random_nodes(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pos(0, 12);
    std::vector<SpanNode> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t h = pos(rng), t = pos(rng);
        if (h > t) std::swap(h, t);
        out.push_back(SpanNode{U"x", h, t, NodeKind::Candidate});
    }
    return out;
}

EncoderParams small_params(const Lattice& lattice, int d_z, int heads, int layers, std::uint64_t seed) {
    EncoderConfig cfg;
    cfg.d_x = d_z;
    cfg.d_z = d_z;
    cfg.n_heads = heads;
    cfg.n_layers = layers;
    cfg.dropout = 0.0;
    cfg.seed = seed;
    std::vector<Text> tokens;
    for (const auto& n : lattice.nodes()) tokens.push_back(n.text);
    return EncoderParams::initialize(cfg, TokenVocab(tokens), LabelVocab({U"a", U"b", U"a_a", U"k"}));
}

}  // namespace

TEST_CASE("config validation") {
    EncoderConfig c;
    CHECK_NOTHROW(c.validate());
    c.d_z = 30;
    CHECK_THROWS_AS(c.validate(), Error);
    c = EncoderConfig{};
    c.n_heads = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    c = EncoderConfig{};
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("span distances") {
    const SpanNode a{U"x", 2, 4, NodeKind::Candidate};
    CHECK(span_distances(a, a) == SpanDistances{0, -2, 2, 0});
    const SpanNode p{U"x", 0, 0, NodeKind::InputChar}, q{U"xyzw", 1, 3, NodeKind::Candidate};
    CHECK(span_distances(p, q) == SpanDistances{-1, -3, -1, -3});
    const SpanDistances back = span_distances(q, p);
    const SpanDistances fwd = span_distances(p, q);
    CHECK(back.hh == -fwd.hh);
    CHECK(back.tt == -fwd.tt);
    CHECK(back.ht == -fwd.th);
    CHECK(back.th == -fwd.ht);
}

TEST_CASE("sinusoidal encoding values and parity") {
    const Vector zero = sinusoidal_pe(0, 8);
    for (int i = 0; i < 8; ++i) CHECK(zero(i) == (i % 2 == 0 ? 0.0 : 1.0));
    for (long long d : {1LL, -3LL, 7LL, 40LL}) {
        const Vector pe = sinusoidal_pe(d, 4);
        for (int i = 0; i < 4; ++i) CHECK(pe(i) == doctest::Approx(oracles::pe(d, 4, i)).epsilon(1e-14));
        const Vector neg = sinusoidal_pe(-d, 4);
        for (int i = 0; i < 4; ++i) CHECK(neg(i) == doctest::Approx(i % 2 == 0 ? -pe(i) : pe(i)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(sinusoidal_pe(1, 3), Error);
}

TEST_CASE("span encoding") {
    const SpanDistances r{3, -1, 5, 2};
    CHECK(span_encoding(r, 0.0, 16).isZero());
    const Vector at_zero = span_encoding(SpanDistances{}, 1.0, 16);
    for (int i = 0; i < 16; ++i) CHECK(at_zero(i) == (i % 2 == 0 ? 0.0 : 1.0));
    const Vector neg = span_encoding(r, -1.0, 16);
    const Vector pattern = span_pattern(r, 16);
    for (int i = 0; i < 16; ++i) CHECK(neg(i) == std::max(0.0, -pattern(i)));
    CHECK((span_encoding(r, 1.0, 16).array() >= 0).all());
}

TEST_CASE("attention scores") {
    std::mt19937_64 rng(3);
    const Matrix wq = random_matrix(4, 8, rng), wk = random_matrix(4, 8, rng);
    CHECK(attention_scores(Matrix::Zero(3, 4), wq, wk).isZero());
    // 1x1 with scalar weights, d_z = 1.
    Matrix x(1, 1), q(1, 1), k(1, 1);
    x << 3.0;
    q << 0.5;
    k << -2.0;
    CHECK(attention_scores(x, q, k)(0, 0) == doctest::Approx(9.0 * 0.5 * -2.0));
    const Matrix xs = random_matrix(3, 4, rng);
    CHECK((attention_scores(xs, 2.5 * wq, wk) - 2.5 * attention_scores(xs, wq, wk)).cwiseAbs().maxCoeff() < 1e-12);
    Matrix bad = xs;
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(attention_scores(bad, wq, wk), Error);
}

TEST_CASE("soft mask") {
    std::mt19937_64 rng(4);
    const auto nodes = random_nodes(3, rng);
    const SpanTable spans = build_span_table(nodes, 1.0, 8);
    const Matrix wq = random_matrix(8, 8, rng), wr = random_matrix(8, 8, rng);
    const Matrix half = soft_mask(Matrix::Zero(3, 8), spans, wq, wr);
    CHECK((half.array() == 0.5).all());

    // Two nodes, d_z = 8, identity projections: raw_ij = x_i . s_ij / sqrt(8).
    const std::vector<SpanNode> two{{U"a", 0, 0, NodeKind::InputChar}, {U"ab", 0, 1, NodeKind::Candidate}};
    const SpanTable s2 = build_span_table(two, 1.0, 8);
    Matrix x(2, 8);
    x << 1, 0, 2, 0, 0.5, 1, 0, -1,
         0, 1, 0, 1, 1, 0, -2, 0;
    const Matrix id = Matrix::Identity(8, 8);
    const Matrix m = soft_mask(x, s2, id, id);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const Vector s = span_encoding(span_distances(two[i], two[j]), 1.0, 8);
            const double raw = x.row(i).dot(s) / std::sqrt(8.0);
            CHECK(m(i, j) == doctest::Approx(1.0 / (1.0 + std::exp(-raw))).epsilon(1e-14));
        }
    // Large positive logits saturate towards 1.
    const Matrix big = soft_mask(1e3 * x, s2, id, id);
    CHECK(big(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("soft-masked attention") {
    Matrix e(1, 2), m(1, 2);
    e << 0, 0;
    m << 0.2, 0.8;
    const Matrix a = sma(e, m);
    CHECK(a(0, 0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(a(0, 1) == doctest::Approx(0.8).epsilon(1e-15));

    std::mt19937_64 rng(6);
    const Matrix scores = random_matrix(5, 5, rng, 3.0);
    const Matrix constant = Matrix::Constant(5, 5, 0.37);
    CHECK((sma(scores, constant) - softmax_rows(scores)).cwiseAbs().maxCoeff() < 1e-12);

    Matrix almost = Matrix::Constant(5, 5, 0.5);
    almost(2, 3) = 1e-300;
    const Matrix b = sma(scores, almost);
    CHECK(b(2, 3) < 1e-250);
    CHECK(b.row(2).sum() == doctest::Approx(1.0));

    Matrix dead = Matrix::Constant(2, 2, 0.5);
    dead.row(1).setZero();
    try {
        sma(Matrix::Zero(2, 2), dead);
        FAIL("expected DegenerateRow");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::DegenerateRow);
    }
}

TEST_CASE("soft-masked attention rows sum to one for random inputs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        const int d_z = seed % 2 ? 16 : 8;
        const auto n = 1 + static_cast<std::size_t>(seed % 16);
        const auto nodes = random_nodes(n, rng);
        const Matrix x = random_matrix(static_cast<Eigen::Index>(n), d_z, rng);
        const Matrix wq = random_matrix(d_z, d_z, rng), wk = random_matrix(d_z, d_z, rng);
        const Matrix wr = random_matrix(d_z, d_z, rng);
        const Matrix a = sma(attention_scores(x, wq, wk), soft_mask(x, build_span_table(nodes, 1.0, d_z), wq, wr));
        for (Eigen::Index i = 0; i < a.rows(); ++i) CHECK(std::abs(a.row(i).sum() - 1.0) < 1e-6);
    }
}

TEST_CASE("constant mask makes the encoders agree") {
    const Lattice lattice(u("kāma ati"), {{u("kā"), 0, 1, NodeKind::Candidate}, {u("ma"), 2, 3, NodeKind::Candidate}},
                          LatticeSource::External);
    EncoderParams p = small_params(lattice, 8, 2, 2, 9);
    for (auto& l : p.layers) l.wr.setZero();  // raw mask 0, M = 1/2 everywhere
    const Matrix sma_logits = encoder_forward(lattice, p, AttentionMode::SMA).logits;
    const Matrix van_logits = encoder_forward(lattice, p, AttentionMode::Vanilla).logits;
    CHECK((sma_logits - van_logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward pass shape, classifier composition and determinism") {
    const Lattice lattice(u("ab c"), {{u("ab"), 0, 1, NodeKind::Candidate}}, LatticeSource::External);
    const EncoderParams p = small_params(lattice, 8, 2, 1, 1);
    const auto r1 = encoder_forward(lattice, p, AttentionMode::SMA);
    const auto r2 = encoder_forward(lattice, p, AttentionMode::SMA);
    CHECK(r1.logits.rows() == 3);
    CHECK(r1.logits.cols() == 4);
    CHECK(r1.logits == r2.logits);
    const Matrix composed = (r1.hidden * p.classifier).rowwise() + p.classifier_bias.row(0);
    CHECK((composed - r1.logits).cwiseAbs().maxCoeff() < 1e-12);

    const EncoderParams again = small_params(lattice, 8, 2, 1, 1);
    CHECK(encoder_forward(lattice, again, AttentionMode::SMA).logits == r1.logits);

    std::mt19937_64 d1(5), d2(5);
    CHECK(encoder_forward(lattice, p, AttentionMode::SMA, &d1).logits ==
          encoder_forward(lattice, p, AttentionMode::SMA, &d2).logits);
}

TEST_CASE("single-character input with an identity classifier") {
    const Lattice lattice(u("a"), {}, LatticeSource::None);
    EncoderConfig cfg;
    cfg.d_x = cfg.d_z = 8;
    cfg.n_heads = 1;
    cfg.dropout = 0;
    EncoderParams p = EncoderParams::initialize(
        cfg, TokenVocab({U"a"}), LabelVocab({U"a", U"b", U"c", U"d", U"e", U"f", U"g", U"h"}));
    p.classifier = Matrix::Identity(8, 8);
    const auto r = encoder_forward(lattice, p, AttentionMode::SMA);
    CHECK((r.logits - r.hidden).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("unknown node text uses the reserved row") {
    TokenVocab v({U"ab"});
    CHECK(v.size() == 2);
    CHECK(v.index(U"ab") == 1);
    CHECK(v.index(U"zz") == 0);
}

TEST_CASE("cross entropy") {
    Matrix uniform = Matrix::Zero(3, 5);
    CHECK(cross_entropy(uniform, {0, 1, 4}) == doctest::Approx(std::log(5.0)));
    Matrix sat = Matrix::Zero(2, 3);
    sat(0, 1) = 60;
    sat(1, 2) = 60;
    CHECK(cross_entropy(sat, {1, 2}) < 1e-20);
    // Two classes, logits (1, 0): -log(e / (e + 1)).
    Matrix two(1, 2);
    two << 1, 0;
    CHECK(cross_entropy(two, {0}) == doctest::Approx(std::log1p(std::exp(-1.0))));
    CHECK_THROWS_AS(cross_entropy(two, {2}), Error);
}

TEST_CASE("path log-likelihood under the model") {
    const Lattice lattice(u("rāma"), {{u("rā"), 0, 1, NodeKind::Candidate}, {u("ama"), 1, 3, NodeKind::Candidate},
                                      {u("rāma"), 0, 3, NodeKind::Candidate}},
                          LatticeSource::External);
    const LabelVocab labels({U"r", u("ā"), U"m", U"a", u("ā_a")});
    const Chunk& chunk = lattice.chunks()[0];
    // Sorted by span: rā(0,1), rāma(0,3), ama(1,3).
    const Path whole{{lattice.candidates()[1]}, chunk};

    const Matrix uniform = log_softmax_rows(Matrix::Zero(4, 5));
    CHECK(model_loglik(uniform, lattice, labels, whole) == doctest::Approx(-4.0 * std::log(5.0)));

    // Hand-set logits: each row favours one label.
    Matrix logits = Matrix::Zero(4, 5);
    logits(0, 0) = 2;
    logits(1, 4) = 1;
    logits(2, 2) = 3;
    logits(3, 3) = 0.5;
    const Matrix lp = log_softmax_rows(logits);
    const auto lse = [](double hot) { return std::log(std::exp(hot) + 4.0); };
    const double whole_expect = (2 - lse(2)) + (0 - lse(1)) + (3 - lse(3)) + (0.5 - lse(0.5));
    CHECK(model_loglik(lp, lattice, labels, whole) == doctest::Approx(whole_expect));
    // "rā ama" labels: r, ā_a, m, a.
    const Path split{{lattice.candidates()[0], lattice.candidates()[2]}, chunk};
    const double split_expect = (2 - lse(2)) + (1 - lse(1)) + (3 - lse(3)) + (0.5 - lse(0.5));
    CHECK(model_loglik(lp, lattice, labels, split) == doctest::Approx(split_expect));
}

TEST_CASE("label lookup fails loudly") {
    const LabelVocab labels({U"a"});
    CHECK_THROWS_AS(label_indices(labels, {U"b"}), Error);
}
