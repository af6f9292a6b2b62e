#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "sandhiseg/error.hpp"
#include "sandhiseg/eval.hpp"
#include "sandhiseg/prcp.hpp"

using namespace sandhiseg;
using testsupport::u;

namespace {

Lattice case_study_lattice() {
    return ingest_candidate_space(u(testsupport::case_study_input()), testsupport::case_study_candidates());
}

/// Label vocabulary able to express every path of every chunk.
LabelVocab vocab_for(const Lattice& lattice, std::size_t drop_every = 0) {
    std::set<Text> labels;
    for (const auto& node : lattice.char_nodes()) labels.insert(node.text);
    for (const Chunk& chunk : lattice.chunks()) {
        PathEnumeration paths;
        try {
            paths = enumerate_paths(lattice, chunk);
        } catch (const Error&) {
            continue;
        }
        for (const auto& p : paths.paths) {
            try {
                for (auto& l : align_gold_labels(chunk.text, p.joined())) labels.insert(l);
            } catch (const Error&) {
            }
        }
    }
    std::vector<Text> out;
    std::size_t k = 0;
    for (const auto& l : labels) {
        ++k;
        if (drop_every && l.size() > 1 && k % drop_every == 0) continue;
        out.push_back(l);
    }
    return LabelVocab(out);
}

Matrix uniform_log_probs(std::size_t rows, std::size_t k) {
    return Matrix::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k),
                            -std::log(static_cast<double>(k)));
}

Matrix random_log_probs(std::mt19937_64& rng, std::size_t rows, std::size_t k) {
    std::normal_distribution<double> n(0.0, 2.0);
    Matrix logits(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j) logits(i, j) = n(rng);
    return log_softmax_rows(logits);
}

}  // namespace

TEST_CASE("path score closed forms") {
    CHECK(combine_path_score(0.5, 2.0, 1) == 0.25);
    CHECK(combine_path_score(0.5, 2.0, 2) == 0.125);
    CHECK(combine_path_score(0.5, 2.0, 0) == 0.0);
    // Strictly decreasing in |W| and rho, increasing in geo.
    CHECK(combine_path_score(0.5, 2.0, 3) < combine_path_score(0.5, 2.0, 2));
    CHECK(combine_path_score(0.5, 3.0, 2) < combine_path_score(0.5, 2.0, 2));
    CHECK(combine_path_score(0.6, 2.0, 2) > combine_path_score(0.5, 2.0, 2));

    // Uniform model over k labels and uniform LM over V symbols, one-word path.
    const Lattice lattice = ingest_candidate_space(u("rāma"), {{"rāma", 0, 3}});
    const LabelVocab labels({U"a", U"m", U"r", U"ā", U"a_"});
    const Matrix lp = uniform_log_probs(4, labels.size());
    const auto lm = CharLM::uniform({U'r', U'ā', U'm', U'a'});
    const auto paths = enumerate_paths(lattice, lattice.chunks()[0]);
    REQUIRE(paths.paths.size() == 1);
    const PathScore s = score_path(paths.paths[0], lattice, ModelView{lp, labels}, lm);
    CHECK(s.n_words == 1);
    CHECK(s.geo == doctest::Approx(1.0 / 5).epsilon(1e-12));
    CHECK(s.rho == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(s.S == doctest::Approx((1.0 / 5) / (6.0 * 1)).epsilon(1e-12));
}

TEST_CASE("hand-set model and language model") {
    // Surface "ab" with candidates a, b, ab. Rows: a, b.
    const Lattice lattice = ingest_candidate_space(u("ab"), {{"a", 0, 0}, {"b", 1, 1}, {"ab", 0, 1}});
    const LabelVocab labels({U"a", U"a_", U"b"});
    Matrix lp(2, 3);
    lp << std::log(0.5), std::log(0.4), std::log(0.1),  //
        std::log(0.1), std::log(0.1), std::log(0.8);
    const auto lm = CharLM::uniform({U'a', U'b', U' '});  // V = 5
    const auto paths = enumerate_paths(lattice, lattice.chunks()[0]);
    // [a, b], [ab], and [a, ab] sharing the a.
    REQUIRE(paths.paths.size() == 3);
    for (const auto& p : paths.paths) {
        const PathScore s = score_path(p, lattice, ModelView{lp, labels}, lm);
        if (p.word_strings() == std::vector<std::string>{"a", "ab"}) {
            CHECK(std::isinf(s.LL));
            CHECK(s.S == 0.0);
        } else if (p.words.size() == 1) {
            CHECK(s.LL == doctest::Approx(std::log(0.5) + std::log(0.8)));
            CHECK(s.S == doctest::Approx(std::sqrt(0.4) / 5.0));
        } else {
            CHECK(s.LL == doctest::Approx(std::log(0.4) + std::log(0.8)));
            CHECK(s.S == doctest::Approx(std::sqrt(0.32) / 10.0));
        }
    }
}

TEST_CASE("detect_corrupted") {
    const Lattice lattice = case_study_lattice();
    CHECK(detect_corrupted(split_by_chunks(lattice.input(), testsupport::case_study_gold()), lattice).empty());
    CHECK(detect_corrupted(split_by_chunks(lattice.input(), testsupport::case_study_corrupted()), lattice) ==
          std::vector<std::size_t>{2});
    CHECK_THROWS_AS(detect_corrupted(ChunkedSegmentation{{"kim"}}, lattice), Error);

    // An n-gram lattice covers every substring of length 2..n_max, so such
    // words are never flagged.
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Text input = testsupport::random_input(rng, 2, 16, 0.15);
        const Lattice ng = make_ngram_lattice(input, 4);
        ChunkedSegmentation pred;
        std::vector<std::size_t> single_char;
        for (const Chunk& c : ng.chunks()) {
            std::vector<std::string> words;
            std::size_t at = 0;
            while (at < c.text.size()) {
                const std::size_t left = c.text.size() - at;
                const std::size_t take = left == 5 ? 3 : std::min<std::size_t>(4, left);
                words.push_back(text_to_utf8(c.text.substr(at, take)));
                at += take;
            }
            if (c.text.size() == 1) single_char.push_back(pred.size());
            pred.push_back(words);
        }
        CHECK(detect_corrupted(pred, ng) == single_char);
    }
}

TEST_CASE("case study: the corrupted chunk is rectified and nothing else changes") {
    const Lattice lattice = case_study_lattice();
    const LabelVocab labels = vocab_for(lattice);
    const Matrix lp = uniform_log_probs(lattice.char_nodes().size(), labels.size());
    const auto lm = CharLM::train({testsupport::case_study_gold()}, 3, 0.1);
    const auto pred = split_by_chunks(lattice.input(), testsupport::case_study_corrupted());
    const RectifyResult r = prcp_rectify(pred, lattice, ModelView{lp, labels}, lm);
    CHECK(r.corrupted == std::vector<std::size_t>{2});
    REQUIRE(r.chunks.size() == 1);
    CHECK(r.chunks[0].action == ChunkAction::Replaced);
    CHECK(r.applied());
    CHECK(flatten(r.segmentation) == testsupport::case_study_gold());
    for (std::size_t c = 0; c < pred.size(); ++c)
        if (c != 2) CHECK(r.segmentation[c] == pred[c]);
    const auto eval = evaluate({testsupport::case_study_input()}, {testsupport::case_study_gold()},
                               {flatten(r.segmentation)});
    CHECK(eval.prf.f1 * 100 == 100.0);
    CHECK(r.diagnostics()["chunks"][0]["action"] == "replaced");
}

TEST_CASE("nothing corrupted leaves the prediction untouched") {
    const Lattice lattice = case_study_lattice();
    const LabelVocab labels = vocab_for(lattice);
    const Matrix lp = uniform_log_probs(lattice.char_nodes().size(), labels.size());
    const auto lm = CharLM::train({"kim"}, 1, 1.0);
    // A valid but non-gold path is still left alone.
    const auto pred = split_by_chunks(lattice.input(), "kim etat īśe bahu śobha māne vā ambike yakṣa vapuḥ ca kā asti");
    const RectifyResult r = prcp_rectify(pred, lattice, ModelView{lp, labels}, lm);
    CHECK(r.segmentation == pred);
    CHECK_FALSE(r.applied());
}

TEST_CASE("chunks without a path keep their prediction") {
    const Lattice lattice = ingest_candidate_space(u("abc"), {{"ab", 0, 1}});
    const LabelVocab labels({U"a", U"b", U"c"});
    const Matrix lp = uniform_log_probs(3, 3);
    const auto lm = CharLM::uniform({U'a'});
    const RectifyResult r = prcp_rectify({{"xyz"}}, lattice, ModelView{lp, labels}, lm);
    REQUIRE(r.chunks.size() == 1);
    CHECK(r.chunks[0].action == ChunkAction::KeptNoPath);
    CHECK(r.segmentation == ChunkedSegmentation{{"xyz"}});
}

TEST_CASE("oracle equivalence against exhaustive argmax, ties included") {
    std::mt19937_64 rng(2024);
    const Text alphabet = U"aākm";
    std::size_t ties_exercised = 0, unscorable = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const Text input = testsupport::random_text(rng, 3, 9, 0.0, alphabet);
        std::uniform_int_distribution<std::size_t> pos(0, input.size() - 1);
        std::vector<CandidateRecord> records;
        const std::size_t n_cand = 3 + rng() % 10;
        for (std::size_t i = 0; i < n_cand; ++i) {
            std::size_t h = pos(rng), t = pos(rng);
            if (h > t) std::swap(h, t);
            records.push_back({text_to_utf8(input.substr(h, t - h + 1)), static_cast<long long>(h),
                               static_cast<long long>(t)});
        }
        // Guarantee at least one tiling.
        for (std::size_t i = 0; i < input.size(); i += 3) {
            const std::size_t t = std::min(input.size() - 1, i + 2);
            records.push_back({text_to_utf8(input.substr(i, t - i + 1)), static_cast<long long>(i),
                               static_cast<long long>(t)});
        }
        const Lattice lattice = ingest_candidate_space(input, records);
        const Chunk& chunk = lattice.chunks()[0];
        if (lattice.candidates_in(chunk).size() > 12) continue;

        const bool uniform = trial % 2 == 0;
        const LabelVocab labels = vocab_for(lattice, uniform ? 0 : 4);
        const Matrix lp = uniform ? uniform_log_probs(input.size(), labels.size())
                                  : random_log_probs(rng, input.size(), labels.size());
        const auto lm = uniform ? CharLM::uniform({U'a', U'ā', U'k', U'm', U' '})
                                : CharLM::train({"aka ma", "kāma", "māka ka"}, 2, 0.5);
        const ModelView view{lp, labels};

        const auto best = oracles::exhaustive_argmax(lattice, chunk, view, lm);
        REQUIRE(best.tilings > 0);
        if (best.tied > 1) ++ties_exercised;

        const RectifyResult r = prcp_rectify({{"zzz"}}, lattice, view, lm);
        REQUIRE(r.chunks.size() == 1);
        if (!best.words) {
            ++unscorable;
            CHECK(r.chunks[0].action == ChunkAction::KeptUnscorable);
            continue;
        }
        CHECK(r.chunks[0].action == ChunkAction::Replaced);
        CHECK(r.chunks[0].n_paths == best.tilings);
        CHECK(r.segmentation[0] == *best.words);
    }
    CHECK(ties_exercised > 20);
    MESSAGE("ties at the top: " << ties_exercised << ", unscorable: " << unscorable);
}
