#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sandhiseg/annotation.hpp"
#include "sandhiseg/checkpoint.hpp"
#include "sandhiseg/dataset.hpp"
#include "sandhiseg/error.hpp"
#include "sandhiseg/eval.hpp"
#include "sandhiseg/pipeline.hpp"
#include "sandhiseg/service.hpp"
#include "sandhiseg/toy_corpus.hpp"

// After Eigen: resolv.h defines a _res macro that collides with Eigen internals.
#include "httplib.h"

using namespace sandhiseg;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct LatticeOptions {
    std::string candidates;
    std::string lattice;
    std::string rules;
    int ngram_max = 0;
};

void add_lattice_options(CLI::App* cmd, LatticeOptions& opt) {
    cmd->add_option("--candidates", opt.candidates, "Candidate space (JSON lines) keyed by input")
        ->check(CLI::ExistingFile);
    cmd->add_option("--lattice", opt.lattice, "Lattice source")
        ->check(CLI::IsMember({"external", "ngram", "rules", "none"}));
    cmd->add_option("--rules", opt.rules, "Sandhi rule table (TSV)")->check(CLI::ExistingFile);
    cmd->add_option("--ngram-max", opt.ngram_max, "Longest n-gram candidate")->check(CLI::Range(2, 64));
}

std::vector<SandhiRule> rules_or_default(const std::string& path) {
    return path.empty() ? toy_rules() : load_sandhi_rules(path);
}

// An explicit --candidates implies the external source unless --lattice says otherwise.
LatticeBuilder make_builder(const LatticeOptions& opt, LatticeSource fallback, int n_max,
                            std::vector<SandhiRule> rules) {
    LatticeSource source = fallback;
    if (!opt.lattice.empty()) source = lattice_source_from_string(opt.lattice);
    else if (!opt.candidates.empty()) source = LatticeSource::External;
    if (opt.ngram_max > 0) n_max = opt.ngram_max;
    if (!opt.rules.empty()) rules = load_sandhi_rules(opt.rules);
    if (source == LatticeSource::SandhiRules && rules.empty()) rules = toy_rules();
    CandidateIndex index;
    if (!opt.candidates.empty()) index = load_candidate_index(opt.candidates);
    return LatticeBuilder(source, n_max, std::move(rules), std::move(index));
}

LoadedDataset load_checked(const std::string& path, bool require_gold) {
    auto data = load_dataset(path, require_gold);
    for (const auto& issue : data.issues)
        std::cerr << path << ":" << issue.line << ": skipped: " << issue.message << "\n";
    return data;
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw Error(ErrorCode::IoError, "cannot write " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice-based Sanskrit word segmentation"};
    app.require_subcommand(1);

    // gen-toy
    ToyCorpusOptions toy;
    std::string toy_out, toy_candidates;
    auto* gen = app.add_subcommand("gen-toy", "Generate a synthetic sandhi corpus");
    gen->add_option("--n", toy.n, "Number of sentences")->check(CLI::PositiveNumber);
    gen->add_option("--seed", toy.seed, "Random seed");
    gen->add_option("--jitter", toy.jitter, "Perturb candidate indices by up to this much");
    gen->add_option("--out", toy_out, "Dataset TSV (default stdout)");
    gen->add_option("--candidates-out", toy_candidates, "Write the candidate space as JSON lines");

    // train
    LatticeOptions train_lat;
    std::string train_dataset, train_config, train_model_path, train_mode;
    std::optional<std::uint64_t> train_seed;
    std::optional<int> train_epochs;
    auto* trn = app.add_subcommand("train", "Train a segmentation model");
    trn->add_option("--dataset", train_dataset, "Training TSV (input<TAB>gold)")->required()->check(CLI::ExistingFile);
    trn->add_option("--config", train_config, "key = value training config")->check(CLI::ExistingFile);
    trn->add_option("--model", train_model_path, "Output model path")->required();
    trn->add_option("--mode", train_mode, "Attention mode")->check(CLI::IsMember({"sma", "vanilla"}));
    trn->add_option("--seed", train_seed, "Random seed");
    trn->add_option("--epochs", train_epochs, "Override the number of epochs")->check(CLI::NonNegativeNumber);
    add_lattice_options(trn, train_lat);

    // predict
    LatticeOptions pred_lat;
    std::string pred_model, pred_dataset, pred_text, pred_lm, pred_out, pred_mode;
    bool pred_no_prcp = false, pred_diagnostics = false;
    auto* prd = app.add_subcommand("predict", "Segment sentences with a trained model");
    prd->add_option("--model", pred_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    auto* pred_src = prd->add_option("--dataset", pred_dataset, "Inputs, one per line (a gold column is ignored)")
                         ->check(CLI::ExistingFile);
    prd->add_option("--text", pred_text, "Segment a single sentence")->excludes(pred_src);
    prd->add_option("--lm", pred_lm, "Character LM overriding the one stored in the model")->check(CLI::ExistingFile);
    prd->add_option("--out", pred_out, "Output file (default stdout)");
    prd->add_option("--mode", pred_mode, "Attention mode override")->check(CLI::IsMember({"sma", "vanilla"}));
    prd->add_flag("--no-prcp", pred_no_prcp, "Disable path ranking for corrupted predictions");
    prd->add_flag("--diagnostics", pred_diagnostics, "Print rectification diagnostics as JSON lines to stderr");
    add_lattice_options(prd, pred_lat);

    // eval
    std::string eval_dataset, eval_pred, eval_rules, eval_json, eval_csv;
    std::size_t eval_bucket = 10;
    auto* evl = app.add_subcommand("eval", "Score predictions against gold");
    evl->add_option("--dataset", eval_dataset, "Gold TSV (input<TAB>gold)")->required()->check(CLI::ExistingFile);
    evl->add_option("--pred", eval_pred, "Predictions, one segmentation per line")->required()->check(CLI::ExistingFile);
    evl->add_option("--rules", eval_rules, "Sandhi rules for per-rule scores")->check(CLI::ExistingFile);
    evl->add_option("--json", eval_json, "Write the full report as JSON");
    evl->add_option("--csv", eval_csv, "Write per-sentence scores as CSV");
    evl->add_option("--bucket", eval_bucket, "Length bucket width")->check(CLI::PositiveNumber);

    // rectify
    LatticeOptions rect_lat;
    std::string rect_model, rect_dataset, rect_lm, rect_out;
    auto* rct = app.add_subcommand("rectify", "Apply path ranking to existing predictions");
    rct->add_option("--model", rect_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    rct->add_option("--dataset", rect_dataset, "TSV of input<TAB>prediction")->required()->check(CLI::ExistingFile);
    rct->add_option("--lm", rect_lm, "Character LM overriding the one stored in the model")->check(CLI::ExistingFile);
    rct->add_option("--out", rect_out, "Output file (default stdout)");
    add_lattice_options(rct, rect_lat);

    // serve
    LatticeOptions serve_lat;
    std::string serve_model, serve_lm, serve_store = "annotations.jsonl", serve_host = "127.0.0.1";
    int serve_port = 8080;
    bool serve_no_prcp = false;
    auto* srv = app.add_subcommand("serve", "Run the HTTP prediction and annotation service");
    srv->add_option("--model", serve_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    srv->add_option("--lm", serve_lm, "Character LM overriding the one stored in the model")->check(CLI::ExistingFile);
    srv->add_option("--store", serve_store, "Annotation store (JSON lines)");
    srv->add_option("--host", serve_host, "Bind address");
    srv->add_option("--port", serve_port, "Port")->check(CLI::Range(1, 65535));
    srv->add_flag("--no-prcp", serve_no_prcp, "Disable path ranking for corrupted predictions");
    add_lattice_options(srv, serve_lat);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto open_segmenter = [](const std::string& model_path, const std::string& lm_path, const LatticeOptions& lat,
                             bool use_prcp, const std::string& mode) {
        Model model = load_model(model_path);
        if (!mode.empty()) model.mode = attention_mode_from_string(mode);
        std::optional<CharLM> lm = model.lm;
        if (!lm_path.empty()) lm = CharLM::load(lm_path);
        LatticeBuilder builder = make_builder(lat, model.source, model.params.config.n_max, model.rules);
        return Segmenter(std::move(model), std::move(builder), std::move(lm), use_prcp);
    };

    try {
        if (gen->parsed()) {
            const auto corpus = generate_toy_corpus(toy);
            Output out(toy_out);
            for (const auto& s : corpus) out.stream() << s.input << '\t' << s.gold << '\n';
            if (!toy_candidates.empty()) {
                Output cands(toy_candidates);
                for (const auto& s : corpus) write_candidate_space(cands.stream(), CandidateSpace{s.input, s.candidates});
            }
            return 0;
        }

        if (trn->parsed()) {
            TrainConfig config = train_config.empty() ? TrainConfig{} : TrainConfig::load(train_config);
            if (train_seed) config.seed = config.encoder.seed = *train_seed;
            if (train_epochs) config.epochs = *train_epochs;
            if (!train_mode.empty()) config.mode = attention_mode_from_string(train_mode);
            if (train_lat.ngram_max > 0) config.encoder.n_max = train_lat.ngram_max;
            config.validate();
            const auto data = load_checked(train_dataset, true);
            const auto builder = make_builder(train_lat, config.lattice, config.encoder.n_max, {});
            TrainResult stats;
            const Model model = train_model(data.records, builder, config, &stats);
            save_model(model, train_model_path);
            std::cerr << "trained on " << stats.used << " sentences (" << stats.excluded << " excluded); final loss "
                      << (stats.loss_trace.empty() ? 0.0 : stats.loss_trace.back()) << "\n";
            return 0;
        }

        if (prd->parsed()) {
            if (pred_dataset.empty() && pred_text.empty()) {
                std::cerr << "predict: one of --dataset or --text is required\n";
                return kExitUsage;
            }
            const Segmenter segmenter = open_segmenter(pred_model, pred_lm, pred_lat, !pred_no_prcp, pred_mode);
            std::vector<std::string> inputs;
            if (!pred_text.empty()) inputs.push_back(pred_text);
            else
                for (const auto& r : load_checked(pred_dataset, false).records) inputs.push_back(r.input);
            Output out(pred_out);
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                const auto seg = segmenter.segment(inputs[i]);
                out.stream() << seg.text() << '\n';
                if (pred_diagnostics && seg.rectify) {
                    auto d = seg.rectify->diagnostics();
                    d["sentence"] = i;
                    std::cerr << d.dump() << '\n';
                }
            }
            return 0;
        }

        if (evl->parsed()) {
            const auto data = load_checked(eval_dataset, true);
            const auto pred = load_lines(eval_pred);
            if (pred.size() != data.records.size()) {
                std::cerr << "eval: " << data.records.size() << " gold sentences but " << pred.size()
                          << " predictions\n";
                return kExitFailure;
            }
            std::vector<std::string> surfaces, gold, predicted;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                surfaces.push_back(data.records[i].input);
                gold.push_back(*data.records[i].gold);
                // Accept either bare segmentations or input<TAB>segmentation.
                const auto tab = pred[i].rfind('\t');
                predicted.push_back(tab == std::string::npos ? pred[i] : pred[i].substr(tab + 1));
            }
            const auto rules = eval_rules.empty() ? std::vector<SandhiRule>{} : load_sandhi_rules(eval_rules);
            const auto report = evaluate(surfaces, gold, predicted, rules, eval_bucket);
            std::cout << "P=" << pct(100 * report.prf.precision) << " R=" << pct(100 * report.prf.recall)
                      << " F=" << pct(100 * report.prf.f1) << " PM=" << pct(report.perfect_match)
                      << " n=" << report.n_sentences << "\n";
            for (const auto& [name, m] : report.per_rule)
                std::cout << "rule " << name << " P=" << (m.precision_undefined ? "n/a" : pct(100 * m.prf.precision))
                          << " R=" << pct(100 * m.prf.recall) << " F=" << pct(100 * m.prf.f1)
                          << " gold=" << m.gold_count << "\n";
            if (!eval_json.empty()) Output(eval_json).stream() << report.to_json().dump(2) << '\n';
            if (!eval_csv.empty()) Output(eval_csv).stream() << report.sentences_csv();
            return 0;
        }

        if (rct->parsed()) {
            const Segmenter segmenter = open_segmenter(rect_model, rect_lm, rect_lat, true, "");
            if (!segmenter.prcp_enabled()) {
                std::cerr << "rectify: the model has no language model; pass --lm\n";
                return kExitUsage;
            }
            const auto data = load_checked(rect_dataset, true);
            const auto& model = segmenter.model();
            Output out(rect_out);
            for (const auto& r : data.records) {
                const Lattice lattice = segmenter.builder().build(r.input);
                const auto prediction = split_by_chunks(lattice.input(), *r.gold);
                const auto result = prcp_rectify(prediction, lattice, model.params, model.mode, *segmenter.lm());
                out.stream() << flatten(result.segmentation) << '\n';
                std::cerr << result.diagnostics().dump() << '\n';
            }
            return 0;
        }

        if (srv->parsed()) {
            const Segmenter segmenter = open_segmenter(serve_model, serve_lm, serve_lat, !serve_no_prcp, "");
            AnnotationStore store(serve_store);
            SegmentService service(segmenter, store);
            httplib::Server server;
            service.mount(server);
            std::cerr << "listening on " << serve_host << ":" << serve_port << "\n";
            if (!server.listen(serve_host, serve_port)) {
                std::cerr << "serve: cannot bind " << serve_host << ":" << serve_port << "\n";
                return kExitFailure;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return e.code() == ErrorCode::InvalidConfig ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
