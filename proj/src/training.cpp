#include "sandhiseg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (in.fail() || !in.eof()) throw Error(ErrorCode::InvalidConfig, "bad value for " + key + ": '" + value + "'");
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be non-negative");
    if (!(learning_rate > 0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be positive");
    if (batch_size <= 0) throw Error(ErrorCode::InvalidConfig, "batch size must be positive");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0))
        throw Error(ErrorCode::InvalidConfig, "invalid optimizer hyperparameters");
    if (lm_order < 1 || !(lm_lambda > 0)) throw Error(ErrorCode::InvalidConfig, "invalid language model settings");
    EncoderConfig e = encoder;
    e.dropout = dropout;
    e.validate();
}

TrainConfig TrainConfig::parse(std::istream& in, TrainConfig cfg) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

        if (key == "epochs") cfg.epochs = parse_number<int>(key, value);
        else if (key == "learning_rate" || key == "lr") cfg.learning_rate = parse_number<double>(key, value);
        else if (key == "dropout") cfg.dropout = parse_number<double>(key, value);
        else if (key == "batch_size") cfg.batch_size = parse_number<int>(key, value);
        else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
        else if (key == "beta1") cfg.beta1 = parse_number<double>(key, value);
        else if (key == "beta2") cfg.beta2 = parse_number<double>(key, value);
        else if (key == "epsilon") cfg.epsilon = parse_number<double>(key, value);
        else if (key == "d_x") cfg.encoder.d_x = parse_number<int>(key, value);
        else if (key == "d_z") cfg.encoder.d_z = parse_number<int>(key, value);
        else if (key == "n_heads") cfg.encoder.n_heads = parse_number<int>(key, value);
        else if (key == "n_layers") cfg.encoder.n_layers = parse_number<int>(key, value);
        else if (key == "n_max" || key == "ngram_max") cfg.encoder.n_max = parse_number<int>(key, value);
        else if (key == "mode") cfg.mode = attention_mode_from_string(value);
        else if (key == "lattice") cfg.lattice = lattice_source_from_string(value);
        else if (key == "lm_order") cfg.lm_order = parse_number<int>(key, value);
        else if (key == "lm_lambda") cfg.lm_lambda = parse_number<double>(key, value);
        else throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
    cfg.encoder.seed = cfg.seed;
    cfg.encoder.dropout = cfg.dropout;
    cfg.validate();
    return cfg;
}

TrainConfig TrainConfig::load(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
    return parse(in, std::move(base));
}

TrainConfig TrainConfig::parse(std::istream& in) { return parse(in, TrainConfig{}); }
TrainConfig TrainConfig::load(const std::string& path) { return load(path, TrainConfig{}); }

PreparedData prepare_training_data(const std::vector<LabeledSentence>& data) {
    PreparedData out;
    std::vector<std::vector<Text>> label_seqs;
    std::vector<Text> surfaces;
    std::vector<const Lattice*> used;
    for (const auto& s : data) {
        try {
            label_seqs.push_back(sentence_labels(s.lattice, s.gold));
            surfaces.push_back(s.lattice.input());
            used.push_back(&s.lattice);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::AlignmentOverflow && e.code() != ErrorCode::AlignmentMismatch) throw;
            ++out.excluded;
            out.exclusion_reasons.push_back(e.what());
        }
    }
    out.labels = LabelVocab::build(label_seqs, surfaces);
    std::vector<Lattice> lattices;
    for (const auto* l : used) lattices.push_back(*l);
    out.tokens = TokenVocab::build(lattices);
    for (std::size_t i = 0; i < used.size(); ++i)
        out.examples.push_back(TrainingExample{used[i], label_indices(out.labels, label_seqs[i])});
    return out;
}

AdamOptimizer::AdamOptimizer(const EncoderParams& shape, double lr, double beta1, double beta2, double epsilon)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::step(EncoderParams& params, EncoderParams& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t k = 0; k < p.size(); ++k) {
        Matrix& gk = *g[k].tensor;
        *m[k].tensor = beta1_ * *m[k].tensor + (1.0 - beta1_) * gk;
        *v[k].tensor = beta2_ * *v[k].tensor + (1.0 - beta2_) * gk.cwiseProduct(gk);
        const Matrix mhat = *m[k].tensor / c1;
        const Matrix vhat = *v[k].tensor / c2;
        *p[k].tensor -= (lr_ * mhat.array() / (vhat.array().sqrt() + epsilon_)).matrix();
    }
}

double dataset_loss(const EncoderParams& params, const std::vector<TrainingExample>& examples, AttentionMode mode) {
    if (examples.empty()) return 0.0;
    double total = 0;
    for (const auto& ex : examples) total += cross_entropy(encoder_forward(*ex.lattice, params, mode).logits, ex.gold);
    return total / static_cast<double>(examples.size());
}

TrainResult train(const std::vector<LabeledSentence>& data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw Error(ErrorCode::EmptyCorpus, "training set is empty");
    PreparedData prepared = prepare_training_data(data);
    if (prepared.examples.empty()) throw Error(ErrorCode::EmptyCorpus, "no training sentence survived label alignment");

    EncoderConfig enc = config.encoder;
    enc.dropout = config.dropout;
    enc.seed = config.seed;

    TrainResult result;
    result.used = prepared.examples.size();
    result.excluded = prepared.excluded;
    result.params = EncoderParams::initialize(enc, std::move(prepared.tokens), std::move(prepared.labels));

    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    AdamOptimizer adam(result.params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    std::vector<std::size_t> order(prepared.examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double weight = 1.0 / static_cast<double>(end - start);
            EncoderParams grads = result.params.zeros_like();
            double batch_loss = 0;
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = prepared.examples[order[k]];
                batch_loss += weight * loss_and_gradients(*ex.lattice, ex.gold, result.params, config.mode, grads,
                                                          weight, config.dropout > 0 ? &rng : nullptr);
            }
            adam.step(result.params, grads);
            epoch_loss += batch_loss;
            ++batches;
        }
        if (!result.params.all_finite()) throw Error(ErrorCode::NumericalError, "parameters diverged during training");
        result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
    }
    return result;
}

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < floor) return 0.0;
    return std::abs(analytic - numeric) / scale;
}

double central_difference_noise(double loss_plus, double loss_minus, double h) {
    const double u = std::numeric_limits<double>::epsilon() / 2;
    return kRoundingUlps * u * std::max({std::abs(loss_plus), std::abs(loss_minus), 1.0}) / h;
}

GradCheckReport grad_check(const EncoderParams& params, const Lattice& lattice, const std::vector<std::size_t>& gold,
                           AttentionMode mode, double epsilon) {
    EncoderParams grads = params.zeros_like();
    loss_and_gradients(lattice, gold, params, mode, grads);

    EncoderParams probe = params;
    auto probe_tensors = probe.tensors();
    const auto grad_tensors = grads.tensors();
    GradCheckReport report;
    for (std::size_t k = 0; k < probe_tensors.size(); ++k) {
        Matrix& t = *probe_tensors[k].tensor;
        const Matrix& g = *grad_tensors[k].tensor;
        double worst = 0, worst_raw = 0;
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            for (Eigen::Index i = 0; i < t.rows(); ++i) {
                const double saved = t(i, j);
                auto loss_at = [&](double offset) {
                    t(i, j) = saved + offset;
                    const double loss = cross_entropy(encoder_forward(lattice, probe, mode).logits, gold);
                    t(i, j) = saved;
                    return loss;
                };
                auto pattern_at = [&](double offset) {
                    t(i, j) = saved + offset;
                    auto p = relu_pattern(lattice, probe, mode);
                    t(i, j) = saved;
                    return p;
                };
                const double plus = loss_at(epsilon), minus = loss_at(-epsilon);
                const double half_plus = loss_at(epsilon / 2), half_minus = loss_at(-epsilon / 2);
                const double central = (plus - minus) / (2 * epsilon);
                const double central_half = (half_plus - half_minus) / epsilon;
                // Richardson extrapolation cancels the h^2 truncation term.
                const double numeric = (4 * central_half - central) / 3;
                worst_raw = std::max(worst_raw, relative_error(g(i, j), central));
                const double noise = 3 * central_difference_noise(plus, minus, epsilon);
                if (pattern_at(epsilon) != pattern_at(-epsilon)) {
                    ++report.kinks;
                } else if (std::abs(g(i, j) - numeric) > noise) {
                    worst = std::max(worst, relative_error(g(i, j), numeric));
                }
                ++report.checked;
            }
        }
        report.per_tensor[probe_tensors[k].name] = worst;
        report.max_raw_relative_error = std::max(report.max_raw_relative_error, worst_raw);
        if (worst >= report.max_relative_error) {
            report.max_relative_error = worst;
            report.worst_tensor = probe_tensors[k].name;
        }
    }
    return report;
}

}  // namespace sandhiseg
