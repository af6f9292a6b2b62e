#include "sandhiseg/checkpoint.hpp"

#include <fstream>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

constexpr const char* kFormat = "sandhiseg-model";
constexpr int kVersion = 1;

nlohmann::json texts_to_json(const std::vector<Text>& texts, std::size_t skip = 0) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = skip; i < texts.size(); ++i) arr.push_back(text_to_utf8(texts[i]));
    return arr;
}

std::vector<Text> texts_from_json(const nlohmann::json& arr) {
    std::vector<Text> out;
    for (const auto& t : arr) out.push_back(utf8_to_text(t.get<std::string>()));
    return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
    std::vector<double> data(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

void matrix_from_json(const nlohmann::json& j, Matrix& m, const std::string& name) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error(ErrorCode::ParseError, "tensor " + name + " has the wrong shape");
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
}

}  // namespace

nlohmann::json model_to_json(const Model& model) {
    const auto& p = model.params;
    const auto& c = p.config;
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = {{"d_x", c.d_x},         {"d_z", c.d_z},     {"n_heads", c.n_heads}, {"n_layers", c.n_layers},
                   {"dropout", c.dropout}, {"n_max", c.n_max}, {"seed", c.seed}};
    j["mode"] = to_string(model.mode);
    j["lattice"] = to_string(model.source);
    auto rules = nlohmann::json::array();
    for (const auto& r : model.rules)
        rules.push_back({text_to_utf8(r.u), text_to_utf8(r.v), text_to_utf8(r.f), text_to_utf8(r.x)});
    j["rules"] = rules;
    j["tokens"] = texts_to_json(p.tokens.tokens(), 1);
    j["labels"] = texts_to_json(p.labels.labels());
    auto tensors = nlohmann::json::object();
    for (const auto& t : p.tensors()) tensors[t.name] = matrix_to_json(*t.tensor);
    j["tensors"] = tensors;
    if (model.lm) j["lm"] = model.lm->to_json();
    j["loss_trace"] = model.loss_trace;
    return j;
}

Model model_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", "") != kFormat) throw Error(ErrorCode::ParseError, "not a sandhiseg model");
        if (j.value("version", 0) != kVersion)
            throw Error(ErrorCode::ParseError, "unsupported model version " + j.at("version").dump());
        const auto& jc = j.at("config");
        EncoderConfig c;
        c.d_x = jc.at("d_x").get<int>();
        c.d_z = jc.at("d_z").get<int>();
        c.n_heads = jc.at("n_heads").get<int>();
        c.n_layers = jc.at("n_layers").get<int>();
        c.dropout = jc.at("dropout").get<double>();
        c.n_max = jc.at("n_max").get<int>();
        c.seed = jc.at("seed").get<std::uint64_t>();
        c.validate();

        Model model;
        model.params = EncoderParams::initialize(c, TokenVocab(texts_from_json(j.at("tokens"))),
                                                 LabelVocab(texts_from_json(j.at("labels"))));
        for (auto& t : model.params.tensors()) matrix_from_json(j.at("tensors").at(t.name), *t.tensor, t.name);
        model.mode = attention_mode_from_string(j.at("mode").get<std::string>());
        model.source = lattice_source_from_string(j.at("lattice").get<std::string>());
        for (const auto& r : j.at("rules")) {
            model.rules.push_back(SandhiRule{utf8_to_text(r.at(0).get<std::string>()),
                                             utf8_to_text(r.at(1).get<std::string>()),
                                             utf8_to_text(r.at(2).get<std::string>()),
                                             utf8_to_text(r.at(3).get<std::string>())});
        }
        if (j.contains("lm")) model.lm = CharLM::from_json(j.at("lm"));
        if (j.contains("loss_trace")) model.loss_trace = j.at("loss_trace").get<std::vector<double>>();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed model: ") + e.what());
    }
}

void save_model(const Model& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write model " + path);
    out << model_to_json(model).dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed model: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace sandhiseg
