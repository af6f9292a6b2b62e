#include "sandhiseg/dataset.hpp"

#include <fstream>

#include "json.hpp"

#include "sandhiseg/error.hpp"
#include "sandhiseg/labels.hpp"

namespace sandhiseg {

namespace {

std::string collapse_spaces(const std::string& utf8) { return join(split_words(utf8), " "); }

}  // namespace

LoadedDataset parse_dataset(std::istream& in, bool require_gold) {
    LoadedDataset out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            const auto tab = line.find('\t');
            DatasetRecord r;
            r.id = std::to_string(lineno);
            if (tab == std::string::npos) {
                if (require_gold) {
                    out.issues.push_back({lineno, "missing tab between input and gold"});
                    continue;
                }
                r.input = normalize_utf8(line);
            } else {
                if (line.find('\t', tab + 1) != std::string::npos) {
                    out.issues.push_back({lineno, "more than two columns"});
                    continue;
                }
                r.input = normalize_utf8(line.substr(0, tab));
                r.gold = collapse_spaces(normalize_utf8(line.substr(tab + 1)));
            }
            const Text input = utf8_to_text(r.input);
            split_chunks(input);
            if (r.gold) {
                if (r.gold->empty()) {
                    out.issues.push_back({lineno, "empty gold segmentation"});
                    continue;
                }
                split_by_chunks(input, *r.gold);
            }
            out.records.push_back(std::move(r));
        } catch (const Error& e) {
            out.issues.push_back({lineno, e.what()});
        }
    }
    return out;
}

LoadedDataset load_dataset(const std::string& path, bool require_gold) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read dataset " + path);
    return parse_dataset(in, require_gold);
}

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
    for (const auto& r : records) {
        out << r.input;
        if (r.gold) out << '\t' << *r.gold;
        out << '\n';
    }
}

std::vector<CandidateSpace> parse_candidate_file(std::istream& in) {
    std::vector<CandidateSpace> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            CandidateSpace space;
            space.input = normalize_utf8(j.at("input").get<std::string>());
            for (const auto& c : j.at("candidates")) {
                space.candidates.push_back(CandidateRecord{c.at("word").get<std::string>(),
                                                           c.at("head").get<long long>(),
                                                           c.at("tail").get<long long>()});
            }
            out.push_back(std::move(space));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, "candidate file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

CandidateIndex load_candidate_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read candidate file " + path);
    CandidateIndex index;
    for (auto& space : parse_candidate_file(in)) {
        auto& slot = index[space.input];
        slot.insert(slot.end(), space.candidates.begin(), space.candidates.end());
    }
    return index;
}

void write_candidate_space(std::ostream& out, const CandidateSpace& space) {
    nlohmann::json j;
    j["input"] = space.input;
    auto& arr = j["candidates"] = nlohmann::json::array();
    for (const auto& c : space.candidates) arr.push_back({{"word", c.word}, {"head", c.head}, {"tail", c.tail}});
    out << j.dump() << '\n';
}

std::vector<std::string> load_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        out.push_back(normalize_utf8(line));
    }
    return out;
}

}  // namespace sandhiseg
