#include "sandhiseg/sandhi.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

Text SandhiRule::underlying() const {
    if (v.empty()) return u;
    Text out = u;
    out.push_back(U'_');
    out += v;
    return out;
}

std::string SandhiRule::name() const {
    std::string out = text_to_utf8(u) + "|" + text_to_utf8(v) + "->" + text_to_utf8(f);
    if (!x.empty()) out += "/" + text_to_utf8(x) + "__";
    return out;
}

std::vector<SandhiRule> parse_sandhi_rules(std::istream& in) {
    std::vector<SandhiRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() < 3 || cols.size() > 4)
            throw Error(ErrorCode::ParseError,
                        "sandhi rule line " + std::to_string(lineno) + ": expected 3 or 4 tab-separated columns");
        SandhiRule rule{normalize(cols[0]), normalize(cols[1]), normalize(cols[2]),
                        cols.size() == 4 ? normalize(cols[3]) : Text{}};
        if (rule.f.empty())
            throw Error(ErrorCode::ParseError, "sandhi rule line " + std::to_string(lineno) + ": empty surface f");
        if (rule.u.empty())
            throw Error(ErrorCode::ParseError, "sandhi rule line " + std::to_string(lineno) + ": empty left u");
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<SandhiRule> load_sandhi_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open sandhi rule file " + path);
    return parse_sandhi_rules(in);
}

bool rule_matches_at(const SandhiRule& rule, const Text& input, const Chunk& chunk, std::size_t pos) {
    if (pos < chunk.start || pos + rule.f.size() - 1 > chunk.end) return false;
    if (input.compare(pos, rule.f.size(), rule.f) != 0) return false;
    if (rule.x.empty()) return true;
    if (pos < chunk.start + rule.x.size()) return false;
    return input.compare(pos - rule.x.size(), rule.x.size(), rule.x) == 0;
}

std::vector<SpanNode> apply_sandhi_rule_nodes(const Text& input, const std::vector<SandhiRule>& rules) {
    std::vector<SpanNode> out;
    for (const Chunk& chunk : split_chunks(input)) {
        for (std::size_t pos = chunk.start; pos <= chunk.end; ++pos) {
            for (const auto& rule : rules) {
                if (!rule_matches_at(rule, input, chunk, pos)) continue;
                out.push_back(SpanNode{rule.underlying(), pos, pos + rule.f.size() - 1, NodeKind::Candidate});
            }
        }
    }
    std::sort(out.begin(), out.end(), span_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Lattice make_rule_lattice(const Text& input, const std::vector<SandhiRule>& rules) {
    return Lattice(input, apply_sandhi_rule_nodes(input, rules), LatticeSource::SandhiRules);
}

}  // namespace sandhiseg
