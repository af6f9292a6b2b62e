#pragma once

#include <istream>
#include <string>
#include <vector>

#include "sandhiseg/lattice.hpp"
#include "sandhiseg/text.hpp"

namespace sandhiseg {

/// A rewrite rule u|v -> f / x__ : the juncture of u and v surfaces as f
/// when preceded by x.
struct SandhiRule {
    Text u;
    Text v;
    Text f;
    Text x;

    /// Underlying form as a single label-style string: "u_v", or "u" when v is empty.
    Text underlying() const;
    std::string name() const;

    friend bool operator==(const SandhiRule&, const SandhiRule&) = default;
};

/// Tab-separated u, v, f, x; '#' starts a comment; missing or empty x means
/// no context. Throws ParseError with the offending line number.
std::vector<SandhiRule> parse_sandhi_rules(std::istream& in);
std::vector<SandhiRule> load_sandhi_rules(const std::string& path);

/// Auxiliary candidate nodes proposing the underlying form of every rule
/// whose surface f (with its left context) occurs in the input.
std::vector<SpanNode> apply_sandhi_rule_nodes(const Text& input, const std::vector<SandhiRule>& rules);

Lattice make_rule_lattice(const Text& input, const std::vector<SandhiRule>& rules);

/// Does the rule's surface f start at pos with its context x before it, all
/// inside the chunk?
bool rule_matches_at(const SandhiRule& rule, const Text& input, const Chunk& chunk, std::size_t pos);

}  // namespace sandhiseg
