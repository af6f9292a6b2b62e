#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sandhiseg/lattice.hpp"

namespace sandhiseg {

struct DatasetRecord {
    std::string id;
    std::string input;               // NFC
    std::optional<std::string> gold;  // NFC, words separated by single spaces
};

struct DatasetIssue {
    std::size_t line = 0;
    std::string message;
};

struct LoadedDataset {
    std::vector<DatasetRecord> records;
    std::vector<DatasetIssue> issues;
};

/// UTF-8 TSV, `input<TAB>gold` per line, CR/LF insensitive. Malformed lines
/// are reported and skipped. When require_gold is false, single-column lines
/// are accepted as prediction-only records.
LoadedDataset parse_dataset(std::istream& in, bool require_gold = true);
LoadedDataset load_dataset(const std::string& path, bool require_gold = true);
void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);

/// One JSON object per line: {"input": ..., "candidates": [{"word", "head", "tail"}]}.
struct CandidateSpace {
    std::string input;  // NFC
    std::vector<CandidateRecord> candidates;
};

using CandidateIndex = std::unordered_map<std::string, std::vector<CandidateRecord>>;

std::vector<CandidateSpace> parse_candidate_file(std::istream& in);
CandidateIndex load_candidate_index(const std::string& path);
void write_candidate_space(std::ostream& out, const CandidateSpace& space);

/// Non-empty lines of a text file, NFC-normalized.
std::vector<std::string> load_lines(const std::string& path);

}  // namespace sandhiseg
