#include "sandhiseg/error.hpp"

namespace sandhiseg {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::UnmappableCandidate: return "UnmappableCandidate";
        case ErrorCode::NoPath: return "NoPath";
        case ErrorCode::NumericalError: return "NumericalError";
        case ErrorCode::DegenerateRow: return "DegenerateRow";
        case ErrorCode::AlignmentOverflow: return "AlignmentOverflow";
        case ErrorCode::AlignmentMismatch: return "AlignmentMismatch";
        case ErrorCode::EmptyCorpus: return "EmptyCorpus";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::UnknownLabel: return "UnknownLabel";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::InvalidSelection: return "InvalidSelection";
        case ErrorCode::Incomplete: return "Incomplete";
    }
    return "Unknown";
}

}  // namespace sandhiseg
