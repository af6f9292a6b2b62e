#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sandhiseg/lattice.hpp"

namespace sandhiseg {

struct Selection {
    std::string word;
    std::size_t head = 0;  // surface indices of the normalized input
    std::size_t tail = 0;
    friend bool operator==(const Selection&, const Selection&) = default;
};

enum class AnnotationStatus { Partial, Complete };

std::string to_string(AnnotationStatus status);

struct AnnotationRecord {
    std::string id;
    std::string input;                              // NFC
    std::vector<std::vector<Selection>> selections;  // one list per chunk
    AnnotationStatus status = AnnotationStatus::Partial;
    std::string created_at;
    std::string updated_at;
    std::string annotator;

    nlohmann::json to_json() const;
    static AnnotationRecord from_json(const nlohmann::json& j);
};

/// A chunk is tiled when its selections, in head order, start at the chunk's
/// first character, end at its last, and satisfy the junction rule pairwise.
bool chunk_tiled(const Chunk& chunk, const std::vector<Selection>& selections);

/// Normalizes the input, sorts each chunk's selections, checks that every
/// selection lies inside its chunk, and derives the status.
/// Throws EmptyInput / InvalidSelection.
AnnotationRecord make_annotation(const std::string& input, std::vector<std::vector<Selection>> selections);

/// Selections joined by spaces per chunk, chunks joined by a space.
/// Throws Incomplete unless the record is complete.
std::string export_annotation(const AnnotationRecord& record);

/// JSON-lines store, last write per id wins. Writers are serialized and each
/// write is fsynced before it becomes visible; readers work on an immutable
/// snapshot and never block on writers.
class AnnotationStore {
public:
    explicit AnnotationStore(std::string path);

    AnnotationRecord create(const std::string& input, std::vector<std::vector<Selection>> selections,
                            const std::string& annotator);
    /// Throws NotFound.
    AnnotationRecord update(const std::string& id, const std::optional<std::string>& input,
                            std::vector<std::vector<Selection>> selections, const std::string& annotator);
    std::optional<AnnotationRecord> get(const std::string& id) const;
    /// Throws NotFound / Incomplete.
    std::string export_text(const std::string& id) const;

    std::size_t size() const;
    const std::string& path() const { return path_; }

private:
    using Snapshot = std::map<std::string, AnnotationRecord>;

    void append(const AnnotationRecord& record);
    std::shared_ptr<const Snapshot> snapshot() const;

    std::string path_;
    std::mutex write_mutex_;
    std::shared_ptr<const Snapshot> records_;
    std::uint64_t next_id_ = 1;
};

}  // namespace sandhiseg
