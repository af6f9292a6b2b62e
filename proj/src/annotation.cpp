#include "sandhiseg/annotation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include <fcntl.h>
#include <unistd.h>

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

std::string format_id(std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ann-%06llu", static_cast<unsigned long long>(n));
    return buf;
}

std::optional<std::uint64_t> parse_id(const std::string& id) {
    if (id.rfind("ann-", 0) != 0 || id.size() == 4) return std::nullopt;
    std::uint64_t n = 0;
    for (std::size_t i = 4; i < id.size(); ++i) {
        if (id[i] < '0' || id[i] > '9') return std::nullopt;
        n = n * 10 + static_cast<std::uint64_t>(id[i] - '0');
    }
    return n;
}

}  // namespace

std::string to_string(AnnotationStatus status) {
    return status == AnnotationStatus::Complete ? "complete" : "partial";
}

nlohmann::json AnnotationRecord::to_json() const {
    auto sel = nlohmann::json::array();
    for (const auto& chunk : selections) {
        auto arr = nlohmann::json::array();
        for (const auto& s : chunk) arr.push_back({{"word", s.word}, {"head", s.head}, {"tail", s.tail}});
        sel.push_back(arr);
    }
    return {{"id", id},
            {"input", input},
            {"selections", sel},
            {"status", to_string(status)},
            {"created_at", created_at},
            {"updated_at", updated_at},
            {"annotator", annotator}};
}

AnnotationRecord AnnotationRecord::from_json(const nlohmann::json& j) {
    AnnotationRecord r;
    r.id = j.at("id").get<std::string>();
    r.input = j.at("input").get<std::string>();
    for (const auto& chunk : j.at("selections")) {
        std::vector<Selection> list;
        for (const auto& s : chunk)
            list.push_back(Selection{s.at("word").get<std::string>(), s.at("head").get<std::size_t>(),
                                     s.at("tail").get<std::size_t>()});
        r.selections.push_back(std::move(list));
    }
    r.status = j.at("status").get<std::string>() == "complete" ? AnnotationStatus::Complete : AnnotationStatus::Partial;
    r.created_at = j.value("created_at", "");
    r.updated_at = j.value("updated_at", "");
    r.annotator = j.value("annotator", "");
    return r;
}

bool chunk_tiled(const Chunk& chunk, const std::vector<Selection>& selections) {
    if (selections.empty()) return false;
    if (selections.front().head != chunk.start || selections.back().tail != chunk.end) return false;
    for (std::size_t i = 1; i < selections.size(); ++i) {
        const SpanNode prev{{}, selections[i - 1].head, selections[i - 1].tail, NodeKind::Candidate};
        const SpanNode next{{}, selections[i].head, selections[i].tail, NodeKind::Candidate};
        if (!junction_ok(prev, next)) return false;
    }
    return true;
}

AnnotationRecord make_annotation(const std::string& input, std::vector<std::vector<Selection>> selections) {
    AnnotationRecord r;
    r.input = normalize_utf8(input);
    const auto chunks = split_chunks(utf8_to_text(r.input));
    if (selections.size() > chunks.size())
        throw Error(ErrorCode::InvalidSelection, "more selection lists than chunks");
    selections.resize(chunks.size());
    bool complete = true;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        auto& list = selections[c];
        for (auto& s : list) {
            if (s.head > s.tail || !chunks[c].contains(s.head, s.tail))
                throw Error(ErrorCode::InvalidSelection, "selection '" + s.word + "' lies outside chunk " +
                                                             std::to_string(c));
            s.word = normalize_utf8(s.word);
            if (s.word.empty()) throw Error(ErrorCode::InvalidSelection, "empty selection word");
        }
        std::stable_sort(list.begin(), list.end(), [](const Selection& a, const Selection& b) {
            return a.head != b.head ? a.head < b.head : a.tail < b.tail;
        });
        complete = complete && chunk_tiled(chunks[c], list);
    }
    r.selections = std::move(selections);
    r.status = complete ? AnnotationStatus::Complete : AnnotationStatus::Partial;
    return r;
}

std::string export_annotation(const AnnotationRecord& record) {
    if (record.status != AnnotationStatus::Complete)
        throw Error(ErrorCode::Incomplete, "annotation " + record.id + " is not complete");
    std::vector<std::string> words;
    for (const auto& chunk : record.selections)
        for (const auto& s : chunk) words.push_back(s.word);
    return join(words, " ");
}

AnnotationStore::AnnotationStore(std::string path) : path_(std::move(path)) {
    auto records = std::make_shared<Snapshot>();
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    std::size_t lineno = 0;
    while (in && std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto r = AnnotationRecord::from_json(nlohmann::json::parse(line));
            if (auto n = parse_id(r.id)) next_id_ = std::max(next_id_, *n + 1);
            (*records)[r.id] = std::move(r);
        } catch (const nlohmann::json::exception& e) {
            // A torn final line from a crash mid-write is the only expected cause.
            if (in.peek() != EOF)
                throw Error(ErrorCode::ParseError, path_ + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    records_ = std::move(records);
}

std::shared_ptr<const AnnotationStore::Snapshot> AnnotationStore::snapshot() const {
    return std::atomic_load(&records_);
}

void AnnotationStore::append(const AnnotationRecord& record) {
    const std::string line = record.to_json().dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoError, "cannot open annotation store " + path_);
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) {
            ::close(fd);
            throw Error(ErrorCode::IoError, "write failed for " + path_);
        }
        written += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw Error(ErrorCode::IoError, "fsync failed for " + path_);

    auto next = std::make_shared<Snapshot>(*snapshot());
    (*next)[record.id] = record;
    std::atomic_store(&records_, std::shared_ptr<const Snapshot>(std::move(next)));
}

AnnotationRecord AnnotationStore::create(const std::string& input, std::vector<std::vector<Selection>> selections,
                                         const std::string& annotator) {
    AnnotationRecord r = make_annotation(input, std::move(selections));
    r.annotator = annotator;
    r.created_at = r.updated_at = utc_now();
    std::lock_guard lock(write_mutex_);
    r.id = format_id(next_id_++);
    append(r);
    return r;
}

AnnotationRecord AnnotationStore::update(const std::string& id, const std::optional<std::string>& input,
                                         std::vector<std::vector<Selection>> selections,
                                         const std::string& annotator) {
    std::lock_guard lock(write_mutex_);
    const auto current = snapshot();
    auto it = current->find(id);
    if (it == current->end()) throw Error(ErrorCode::NotFound, "no annotation " + id);
    AnnotationRecord r = make_annotation(input.value_or(it->second.input), std::move(selections));
    r.id = id;
    r.created_at = it->second.created_at;
    r.updated_at = utc_now();
    r.annotator = annotator.empty() ? it->second.annotator : annotator;
    append(r);
    return r;
}

std::optional<AnnotationRecord> AnnotationStore::get(const std::string& id) const {
    const auto current = snapshot();
    auto it = current->find(id);
    if (it == current->end()) return std::nullopt;
    return it->second;
}

std::string AnnotationStore::export_text(const std::string& id) const {
    auto r = get(id);
    if (!r) throw Error(ErrorCode::NotFound, "no annotation " + id);
    return export_annotation(*r);
}

std::size_t AnnotationStore::size() const { return snapshot()->size(); }

}  // namespace sandhiseg
