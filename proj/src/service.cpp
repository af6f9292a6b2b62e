#include "sandhiseg/service.hpp"

#include "httplib.h"

#include "sandhiseg/error.hpp"

namespace sandhiseg {

namespace {

int status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Incomplete: return 409;
    case ErrorCode::IoError:
    case ErrorCode::NumericalError: return 500;
    default: return 400;
    }
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        auto j = nlohmann::json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
    }
}

std::vector<std::vector<Selection>> parse_selections(const nlohmann::json& body) {
    if (!body.contains("selections")) return {};
    const auto& sel = body.at("selections");
    if (!sel.is_array()) throw Error(ErrorCode::ParseError, "selections must be an array of arrays");
    std::vector<std::vector<Selection>> out;
    for (const auto& chunk : sel) {
        if (!chunk.is_array()) throw Error(ErrorCode::ParseError, "selections must be an array of arrays");
        std::vector<Selection> list;
        for (const auto& s : chunk) {
            if (!s.is_object() || !s.contains("word") || !s.contains("head") || !s.contains("tail") ||
                !s.at("word").is_string() || !s.at("head").is_number_unsigned() || !s.at("tail").is_number_unsigned())
                throw Error(ErrorCode::ParseError, "each selection needs word, head and tail");
            list.push_back(Selection{s.at("word").get<std::string>(), s.at("head").get<std::size_t>(),
                                     s.at("tail").get<std::size_t>()});
        }
        out.push_back(std::move(list));
    }
    return out;
}

std::string required_string(const nlohmann::json& body, const char* field) {
    if (!body.contains(field) || !body.at(field).is_string())
        throw Error(ErrorCode::ParseError, std::string("missing string field '") + field + "'");
    return body.at(field).get<std::string>();
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
        try {
            handler(req, res);
        } catch (const Error& e) {
            send_error(res, status_for(e.code()), to_string(e.code()), e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "InternalError", e.what());
        }
    };
}

}  // namespace

SegmentService::SegmentService(const Segmenter& segmenter, AnnotationStore& store)
    : segmenter_(segmenter), store_(store) {}

nlohmann::json SegmentService::segment_response(const std::string& text) const {
    const Segmentation seg = segmenter_.segment(text);
    const auto& lattice = seg.lattice;
    std::vector<bool> replaced(lattice.chunks().size(), false);
    if (seg.rectify) {
        for (const auto& d : seg.rectify->chunks)
            if (d.action == ChunkAction::Replaced) replaced[d.chunk] = true;
    }
    auto chunks = nlohmann::json::array();
    for (std::size_t c = 0; c < lattice.chunks().size(); ++c) {
        const Chunk& chunk = lattice.chunks()[c];
        auto candidates = nlohmann::json::array();
        for (const auto& n : lattice.candidates_in(chunk))
            candidates.push_back({{"word", n.utf8()}, {"head", n.head}, {"tail", n.tail}});
        chunks.push_back({{"chunk", text_to_utf8(chunk.text)},
                          {"start", chunk.start},
                          {"end", chunk.end},
                          {"candidates", candidates},
                          {"prediction", seg.final[c]},
                          {"prcp_applied", replaced[c]}});
    }
    return {{"input", text_to_utf8(lattice.input())}, {"lattice", to_string(lattice.source())}, {"chunks", chunks}};
}

void SegmentService::mount(httplib::Server& server) {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok\n", "text/plain");
    });

    server.Post("/api/segment", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        send_json(res, segment_response(required_string(body, "text")));
    }));

    server.Post("/api/annotations", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        const auto record = store_.create(required_string(body, "input"), parse_selections(body),
                                          req.get_header_value(kAnnotatorHeader));
        send_json(res, {{"id", record.id}, {"status", to_string(record.status)}}, 201);
    }));

    server.Put(R"(/api/annotations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto body = parse_body(req);
        std::optional<std::string> input;
        if (body.contains("input")) input = required_string(body, "input");
        const auto record =
            store_.update(req.matches[1], input, parse_selections(body), req.get_header_value(kAnnotatorHeader));
        send_json(res, record.to_json());
    }));

    server.Get(R"(/api/annotations/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        const auto record = store_.get(req.matches[1]);
        if (!record) throw Error(ErrorCode::NotFound, "no annotation " + std::string(req.matches[1]));
        send_json(res, record->to_json());
    }));

    server.Get(R"(/api/annotations/([^/]+)/export)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                   res.set_content(store_.export_text(req.matches[1]), "text/plain; charset=utf-8");
               }));
}

}  // namespace sandhiseg
