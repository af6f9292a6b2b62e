#pragma once

#include <string>

#include "json.hpp"

#include "sandhiseg/annotation.hpp"
#include "sandhiseg/pipeline.hpp"

namespace httplib {
class Server;
}

namespace sandhiseg {

inline constexpr const char* kAnnotatorHeader = "X-Annotator-Id";

/// HTTP front end: segmentation for the annotation UI plus annotation CRUD.
/// The segmenter is shared read-only between handler threads.
class SegmentService {
public:
    SegmentService(const Segmenter& segmenter, AnnotationStore& store);

    /// Body of POST /api/segment for a given text. Throws Error on bad input.
    nlohmann::json segment_response(const std::string& text) const;

    void mount(httplib::Server& server);

private:
    const Segmenter& segmenter_;
    AnnotationStore& store_;
};

}  // namespace sandhiseg
