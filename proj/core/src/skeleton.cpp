#include "rhyme_mimic/skeleton.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rhyme_mimic {

namespace {

using json = nlohmann::json;

// body-25 indices of the coco upper-body slots 1..8. Only the right hip
// moves: body-25 inserts MidHip at 8.
constexpr std::array<std::size_t, 8> body25_upper_body = {1, 2, 3, 4, 5, 6, 7, 9};

[[noreturn]] void malformed(const std::string& what) {
    throw IngestError(IngestError::Kind::malformed_document, "malformed frame document: " + what);
}

SkeletonFrame parse_person(const json& person, std::size_t index, std::int64_t timestamp_ms) {
    if (!person.is_object()) malformed("person record is not an object");
    const auto it = person.find("pose_keypoints_2d");
    if (it == person.end() || !it->is_array()) malformed("person record lacks pose_keypoints_2d");
    const json& flat = *it;

    if (flat.size() % 3 != 0) {
        throw IngestError(IngestError::Kind::bad_joint_count,
                          "keypoint list length " + std::to_string(flat.size()) + " is not a multiple of 3");
    }
    const std::size_t triples = flat.size() / 3;
    SkeletonFrame frame;
    if (triples == joint_count(SkeletonModel::coco18)) {
        frame.model = SkeletonModel::coco18;
    } else if (triples == joint_count(SkeletonModel::body25)) {
        frame.model = SkeletonModel::body25;
    } else {
        throw IngestError(IngestError::Kind::bad_joint_count,
                          "unsupported joint count " + std::to_string(triples) + " (expected 18 or 25)");
    }

    frame.timestamp_ms = timestamp_ms;
    frame.person_index = index;
    frame.joints.reserve(triples);
    for (std::size_t j = 0; j < triples; ++j) {
        std::array<double, 3> v{};
        for (std::size_t k = 0; k < 3; ++k) {
            const json& value = flat[3 * j + k];
            if (!value.is_number()) malformed("non-numeric keypoint value");
            v[k] = value.get<double>();
            if (!std::isfinite(v[k])) {
                throw IngestError(IngestError::Kind::non_finite_value,
                                  "non-finite value in joint " + std::to_string(j));
            }
        }
        if (v[2] < 0.0 || v[2] > 1.0) malformed("confidence outside [0,1] in joint " + std::to_string(j));
        frame.joints.push_back({v[0], v[1], v[2]});
    }
    return frame;
}

std::vector<SkeletonFrame> frames_from_json(const json& doc, std::int64_t timestamp_ms) {
    if (!doc.is_object()) malformed("top level is not a record");
    const auto people = doc.find("people");
    if (people == doc.end() || !people->is_array()) malformed("missing people list");

    std::vector<SkeletonFrame> frames;
    frames.reserve(people->size());
    for (std::size_t i = 0; i < people->size(); ++i) {
        frames.push_back(parse_person((*people)[i], i, timestamp_ms));
    }
    return frames;
}

std::optional<std::int64_t> document_timestamp(const json& doc) {
    const auto it = doc.find("timestamp_ms");
    if (it == doc.end()) return std::nullopt;
    if (!it->is_number_integer()) malformed("timestamp_ms is not an integer");
    return it->get<std::int64_t>();
}

json parse_json(std::string_view raw) {
    json doc = json::parse(raw.begin(), raw.end(), nullptr, false);
    if (doc.is_discarded()) malformed("not parseable");
    return doc;
}

}  // namespace

std::string_view to_string(SkeletonModel model) noexcept {
    return model == SkeletonModel::coco18 ? "coco18" : "body25";
}

ConfidenceThreshold::ConfidenceThreshold(double c) : c_(c) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("confidence threshold must lie in [0,1]");
}

std::vector<SkeletonFrame> parse_frame(std::string_view raw, std::int64_t fallback_timestamp_ms) {
    return parse_frame_document(parse_json(raw), fallback_timestamp_ms);
}

std::vector<SkeletonFrame> parse_frame_document(const json& doc, std::int64_t fallback_timestamp_ms) {
    if (!doc.is_object()) malformed("top level is not a record");
    return frames_from_json(doc, document_timestamp(doc).value_or(fallback_timestamp_ms));
}

std::string serialize_frame(std::span<const SkeletonFrame> people, std::int64_t timestamp_ms) {
    return frame_document(people, timestamp_ms).dump();
}

json frame_document(std::span<const SkeletonFrame> people, std::int64_t timestamp_ms) {
    json list = json::array();
    for (const auto& person : people) {
        json flat = json::array();
        for (const auto& kp : person.joints) {
            flat.push_back(kp.x);
            flat.push_back(kp.y);
            flat.push_back(kp.confidence);
        }
        list.push_back(json{{"pose_keypoints_2d", std::move(flat)}});
    }
    return json{{"people", std::move(list)}, {"timestamp_ms", timestamp_ms}};
}

std::vector<StreamFrame> read_stream(std::istream& in) {
    std::vector<StreamFrame> out;
    std::string line;
    std::int64_t index = 0;
    std::int64_t last = std::numeric_limits<std::int64_t>::min();
    while (std::getline(in, line)) {
        if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
        const json doc = parse_json(line);
        if (!doc.is_object()) malformed("stream line " + std::to_string(index) + " is not a record");
        const std::int64_t ts = document_timestamp(doc).value_or(index * default_frame_period_ms);
        if (ts < last) malformed("timestamps decrease at stream line " + std::to_string(index));
        last = ts;
        out.push_back({ts, frames_from_json(doc, ts)});
        ++index;
    }
    return out;
}

std::vector<StreamFrame> read_stream_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stream file " + path);
    return read_stream(in);
}

void write_stream(std::ostream& out, std::span<const StreamFrame> frames) {
    for (const auto& f : frames) out << serialize_frame(f.people, f.timestamp_ms) << '\n';
}

std::size_t upper_body_source_index(SkeletonModel model, int coco_slot) {
    if (coco_slot < 1 || coco_slot > 8) throw std::out_of_range("upper-body slot must be 1..8");
    const auto slot = static_cast<std::size_t>(coco_slot);
    return model == SkeletonModel::coco18 ? slot : body25_upper_body[slot - 1];
}

std::variant<UpperBodyJoints, Rejection> select_upper_body(const SkeletonFrame& frame,
                                                           ConfidenceThreshold threshold) {
    if (frame.joints.size() != joint_count(frame.model)) {
        throw std::invalid_argument("frame joint count does not match its skeleton model");
    }
    UpperBodyJoints out;
    for (int slot = 1; slot <= 8; ++slot) {
        const Keypoint& kp = frame.joints[upper_body_source_index(frame.model, slot)];
        if (!(kp.confidence > threshold.value())) return Rejection{slot};
        out.positions[static_cast<std::size_t>(slot - 1)] = {kp.x, kp.y};
    }
    return out;
}

std::optional<SkeletonFrame> select_person(std::span<const SkeletonFrame> frames) {
    std::optional<SkeletonFrame> best;
    double best_area = -1.0;
    for (const auto& frame : frames) {
        double min_x = std::numeric_limits<double>::infinity();
        double min_y = min_x;
        double max_x = -min_x;
        double max_y = -min_x;
        bool any = false;
        for (const auto& kp : frame.joints) {
            if (!(kp.confidence > 0.0)) continue;
            any = true;
            min_x = std::min(min_x, kp.x);
            max_x = std::max(max_x, kp.x);
            min_y = std::min(min_y, kp.y);
            max_y = std::max(max_y, kp.y);
        }
        const double area = any ? (max_x - min_x) * (max_y - min_y) : 0.0;
        if (area > best_area) {
            best_area = area;
            best = frame;
        }
    }
    return best;
}

}  // namespace rhyme_mimic
