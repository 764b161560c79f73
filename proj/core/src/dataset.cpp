#include "rhyme_mimic/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rhyme_mimic {

namespace {

using json = nlohmann::json;

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
    throw DatasetError("dataset line " + std::to_string(line_no) + ": " + what);
}

SkeletonFrame frame_from_joints(const json& joints, std::size_t line_no) {
    if (!joints.is_array()) bad_line(line_no, "joints must be a list");
    json flat = json::array();
    for (const auto& j : joints) {
        if (!j.is_array() || j.size() != 3) bad_line(line_no, "each joint must be [x, y, confidence]");
        for (const auto& v : j) flat.push_back(v);
    }
    const json doc = {{"people", json::array({json{{"pose_keypoints_2d", flat}}})}};
    try {
        return parse_frame(doc.dump()).front();
    } catch (const IngestError& e) {
        bad_line(line_no, e.what());
    }
}

}  // namespace

DatasetLoadResult read_dataset(std::istream& in, const DatasetLoadOptions& options) {
    DatasetLoadResult result;
    auto& data = result.dataset;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
        const json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object()) bad_line(line_no, "not a record");

        if (rec.contains("labels")) {
            if (header_seen || !data.records.empty()) bad_line(line_no, "labels header must come first");
            header_seen = true;
            for (const auto& l : rec.at("labels")) {
                if (!l.is_string()) bad_line(line_no, "labels must be strings");
                data.labels.push_back(l.get<std::string>());
            }
            continue;
        }

        if (!rec.contains("label") || !rec.at("label").is_string()) bad_line(line_no, "missing label");
        std::string label = rec.at("label").get<std::string>();
        if (header_seen && !data.index_of(label)) bad_line(line_no, "label '" + label + "' not in header");

        std::vector<double> features;
        if (rec.contains("features")) {
            const auto& f = rec.at("features");
            if (!f.is_array()) bad_line(line_no, "features must be a list");
            for (const auto& v : f) {
                if (!v.is_number()) bad_line(line_no, "non-numeric feature");
                features.push_back(v.get<double>());
            }
        } else if (rec.contains("joints")) {
            const SkeletonFrame frame = frame_from_joints(rec.at("joints"), line_no);
            const auto upper = select_upper_body(frame, options.threshold);
            if (std::holds_alternative<Rejection>(upper)) {
                ++result.skipped_rejected;
                continue;
            }
            const auto pose = normalize(std::get<UpperBodyJoints>(upper), options.reference);
            if (!pose) {
                ++result.skipped_degenerate;
                continue;
            }
            features.assign(pose->begin(), pose->end());
        } else {
            bad_line(line_no, "record needs features or joints");
        }

        if (!data.records.empty() && features.size() != data.records.front().features.size()) {
            bad_line(line_no, "feature length differs from earlier records");
        }
        data.add(std::move(label), std::move(features));
    }
    return result;
}

DatasetLoadResult read_dataset_file(const std::string& path, const DatasetLoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file " + path);
    return read_dataset(in, options);
}

void write_dataset(std::ostream& out, const LabeledDataset& data) {
    out << json{{"labels", data.labels}}.dump() << '\n';
    for (const auto& r : data.records) out << json{{"label", r.label}, {"features", r.features}}.dump() << '\n';
}

void write_dataset_file(const std::string& path, const LabeledDataset& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file " + path);
    write_dataset(out, data);
}

}  // namespace rhyme_mimic
