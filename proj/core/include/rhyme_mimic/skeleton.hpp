#ifndef RHYME_MIMIC_SKELETON_HPP
#define RHYME_MIMIC_SKELETON_HPP

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rhyme_mimic {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

enum class SkeletonModel { coco18, body25 };

constexpr std::size_t joint_count(SkeletonModel model) noexcept {
    return model == SkeletonModel::coco18 ? 18 : 25;
}

std::string_view to_string(SkeletonModel model) noexcept;

struct SkeletonFrame {
    SkeletonModel model = SkeletonModel::coco18;
    std::vector<Keypoint> joints;
    std::int64_t timestamp_ms = 0;
    std::size_t person_index = 0;

    friend bool operator==(const SkeletonFrame&, const SkeletonFrame&) = default;
};

/// Upper-body slots in coco numbering: 1 neck, 2 right shoulder, 3 right
/// elbow, 4 right wrist, 5 left shoulder, 6 left elbow, 7 left wrist,
/// 8 right hip. Slot i lives at positions[i - 1].
struct UpperBodyJoints {
    std::array<Point2, 8> positions{};

    const Point2& joint(int coco_index) const { return positions.at(static_cast<std::size_t>(coco_index - 1)); }
};

/// Frame skipped because an upper-body joint was not confident enough.
struct Rejection {
    int joint = 0;  // coco index 1..8

    friend bool operator==(const Rejection&, const Rejection&) = default;
};

class ConfidenceThreshold {
public:
    constexpr ConfidenceThreshold() = default;
    explicit ConfidenceThreshold(double c);

    constexpr double value() const noexcept { return c_; }

private:
    double c_ = 0.5;
};

class IngestError : public std::runtime_error {
public:
    enum class Kind { malformed_document, bad_joint_count, non_finite_value };

    IngestError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Frames per second assumed when a stream line carries no timestamp.
inline constexpr std::int64_t default_frame_period_ms = 33;

/// Parses one frame document: {"people":[{"pose_keypoints_2d":[x,y,c,...]}], "timestamp_ms"?}.
/// `fallback_timestamp_ms` is used when the document carries no timestamp.
std::vector<SkeletonFrame> parse_frame(std::string_view raw, std::int64_t fallback_timestamp_ms = 0);

/// Same, for an already-parsed document.
std::vector<SkeletonFrame> parse_frame_document(const nlohmann::json& doc, std::int64_t fallback_timestamp_ms = 0);

/// Frame document carrying `people` and `timestamp_ms`.
nlohmann::json frame_document(std::span<const SkeletonFrame> people, std::int64_t timestamp_ms);

/// Inverse of parse_frame. All frames must share one timestamp.
std::string serialize_frame(std::span<const SkeletonFrame> people, std::int64_t timestamp_ms);

/// One line of a newline-delimited stream, already parsed.
struct StreamFrame {
    std::int64_t timestamp_ms = 0;
    std::vector<SkeletonFrame> people;
};

/// Reads a newline-delimited stream. Blank lines are skipped; a line without
/// timestamp gets index * 33 ms. Timestamps must be nondecreasing.
std::vector<StreamFrame> read_stream(std::istream& in);
std::vector<StreamFrame> read_stream_file(const std::string& path);
void write_stream(std::ostream& out, std::span<const StreamFrame> frames);

/// Returns the 8 upper-body joints iff every one is strictly above the threshold.
std::variant<UpperBodyJoints, Rejection> select_upper_body(const SkeletonFrame& frame,
                                                           ConfidenceThreshold threshold = {});

/// Source joint index in `model` for coco upper-body slot 1..8.
std::size_t upper_body_source_index(SkeletonModel model, int coco_slot);

/// Picks the person whose confident joints (confidence > 0) span the largest
/// bounding box. Ties keep the earliest person.
std::optional<SkeletonFrame> select_person(std::span<const SkeletonFrame> frames);

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_SKELETON_HPP
