#include "rhyme_mimic/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

namespace rhyme_mimic {

namespace {

// Standing child facing the camera, coco-18 layout. Arms (joints 3, 4, 6, 7)
// are overwritten per gesture.
constexpr std::array<Point2, 18> base_body = {{
    {320, 105},  // 0 nose
    {320, 150},  // 1 neck
    {268, 152},  // 2 right shoulder
    {0, 0},      // 3 right elbow
    {0, 0},      // 4 right wrist
    {372, 152},  // 5 left shoulder
    {0, 0},      // 6 left elbow
    {0, 0},      // 7 left wrist
    {292, 290},  // 8 right hip
    {290, 380},  // 9 right knee
    {288, 465},  // 10 right ankle
    {348, 290},  // 11 left hip
    {350, 380},  // 12 left knee
    {352, 465},  // 13 left ankle
    {310, 95},   // 14 right eye
    {330, 95},   // 15 left eye
    {300, 100},  // 16 right ear
    {340, 100},  // 17 left ear
}};

AnchorPose make_anchor(std::string label, Point2 r_elbow, Point2 r_wrist, Point2 l_elbow, Point2 l_wrist) {
    AnchorPose a{std::move(label), base_body};
    a.joints[3] = r_elbow;
    a.joints[4] = r_wrist;
    a.joints[6] = l_elbow;
    a.joints[7] = l_wrist;
    return a;
}

void place(SkeletonFrame& frame, Point2 pivot, double scale, Point2 shift) {
    for (auto& kp : frame.joints) {
        kp.x = pivot.x + scale * (kp.x - pivot.x) + shift.x;
        kp.y = pivot.y + scale * (kp.y - pivot.y) + shift.y;
    }
}

NormalizedPose features_of(const SkeletonFrame& frame, const ReferenceJoints& reference, bool& ok) {
    ok = false;
    const auto upper = select_upper_body(frame, ConfidenceThreshold{0.0});
    if (!std::holds_alternative<UpperBodyJoints>(upper)) return {};
    const auto pose = normalize(std::get<UpperBodyJoints>(upper), reference);
    if (!pose) return {};
    ok = true;
    return *pose;
}

template <typename Emit>
void draw_samples(const SyntheticDatasetConfig& config, Emit&& emit) {
    const auto& anchors = rhyme_anchor_poses();
    if (config.classes < 1 || config.classes > anchors.size()) {
        throw std::invalid_argument("synthetic class count must be 1.." + std::to_string(anchors.size()));
    }
    if (!(config.spread_px >= 0.0)) throw std::invalid_argument("spread must be >= 0");
    config.reference.validate();
    Rng rng = make_rng(config.seed);
    const SkeletonSampleOptions options{config.spread_px};
    for (std::size_t c = 0; c < config.classes; ++c) {
        for (std::size_t i = 0; i < config.per_class; ++i) {
            // Redraw the rare sample whose reference lines come out degenerate.
            for (int attempt = 0;; ++attempt) {
                SkeletonFrame frame = sample_skeleton(anchors[c], options, rng);
                bool ok = false;
                const NormalizedPose pose = features_of(frame, config.reference, ok);
                if (ok) {
                    emit(anchors[c].label, std::move(frame), pose);
                    break;
                }
                if (attempt > 1000) throw std::runtime_error("synthetic generator keeps producing degenerate poses");
            }
        }
    }
}

}  // namespace

const std::vector<AnchorPose>& rhyme_anchor_poses() {
    static const std::vector<AnchorPose> anchors = {
        make_anchor("spin_the_hands", {255, 220}, {305, 180}, {385, 220}, {335, 180}),
        make_anchor("arms_up", {240, 95}, {245, 30}, {400, 95}, {395, 30}),
        make_anchor("hands_on_head", {228, 115}, {290, 72}, {412, 115}, {350, 72}),
        make_anchor("clap_hands", {262, 225}, {318, 268}, {378, 225}, {322, 268}),
        make_anchor("arms_crossed", {272, 228}, {360, 185}, {368, 228}, {280, 185}),
        make_anchor("hands_on_hips", {228, 222}, {280, 282}, {412, 222}, {360, 282}),
        make_anchor("wave_hello", {212, 152}, {200, 82}, {385, 222}, {390, 295}),
        make_anchor("left_arm_up", {258, 222}, {252, 296}, {400, 95}, {395, 30}),
    };
    return anchors;
}

SkeletonFrame sample_skeleton(const AnchorPose& anchor, const SkeletonSampleOptions& options, Rng& rng) {
    SkeletonFrame frame;
    frame.model = SkeletonModel::coco18;
    frame.joints.reserve(anchor.joints.size());
    for (const Point2& p : anchor.joints) {
        const double dx = options.spread_px * standard_normal(rng);
        const double dy = options.spread_px * standard_normal(rng);
        const double c = uniform(rng, options.min_confidence, options.max_confidence);
        frame.joints.push_back({p.x + dx, p.y + dy, c});
    }
    if (options.random_placement) {
        const double scale = uniform(rng, 0.85, 1.15);
        const Point2 shift{uniform(rng, -60.0, 60.0), uniform(rng, -20.0, 20.0)};
        place(frame, anchor.joints[1], scale, shift);
    }
    return frame;
}

LabeledDataset generate_dataset(const SyntheticDatasetConfig& config) {
    LabeledDataset data;
    const auto& anchors = rhyme_anchor_poses();
    for (std::size_t c = 0; c < std::min(config.classes, anchors.size()); ++c) data.labels.push_back(anchors[c].label);
    draw_samples(config, [&](const std::string& label, SkeletonFrame&&, const NormalizedPose& pose) {
        data.records.push_back({label, std::vector<double>(pose.begin(), pose.end())});
    });
    return data;
}

std::vector<std::pair<std::string, SkeletonFrame>> generate_raw_samples(const SyntheticDatasetConfig& config) {
    std::vector<std::pair<std::string, SkeletonFrame>> out;
    draw_samples(config, [&](const std::string& label, SkeletonFrame&& frame, const NormalizedPose&) {
        out.emplace_back(label, std::move(frame));
    });
    return out;
}

SessionStream generate_session_stream(const RhymeScript& script, const LatencyModel& latency,
                                      const SessionStreamConfig& config) {
    if (config.imitated.size() != script.lines.size()) {
        throw std::invalid_argument("ground truth must name every script line");
    }
    if (config.frame_period_ms <= 0) throw std::invalid_argument("frame period must be positive");
    const auto& anchors = rhyme_anchor_poses();
    auto anchor_index = [&](const std::string& label) {
        for (std::size_t i = 0; i < anchors.size(); ++i) {
            if (anchors[i].label == label) return i;
        }
        throw std::invalid_argument("script pose class '" + label + "' has no synthetic anchor");
    };

    struct Window {
        std::int64_t from;
        std::int64_t to;
        std::size_t anchor;
    };
    std::vector<Window> windows;
    SessionStream out;
    out.imitated = config.imitated;

    // Predicted timeline: every command of a sing round runs in parallel on its
    // own peripheral, so the round lasts as long as the slowest one.
    std::int64_t t = 0;
    for (const RhymeLine& line : script.lines) {
        std::int64_t sing = std::max({latency.display_ms, line.sing_duration_ms,
                                      line.gesture_duration_ms > 0 ? line.gesture_duration_ms : latency.motion_default_ms});
        if (script.announce_lyrics) sing = std::max(sing, latency.tts_ms);
        const std::int64_t wait_start = t + sing;
        out.predicted_wait_start_ms.push_back(wait_start);
        const std::size_t target = anchor_index(line.pose_class);
        if (config.imitated[line.index]) {
            windows.push_back({wait_start - config.hold_lead_ms, wait_start + config.hold_tail_ms, target});
            const auto streak = static_cast<std::int64_t>(script.match_streak);
            t = wait_start + streak * config.frame_period_ms + latency.tts_ms;
        } else {
            const std::size_t distractor = (target + anchors.size() / 2) % anchors.size();
            windows.push_back({wait_start - config.hold_lead_ms, wait_start + config.hold_tail_ms, distractor});
            t += static_cast<std::int64_t>(script.repeat_limit + 1) * (sing + line.wait_timeout_ms);
        }
    }
    const std::int64_t end = t + 2000;

    Rng rng = make_rng(config.seed);
    const SkeletonSampleOptions child{config.spread_px, false};
    for (std::int64_t ts = 0; ts <= end; ts += config.frame_period_ms) {
        StreamFrame frame{ts, {}};
        const auto w = std::find_if(windows.begin(), windows.end(),
                                    [&](const Window& win) { return ts >= win.from && ts < win.to; });
        if (w != windows.end()) {
            SkeletonFrame person = sample_skeleton(anchors[w->anchor], child, rng);
            person.timestamp_ms = ts;
            frame.people.push_back(std::move(person));
            if (uniform01(rng) < config.bystander_rate) {
                SkeletonFrame small =
                    sample_skeleton(anchors[uniform_index(rng, anchors.size())], SkeletonSampleOptions{1.0, false}, rng);
                place(small, {320, 150}, 0.35, {230, -60});
                small.timestamp_ms = ts;
                small.person_index = 1;
                frame.people.push_back(std::move(small));
            }
        }
        out.frames.push_back(std::move(frame));
    }
    return out;
}

RhymeScript default_rhyme_script() {
    static const char* lyrics[] = {
        "Spin, spin, spin the little hands",
        "Reach up high and touch the sky",
        "Hands on my head, I'm ready for bed",
        "Clap, clap, clap along with me",
        "Cross my arms and hold them tight",
        "Hands on hips and stand up tall",
        "Wave hello to all my friends",
        "Lift my left arm, now we're done",
    };
    static const char* cheers[] = {"Bravo!", "Well done!", "Great job!", "Super!",
                                   "Wonderful!", "Bravo!", "Yes, like that!", "Fantastic!"};
    RhymeScript script;
    script.title = "Spin the hands";
    const auto& anchors = rhyme_anchor_poses();
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        RhymeLine line;
        line.index = i;
        line.lyric_text = lyrics[i];
        line.pose_class = anchors[i].label;
        line.audio_ref = "audio/line_" + std::to_string(i) + ".wav";
        line.image_ref = "images/" + anchors[i].label + ".png";
        line.gesture_ref = "gestures/" + anchors[i].label;
        line.sing_duration_ms = 3000;
        line.gesture_duration_ms = 2500;
        line.wait_timeout_ms = 10000;
        line.encourage_text = cheers[i];
        script.lines.push_back(std::move(line));
    }
    return script;
}

}  // namespace rhyme_mimic
