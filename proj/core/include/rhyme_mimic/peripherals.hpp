#ifndef RHYME_MIMIC_PERIPHERALS_HPP
#define RHYME_MIMIC_PERIPHERALS_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/event_loop.hpp"
#include "rhyme_mimic/game_engine.hpp"
#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/skeleton.hpp"

namespace rhyme_mimic {

/// Simulated busy time per peripheral kind. Audio always uses the
/// command's duration (the line's sing duration).
struct LatencyModel {
    std::int64_t display_ms = 200;
    std::int64_t tts_ms = 1500;
    std::int64_t motion_default_ms = 2000;
    std::int64_t audio_default_ms = 3000;

    std::int64_t duration_for(const PeripheralCommand& command) const;
};

struct PeripheralAck {
    std::uint64_t command_id = 0;
    PeripheralKind kind = PeripheralKind::display;
    bool ok = true;
    std::int64_t simulated_duration_ms = 0;
    std::string detail;
};

nlohmann::json to_json(const PeripheralAck& ack);
PeripheralAck peripheral_ack_from_json(const nlohmann::json& j);

std::string_view peripheral_topic(PeripheralKind kind) noexcept;

/// Stand-in for one robot subsystem. Commands are served one at a time in
/// arrival order; each is acknowledged once its simulated duration elapses.
class PeripheralNode final : public Node {
public:
    /// With `known_resources` set, refs outside it are acknowledged as failed
    /// (tts text is never checked).
    PeripheralNode(PeripheralKind kind, MessageBus& bus, EventLoop& loop, LatencyModel latency = {},
                   std::optional<std::set<std::string>> known_resources = std::nullopt);

    std::string_view name() const override { return name_; }
    std::size_t poll() override;

    PeripheralKind kind() const noexcept { return kind_; }
    const std::vector<PeripheralCommand>& received() const noexcept { return received_; }
    std::size_t acks_sent() const noexcept { return acks_sent_; }

private:
    PeripheralKind kind_;
    std::string name_;
    NodeHandle handle_;
    EventLoop& loop_;
    LatencyModel latency_;
    std::optional<std::set<std::string>> known_;
    std::vector<PeripheralCommand> received_;
    std::int64_t busy_until_ms_ = 0;
    std::size_t acks_sent_ = 0;
    std::size_t malformed_ = 0;
};

struct ReplayOptions {
    /// Multiplies recorded timestamps; 0 publishes everything back-to-back.
    double rate = 1.0;
    bool loop = false;
    std::int64_t start_delay_ms = 0;
};

/// Camera stand-in: publishes recorded frame documents on pose/frames.
class ReplayNode final : public Node {
public:
    ReplayNode(std::vector<StreamFrame> frames, ReplayOptions options, MessageBus& bus, EventLoop& loop);

    std::string_view name() const override { return "replay"; }
    std::size_t poll() override { return 0; }

    /// Schedules the first pass relative to the loop's current time.
    void start();
    void stop();

    std::size_t published() const noexcept { return published_; }
    std::size_t passes() const noexcept { return passes_; }
    bool finished() const noexcept { return finished_; }

private:
    void schedule_pass(std::int64_t pass_start_ms);
    void publish_frame(std::size_t index);

    std::vector<StreamFrame> frames_;
    ReplayOptions options_;
    NodeHandle handle_;
    EventLoop& loop_;
    std::vector<EventLoop::TimerId> timers_;
    std::size_t published_ = 0;
    std::size_t passes_ = 0;
    bool finished_ = false;
    bool stopped_ = false;
};

struct PoseNodeStats {
    std::size_t frames = 0;
    std::size_t malformed = 0;
    std::size_t no_person = 0;
    std::size_t rejected_confidence = 0;
    std::size_t degenerate = 0;
    std::size_t rejected_density = 0;
    std::size_t classified = 0;

    std::size_t skipped() const noexcept {
        return malformed + no_person + rejected_confidence + degenerate + rejected_density;
    }
};

/// Result of running one frame document through the recognition chain.
struct FrameClassification {
    enum class Outcome { classified, no_person, rejected_confidence, degenerate, rejected_density };

    Outcome outcome = Outcome::no_person;
    std::string label;
    std::size_t class_index = 0;
    double score = 0.0;
    int rejected_joint = 0;
};

/// select_person -> select_upper_body -> normalize -> classify.
FrameClassification classify_frame(std::span<const SkeletonFrame> people, const GmmClassifier& classifier,
                                   ConfidenceThreshold threshold);

/// Recognition node: consumes pose/frames, publishes {label, score, timestamp_ms} on pose/classified.
class PoseNode final : public Node {
public:
    PoseNode(MessageBus& bus, const GmmClassifier& classifier, ConfidenceThreshold threshold = {});

    std::string_view name() const override { return "pose"; }
    std::size_t poll() override;

    const PoseNodeStats& stats() const noexcept { return stats_; }

private:
    NodeHandle handle_;
    const GmmClassifier& classifier_;
    ConfidenceThreshold threshold_;
    PoseNodeStats stats_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_PERIPHERALS_HPP
