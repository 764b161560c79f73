#include "rhyme_mimic/peripherals.hpp"

#include <algorithm>
#include <iostream>

#include <nlohmann/json.hpp>

namespace rhyme_mimic {

using json = nlohmann::json;

std::int64_t LatencyModel::duration_for(const PeripheralCommand& command) const {
    switch (command.kind) {
    case PeripheralKind::display: return display_ms;
    case PeripheralKind::tts: return tts_ms;
    case PeripheralKind::audio: return command.duration_ms > 0 ? command.duration_ms : audio_default_ms;
    case PeripheralKind::motion: return command.duration_ms > 0 ? command.duration_ms : motion_default_ms;
    }
    return 0;
}

json to_json(const PeripheralAck& ack) {
    json j = {{"command_id", ack.command_id},
              {"kind", to_string(ack.kind)},
              {"status", ack.ok ? "done" : "failed"},
              {"simulated_duration_ms", ack.simulated_duration_ms}};
    if (!ack.detail.empty()) j["detail"] = ack.detail;
    return j;
}

PeripheralAck peripheral_ack_from_json(const json& j) {
    PeripheralAck ack;
    ack.command_id = j.at("command_id").get<std::uint64_t>();
    const auto kind = parse_peripheral_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown peripheral kind in ack");
    ack.kind = *kind;
    const auto status = j.at("status").get<std::string>();
    if (status != "done" && status != "failed") throw std::invalid_argument("unknown ack status");
    ack.ok = status == "done";
    ack.simulated_duration_ms = j.value("simulated_duration_ms", std::int64_t{0});
    ack.detail = j.value("detail", std::string{});
    return ack;
}

std::string_view peripheral_topic(PeripheralKind kind) noexcept {
    switch (kind) {
    case PeripheralKind::display: return topics::peripheral_display;
    case PeripheralKind::audio: return topics::peripheral_audio;
    case PeripheralKind::tts: return topics::peripheral_tts;
    case PeripheralKind::motion: return topics::peripheral_motion;
    }
    return {};
}

PeripheralNode::PeripheralNode(PeripheralKind kind, MessageBus& bus, EventLoop& loop, LatencyModel latency,
                               std::optional<std::set<std::string>> known_resources)
    : kind_(kind),
      name_(std::string(to_string(kind))),
      handle_(bus.connect(name_)),
      loop_(loop),
      latency_(latency),
      known_(std::move(known_resources)) {
    handle_.subscribe(peripheral_topic(kind));
}

std::size_t PeripheralNode::poll() {
    std::size_t handled = 0;
    while (auto message = handle_.try_receive()) {
        ++handled;
        PeripheralCommand command;
        try {
            command = peripheral_command_from_json(message->payload);
        } catch (const std::exception& e) {
            ++malformed_;
            std::cerr << "[" << name_ << "] dropping malformed command: " << e.what() << '\n';
            continue;
        }
        received_.push_back(command);

        PeripheralAck ack{command.command_id, kind_, true, latency_.duration_for(command), {}};
        if (kind_ != PeripheralKind::tts && known_ && !known_->contains(command.ref)) {
            ack.ok = false;
            ack.detail = "unknown resource '" + command.ref + "'";
        }
        busy_until_ms_ = std::max(busy_until_ms_, loop_.now_ms()) + ack.simulated_duration_ms;
        loop_.schedule_at(busy_until_ms_, [this, ack] {
            handle_.publish(topics::peripheral_ack, to_json(ack));
            ++acks_sent_;
        });
    }
    return handled;
}

ReplayNode::ReplayNode(std::vector<StreamFrame> frames, ReplayOptions options, MessageBus& bus, EventLoop& loop)
    : frames_(std::move(frames)), options_(options), handle_(bus.connect_fresh("replay")), loop_(loop) {
    if (options_.rate < 0.0) throw std::invalid_argument("replay rate must be >= 0");
}

void ReplayNode::start() {
    if (frames_.empty()) {
        finished_ = true;
        return;
    }
    schedule_pass(loop_.now_ms() + options_.start_delay_ms);
}

void ReplayNode::stop() {
    stopped_ = true;
    for (auto id : timers_) loop_.cancel(id);
    timers_.clear();
}

void ReplayNode::schedule_pass(std::int64_t pass_start_ms) {
    timers_.clear();
    const std::int64_t first_ts = frames_.front().timestamp_ms;
    if (options_.rate == 0.0) {
        timers_.push_back(loop_.schedule_at(pass_start_ms, [this, pass_start_ms] {
            for (std::size_t i = 0; i < frames_.size() && !stopped_; ++i) publish_frame(i);
            ++passes_;
            if (options_.loop && !stopped_) {
                schedule_pass(pass_start_ms + 1);
            } else {
                finished_ = true;
            }
        }));
        return;
    }
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        const auto offset =
            static_cast<std::int64_t>(static_cast<double>(frames_[i].timestamp_ms - first_ts) * options_.rate);
        timers_.push_back(loop_.schedule_at(pass_start_ms + offset, [this, i, pass_start_ms] {
            publish_frame(i);
            if (i + 1 != frames_.size()) return;
            ++passes_;
            if (options_.loop && !stopped_) {
                const auto span = frames_.back().timestamp_ms - frames_.front().timestamp_ms + default_frame_period_ms;
                schedule_pass(pass_start_ms + static_cast<std::int64_t>(static_cast<double>(span) * options_.rate));
            } else {
                finished_ = true;
            }
        }));
    }
}

void ReplayNode::publish_frame(std::size_t index) {
    const StreamFrame& f = frames_[index];
    handle_.publish(topics::pose_frames, frame_document(f.people, f.timestamp_ms));
    ++published_;
}

FrameClassification classify_frame(std::span<const SkeletonFrame> people, const GmmClassifier& classifier,
                                   ConfidenceThreshold threshold) {
    using Outcome = FrameClassification::Outcome;
    FrameClassification out;
    const auto person = select_person(people);
    if (!person) return out;

    const auto upper = select_upper_body(*person, threshold);
    if (const auto* rejection = std::get_if<Rejection>(&upper)) {
        out.outcome = Outcome::rejected_confidence;
        out.rejected_joint = rejection->joint;
        return out;
    }
    const auto pose = normalize(std::get<UpperBodyJoints>(upper), classifier.reference);
    if (!pose) {
        out.outcome = Outcome::degenerate;
        return out;
    }
    const Classification c = classifier.classify(*pose);
    out.class_index = c.class_index;
    out.label = classifier.label(c.class_index);
    out.score = c.score;
    out.outcome = c.rejected ? Outcome::rejected_density : Outcome::classified;
    return out;
}

PoseNode::PoseNode(MessageBus& bus, const GmmClassifier& classifier, ConfidenceThreshold threshold)
    : handle_(bus.connect("pose")), classifier_(classifier), threshold_(threshold) {
    handle_.subscribe(topics::pose_frames);
}

std::size_t PoseNode::poll() {
    using Outcome = FrameClassification::Outcome;
    std::size_t handled = 0;
    while (auto message = handle_.try_receive()) {
        ++handled;
        ++stats_.frames;
        std::vector<SkeletonFrame> people;
        try {
            people = parse_frame_document(message->payload, message->timestamp_ms);
        } catch (const IngestError&) {
            ++stats_.malformed;
            continue;
        }
        const FrameClassification r = classify_frame(people, classifier_, threshold_);
        switch (r.outcome) {
        case Outcome::no_person: ++stats_.no_person; continue;
        case Outcome::rejected_confidence: ++stats_.rejected_confidence; continue;
        case Outcome::degenerate: ++stats_.degenerate; continue;
        case Outcome::rejected_density: ++stats_.rejected_density; continue;
        case Outcome::classified: break;
        }
        ++stats_.classified;
        const std::int64_t frame_ts = people.empty() ? message->timestamp_ms : people.front().timestamp_ms;
        handle_.publish(topics::pose_classified, json{{"label", r.label},
                                                      {"class_index", r.class_index},
                                                      {"score", r.score},
                                                      {"timestamp_ms", frame_ts}});
    }
    return handled;
}

}  // namespace rhyme_mimic
