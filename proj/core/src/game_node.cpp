#include "rhyme_mimic/game_node.hpp"

#include <algorithm>
#include <iostream>

#include "rhyme_mimic/peripherals.hpp"

namespace rhyme_mimic {

using json = nlohmann::json;

GameNode::GameNode(MessageBus& bus, EventLoop& loop, RhymeScript script, GameNodeOptions options)
    : handle_(bus.connect("game")),
      loop_(loop),
      session_(std::move(script), options.session_id),
      options_(std::move(options)) {
    handle_.subscribe(topics::pose_classified);
    handle_.subscribe(topics::peripheral_ack);
    handle_.subscribe(topics::woz_commands);
}

void GameNode::start() {
    if (session_.state().phase != Phase::idle) {
        throw SessionError(SessionError::Kind::session_active, "session " + options_.session_id + " already started");
    }
    apply(GameEvent::start(loop_.now_ms()));
    if (options_.state_publish_interval_ms > 0 && !finished()) {
        heartbeat_timer_ = loop_.schedule_after(options_.state_publish_interval_ms, [this] { heartbeat(); });
    }
}

void GameNode::inject(GameEvent event) {
    apply(event);
}

std::size_t GameNode::poll() {
    std::size_t handled = 0;
    while (auto message = handle_.try_receive()) {
        ++handled;
        try {
            handle_message(*message);
        } catch (const std::exception& e) {
            ++stats_.malformed;
            std::cerr << "[game] ignoring malformed " << message->topic << " message: " << e.what() << '\n';
        }
    }
    return handled;
}

void GameNode::handle_message(const BusMessage& message) {
    const std::int64_t now = loop_.now_ms();
    const GameState& s = session_.state();

    if (message.topic == topics::pose_classified) {
        if (s.phase != Phase::waiting_for_imitation || s.paused) {
            ++stats_.poses_dropped;
            return;
        }
        ++stats_.poses_forwarded;
        apply(GameEvent::pose_observed(message.payload.at("label").get<std::string>(),
                                       message.payload.value("score", 0.0), now));
        return;
    }

    if (message.topic == topics::peripheral_ack) {
        const PeripheralAck ack = peripheral_ack_from_json(message.payload);
        ++stats_.acks;
        if (!ack.ok) {
            ++stats_.failed_acks;
            std::cerr << "[game] " << to_string(ack.kind) << " command " << ack.command_id
                      << " failed: " << ack.detail << " (continuing)\n";
        }
        if (pending_.erase(ack.command_id) == 0 || !pending_.empty()) return;
        if (s.phase == Phase::singing) {
            apply(GameEvent::singing_done(s.line, now));
        } else if (s.phase == Phase::encouraging) {
            apply(GameEvent::encourage_done(s.line, now));
        }
        return;
    }

    if (message.topic == topics::woz_commands) {
        const auto cmd = parse_woz_command(message.payload.at("command").get<std::string>());
        if (!cmd) throw std::invalid_argument("unknown operator command");
        if (message.payload.contains("command_id")) {
            const std::string id = message.payload.at("command_id").dump();
            if (!seen_woz_ids_.insert(message.node_id + "/" + id).second) {
                ++stats_.woz_duplicates;
                return;
            }
        }
        ++stats_.woz_commands;
        apply(GameEvent::woz_command(*cmd, now));
    }
}

void GameNode::apply(const GameEvent& event) {
    const GameState before = session_.state();
    const auto commands = session_.handle(event);
    if (!commands.empty()) {
        pending_.clear();
        for (const auto& c : commands) pending_.insert(c.command_id);
    }
    for (const auto& c : commands) handle_.publish(peripheral_topic(c.kind), to_json(c));
    handle_.publish(topics::game_events, to_json(session_.log().records.back()));
    if (session_.state() != before) publish_state();
    sync_wait_timer(before, session_.state());
    if (finished() && heartbeat_timer_) {
        loop_.cancel(*heartbeat_timer_);
        heartbeat_timer_.reset();
    }
}

void GameNode::sync_wait_timer(const GameState& before, const GameState& after) {
    const bool waiting = after.phase == Phase::waiting_for_imitation;
    const bool fresh = waiting && (before.phase != Phase::waiting_for_imitation || before.line != after.line);
    auto disarm = [this] {
        if (wait_timer_) loop_.cancel(*wait_timer_);
        wait_timer_.reset();
    };

    if (!waiting) {
        disarm();
        return;
    }
    if (fresh) {
        disarm();
        wait_remaining_ms_ = session_.script().lines[after.line].wait_timeout_ms;
    }
    if (after.paused) {
        if (wait_timer_) {
            wait_remaining_ms_ = std::max<std::int64_t>(0, wait_deadline_ms_ - loop_.now_ms());
            disarm();
        }
        return;
    }
    if (!wait_timer_) {
        wait_deadline_ms_ = loop_.now_ms() + wait_remaining_ms_;
        const std::size_t line = after.line;
        wait_timer_ = loop_.schedule_at(wait_deadline_ms_, [this, line] {
            wait_timer_.reset();
            apply(GameEvent::timeout(line, loop_.now_ms()));
        });
    }
}

void GameNode::publish_state() {
    const GameState& s = session_.state();
    json payload = to_json(s);
    const auto& lines = session_.script().lines;
    if (s.line < lines.size()) {
        payload["lyric_text"] = lines[s.line].lyric_text;
        payload["target_pose"] = lines[s.line].pose_class;
    }
    payload["total_lines"] = lines.size();
    handle_.publish(topics::game_state, std::move(payload));
}

void GameNode::heartbeat() {
    heartbeat_timer_.reset();
    if (finished()) return;
    publish_state();
    heartbeat_timer_ = loop_.schedule_after(options_.state_publish_interval_ms, [this] { heartbeat(); });
}

}  // namespace rhyme_mimic
