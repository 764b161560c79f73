#ifndef RHYME_MIMIC_GAME_NODE_HPP
#define RHYME_MIMIC_GAME_NODE_HPP

#include <optional>
#include <set>
#include <string>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/event_loop.hpp"
#include "rhyme_mimic/game_engine.hpp"

namespace rhyme_mimic {

struct GameNodeOptions {
    std::string session_id = "session";
    /// Re-publishes game/state this often so late observers catch up; 0 disables.
    std::int64_t state_publish_interval_ms = 1000;
};

struct GameNodeStats {
    std::size_t poses_forwarded = 0;
    std::size_t poses_dropped = 0;  // arrived outside an unpaused wait
    std::size_t acks = 0;
    std::size_t failed_acks = 0;
    std::size_t woz_commands = 0;
    std::size_t woz_duplicates = 0;
    std::size_t malformed = 0;
};

/// The master node: turns bus traffic and its own timers into game events,
/// steps the session, and publishes peripheral commands, state, and log records.
class GameNode final : public Node {
public:
    GameNode(MessageBus& bus, EventLoop& loop, RhymeScript script, GameNodeOptions options = {});

    std::string_view name() const override { return "game"; }
    std::size_t poll() override;

    /// Starts the session at the loop's current time.
    void start();
    /// Steps an event directly (e.g. an abort raised by a signal handler on the loop thread).
    void inject(GameEvent event);

    bool finished() const noexcept { return session_.state().phase == Phase::finished; }
    const GameSession& session() const noexcept { return session_; }
    const GameNodeStats& stats() const noexcept { return stats_; }

private:
    void apply(const GameEvent& event);
    void handle_message(const BusMessage& message);
    void sync_wait_timer(const GameState& before, const GameState& after);
    void publish_state();
    void heartbeat();

    NodeHandle handle_;
    EventLoop& loop_;
    GameSession session_;
    GameNodeOptions options_;
    GameNodeStats stats_;

    std::set<std::uint64_t> pending_;
    std::set<std::string> seen_woz_ids_;
    std::optional<EventLoop::TimerId> wait_timer_;
    std::int64_t wait_deadline_ms_ = 0;
    std::int64_t wait_remaining_ms_ = 0;
    std::optional<EventLoop::TimerId> heartbeat_timer_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_GAME_NODE_HPP
