#ifndef RHYME_MIMIC_BUS_HPP
#define RHYME_MIMIC_BUS_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rhyme_mimic/event_loop.hpp"

namespace rhyme_mimic {

namespace topics {
inline constexpr std::string_view pose_frames = "pose/frames";
inline constexpr std::string_view pose_classified = "pose/classified";
inline constexpr std::string_view game_state = "game/state";
inline constexpr std::string_view game_events = "game/events";
inline constexpr std::string_view peripheral_display = "peripheral/display";
inline constexpr std::string_view peripheral_audio = "peripheral/audio";
inline constexpr std::string_view peripheral_tts = "peripheral/tts";
inline constexpr std::string_view peripheral_motion = "peripheral/motion";
inline constexpr std::string_view peripheral_ack = "peripheral/ack";
inline constexpr std::string_view woz_commands = "woz/commands";
/// System topic: node departures, protocol errors.
inline constexpr std::string_view diagnostics = "bus/diagnostics";

bool in_directory(std::string_view topic) noexcept;
/// Never dropped on inbox overflow.
bool control_critical(std::string_view topic) noexcept;
}  // namespace topics

struct BusMessage {
    std::string topic;
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    std::string node_id;
    nlohmann::json payload;

    friend bool operator==(const BusMessage&, const BusMessage&) = default;
};

/// One envelope per line on the TCP transport and per text frame on the websocket bridge.
std::string encode_envelope(const BusMessage& message);
/// Throws BusError(protocol_error) on anything that is not a well-formed envelope.
BusMessage decode_envelope(std::string_view line);

class BusError : public std::runtime_error {
public:
    enum class Kind { bus_closed, connect_refused, protocol_error, duplicate_node };

    BusError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct BusStats {
    std::uint64_t published = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::set<std::string> unknown_topics;
};

inline constexpr std::size_t default_inbox_capacity = 1024;

class NodeHandle;

/// Topic-based publish/subscribe. Publishers may be on any thread; each
/// handle's inbox has a single consumer.
class MessageBus {
public:
    explicit MessageBus(const Clock& clock, std::size_t inbox_capacity = default_inbox_capacity);
    ~MessageBus();

    MessageBus(const MessageBus&) = delete;
    MessageBus& operator=(const MessageBus&) = delete;

    /// Throws BusError(duplicate_node) if the id is live, BusError(bus_closed) after close().
    NodeHandle connect(std::string node_id);
    /// Connects under `prefix#n` with a never-reused n.
    NodeHandle connect_fresh(std::string_view prefix);

    /// Called after every publish; used to wake an event loop.
    void set_notifier(std::function<void()> notify);

    void close();
    bool closed() const;
    BusStats stats() const;
    std::vector<std::string> nodes() const;

    struct State;

private:
    std::shared_ptr<State> state_;
};

class NodeHandle {
public:
    NodeHandle() = default;
    NodeHandle(NodeHandle&&) noexcept;
    NodeHandle& operator=(NodeHandle&&) noexcept;
    ~NodeHandle();

    const std::string& id() const noexcept { return id_; }
    bool valid() const noexcept { return state_ != nullptr; }

    /// Idempotent. Affects messages published after the call returns.
    void subscribe(std::string_view topic);
    void unsubscribe(std::string_view topic);
    std::set<std::string> subscriptions() const;

    /// Returns the seq assigned to the message.
    std::uint64_t publish(std::string_view topic, nlohmann::json payload);

    std::optional<BusMessage> try_receive();
    std::optional<BusMessage> receive_for(std::chrono::milliseconds timeout);
    std::vector<BusMessage> drain();
    std::size_t pending() const;
    std::uint64_t dropped() const;

    /// Unregisters from the bus; later calls throw BusError(bus_closed).
    void close();

private:
    friend class MessageBus;
    NodeHandle(std::shared_ptr<MessageBus::State> state, std::string id);

    std::shared_ptr<MessageBus::State> state_;
    std::string id_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_BUS_HPP
