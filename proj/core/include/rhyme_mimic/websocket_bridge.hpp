#ifndef RHYME_MIMIC_WEBSOCKET_BRIDGE_HPP
#define RHYME_MIMIC_WEBSOCKET_BRIDGE_HPP

#include <memory>
#include <string>
#include <vector>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/tcp_transport.hpp"

namespace rhyme_mimic {

struct BridgeOptions {
    std::vector<std::string> topics = {
        std::string(topics::game_state),     std::string(topics::game_events), std::string(topics::pose_classified),
        std::string(topics::pose_frames),    std::string(topics::peripheral_ack),
        std::string(topics::diagnostics),
    };
    /// pose/frames forwarded to each console at most this often.
    std::int64_t frame_interval_ms = 100;
};

/// Console endpoint: one bus envelope per websocket text message, in both
/// directions. Consoles observe the configured topics and may publish only on
/// woz/commands. A new console immediately receives the latest game/state.
class WebsocketBridge {
public:
    WebsocketBridge(MessageBus& bus, const Endpoint& endpoint, BridgeOptions options = {});
    ~WebsocketBridge();

    WebsocketBridge(const WebsocketBridge&) = delete;
    WebsocketBridge& operator=(const WebsocketBridge&) = delete;

    std::uint16_t port() const noexcept;
    std::size_t connected_consoles() const;
    void stop();

    class Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_WEBSOCKET_BRIDGE_HPP
