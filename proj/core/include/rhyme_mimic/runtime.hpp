#ifndef RHYME_MIMIC_RUNTIME_HPP
#define RHYME_MIMIC_RUNTIME_HPP

#include <array>
#include <atomic>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rhyme_mimic/bus.hpp"
#include "rhyme_mimic/event_loop.hpp"
#include "rhyme_mimic/game_node.hpp"
#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/tcp_transport.hpp"
#include "rhyme_mimic/websocket_bridge.hpp"

namespace rhyme_mimic {

struct RuntimeOptions {
    ClockMode clock = ClockMode::virtual_time;
    LatencyModel latency{};
    ConfidenceThreshold threshold{};
    ReplayOptions replay{};
    GameNodeOptions game{};
    /// Resource refs the simulated peripherals can serve. Unset: every ref the script names.
    std::optional<std::set<std::string>> resources;
    /// Serve mode: expose the bus over TCP and/or the console websocket.
    std::optional<Endpoint> bus_endpoint;
    std::optional<Endpoint> ws_endpoint;
    BridgeOptions bridge{};
};

std::set<std::string> script_resources(const RhymeScript& script);

/// The whole node graph on one event loop: camera replay, pose node, the four
/// peripherals and the game node, optionally reachable over TCP and websocket.
class GameRuntime {
public:
    GameRuntime(GmmClassifier classifier, RhymeScript script, std::vector<StreamFrame> frames,
                RuntimeOptions options = {});
    ~GameRuntime();

    GameRuntime(const GameRuntime&) = delete;
    GameRuntime& operator=(const GameRuntime&) = delete;

    /// Starts the session and the camera replay at the loop's current time.
    void start();
    /// Runs until the session finishes (or the deadline passes, or the loop stops).
    EventLoop::RunStatus run_until_finished(std::optional<std::int64_t> deadline_ms = std::nullopt);

    /// Async-signal-safe: the loop injects Woz(Abort) on its next turn.
    void request_abort() noexcept { abort_requested_.store(true); }

    EventLoop& loop() noexcept { return loop_; }
    MessageBus& bus() noexcept { return *bus_; }
    GameNode& game() noexcept { return *game_; }
    PoseNode& pose() noexcept { return *pose_; }
    ReplayNode& replay() noexcept { return *replay_; }
    PeripheralNode& peripheral(PeripheralKind kind) noexcept { return *peripherals_[static_cast<std::size_t>(kind)]; }
    const GmmClassifier& classifier() const noexcept { return *classifier_; }
    TcpBusServer* tcp_server() noexcept { return tcp_.get(); }
    WebsocketBridge* bridge() noexcept { return bridge_.get(); }

private:
    class AbortNode;

    static_assert(std::atomic<bool>::is_always_lock_free);
    std::atomic<bool> abort_requested_{false};
    EventLoop loop_;
    std::unique_ptr<MessageBus> bus_;
    std::unique_ptr<GmmClassifier> classifier_;
    std::unique_ptr<PoseNode> pose_;
    std::array<std::unique_ptr<PeripheralNode>, 4> peripherals_;
    std::unique_ptr<ReplayNode> replay_;
    std::unique_ptr<GameNode> game_;
    std::unique_ptr<AbortNode> abort_node_;
    std::unique_ptr<TcpBusServer> tcp_;
    std::unique_ptr<WebsocketBridge> bridge_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_RUNTIME_HPP
