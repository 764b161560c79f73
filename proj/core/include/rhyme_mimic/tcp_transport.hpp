#ifndef RHYME_MIMIC_TCP_TRANSPORT_HPP
#define RHYME_MIMIC_TCP_TRANSPORT_HPP

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "rhyme_mimic/bus.hpp"

namespace rhyme_mimic {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    /// "host:port"; throws std::invalid_argument otherwise.
    static Endpoint parse(std::string_view text);
    std::string to_string() const;
};

inline constexpr std::string_view default_bus_address = "127.0.0.1:7001";
inline constexpr std::string_view default_ws_address = "127.0.0.1:7002";

// Control envelopes on the TCP transport. A client opens with bus/hello
// {node_id}; the server answers bus/welcome {node_id} carrying the fresh id it
// assigned. Afterwards clients send bus/subscribe or bus/unsubscribe {topic}.
namespace control_topics {
inline constexpr std::string_view hello = "bus/hello";
inline constexpr std::string_view welcome = "bus/welcome";
inline constexpr std::string_view subscribe = "bus/subscribe";
inline constexpr std::string_view unsubscribe = "bus/unsubscribe";
}  // namespace control_topics

/// Exposes a bus to remote nodes: newline-delimited envelopes over TCP, one
/// bus node per connection. A departing client is unsubscribed and announced
/// on bus/diagnostics.
class TcpBusServer {
public:
    TcpBusServer(MessageBus& bus, const Endpoint& endpoint);
    ~TcpBusServer();

    TcpBusServer(const TcpBusServer&) = delete;
    TcpBusServer& operator=(const TcpBusServer&) = delete;

    /// Bound port (useful with port 0).
    std::uint16_t port() const noexcept;
    std::size_t connected_clients() const;
    std::size_t protocol_errors() const;
    void stop();

    class Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// Client side of the TCP transport, with the same surface as NodeHandle.
class RemoteNode {
public:
    /// Throws BusError(connect_refused) if nothing listens at `endpoint`.
    static RemoteNode connect(const Endpoint& endpoint, std::string_view requested_id,
                              std::chrono::milliseconds welcome_timeout = std::chrono::milliseconds(2000));

    RemoteNode(RemoteNode&&) noexcept;
    RemoteNode& operator=(RemoteNode&&) noexcept;
    ~RemoteNode();

    /// Id assigned by the server (fresh on every connection).
    const std::string& id() const;
    bool connected() const;

    void subscribe(std::string_view topic);
    void unsubscribe(std::string_view topic);
    std::uint64_t publish(std::string_view topic, nlohmann::json payload);
    /// Sends a raw line, bypassing envelope encoding (fault injection).
    void send_raw(std::string_view line);

    std::optional<BusMessage> try_receive();
    std::optional<BusMessage> receive_for(std::chrono::milliseconds timeout);
    /// Waits for the next message on `topic`, discarding others.
    std::optional<BusMessage> receive_topic(std::string_view topic, std::chrono::milliseconds timeout);

    /// Abrupt disconnect.
    void close();

    class Impl;

private:
    explicit RemoteNode(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_TCP_TRANSPORT_HPP
