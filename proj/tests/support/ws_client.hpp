#ifndef RHYME_MIMIC_TEST_WS_CLIENT_HPP
#define RHYME_MIMIC_TEST_WS_CLIENT_HPP

#include <chrono>
#include <optional>
#include <string>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "rhyme_mimic/bus.hpp"

namespace oracle {

/// Minimal console: blocking handshake and writes, reads bounded by a timeout.
class WsClient {
public:
    explicit WsClient(std::uint16_t port) : ws_(io_) {
        namespace asio = boost::asio;
        asio::ip::tcp::resolver resolver(io_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1:" + std::to_string(port), "/");
        ws_.text(true);
    }

    ~WsClient() {
        boost::beast::error_code ignored;
        ws_.next_layer().close(ignored);
    }

    void send(const rhyme_mimic::BusMessage& m) { send_text(rhyme_mimic::encode_envelope(m)); }
    void send_text(const std::string& text) { ws_.write(boost::asio::buffer(text)); }

    void send_woz(const std::string& command, const std::string& command_id = {}) {
        nlohmann::json payload = {{"command", command}};
        if (!command_id.empty()) payload["command_id"] = command_id;
        send({std::string(rhyme_mimic::topics::woz_commands), ++seq_, 0, "console", payload});
    }

    /// Next envelope, or nullopt on timeout or a closed connection.
    std::optional<rhyme_mimic::BusMessage> read(std::chrono::milliseconds timeout) {
        if (!pending_) {
            pending_ = true;
            done_ = false;
            ws_.async_read(buffer_, [this](boost::beast::error_code ec, std::size_t) {
                done_ = true;
                failed_ = static_cast<bool>(ec);
            });
        }
        io_.restart();
        io_.run_for(timeout);
        if (!done_) return std::nullopt;
        pending_ = false;
        if (failed_) return std::nullopt;
        const std::string text = boost::beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        return rhyme_mimic::decode_envelope(text);
    }

    /// Reads until a message satisfies `pred` or the time runs out.
    template <typename Pred>
    std::optional<rhyme_mimic::BusMessage> read_until(Pred pred, std::chrono::milliseconds timeout) {
        const auto end = std::chrono::steady_clock::now() + timeout;
        while (true) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(end - std::chrono::steady_clock::now());
            if (left.count() <= 0) return std::nullopt;
            auto m = read(left);
            if (!m) return std::nullopt;
            if (pred(*m)) return m;
        }
    }

private:
    boost::asio::io_context io_;
    boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
    boost::beast::flat_buffer buffer_;
    bool pending_ = false;
    bool done_ = false;
    bool failed_ = false;
    std::uint64_t seq_ = 0;
};

}  // namespace oracle

#endif
