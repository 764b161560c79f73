#include "rhyme_mimic/websocket_bridge.hpp"

#include <atomic>
#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace rhyme_mimic {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

namespace {
constexpr auto pump_interval = std::chrono::milliseconds(5);
}

class WebsocketBridge::Impl {
public:
    class Session : public std::enable_shared_from_this<Session> {
    public:
        Session(Impl& bridge, tcp::socket socket)
            : bridge_(bridge), ws_(std::move(socket)), pump_(ws_.get_executor()) {}

        void start() {
            auto self = shared_from_this();
            ws_.text(true);
            ws_.async_accept([this, self](beast::error_code ec) {
                if (ec) {
                    close();
                    return;
                }
                try {
                    handle_ = bridge_.bus_.connect_fresh("console");
                    for (const auto& t : bridge_.options_.topics) handle_.subscribe(t);
                } catch (const BusError& e) {
                    std::cerr << "[ws] cannot attach console: " << e.what() << '\n';
                    close();
                    return;
                }
                if (bridge_.last_state_) enqueue(encode_envelope(*bridge_.last_state_));
                read_next();
                pump();
            });
        }

        void close() {
            if (closed_) return;
            closed_ = true;
            pump_.cancel();
            beast::error_code ignored;
            beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ignored);
            beast::get_lowest_layer(ws_).close(ignored);
            handle_.close();
            bridge_.forget(this);
        }

    private:
        void read_next() {
            auto self = shared_from_this();
            ws_.async_read(buffer_, [this, self](beast::error_code ec, std::size_t) {
                if (closed_) return;
                if (ec) {
                    close();
                    return;
                }
                const std::string text = beast::buffers_to_string(buffer_.data());
                buffer_.consume(buffer_.size());
                if (!on_text(text)) return;
                read_next();
            });
        }

        bool on_text(const std::string& text) {
            try {
                BusMessage m = decode_envelope(text);
                if (m.topic != topics::woz_commands) {
                    enqueue(diagnostic("rejected", "consoles may only publish on woz/commands"));
                    return true;
                }
                handle_.publish(m.topic, std::move(m.payload));
                return true;
            } catch (const BusError& e) {
                std::cerr << "[ws] " << handle_.id() << ": " << e.what() << '\n';
                enqueue(diagnostic("protocol_error", e.what()));
                return true;
            }
        }

        std::string diagnostic(const std::string& event, const std::string& reason) {
            return encode_envelope({std::string(topics::diagnostics), ++local_seq_, 0, "ws-bridge",
                                    json{{"event", event}, {"reason", reason}}});
        }

        void pump() {
            if (closed_) return;
            try {
                for (auto& m : handle_.drain()) {
                    if (m.topic == topics::pose_frames) {
                        if (last_frame_ms_ && m.timestamp_ms - *last_frame_ms_ < bridge_.options_.frame_interval_ms) {
                            continue;
                        }
                        last_frame_ms_ = m.timestamp_ms;
                    }
                    enqueue(encode_envelope(m));
                }
            } catch (const BusError&) {
                close();
                return;
            }
            auto self = shared_from_this();
            pump_.expires_after(pump_interval);
            pump_.async_wait([this, self](beast::error_code ec) {
                if (!ec) pump();
            });
        }

        void enqueue(std::string text) {
            outbox_.push_back(std::move(text));
            if (outbox_.size() == 1) write_next();
        }

        void write_next() {
            auto self = shared_from_this();
            ws_.async_write(asio::buffer(outbox_.front()), [this, self](beast::error_code ec, std::size_t) {
                if (closed_) return;
                if (ec) {
                    close();
                    return;
                }
                outbox_.pop_front();
                if (!outbox_.empty()) write_next();
            });
        }

        Impl& bridge_;
        websocket::stream<tcp::socket> ws_;
        asio::steady_timer pump_;
        beast::flat_buffer buffer_;
        std::deque<std::string> outbox_;
        NodeHandle handle_;
        std::optional<std::int64_t> last_frame_ms_;
        std::uint64_t local_seq_ = 0;
        bool closed_ = false;
    };

    Impl(MessageBus& bus, const Endpoint& endpoint, BridgeOptions options)
        : bus_(bus),
          options_(std::move(options)),
          acceptor_(io_, tcp::endpoint(asio::ip::make_address(endpoint.host == "localhost" ? "127.0.0.1" : endpoint.host),
                                       endpoint.port)),
          tap_(bus.connect_fresh("ws-bridge")),
          tap_timer_(io_) {
        tap_.subscribe(topics::game_state);
        port_ = acceptor_.local_endpoint().port();
        accept_next();
        tap();
        thread_ = std::thread([this] { io_.run(); });
    }

    ~Impl() { stop(); }

    void stop() {
        if (stopped_.exchange(true)) return;
        asio::post(io_, [this] {
            beast::error_code ignored;
            acceptor_.close(ignored);
            tap_timer_.cancel();
            auto sessions = sessions_;
            for (auto& [ptr, s] : sessions) s->close();
        });
        asio::post(io_, [this] { io_.stop(); });
        if (thread_.joinable()) thread_.join();
    }

    void accept_next() {
        acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto session = std::make_shared<Session>(*this, std::move(socket));
            {
                std::lock_guard lock(mutex_);
                sessions_.emplace(session.get(), session);
            }
            session->start();
            accept_next();
        });
    }

    // Keeps the latest game/state so a fresh console renders immediately.
    void tap() {
        try {
            for (auto& m : tap_.drain()) last_state_ = std::move(m);
        } catch (const BusError&) {
            return;
        }
        tap_timer_.expires_after(pump_interval);
        tap_timer_.async_wait([this](beast::error_code ec) {
            if (!ec) tap();
        });
    }

    void forget(Session* s) {
        std::lock_guard lock(mutex_);
        sessions_.erase(s);
    }

    MessageBus& bus_;
    BridgeOptions options_;
    asio::io_context io_;
    tcp::acceptor acceptor_;
    NodeHandle tap_;
    asio::steady_timer tap_timer_;
    std::optional<BusMessage> last_state_;
    std::thread thread_;
    std::uint16_t port_ = 0;
    mutable std::mutex mutex_;
    std::map<Session*, std::shared_ptr<Session>> sessions_;
    std::atomic<bool> stopped_{false};
};

WebsocketBridge::WebsocketBridge(MessageBus& bus, const Endpoint& endpoint, BridgeOptions options)
    : impl_(std::make_unique<Impl>(bus, endpoint, std::move(options))) {}

WebsocketBridge::~WebsocketBridge() = default;

std::uint16_t WebsocketBridge::port() const noexcept {
    return impl_->port_;
}

std::size_t WebsocketBridge::connected_consoles() const {
    std::lock_guard lock(impl_->mutex_);
    return impl_->sessions_.size();
}

void WebsocketBridge::stop() {
    impl_->stop();
}

}  // namespace rhyme_mimic
