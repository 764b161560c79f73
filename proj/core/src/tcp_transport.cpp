#include "rhyme_mimic/tcp_transport.hpp"

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <deque>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>

namespace rhyme_mimic {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

namespace {

constexpr auto pump_interval = std::chrono::milliseconds(5);

std::int64_t wall_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

tcp::endpoint resolve(const Endpoint& e) {
    boost::system::error_code ec;
    const auto address = asio::ip::make_address(e.host == "localhost" ? "127.0.0.1" : e.host, ec);
    if (ec) throw std::invalid_argument("bad host address '" + e.host + "'");
    return {address, e.port};
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw std::invalid_argument("address must look like host:port, got '" + std::string(text) + "'");
    }
    unsigned port = 0;
    const auto digits = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port > 65535) {
        throw std::invalid_argument("bad port in address '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string Endpoint::to_string() const {
    return host + ":" + std::to_string(port);
}

// ---------------------------------------------------------------- server

class TcpBusServer::Impl {
public:
    class Session : public std::enable_shared_from_this<Session> {
    public:
        Session(Impl& server, tcp::socket socket)
            : server_(server), socket_(std::move(socket)), pump_(socket_.get_executor()) {}

        void start() { read_next(); }

        void close(const std::string& reason) {
            if (closed_) return;
            closed_ = true;
            boost::system::error_code ignored;
            pump_.cancel();
            socket_.shutdown(tcp::socket::shutdown_both, ignored);
            socket_.close(ignored);
            if (handle_.valid()) {
                const std::string id = handle_.id();
                handle_.close();
                server_.announce_departure(id, reason);
            }
            server_.forget(this);
        }

    private:
        void read_next() {
            auto self = shared_from_this();
            asio::async_read_until(socket_, buffer_, '\n', [this, self](boost::system::error_code ec, std::size_t n) {
                if (closed_) return;
                if (ec) {
                    close(ec == asio::error::eof ? "disconnected" : ec.message());
                    return;
                }
                std::string line(asio::buffers_begin(buffer_.data()),
                                 asio::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n));
                buffer_.consume(n);
                while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
                if (!line.empty() && !on_line(line)) return;
                read_next();
            });
        }

        bool on_line(const std::string& line) {
            BusMessage m;
            try {
                m = decode_envelope(line);
            } catch (const BusError& e) {
                ++server_.protocol_errors_;
                std::cerr << "[tcp] protocol error from " << (handle_.valid() ? handle_.id() : "unidentified client")
                          << ": " << e.what() << '\n';
                close("protocol error");
                return false;
            }
            try {
                if (!handle_.valid()) {
                    if (m.topic != control_topics::hello) {
                        ++server_.protocol_errors_;
                        close("protocol error: expected bus/hello");
                        return false;
                    }
                    const std::string prefix = m.payload.is_object() ? m.payload.value("node_id", "remote") : "remote";
                    handle_ = server_.bus_.connect_fresh(prefix.empty() ? "remote" : prefix);
                    enqueue(encode_envelope({std::string(control_topics::welcome), 1, server_.bus_clock_ms(), "tcp",
                                             json{{"node_id", handle_.id()}}}));
                    pump();
                } else if (m.topic == control_topics::subscribe) {
                    handle_.subscribe(m.payload.at("topic").get<std::string>());
                } else if (m.topic == control_topics::unsubscribe) {
                    handle_.unsubscribe(m.payload.at("topic").get<std::string>());
                } else {
                    handle_.publish(m.topic, std::move(m.payload));
                }
            } catch (const BusError& e) {
                close(e.what());
                return false;
            } catch (const std::exception& e) {
                ++server_.protocol_errors_;
                close(std::string("protocol error: ") + e.what());
                return false;
            }
            return true;
        }

        void pump() {
            if (closed_) return;
            try {
                for (auto& m : handle_.drain()) enqueue(encode_envelope(m));
            } catch (const BusError&) {
                close("bus closed");
                return;
            }
            auto self = shared_from_this();
            pump_.expires_after(pump_interval);
            pump_.async_wait([this, self](boost::system::error_code ec) {
                if (!ec) pump();
            });
        }

        void enqueue(std::string line) {
            line.push_back('\n');
            outbox_.push_back(std::move(line));
            if (outbox_.size() == 1) write_next();
        }

        void write_next() {
            auto self = shared_from_this();
            asio::async_write(socket_, asio::buffer(outbox_.front()), [this, self](boost::system::error_code ec, std::size_t) {
                if (closed_) return;
                if (ec) {
                    close(ec.message());
                    return;
                }
                outbox_.pop_front();
                if (!outbox_.empty()) write_next();
            });
        }

        Impl& server_;
        tcp::socket socket_;
        asio::steady_timer pump_;
        asio::streambuf buffer_;
        std::deque<std::string> outbox_;
        NodeHandle handle_;
        bool closed_ = false;
    };

    Impl(MessageBus& bus, const Endpoint& endpoint)
        : bus_(bus), acceptor_(io_, resolve(endpoint)), diagnostics_(bus.connect_fresh("tcp-server")) {
        port_ = acceptor_.local_endpoint().port();
        accept_next();
        thread_ = std::thread([this] { io_.run(); });
    }

    ~Impl() { stop(); }

    void stop() {
        if (stopped_.exchange(true)) return;
        asio::post(io_, [this] {
            boost::system::error_code ignored;
            acceptor_.close(ignored);
            auto sessions = sessions_;
            for (auto& [ptr, s] : sessions) s->close("server stopping");
        });
        asio::post(io_, [this] { io_.stop(); });
        if (thread_.joinable()) thread_.join();
    }

    void accept_next() {
        acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
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

    void forget(Session* s) {
        std::lock_guard lock(mutex_);
        sessions_.erase(s);
    }

    void announce_departure(const std::string& id, const std::string& reason) {
        try {
            diagnostics_.publish(topics::diagnostics, json{{"event", "node_left"}, {"node_id", id}, {"reason", reason}});
        } catch (const BusError&) {
        }
    }

    std::int64_t bus_clock_ms() const { return wall_ms(); }

    MessageBus& bus_;
    asio::io_context io_;
    tcp::acceptor acceptor_;
    NodeHandle diagnostics_;
    std::thread thread_;
    std::uint16_t port_ = 0;
    mutable std::mutex mutex_;
    std::map<Session*, std::shared_ptr<Session>> sessions_;
    std::atomic<std::size_t> protocol_errors_{0};
    std::atomic<bool> stopped_{false};
};

TcpBusServer::TcpBusServer(MessageBus& bus, const Endpoint& endpoint) : impl_(std::make_unique<Impl>(bus, endpoint)) {}

TcpBusServer::~TcpBusServer() = default;

std::uint16_t TcpBusServer::port() const noexcept {
    return impl_->port_;
}

std::size_t TcpBusServer::connected_clients() const {
    std::lock_guard lock(impl_->mutex_);
    return impl_->sessions_.size();
}

std::size_t TcpBusServer::protocol_errors() const {
    return impl_->protocol_errors_.load();
}

void TcpBusServer::stop() {
    impl_->stop();
}

// ---------------------------------------------------------------- client

class RemoteNode::Impl {
public:
    Impl() : socket_(io_), work_(asio::make_work_guard(io_)) {}

    ~Impl() { close(); }

    void connect(const Endpoint& endpoint) {
        boost::system::error_code ec;
        socket_.connect(resolve(endpoint), ec);
        if (ec) {
            throw BusError(BusError::Kind::connect_refused,
                           "cannot connect to " + endpoint.to_string() + ": " + ec.message());
        }
        connected_ = true;
        read_next();
        thread_ = std::thread([this] { io_.run(); });
    }

    void read_next() {
        asio::async_read_until(socket_, buffer_, '\n', [this](boost::system::error_code ec, std::size_t n) {
            if (ec) {
                mark_disconnected();
                return;
            }
            std::string line(asio::buffers_begin(buffer_.data()),
                             asio::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n));
            buffer_.consume(n);
            while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
            if (!line.empty()) {
                try {
                    BusMessage m = decode_envelope(line);
                    std::lock_guard lock(mutex_);
                    if (m.topic == control_topics::welcome && id_.empty()) {
                        id_ = m.payload.at("node_id").get<std::string>();
                    } else {
                        inbox_.push_back(std::move(m));
                    }
                } catch (const std::exception& e) {
                    std::cerr << "[tcp-client] dropping malformed line: " << e.what() << '\n';
                }
                cv_.notify_all();
            }
            read_next();
        });
    }

    void mark_disconnected() {
        {
            std::lock_guard lock(mutex_);
            connected_ = false;
        }
        cv_.notify_all();
    }

    void send_line(std::string line) {
        line.push_back('\n');
        asio::post(io_, [this, line = std::move(line)]() mutable {
            outbox_.push_back(std::move(line));
            if (outbox_.size() == 1) write_next();
        });
    }

    void write_next() {
        asio::async_write(socket_, asio::buffer(outbox_.front()), [this](boost::system::error_code ec, std::size_t) {
            if (ec) {
                outbox_.clear();
                mark_disconnected();
                return;
            }
            outbox_.pop_front();
            if (!outbox_.empty()) write_next();
        });
    }

    std::uint64_t send(std::string_view topic, json payload) {
        std::uint64_t seq = 0;
        {
            std::lock_guard lock(mutex_);
            if (!connected_) throw BusError(BusError::Kind::bus_closed, "remote node is disconnected");
            seq = ++seqs_[std::string(topic)];
        }
        send_line(encode_envelope({std::string(topic), seq, wall_ms(), id_.empty() ? pending_id_ : id_, std::move(payload)}));
        return seq;
    }

    void close() {
        if (closed_.exchange(true)) return;
        asio::post(io_, [this] {
            boost::system::error_code ignored;
            socket_.shutdown(tcp::socket::shutdown_both, ignored);
            socket_.close(ignored);
        });
        work_.reset();
        if (thread_.joinable()) thread_.join();
        mark_disconnected();
    }

    asio::io_context io_;
    tcp::socket socket_;
    asio::executor_work_guard<asio::io_context::executor_type> work_;
    asio::streambuf buffer_;
    std::deque<std::string> outbox_;
    std::thread thread_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<BusMessage> inbox_;
    std::map<std::string, std::uint64_t> seqs_;
    std::string id_;
    std::string pending_id_;
    bool connected_ = false;
    std::atomic<bool> closed_{false};
};

RemoteNode::RemoteNode(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
RemoteNode::RemoteNode(RemoteNode&&) noexcept = default;
RemoteNode& RemoteNode::operator=(RemoteNode&&) noexcept = default;
RemoteNode::~RemoteNode() = default;

RemoteNode RemoteNode::connect(const Endpoint& endpoint, std::string_view requested_id,
                               std::chrono::milliseconds welcome_timeout) {
    auto impl = std::make_unique<Impl>();
    impl->pending_id_ = std::string(requested_id);
    impl->connect(endpoint);
    impl->send(control_topics::hello, json{{"node_id", requested_id}});
    std::unique_lock lock(impl->mutex_);
    if (!impl->cv_.wait_for(lock, welcome_timeout, [&] { return !impl->id_.empty() || !impl->connected_; }) ||
        impl->id_.empty()) {
        lock.unlock();
        impl->close();
        throw BusError(BusError::Kind::connect_refused, "no welcome from " + endpoint.to_string());
    }
    lock.unlock();
    return RemoteNode(std::move(impl));
}

const std::string& RemoteNode::id() const {
    return impl_->id_;
}

bool RemoteNode::connected() const {
    std::lock_guard lock(impl_->mutex_);
    return impl_->connected_;
}

void RemoteNode::subscribe(std::string_view topic) {
    impl_->send(control_topics::subscribe, json{{"topic", topic}});
}

void RemoteNode::unsubscribe(std::string_view topic) {
    impl_->send(control_topics::unsubscribe, json{{"topic", topic}});
}

std::uint64_t RemoteNode::publish(std::string_view topic, nlohmann::json payload) {
    return impl_->send(topic, std::move(payload));
}

void RemoteNode::send_raw(std::string_view line) {
    impl_->send_line(std::string(line));
}

std::optional<BusMessage> RemoteNode::try_receive() {
    std::lock_guard lock(impl_->mutex_);
    if (impl_->inbox_.empty()) return std::nullopt;
    BusMessage m = std::move(impl_->inbox_.front());
    impl_->inbox_.pop_front();
    return m;
}

std::optional<BusMessage> RemoteNode::receive_for(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mutex_);
    if (!impl_->cv_.wait_for(lock, timeout, [&] { return !impl_->inbox_.empty(); })) return std::nullopt;
    BusMessage m = std::move(impl_->inbox_.front());
    impl_->inbox_.pop_front();
    return m;
}

std::optional<BusMessage> RemoteNode::receive_topic(std::string_view topic, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        auto m = receive_for(left);
        if (!m) return std::nullopt;
        if (m->topic == topic) return m;
    }
}

void RemoteNode::close() {
    impl_->close();
}

}  // namespace rhyme_mimic
