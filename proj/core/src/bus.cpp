#include "rhyme_mimic/bus.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>

namespace rhyme_mimic {

namespace topics {

bool in_directory(std::string_view topic) noexcept {
    static constexpr std::string_view all[] = {pose_frames,        pose_classified,   game_state,    game_events,
                                               peripheral_display, peripheral_audio,  peripheral_tts, peripheral_motion,
                                               peripheral_ack,     woz_commands,      diagnostics};
    return std::find(std::begin(all), std::end(all), topic) != std::end(all);
}

bool control_critical(std::string_view topic) noexcept {
    return topic == game_events || topic == woz_commands;
}

}  // namespace topics

using json = nlohmann::json;

std::string encode_envelope(const BusMessage& m) {
    return json{{"topic", m.topic},
                {"seq", m.seq},
                {"timestamp_ms", m.timestamp_ms},
                {"node_id", m.node_id},
                {"payload", m.payload}}
        .dump();
}

BusMessage decode_envelope(std::string_view line) {
    auto fail = [](const std::string& what) -> BusError {
        return BusError(BusError::Kind::protocol_error, "malformed envelope: " + what);
    };
    const json doc = json::parse(line.begin(), line.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw fail("not a record");
    const auto topic = doc.find("topic");
    const auto seq = doc.find("seq");
    const auto ts = doc.find("timestamp_ms");
    const auto node = doc.find("node_id");
    const auto payload = doc.find("payload");
    if (topic == doc.end() || !topic->is_string() || topic->get<std::string>().empty()) throw fail("bad topic");
    if (seq == doc.end() || !seq->is_number_unsigned()) throw fail("bad seq");
    if (ts == doc.end() || !ts->is_number_integer()) throw fail("bad timestamp_ms");
    if (node == doc.end() || !node->is_string()) throw fail("bad node_id");
    if (payload == doc.end()) throw fail("missing payload");
    return {topic->get<std::string>(), seq->get<std::uint64_t>(), ts->get<std::int64_t>(), node->get<std::string>(),
            *payload};
}

namespace {

struct Inbox {
    explicit Inbox(std::size_t cap) : capacity(cap) {}

    // Caller holds the bus mutex, so per-publisher order is the push order.
    void push(BusMessage m) {
        {
            std::lock_guard lock(mutex);
            if (queue.size() >= capacity) evict_one();
            queue.push_back(std::move(m));
        }
        cv.notify_one();
    }

    void evict_one() {
        auto victim = std::find_if(queue.begin(), queue.end(),
                                   [](const BusMessage& m) { return m.topic == topics::pose_frames; });
        if (victim == queue.end()) {
            victim = std::find_if(queue.begin(), queue.end(),
                                  [](const BusMessage& m) { return !topics::control_critical(m.topic); });
        }
        if (victim == queue.end()) return;  // all control-critical: grow past capacity
        queue.erase(victim);
        ++dropped;
    }

    std::mutex mutex;
    std::condition_variable cv;
    std::deque<BusMessage> queue;
    std::size_t capacity;
    std::uint64_t dropped = 0;
};

}  // namespace

struct MessageBus::State {
    State(const Clock& c, std::size_t cap) : clock(c), capacity(cap) {}

    const Clock& clock;
    std::size_t capacity;

    mutable std::mutex mutex;
    bool closed = false;
    std::map<std::string, std::shared_ptr<Inbox>> inboxes;
    std::map<std::string, std::set<std::string>, std::less<>> subscribers;
    std::map<std::pair<std::string, std::string>, std::uint64_t> seqs;
    std::map<std::string, std::uint64_t, std::less<>> fresh_counters;
    BusStats stats;
    std::function<void()> notify;

    std::shared_ptr<Inbox> inbox(const std::string& id) const {
        std::lock_guard lock(mutex);
        const auto it = inboxes.find(id);
        if (it == inboxes.end()) throw BusError(BusError::Kind::bus_closed, "node '" + id + "' is not connected");
        return it->second;
    }

    void require_open_locked(const std::string& id) const {
        if (closed) throw BusError(BusError::Kind::bus_closed, "bus is closed");
        if (!inboxes.contains(id)) throw BusError(BusError::Kind::bus_closed, "node '" + id + "' is not connected");
    }
};

MessageBus::MessageBus(const Clock& clock, std::size_t inbox_capacity)
    : state_(std::make_shared<State>(clock, inbox_capacity)) {}

MessageBus::~MessageBus() {
    close();
}

NodeHandle MessageBus::connect(std::string node_id) {
    std::lock_guard lock(state_->mutex);
    if (state_->closed) throw BusError(BusError::Kind::bus_closed, "bus is closed");
    if (node_id.empty()) throw std::invalid_argument("node id must be non-empty");
    if (state_->inboxes.contains(node_id)) {
        throw BusError(BusError::Kind::duplicate_node, "node id '" + node_id + "' already connected");
    }
    state_->inboxes.emplace(node_id, std::make_shared<Inbox>(state_->capacity));
    return NodeHandle(state_, std::move(node_id));
}

NodeHandle MessageBus::connect_fresh(std::string_view prefix) {
    std::string id;
    {
        std::lock_guard lock(state_->mutex);
        auto it = state_->fresh_counters.find(prefix);
        if (it == state_->fresh_counters.end()) it = state_->fresh_counters.emplace(std::string(prefix), 0).first;
        do {
            id = std::string(prefix) + "#" + std::to_string(++it->second);
        } while (state_->inboxes.contains(id));
    }
    return connect(std::move(id));
}

void MessageBus::set_notifier(std::function<void()> notify) {
    std::lock_guard lock(state_->mutex);
    state_->notify = std::move(notify);
}

void MessageBus::close() {
    std::vector<std::shared_ptr<Inbox>> inboxes;
    {
        std::lock_guard lock(state_->mutex);
        state_->closed = true;
        for (auto& [id, inbox] : state_->inboxes) inboxes.push_back(inbox);
    }
    for (auto& inbox : inboxes) inbox->cv.notify_all();
}

bool MessageBus::closed() const {
    std::lock_guard lock(state_->mutex);
    return state_->closed;
}

BusStats MessageBus::stats() const {
    std::lock_guard lock(state_->mutex);
    return state_->stats;
}

std::vector<std::string> MessageBus::nodes() const {
    std::lock_guard lock(state_->mutex);
    std::vector<std::string> out;
    for (const auto& [id, inbox] : state_->inboxes) out.push_back(id);
    return out;
}

NodeHandle::NodeHandle(std::shared_ptr<MessageBus::State> state, std::string id)
    : state_(std::move(state)), id_(std::move(id)) {}

NodeHandle::NodeHandle(NodeHandle&& other) noexcept
    : state_(std::move(other.state_)), id_(std::move(other.id_)) {
    other.state_.reset();
}

NodeHandle& NodeHandle::operator=(NodeHandle&& other) noexcept {
    if (this != &other) {
        close();
        state_ = std::move(other.state_);
        id_ = std::move(other.id_);
        other.state_.reset();
    }
    return *this;
}

NodeHandle::~NodeHandle() {
    close();
}

void NodeHandle::subscribe(std::string_view topic) {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    if (topic.empty()) throw std::invalid_argument("topic must be non-empty");
    std::lock_guard lock(state_->mutex);
    state_->require_open_locked(id_);
    state_->subscribers[std::string(topic)].insert(id_);
}

void NodeHandle::unsubscribe(std::string_view topic) {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    std::lock_guard lock(state_->mutex);
    state_->require_open_locked(id_);
    if (auto it = state_->subscribers.find(topic); it != state_->subscribers.end()) it->second.erase(id_);
}

std::set<std::string> NodeHandle::subscriptions() const {
    std::set<std::string> out;
    if (!state_) return out;
    std::lock_guard lock(state_->mutex);
    for (const auto& [topic, subs] : state_->subscribers) {
        if (subs.contains(id_)) out.insert(topic);
    }
    return out;
}

std::uint64_t NodeHandle::publish(std::string_view topic, nlohmann::json payload) {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    if (topic.empty()) throw std::invalid_argument("topic must be non-empty");
    std::function<void()> notify;
    std::uint64_t seq = 0;
    {
        std::lock_guard lock(state_->mutex);
        state_->require_open_locked(id_);
        seq = ++state_->seqs[{id_, std::string(topic)}];
        ++state_->stats.published;
        if (!topics::in_directory(topic)) state_->stats.unknown_topics.insert(std::string(topic));

        BusMessage message{std::string(topic), seq, state_->clock.now_ms(), id_, std::move(payload)};
        if (const auto it = state_->subscribers.find(topic); it != state_->subscribers.end()) {
            for (const auto& sub : it->second) {
                const auto inbox = state_->inboxes.find(sub);
                if (inbox == state_->inboxes.end()) continue;
                const auto before = inbox->second->dropped;
                inbox->second->push(message);
                state_->stats.dropped += inbox->second->dropped - before;
                ++state_->stats.delivered;
            }
        }
        notify = state_->notify;
    }
    if (notify) notify();
    return seq;
}

std::optional<BusMessage> NodeHandle::try_receive() {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    const auto inbox = state_->inbox(id_);
    std::lock_guard lock(inbox->mutex);
    if (inbox->queue.empty()) return std::nullopt;
    BusMessage m = std::move(inbox->queue.front());
    inbox->queue.pop_front();
    return m;
}

std::optional<BusMessage> NodeHandle::receive_for(std::chrono::milliseconds timeout) {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    const auto inbox = state_->inbox(id_);
    std::unique_lock lock(inbox->mutex);
    if (!inbox->cv.wait_for(lock, timeout, [&] { return !inbox->queue.empty(); })) return std::nullopt;
    BusMessage m = std::move(inbox->queue.front());
    inbox->queue.pop_front();
    return m;
}

std::vector<BusMessage> NodeHandle::drain() {
    if (!state_) throw BusError(BusError::Kind::bus_closed, "handle is closed");
    const auto inbox = state_->inbox(id_);
    std::lock_guard lock(inbox->mutex);
    std::vector<BusMessage> out(std::make_move_iterator(inbox->queue.begin()),
                                std::make_move_iterator(inbox->queue.end()));
    inbox->queue.clear();
    return out;
}

std::size_t NodeHandle::pending() const {
    if (!state_) return 0;
    const auto inbox = state_->inbox(id_);
    std::lock_guard lock(inbox->mutex);
    return inbox->queue.size();
}

std::uint64_t NodeHandle::dropped() const {
    if (!state_) return 0;
    const auto inbox = state_->inbox(id_);
    std::lock_guard lock(inbox->mutex);
    return inbox->dropped;
}

void NodeHandle::close() {
    if (!state_) return;
    {
        std::lock_guard lock(state_->mutex);
        state_->inboxes.erase(id_);
        for (auto& [topic, subs] : state_->subscribers) subs.erase(id_);
    }
    state_.reset();
}

}  // namespace rhyme_mimic
