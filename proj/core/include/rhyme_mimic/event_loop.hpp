#ifndef RHYME_MIMIC_EVENT_LOOP_HPP
#define RHYME_MIMIC_EVENT_LOOP_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

namespace rhyme_mimic {

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() const = 0;
};

/// Time moves only when told to.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    std::int64_t now_ms() const override { return now_.load(std::memory_order_acquire); }
    void set(std::int64_t ms) { now_.store(ms, std::memory_order_release); }

private:
    std::atomic<std::int64_t> now_;
};

/// Milliseconds since construction, on the steady clock.
class SteadyClock final : public Clock {
public:
    SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

    std::int64_t now_ms() const override;
    std::chrono::steady_clock::time_point to_time_point(std::int64_t ms) const {
        return origin_ + std::chrono::milliseconds(ms);
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

enum class ClockMode { real, virtual_time };
std::string_view to_string(ClockMode mode) noexcept;
ClockMode parse_clock_mode(std::string_view text);

/// Something the loop polls for queued input. poll() handles everything
/// pending and returns how many items it processed.
class Node {
public:
    virtual ~Node() = default;
    virtual std::string_view name() const = 0;
    virtual std::size_t poll() = 0;
};

/// Single-threaded scheduler shared by every node of a graph. Nodes are
/// polled in registration order; timers fire in (time, insertion) order.
/// Under the virtual clock an idle loop jumps straight to the next timer.
class EventLoop {
public:
    using TimerId = std::uint64_t;
    using Task = std::function<void()>;

    enum class RunStatus { done, deadline, idle, stopped };

    explicit EventLoop(ClockMode mode);

    ClockMode mode() const noexcept { return mode_; }
    const Clock& clock() const noexcept { return *clock_; }
    std::int64_t now_ms() const { return clock_->now_ms(); }

    TimerId schedule_at(std::int64_t when_ms, Task task);
    TimerId schedule_after(std::int64_t delay_ms, Task task) { return schedule_at(now_ms() + delay_ms, std::move(task)); }
    bool cancel(TimerId id);
    std::size_t pending_timers() const;

    void add_node(Node& node);

    /// Thread-safe: wakes a real-time loop blocked waiting for input.
    void wake();
    /// Thread-safe: makes run_until return `stopped`.
    void stop();

    /// Runs until `done` holds, the clock reaches `deadline_ms`, the loop is
    /// stopped, or (virtual clock only) nothing is left to do.
    RunStatus run_until(const std::function<bool()>& done, std::optional<std::int64_t> deadline_ms = std::nullopt);

private:
    std::size_t poll_nodes();
    bool fire_due_timers();

    ClockMode mode_;
    std::unique_ptr<Clock> clock_;
    std::vector<Node*> nodes_;

    mutable std::mutex timer_mutex_;
    std::map<std::pair<std::int64_t, TimerId>, Task> timers_;
    std::map<TimerId, std::int64_t> timer_index_;
    TimerId next_timer_ = 1;

    std::mutex wake_mutex_;
    std::condition_variable wake_cv_;
    bool woken_ = false;
    std::atomic<bool> stop_requested_{false};
};

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_EVENT_LOOP_HPP
