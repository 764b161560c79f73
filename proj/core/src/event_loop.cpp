#include "rhyme_mimic/event_loop.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace rhyme_mimic {

std::int64_t SteadyClock::now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin_).count();
}

std::string_view to_string(ClockMode mode) noexcept {
    return mode == ClockMode::real ? "real" : "virtual";
}

ClockMode parse_clock_mode(std::string_view text) {
    if (text == "real") return ClockMode::real;
    if (text == "virtual") return ClockMode::virtual_time;
    throw std::invalid_argument("unknown clock mode '" + std::string(text) + "'");
}

EventLoop::EventLoop(ClockMode mode) : mode_(mode) {
    if (mode == ClockMode::real) {
        clock_ = std::make_unique<SteadyClock>();
    } else {
        clock_ = std::make_unique<VirtualClock>();
    }
}

EventLoop::TimerId EventLoop::schedule_at(std::int64_t when_ms, Task task) {
    TimerId id = 0;
    {
        std::lock_guard lock(timer_mutex_);
        id = next_timer_++;
        timers_.emplace(std::make_pair(when_ms, id), std::move(task));
        timer_index_.emplace(id, when_ms);
    }
    wake();
    return id;
}

bool EventLoop::cancel(TimerId id) {
    std::lock_guard lock(timer_mutex_);
    const auto it = timer_index_.find(id);
    if (it == timer_index_.end()) return false;
    timers_.erase({it->second, id});
    timer_index_.erase(it);
    return true;
}

std::size_t EventLoop::pending_timers() const {
    std::lock_guard lock(timer_mutex_);
    return timers_.size();
}

void EventLoop::add_node(Node& node) {
    nodes_.push_back(&node);
}

void EventLoop::wake() {
    {
        std::lock_guard lock(wake_mutex_);
        woken_ = true;
    }
    wake_cv_.notify_all();
}

void EventLoop::stop() {
    stop_requested_ = true;
    wake();
}

std::size_t EventLoop::poll_nodes() {
    std::size_t handled = 0;
    for (Node* node : nodes_) handled += node->poll();
    return handled;
}

bool EventLoop::fire_due_timers() {
    const std::int64_t now = now_ms();
    bool fired = false;
    for (;;) {
        Task task;
        {
            std::lock_guard lock(timer_mutex_);
            if (timers_.empty() || timers_.begin()->first.first > now) break;
            auto it = timers_.begin();
            task = std::move(it->second);
            timer_index_.erase(it->first.second);
            timers_.erase(it);
        }
        task();
        fired = true;
    }
    return fired;
}

EventLoop::RunStatus EventLoop::run_until(const std::function<bool()>& done,
                                          std::optional<std::int64_t> deadline_ms) {
    stop_requested_ = false;
    for (;;) {
        if (done && done()) return RunStatus::done;
        if (stop_requested_) return RunStatus::stopped;

        {
            std::lock_guard lock(wake_mutex_);
            woken_ = false;
        }
        const bool fired = fire_due_timers();
        const std::size_t handled = poll_nodes();
        if (fired || handled > 0) continue;

        std::optional<std::int64_t> next;
        {
            std::lock_guard lock(timer_mutex_);
            if (!timers_.empty()) next = timers_.begin()->first.first;
        }

        if (mode_ == ClockMode::virtual_time) {
            auto& vclock = static_cast<VirtualClock&>(*clock_);
            if (!next) {
                if (deadline_ms) {
                    vclock.set(std::max(vclock.now_ms(), *deadline_ms));
                    return RunStatus::deadline;
                }
                return RunStatus::idle;
            }
            if (deadline_ms && *next > *deadline_ms) {
                vclock.set(std::max(vclock.now_ms(), *deadline_ms));
                return RunStatus::deadline;
            }
            vclock.set(std::max(vclock.now_ms(), *next));
            continue;
        }

        if (deadline_ms && now_ms() >= *deadline_ms) return RunStatus::deadline;
        std::optional<std::int64_t> wait_until = next;
        if (deadline_ms && (!wait_until || *deadline_ms < *wait_until)) wait_until = deadline_ms;

        const auto& steady = static_cast<const SteadyClock&>(*clock_);
        std::unique_lock lock(wake_mutex_);
        // Bounded wait: nodes fed from other threads may not call wake().
        const auto cap = std::chrono::steady_clock::now() + std::chrono::milliseconds(50);
        auto until = wait_until ? std::min(steady.to_time_point(*wait_until), cap) : cap;
        wake_cv_.wait_until(lock, until, [&] { return woken_ || stop_requested_.load(); });
    }
}

}  // namespace rhyme_mimic
