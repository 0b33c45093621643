#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "escrowsim/error.hpp"

namespace escrowsim {

/// Discrete-event clock: simulated time plus a queue of scheduled callbacks.
/// Time never decreases; events at equal times fire in insertion order.
class ScenarioClock {
public:
    double now() const { return now_; }

    void schedule(double at, std::function<void()> fn) {
        if (at < now_) at = now_;
        pending_.push(Entry{at, next_seq_++, std::move(fn)});
    }

    /// Fires every event with time <= t in order, then sets now to t.
    void run_until(double t) {
        while (!pending_.empty() && pending_.top().at <= t) {
            Entry e = pending_.top();
            pending_.pop();
            now_ = e.at;
            e.fn();
        }
        if (t > now_) now_ = t;
    }

    std::size_t pending_count() const { return pending_.size(); }

private:
    struct Entry {
        double at;
        std::uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Entry, std::vector<Entry>, Later> pending_;
};

}  // namespace escrowsim
