#pragma once

// Deterministic discrete-event executive for both controller designs.

#include "secplc/config.hpp"
#include "secplc/core.hpp"
#include "secplc/trace.hpp"

#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

namespace secplc::sim {

/// Lower value runs first among events at the same instant.
enum class EventKind : std::uint8_t {
    segment_boundary = 0,
    io_cycle_boundary = 1,
    poll_timer = 2,
    packet_arrival = 3,
};

struct Event {
    Duration time;
    EventKind kind = EventKind::segment_boundary;
    std::uint64_t seq = 0; // insertion order, assigned by the queue
    std::uint32_t tag = 0;
    std::uint64_t arg = 0;
};

/// Priority queue ordered by (time, kind, insertion order).
class EventQueue {
public:
    void schedule(Duration time, EventKind kind, std::uint32_t tag = 0, std::uint64_t arg = 0);

    [[nodiscard]] bool empty() const noexcept { return heap_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return heap_.size(); }
    [[nodiscard]] const Event& top() const { return heap_.top(); }
    std::optional<Event> next();

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept {
            if (a.time != b.time) return a.time > b.time;
            if (a.kind != b.kind) return a.kind > b.kind;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    std::uint64_t next_seq_ = 0;
};

/// Runs every traffic segment to completion. Throws ConfigError if the
/// config does not validate; never fails once started.
Trace run(const SimConfig& config);

} // namespace secplc::sim
