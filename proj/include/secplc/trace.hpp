#pragma once

#include "secplc/channel.hpp"
#include "secplc/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace secplc {

using channel::ExchangeResult;

/// Measured breakdown of one scan cycle.
///
/// total = t_read_in + t_comm + t_calc + t_delay + t_write_out; the free-running
/// baseline always has t_delay = 0.
struct CycleRecord {
    std::uint64_t index = 0;
    std::string segment;
    Duration start;
    Duration t_read_in;
    Duration t_comm;
    Duration t_calc;
    Duration t_delay;
    Duration t_write_out;
    Duration total;
    ExchangeResult comm_result = ExchangeResult::timeout;
    bool overrun = false;

    [[nodiscard]] Duration phase_sum() const { return t_read_in + t_comm + t_calc + t_delay + t_write_out; }

    bool operator==(const CycleRecord&) const = default;
};

/// Network-side counters accumulated over one traffic segment.
struct SegmentCounters {
    std::uint64_t packets_arrived = 0;
    std::uint64_t packets_processed = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t exchange_attempts = 0;
    std::uint64_t exchange_ok = 0;
    std::uint64_t exchange_timeouts = 0;
    std::uint64_t exchange_rejected = 0;

    bool operator==(const SegmentCounters&) const = default;
};

struct SegmentSummary {
    std::string label;
    Duration start;
    Duration duration;
    SegmentCounters counters;

    bool operator==(const SegmentSummary&) const = default;
};

struct Trace {
    std::vector<CycleRecord> cycles;
    std::vector<SegmentSummary> segments;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::uint64_t overrun_count = 0;
};

} // namespace secplc
