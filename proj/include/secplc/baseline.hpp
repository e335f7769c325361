#pragma once

// Conventional single-controller PLC: network processing and IO control
// share one CPU and the cycle simply runs as long as its phases take.

#include "secplc/core.hpp"
#include "secplc/network_controller.hpp"
#include "secplc/trace.hpp"

#include <cstdint>

namespace secplc::baseline {

struct BaselineState {
    std::uint64_t cycle_counter = 0;
    std::uint16_t outputs = 0;
    std::uint32_t toggle_period = 10;
    Duration cycle_start;
    std::int64_t pending_packets = 0;
    std::uint64_t packets_arrived = 0;
    std::uint64_t packets_processed = 0;
    std::uint64_t packets_dropped = 0;

    bool operator==(const BaselineState&) const = default;
};

/// Queues a packet for the next comm phase, tail-dropping at capacity.
void ingest_packet(BaselineState& state, const net::NetCpuModel& model);

struct CycleStep {
    BaselineState state;
    CycleRecord record;
};

/// One free-running cycle: read, drain the backlog present at cycle start
/// (capped by baseline_packet_cap when non-zero), calculate, write.
CycleStep run_baseline_cycle(BaselineState state, const PhaseBudget& budget, const net::NetCpuModel& model,
                             Rng& rng);

} // namespace secplc::baseline
