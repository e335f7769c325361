#pragma once

// The non-critical controller: one CPU shared, in FIFO order, by packet
// processing and the link master. Flooding starves the master here and
// nowhere else.

#include "secplc/channel.hpp"
#include "secplc/core.hpp"

#include <cstdint>
#include <deque>
#include <optional>

namespace secplc::net {

struct NetCpuModel {
    Duration per_packet_cost{20};
    std::int64_t queue_capacity = 256;
    Duration poll_interval{1000};
    // Baseline only: packets drained per comm phase, 0 = no cap.
    std::int64_t baseline_packet_cap = 0;
    // Tail drop is the only policy.

    bool operator==(const NetCpuModel&) const = default;
};

void validate_net_cpu(const NetCpuModel& model);

struct NetState {
    std::int64_t queue_depth = 0;
    Duration busy_until;
    std::uint64_t packets_arrived = 0;
    std::uint64_t packets_processed = 0;
    std::uint64_t packets_dropped = 0;
    std::optional<channel::UpstreamFrame> last_upstream;
    std::uint64_t exchange_attempts = 0;
    std::uint64_t exchange_ok = 0;
    std::uint64_t exchange_timeouts = 0;
    std::uint64_t exchange_rejected = 0;
    std::uint64_t polls_coalesced = 0;
};

/// A master request that has been granted the CPU.
struct MasterRequest {
    Duration issued_at;
    Duration started_at;
    channel::DownstreamFrame frame;
};

class NetworkController {
public:
    NetworkController(NetCpuModel model, channel::ChannelConfig link);

    [[nodiscard]] const NetState& state() const noexcept { return state_; }
    [[nodiscard]] const NetCpuModel& model() const noexcept { return model_; }

    /// Retires packets whose service completed by `now`.
    void advance(Duration now);

    /// A packet arrived: enqueue behind all committed work, or tail-drop.
    void ingest_packet(Duration now);

    /// Poll timer fired. Returns the instant the master will own the CPU, or
    /// nothing when an exchange is already outstanding (the tick is coalesced).
    /// Retry ticks belong to the outstanding exchange and are never coalesced.
    std::optional<Duration> poll_fired(Duration now, bool is_retry = false);

    /// Frame to transmit for the outstanding exchange. Retries resend the
    /// same sequence number.
    [[nodiscard]] MasterRequest request() const;

    /// Records an attempt's outcome; the master held the CPU until
    /// `cpu_release`. Packets that queued behind the master get their service
    /// slots now.
    void exchange_finished(const channel::ExchangeOutcome& outcome, Duration cpu_release);

    [[nodiscard]] bool master_holds_cpu() const noexcept { return master_blocked_; }
    [[nodiscard]] bool exchange_outstanding() const noexcept { return outstanding_; }

    /// Requests a toggle-period change; sent as a config frame until acknowledged.
    void request_toggle_period(std::uint32_t period) { pending_config_ = period; }
    void set_commanded_outputs(std::uint16_t bits) { commanded_outputs_ = bits; }

private:
    struct Packet {
        Duration completes; // meaningful once scheduled
        bool scheduled = false;
    };

    NetCpuModel model_;
    channel::ChannelConfig link_;
    NetState state_;
    std::deque<Packet> queue_;
    Duration cpu_free_at_;
    bool master_blocked_ = false;
    bool outstanding_ = false;
    Duration issued_at_;
    Duration started_at_;
    std::uint8_t seq_ = 0;
    std::optional<std::uint32_t> pending_config_;
    std::uint16_t commanded_outputs_ = 0;
};

} // namespace secplc::net
