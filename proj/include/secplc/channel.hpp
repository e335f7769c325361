#pragma once

// Inter-controller link: the 16-byte frame codec and the master-side
// exchange model of the blocking, timeout-guarded transfer.

#include "secplc/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>

namespace secplc::channel {

inline constexpr std::size_t kFrameBytes = 16;
using FrameBytes = std::array<std::uint8_t, kFrameBytes>;

inline constexpr std::uint8_t kDownstreamSync = 0xA5;
inline constexpr std::uint8_t kUpstreamSync = 0x5A;

/// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
std::uint8_t crc8(std::span<const std::uint8_t> data) noexcept;

enum class MsgType : std::uint8_t { io_update = 0x01, config = 0x02 };
enum class Status : std::uint8_t { ok = 0x00, overrun_seen = 0x01 };

/// Master -> slave. Multi-byte fields are big-endian on the wire.
struct DownstreamFrame {
    std::uint8_t seq = 0;
    MsgType type = MsgType::io_update;
    std::uint16_t output_command = 0;
    std::uint32_t cycle_config = 0;
    std::array<std::uint8_t, 6> reserved{};

    bool operator==(const DownstreamFrame&) const = default;
};

/// Slave -> master.
struct UpstreamFrame {
    std::uint8_t seq = 0; // echo of the last accepted downstream seq
    Status status = Status::ok;
    std::uint16_t input_state = 0;
    std::uint16_t output_state = 0;
    std::uint32_t cycle_counter = 0;
    std::array<std::uint8_t, 4> reserved{};

    bool operator==(const UpstreamFrame&) const = default;
};

enum class Direction { downstream, upstream };

enum class Rejection { bad_sync, bad_crc, bad_type };
std::string_view to_string(Rejection r);

FrameBytes encode(const DownstreamFrame& frame) noexcept;
FrameBytes encode(const UpstreamFrame& frame) noexcept;

/// Checks run in order sync, crc, type; the first failure is reported.
std::variant<DownstreamFrame, Rejection> decode_downstream(std::span<const std::uint8_t, kFrameBytes> bytes) noexcept;
std::variant<UpstreamFrame, Rejection> decode_upstream(std::span<const std::uint8_t, kFrameBytes> bytes) noexcept;

struct ChannelConfig {
    std::int64_t bitrate = 13'500'000; // bits per second
    std::int64_t frame_size = 16;      // bytes clocked per exchange
    Duration slave_timeout{500};
    Duration master_retry_delay{200};
    double corruption_probability = 0.0;

    bool operator==(const ChannelConfig&) const = default;
};

/// ceil(frame_size * 8 * 1e6 / bitrate) microseconds.
Duration transfer_time(const ChannelConfig& cfg);

/// Throws ConfigError when the frame cannot be clocked within the timeout.
void validate_channel(const ChannelConfig& cfg, Duration tick);

enum class ExchangeResult { ok, timeout, rejected };
std::string_view to_string(ExchangeResult r);

struct ExchangeOutcome {
    ExchangeResult result = ExchangeResult::timeout;
    Duration elapsed;                       // measured from the request
    std::optional<UpstreamFrame> upstream;  // present iff result == ok
    // Bytes clocked into the slave and the instant the transfer completed.
    // Absent on timeout; corrupted on rejection.
    std::optional<FrameBytes> delivered;
    std::optional<Duration> delivered_at;
    std::optional<Duration> retry_at;       // set unless result == ok
};

/// What the master can see of the slave when it tries to transfer.
struct SlaveOffer {
    Duration ready_at;   // instant the slave's comm window is (or becomes) open
    FrameBytes response; // slave's transmit buffer for that window
};

/// One master-side transfer attempt.
///
/// The request was issued at `issued_at`; the master got the CPU at `now`.
/// The HAL-style timeout runs from the request, so the transfer succeeds only
/// if it can complete by issued_at + quantized slave_timeout. `slave` is
/// empty when no window opens in time. Corruption is decided per exchange
/// from `link_rng` and damages one bit in each direction.
ExchangeOutcome master_exchange(const VirtualClock& clock, const ChannelConfig& cfg, Duration issued_at,
                                const DownstreamFrame& downstream, const std::optional<SlaveOffer>& slave,
                                Rng& link_rng);

} // namespace secplc::channel
