#pragma once

// Real-socket deployment of the dual design. Process A (network side) serves
// Modbus/TCP, absorbs datagram traffic and masters the link; process B (IO
// side) runs the fixed-cycle loop against a wall clock. The link is a local
// TCP connection carrying the same 16-byte frames as the simulator.

#include "secplc/channel.hpp"
#include "secplc/core.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace secplc::live {

struct HostPort {
    std::string host;
    std::uint16_t port = 0;
};

/// "host:port"; host may be an IPv4 literal or "localhost". Throws ConfigError.
HostPort parse_host_port(const std::string& text);

// ---------------------------------------------------------------- config

struct IoLoopConfig {
    Duration target_cycle{10'000};
    Duration comm_timeout{500};
    Duration write_cost{50};
    std::uint32_t toggle_period = 10;
    double duration_s = 0.0; // 0 runs until stopped
    std::string log_path;    // per-cycle CSV, empty for none
};

struct NetSideConfig {
    Duration slave_timeout{500};
    Duration retry_delay{200};
    Duration per_packet_cost{20};
    std::int64_t queue_capacity = 256;
    double duration_s = 0.0;
};

enum class FloodTransport { datagram, connect };

struct FloodConfig {
    std::string target = "127.0.0.1:5020";
    FloodTransport transport = FloodTransport::datagram;
    double rate = 0.0;     // per second; 0 sends nothing, negative means as fast as possible
    std::int64_t payload_size = 64;
    double duration_s = 10.0;
};

struct LiveConfig {
    std::string listen_address = "127.0.0.1:5020";  // Modbus/TCP and datagram intake
    std::string io_link_address = "127.0.0.1:5021"; // process B listens here
    IoLoopConfig io;
    NetSideConfig net;
    FloodConfig flood;
};

LiveConfig live_config_from_json(const nlohmann::json& j);
LiveConfig load_live_config(const std::string& path);

// ---------------------------------------------------------------- modbus

inline constexpr std::uint16_t kRegOutputState = 0;
inline constexpr std::uint16_t kRegCycleCounterLow = 1;
inline constexpr std::uint16_t kRegTogglePeriod = 2;
inline constexpr std::uint16_t kRegisterCount = 3;

struct MbapHeader {
    std::uint16_t transaction_id = 0;
    std::uint16_t protocol_id = 0;
    std::uint16_t length = 0; // unit id + PDU bytes
    std::uint8_t unit_id = 0;
};

/// Parses the 7-byte header; nothing if protocol_id != 0 or length is out of range.
std::optional<MbapHeader> parse_mbap(std::span<const std::uint8_t, 7> bytes);

class RegisterBank {
public:
    virtual ~RegisterBank() = default;
    virtual std::uint16_t read(std::uint16_t address) = 0;
    /// Only the toggle period is writable.
    virtual void write_toggle_period(std::uint16_t value) = 0;
};

/// Response PDU for a request PDU. Function 0x03 and 0x06 are served, others
/// get exception 0x01, bad addresses 0x02, bad quantities 0x03. An empty
/// result means the PDU is malformed and the connection should be dropped.
std::vector<std::uint8_t> handle_pdu(std::span<const std::uint8_t> pdu, RegisterBank& bank);

/// Full request ADU (MBAP + PDU) to response ADU; empty when malformed.
std::vector<std::uint8_t> handle_adu(std::span<const std::uint8_t> adu, RegisterBank& bank);

// ---------------------------------------------------------------- flood

struct FloodReport {
    std::uint64_t packets_sent = 0;
    std::uint64_t send_errors = 0;
    double duration_s = 0.0;
    double achieved_rate = 0.0;
};

nlohmann::json to_json(const FloodReport& r);

/// Sends datagrams at the configured rate for the configured duration.
FloodReport flood(const FloodConfig& cfg, const std::atomic<bool>* stop = nullptr);

// ---------------------------------------------------------------- process B

struct IoCycleSample {
    std::uint64_t counter = 0;
    std::int64_t write_at_us = 0; // monotonic clock instant of the output write
    std::int64_t duration_us = 0; // since the previous write; 0 for the first cycle
    std::uint16_t outputs = 0;
    std::uint32_t toggle_period = 0;
    channel::ExchangeResult comm = channel::ExchangeResult::timeout;
    std::int64_t comm_us = 0;
};

struct IoRunReport {
    std::uint64_t cycles = 0;
    std::uint64_t frames_accepted = 0;
    std::uint64_t frames_rejected = 0;
    std::uint64_t overruns = 0;
    std::int64_t min_cycle_us = 0;
    std::int64_t max_cycle_us = 0;
    std::int64_t max_comm_us = 0;
};

nlohmann::json to_json(const IoRunReport& r);

/// Microseconds on the system-wide monotonic clock.
std::int64_t monotonic_us();

using IoObserver = std::function<void(const IoCycleSample&)>;

/// Fixed-cycle IO loop. Single-threaded; never blocks on the link for
/// longer than the comm window.
IoRunReport run_io(const LiveConfig& cfg, const std::atomic<bool>& stop, const IoObserver& observe = {});

// ---------------------------------------------------------------- process A

struct NetRunReport {
    std::uint64_t packets_received = 0;
    std::uint64_t packets_processed = 0;
    std::uint64_t packets_dropped = 0;
    std::uint64_t exchanges_ok = 0;
    std::uint64_t exchange_timeouts = 0;
    std::uint64_t reconnects = 0;
    std::uint64_t modbus_requests = 0;
};

nlohmann::json to_json(const NetRunReport& r);

/// Network side: Modbus/TCP server, datagram intake, link master.
NetRunReport run_network(const LiveConfig& cfg, const std::atomic<bool>& stop);

} // namespace secplc::live
