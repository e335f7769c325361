#include "secplc/channel.hpp"

#include <algorithm>
#include <string>

namespace secplc::channel {

namespace {

constexpr std::array<std::uint8_t, 256> make_crc_table() {
    std::array<std::uint8_t, 256> table{};
    for (int i = 0; i < 256; ++i) {
        auto c = static_cast<std::uint8_t>(i);
        for (int bit = 0; bit < 8; ++bit) c = static_cast<std::uint8_t>((c & 0x80) ? (c << 1) ^ 0x07 : c << 1);
        table[static_cast<std::size_t>(i)] = c;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

void put_u16(FrameBytes& b, std::size_t at, std::uint16_t v) {
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v);
}

void put_u32(FrameBytes& b, std::size_t at, std::uint32_t v) {
    for (std::size_t i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

std::uint16_t get_u16(std::span<const std::uint8_t, kFrameBytes> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t, kFrameBytes> b, std::size_t at) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | b[at + i];
    return v;
}

void seal(FrameBytes& b) { b[kFrameBytes - 1] = crc8(std::span{b}.first<kFrameBytes - 1>()); }

bool crc_ok(std::span<const std::uint8_t, kFrameBytes> b) {
    return crc8(b.first<kFrameBytes - 1>()) == b[kFrameBytes - 1];
}

void flip_random_bit(FrameBytes& b, Rng& rng) {
    const auto bit = static_cast<std::size_t>(rng.uniform_int(0, kFrameBytes * 8 - 1));
    b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
}

} // namespace

std::uint8_t crc8(std::span<const std::uint8_t> data) noexcept {
    std::uint8_t crc = 0;
    for (std::uint8_t byte : data) crc = kCrcTable[crc ^ byte];
    return crc;
}

std::string_view to_string(Rejection r) {
    switch (r) {
    case Rejection::bad_sync: return "bad_sync";
    case Rejection::bad_crc: return "bad_crc";
    case Rejection::bad_type: return "bad_type";
    }
    return "unknown";
}

std::string_view to_string(ExchangeResult r) {
    switch (r) {
    case ExchangeResult::ok: return "ok";
    case ExchangeResult::timeout: return "timeout";
    case ExchangeResult::rejected: return "rejected";
    }
    return "unknown";
}

FrameBytes encode(const DownstreamFrame& f) noexcept {
    FrameBytes b{};
    b[0] = kDownstreamSync;
    b[1] = f.seq;
    b[2] = static_cast<std::uint8_t>(f.type);
    put_u16(b, 3, f.output_command);
    put_u32(b, 5, f.cycle_config);
    std::copy(f.reserved.begin(), f.reserved.end(), b.begin() + 9);
    seal(b);
    return b;
}

FrameBytes encode(const UpstreamFrame& f) noexcept {
    FrameBytes b{};
    b[0] = kUpstreamSync;
    b[1] = f.seq;
    b[2] = static_cast<std::uint8_t>(f.status);
    put_u16(b, 3, f.input_state);
    put_u16(b, 5, f.output_state);
    put_u32(b, 7, f.cycle_counter);
    std::copy(f.reserved.begin(), f.reserved.end(), b.begin() + 11);
    seal(b);
    return b;
}

std::variant<DownstreamFrame, Rejection> decode_downstream(std::span<const std::uint8_t, kFrameBytes> b) noexcept {
    if (b[0] != kDownstreamSync) return Rejection::bad_sync;
    if (!crc_ok(b)) return Rejection::bad_crc;
    if (b[2] != static_cast<std::uint8_t>(MsgType::io_update) && b[2] != static_cast<std::uint8_t>(MsgType::config))
        return Rejection::bad_type;
    DownstreamFrame f;
    f.seq = b[1];
    f.type = static_cast<MsgType>(b[2]);
    f.output_command = get_u16(b, 3);
    f.cycle_config = get_u32(b, 5);
    std::copy(b.begin() + 9, b.begin() + 15, f.reserved.begin());
    return f;
}

std::variant<UpstreamFrame, Rejection> decode_upstream(std::span<const std::uint8_t, kFrameBytes> b) noexcept {
    if (b[0] != kUpstreamSync) return Rejection::bad_sync;
    if (!crc_ok(b)) return Rejection::bad_crc;
    if (b[2] != static_cast<std::uint8_t>(Status::ok) && b[2] != static_cast<std::uint8_t>(Status::overrun_seen))
        return Rejection::bad_type;
    UpstreamFrame f;
    f.seq = b[1];
    f.status = static_cast<Status>(b[2]);
    f.input_state = get_u16(b, 3);
    f.output_state = get_u16(b, 5);
    f.cycle_counter = get_u32(b, 7);
    std::copy(b.begin() + 11, b.begin() + 15, f.reserved.begin());
    return f;
}

Duration transfer_time(const ChannelConfig& cfg) {
    const std::int64_t bits_us = cfg.frame_size * 8 * 1'000'000;
    return Duration{(bits_us + cfg.bitrate - 1) / cfg.bitrate};
}

void validate_channel(const ChannelConfig& cfg, Duration tick) {
    if (cfg.bitrate <= 0) throw ConfigError("channel.bitrate: must be > 0");
    if (cfg.frame_size < 8) throw ConfigError("channel.frame_size: must be >= 8");
    if (cfg.slave_timeout.count() <= 0) throw ConfigError("channel.slave_timeout: must be > 0");
    if (cfg.master_retry_delay.count() < 0) throw ConfigError("channel.master_retry_delay: must be >= 0");
    if (!(cfg.corruption_probability >= 0.0 && cfg.corruption_probability <= 1.0))
        throw ConfigError("channel.corruption_probability: must lie in [0, 1]");
    if (transfer_time(cfg) >= quantize_timeout(tick, cfg.slave_timeout))
        throw ConfigError("channel.slave_timeout: transfer time " + std::to_string(transfer_time(cfg).count()) +
                          " us does not fit the timeout");
}

ExchangeOutcome master_exchange(const VirtualClock& clock, const ChannelConfig& cfg, Duration issued_at,
                                const DownstreamFrame& downstream, const std::optional<SlaveOffer>& slave,
                                Rng& link_rng) {
    const Duration now = clock.now();
    const Duration timeout = quantize_timeout(clock, cfg.slave_timeout);
    const Duration deadline = issued_at + timeout;

    ExchangeOutcome out;
    if (slave) {
        const Duration begin = std::max(now, slave->ready_at);
        const Duration done = begin + transfer_time(cfg);
        if (done <= deadline) {
            FrameBytes down = encode(downstream);
            FrameBytes up = slave->response;
            if (link_rng.bernoulli(cfg.corruption_probability)) {
                flip_random_bit(down, link_rng);
                flip_random_bit(up, link_rng);
            }
            out.elapsed = done - issued_at;
            out.delivered = down;
            out.delivered_at = done;
            auto decoded = decode_upstream(up);
            if (auto* frame = std::get_if<UpstreamFrame>(&decoded)) {
                out.result = ExchangeResult::ok;
                out.upstream = *frame;
            } else {
                out.result = ExchangeResult::rejected;
                out.retry_at = done + cfg.master_retry_delay;
            }
            return out;
        }
    }
    out.result = ExchangeResult::timeout;
    out.elapsed = timeout;
    out.retry_at = std::max(now, deadline) + cfg.master_retry_delay;
    return out;
}

} // namespace secplc::channel
