#include "secplc/channel.hpp"

#include <doctest.h>

#include <variant>

using namespace secplc;
using namespace secplc::channel;
using namespace secplc::literals;

namespace {

// Reference CRC-8 (poly 0x07, init 0, no reflection), one bit at a time.
std::uint8_t crc8_bitwise(std::span<const std::uint8_t> bytes) {
    std::uint8_t crc = 0;
    for (std::uint8_t b : bytes) {
        for (int bit = 7; bit >= 0; --bit) {
            const bool in = ((b >> bit) & 1) != 0;
            const bool top = (crc & 0x80) != 0;
            crc = static_cast<std::uint8_t>(crc << 1);
            if (in != top) crc ^= 0x07;
        }
    }
    return crc;
}

DownstreamFrame random_down(Rng& rng) {
    DownstreamFrame f;
    f.seq = static_cast<std::uint8_t>(rng.next());
    f.type = rng.bernoulli(0.5) ? MsgType::io_update : MsgType::config;
    f.output_command = static_cast<std::uint16_t>(rng.next());
    f.cycle_config = static_cast<std::uint32_t>(rng.next());
    for (auto& r : f.reserved) r = static_cast<std::uint8_t>(rng.next());
    return f;
}

UpstreamFrame random_up(Rng& rng) {
    UpstreamFrame f;
    f.seq = static_cast<std::uint8_t>(rng.next());
    f.status = rng.bernoulli(0.5) ? Status::ok : Status::overrun_seen;
    f.input_state = static_cast<std::uint16_t>(rng.next());
    f.output_state = static_cast<std::uint16_t>(rng.next());
    f.cycle_counter = static_cast<std::uint32_t>(rng.next());
    for (auto& r : f.reserved) r = static_cast<std::uint8_t>(rng.next());
    return f;
}

} // namespace

TEST_SUITE("channel") {

TEST_CASE("table CRC agrees with the bitwise reference") {
    Rng rng(99);
    for (int i = 0; i < 10'000; ++i) {
        std::array<std::uint8_t, 15> b{};
        for (auto& x : b) x = static_cast<std::uint8_t>(rng.next());
        REQUIRE(crc8(b) == crc8_bitwise(b));
    }
}

TEST_CASE("all-zero io_update frame encodes to a known byte string") {
    const FrameBytes bytes = encode(DownstreamFrame{});
    std::array<std::uint8_t, 15> head{0xA5, 0x00, 0x01};
    CHECK(std::equal(head.begin(), head.end(), bytes.begin()));
    CHECK(bytes[15] == crc8_bitwise(head));
    CHECK(bytes[15] == 0x38);
}

TEST_CASE("multi-byte fields are big-endian") {
    DownstreamFrame d;
    d.output_command = 0x1234;
    d.cycle_config = 0xA1B2C3D4;
    const auto b = encode(d);
    CHECK(b[3] == 0x12);
    CHECK(b[4] == 0x34);
    CHECK(b[5] == 0xA1);
    CHECK(b[8] == 0xD4);
    UpstreamFrame u;
    u.cycle_counter = 0x01020304;
    const auto ub = encode(u);
    CHECK(ub[0] == 0x5A);
    CHECK(ub[7] == 0x01);
    CHECK(ub[10] == 0x04);
}

TEST_CASE("codec round-trips random frames") {
    Rng rng(1);
    for (int i = 0; i < 100'000; ++i) {
        const auto d = random_down(rng);
        const auto back = decode_downstream(encode(d));
        REQUIRE(std::holds_alternative<DownstreamFrame>(back));
        REQUIRE(std::get<DownstreamFrame>(back) == d);
        const auto u = random_up(rng);
        const auto uback = decode_upstream(encode(u));
        REQUIRE(std::holds_alternative<UpstreamFrame>(uback));
        REQUIRE(std::get<UpstreamFrame>(uback) == u);
    }
}

TEST_CASE("frames differing only in seq differ in bytes 1 and 15 only") {
    DownstreamFrame a, b;
    a.output_command = 0x00F0;
    b = a;
    b.seq = 77;
    const auto ea = encode(a), eb = encode(b);
    for (std::size_t i = 0; i < kFrameBytes; ++i) {
        if (i == 1 || i == 15) CHECK(ea[i] != eb[i]);
        else CHECK(ea[i] == eb[i]);
    }
}

TEST_CASE("decode rejects in the order sync, crc, type") {
    const auto good = encode(DownstreamFrame{});
    SUBCASE("flipped bit in byte 5") {
        auto b = good;
        b[5] ^= 0x10;
        CHECK(std::get<Rejection>(decode_downstream(b)) == Rejection::bad_crc);
    }
    SUBCASE("bad sync wins over bad crc") {
        auto b = good;
        b[0] = 0xFF;
        CHECK(std::get<Rejection>(decode_downstream(b)) == Rejection::bad_sync);
    }
    SUBCASE("unknown type with a valid crc") {
        auto b = good;
        b[2] = 0x07;
        b[15] = crc8_bitwise(std::span<const std::uint8_t>(b.data(), 15));
        CHECK(std::get<Rejection>(decode_downstream(b)) == Rejection::bad_type);
    }
    SUBCASE("a downstream frame is not an upstream frame") {
        CHECK(std::get<Rejection>(decode_upstream(good)) == Rejection::bad_sync);
    }
}

TEST_CASE("every single-bit corruption is rejected") {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto bytes = encode(random_down(rng));
        for (std::size_t bit = 0; bit < kFrameBytes * 8; ++bit) {
            auto b = bytes;
            b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            REQUIRE(std::holds_alternative<Rejection>(decode_downstream(b)));
        }
    }
}

TEST_CASE("bursts of up to 8 bits inside the checked bytes are detected") {
    const auto bytes = encode(DownstreamFrame{});
    // Bursts confined to bytes 1..15 leave the sync byte intact, so only
    // the CRC can catch them.
    for (std::size_t start = 8; start < kFrameBytes * 8; ++start) {
        for (std::size_t len = 1; len <= 8 && start + len <= kFrameBytes * 8; ++len) {
            for (unsigned inner = 0; inner < (len > 2 ? 1u << (len - 2) : 1u); ++inner) {
                auto b = bytes;
                auto flip = [&](std::size_t bit) { b[bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8)); };
                flip(start);
                if (len > 1) flip(start + len - 1);
                for (std::size_t k = 0; k + 2 < len; ++k)
                    if ((inner >> k) & 1u) flip(start + 1 + k);
                REQUIRE(std::holds_alternative<Rejection>(decode_downstream(b)));
            }
        }
    }
}

TEST_CASE("anything accepted re-encodes to the same bytes") {
    Rng rng(8);
    int accepted = 0;
    for (int i = 0; i < 200'000; ++i) {
        FrameBytes b{};
        for (auto& x : b) x = static_cast<std::uint8_t>(rng.next());
        b[0] = kDownstreamSync;
        if (rng.bernoulli(0.5)) b[15] = crc8(std::span<const std::uint8_t>(b.data(), 15));
        const auto d = decode_downstream(b);
        if (const auto* f = std::get_if<DownstreamFrame>(&d)) {
            ++accepted;
            REQUIRE(encode(*f) == b);
        }
    }
    CHECK(accepted > 0);
}

TEST_CASE("transfer time is the ceiling of bits over bitrate") {
    ChannelConfig c;
    CHECK(transfer_time(c) == 10_us);
    c.bitrate = 1'000'000;
    CHECK(transfer_time(c) == 128_us);
    c.bitrate = 13'500'000;
    c.frame_size = 8;
    CHECK(transfer_time(c) == 5_us);
}

TEST_CASE("master exchange outcomes") {
    ChannelConfig cfg;
    VirtualClock clock;
    Rng link(1);
    UpstreamFrame up;
    up.cycle_counter = 42;
    const SlaveOffer offer{0_us, encode(up)};

    SUBCASE("slave ready immediately") {
        const auto out = master_exchange(clock, cfg, 0_us, DownstreamFrame{}, offer, link);
        CHECK(out.result == ExchangeResult::ok);
        CHECK(out.elapsed == 10_us);
        REQUIRE(out.upstream);
        CHECK(*out.upstream == up);
        CHECK(out.delivered_at == std::optional<Duration>(10_us));
        CHECK_FALSE(out.retry_at);
    }
    SUBCASE("slave busy for the full window") {
        const auto out = master_exchange(clock, cfg, 0_us, DownstreamFrame{}, std::nullopt, link);
        CHECK(out.result == ExchangeResult::timeout);
        CHECK(out.elapsed == 500_us);
        CHECK(out.retry_at == std::optional<Duration>(700_us));
        CHECK_FALSE(out.delivered);
    }
    SUBCASE("slave ready too late to finish within the timeout") {
        const auto out = master_exchange(clock, cfg, 0_us, DownstreamFrame{}, SlaveOffer{495_us, encode(up)}, link);
        CHECK(out.result == ExchangeResult::timeout);
    }
    SUBCASE("certain corruption rejects every exchange") {
        cfg.corruption_probability = 1.0;
        for (int i = 0; i < 1000; ++i) {
            const auto out = master_exchange(clock, cfg, 0_us, DownstreamFrame{}, offer, link);
            REQUIRE(out.result == ExchangeResult::rejected);
            REQUIRE_FALSE(out.upstream);
            REQUIRE(out.delivered);
            REQUIRE(std::holds_alternative<Rejection>(decode_downstream(*out.delivered)));
            REQUIRE(out.retry_at == std::optional<Duration>(*out.delivered_at + cfg.master_retry_delay));
        }
    }
}

} // TEST_SUITE
