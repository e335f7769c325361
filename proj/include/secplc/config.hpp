#pragma once

#include "secplc/channel.hpp"
#include "secplc/core.hpp"
#include "secplc/network_controller.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace secplc {

struct Arrival {
    enum class Kind { none, poisson, constant_interval };
    Kind kind = Kind::none;
    double rate = 0.0; // packets per second (poisson)
    Duration gap;      // constant_interval

    static Arrival none() { return {}; }
    static Arrival poisson(double per_second) { return {Kind::poisson, per_second, Duration{0}}; }
    static Arrival constant_interval(Duration gap) { return {Kind::constant_interval, 0.0, gap}; }

    bool operator==(const Arrival&) const = default;
};

struct TrafficSegment {
    std::string label; // pre_idle | attack | post_idle | custom
    Duration duration;
    Arrival arrival;

    bool operator==(const TrafficSegment&) const = default;
};

struct TrafficProfile {
    std::vector<TrafficSegment> segments;

    /// 60 s idle at 10 pkt/s, 60 s attack, 60 s idle again.
    static TrafficProfile standard(double attack_rate = 100'000.0);

    [[nodiscard]] Duration total_duration() const;

    bool operator==(const TrafficProfile&) const = default;
};

enum class Mode { dual, baseline };
std::string_view to_string(Mode mode);

struct SimConfig {
    Mode mode = Mode::dual;
    std::uint64_t seed = 1;
    PhaseBudget budget;
    Duration tick_resolution{100};
    channel::ChannelConfig channel;
    TrafficProfile traffic = TrafficProfile::standard();
    net::NetCpuModel net_cpu;
    std::uint32_t toggle_period_cycles = 10;

    bool operator==(const SimConfig&) const = default;
};

/// Throws ConfigError naming the first offending key.
void validate(const SimConfig& cfg);

nlohmann::json to_json(const SimConfig& cfg);

/// Strict parse: unknown keys and wrong types are ConfigErrors; missing keys
/// keep their defaults. Does not run validate().
SimConfig config_from_json(const nlohmann::json& j);

SimConfig load_config(const std::string& path);

/// Canonical serialization; equal bytes mean equal runs.
std::string canonical_json(const SimConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t config_hash(const SimConfig& cfg);

} // namespace secplc
