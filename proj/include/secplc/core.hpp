#pragma once

// Shared vocabulary for the simulator: integer-microsecond time, bounded
// phase-time distributions, the SysTick-quantized virtual clock, seeded
// random streams, and the cycle-budget arithmetic.

#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>

namespace secplc {

/// Configuration problems. The message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A span of virtual time in whole microseconds.
///
/// Arithmetic is plain signed 64-bit, so intermediate differences may be
/// negative; configuration validation keeps stored durations >= 0.
class Duration {
public:
    constexpr Duration() = default;
    constexpr explicit Duration(std::int64_t micros) : us_(micros) {}

    [[nodiscard]] constexpr std::int64_t count() const noexcept { return us_; }

    constexpr auto operator<=>(const Duration&) const = default;

    constexpr Duration& operator+=(Duration rhs) noexcept { us_ += rhs.us_; return *this; }
    constexpr Duration& operator-=(Duration rhs) noexcept { us_ -= rhs.us_; return *this; }

    friend constexpr Duration operator+(Duration a, Duration b) noexcept { return Duration{a.us_ + b.us_}; }
    friend constexpr Duration operator-(Duration a, Duration b) noexcept { return Duration{a.us_ - b.us_}; }
    friend constexpr Duration operator*(Duration a, std::int64_t k) noexcept { return Duration{a.us_ * k}; }
    friend constexpr Duration operator*(std::int64_t k, Duration a) noexcept { return Duration{a.us_ * k}; }

private:
    std::int64_t us_ = 0;
};

namespace literals {
constexpr Duration operator""_us(unsigned long long v) { return Duration{static_cast<std::int64_t>(v)}; }
constexpr Duration operator""_ms(unsigned long long v) { return Duration{static_cast<std::int64_t>(v) * 1000}; }
constexpr Duration operator""_s(unsigned long long v) { return Duration{static_cast<std::int64_t>(v) * 1'000'000}; }
} // namespace literals

/// Seeded pseudo-random stream. The engine is mt19937_64 (bit-exact across
/// standard libraries); the range reductions below are written out so draws
/// do not depend on a particular <random> distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Uniform double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double exponential(double mean);

    bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && unit() < p); }

private:
    std::mt19937_64 engine_;
};

/// Independent sub-stream of a run seed. Each concern (IO phase times,
/// traffic, link corruption) draws from its own stream so that one side's
/// consumption never shifts the other's sequence.
enum class Stream : std::uint64_t { io = 1, traffic = 2, link = 3 };
Rng derive_stream(std::uint64_t seed, Stream stream);

/// Bounded phase-time distribution.
struct DurationDistribution {
    enum class Kind { constant, uniform, triangular };

    Kind kind = Kind::constant;
    Duration min;
    Duration max;
    Duration mode; // triangular only

    static DurationDistribution constant(Duration v) { return {Kind::constant, v, v, v}; }
    static DurationDistribution uniform(Duration lo, Duration hi) { return {Kind::uniform, lo, hi, lo}; }
    static DurationDistribution triangular(Duration lo, Duration mode, Duration hi) {
        return {Kind::triangular, lo, hi, mode};
    }

    [[nodiscard]] bool valid() const noexcept;

    bool operator==(const DurationDistribution&) const = default;
};

std::string to_string(DurationDistribution::Kind kind);

Duration sample(const DurationDistribution& dist, Rng& rng);

/// Monotonic virtual time with a SysTick resolution for timeout expiry.
class VirtualClock {
public:
    explicit VirtualClock(Duration tick_resolution = Duration{100}) : tick_(tick_resolution) {}

    [[nodiscard]] Duration now() const noexcept { return now_; }
    [[nodiscard]] Duration tick_resolution() const noexcept { return tick_; }

    /// Moves time forward. Throws std::logic_error if `t` lies in the past.
    void advance_to(Duration t);

private:
    Duration now_;
    Duration tick_;
};

/// Smallest multiple of the clock's tick that is >= `timeout`.
Duration quantize_timeout(const VirtualClock& clock, Duration timeout);
Duration quantize_timeout(Duration tick, Duration timeout);

/// Per-phase time limits of one controller cycle.
struct PhaseBudget {
    DurationDistribution read_in = DurationDistribution::constant(Duration{100});
    Duration comm_timeout{500};
    DurationDistribution calc = DurationDistribution::uniform(Duration{20}, Duration{80});
    DurationDistribution write_out = DurationDistribution::constant(Duration{50});
    Duration target_cycle{1000};
    // Bounded +/- offset applied to the output write instant; 0 disables.
    Duration output_jitter{0};

    bool operator==(const PhaseBudget&) const = default;
};

/// Longest possible phase sum: max read + quantized comm window + max calc + max write.
Duration worst_case_phase_sum(const PhaseBudget& budget, Duration tick);

/// Throws ConfigError unless every distribution is valid, timeouts and the
/// cycle are positive, and the worst-case phase sum plus jitter fits the cycle.
void validate_budget(const PhaseBudget& budget, Duration tick);

struct Overrun {
    Duration overshoot;
    bool operator==(const Overrun&) const = default;
};

/// Wait time that pads the phase sum up to the target cycle, or the amount
/// by which the phases already overshoot it.
std::variant<Duration, Overrun> compute_delay(const PhaseBudget& budget, Duration read_in, Duration comm,
                                              Duration calc, Duration write_out);

} // namespace secplc
