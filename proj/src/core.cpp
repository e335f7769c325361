#include "secplc/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace secplc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

} // namespace

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next()); // full 64-bit range
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span);
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return lo + static_cast<std::int64_t>(r % span);
}

double Rng::exponential(double mean) {
    // 1 - unit() lies in (0, 1], so the log is finite.
    return -mean * std::log(1.0 - unit());
}

Rng derive_stream(std::uint64_t seed, Stream stream) {
    return Rng{splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))};
}

bool DurationDistribution::valid() const noexcept {
    if (min.count() < 0 || max < min) return false;
    switch (kind) {
    case Kind::constant: return min == max;
    case Kind::uniform: return true;
    case Kind::triangular: return min <= mode && mode <= max;
    }
    return false;
}

std::string to_string(DurationDistribution::Kind kind) {
    switch (kind) {
    case DurationDistribution::Kind::constant: return "constant";
    case DurationDistribution::Kind::uniform: return "uniform";
    case DurationDistribution::Kind::triangular: return "triangular";
    }
    return "unknown";
}

Duration sample(const DurationDistribution& dist, Rng& rng) {
    switch (dist.kind) {
    case DurationDistribution::Kind::constant:
        return dist.min;
    case DurationDistribution::Kind::uniform:
        return Duration{rng.uniform_int(dist.min.count(), dist.max.count())};
    case DurationDistribution::Kind::triangular: {
        const double a = static_cast<double>(dist.min.count());
        const double b = static_cast<double>(dist.max.count());
        const double c = static_cast<double>(dist.mode.count());
        if (b <= a) return dist.min;
        // Inverse CDF, then round to the microsecond grid.
        const double u = rng.unit();
        const double split = (c - a) / (b - a);
        const double x = u < split ? a + std::sqrt(u * (b - a) * (c - a))
                                   : b - std::sqrt((1.0 - u) * (b - a) * (b - c));
        const auto v = static_cast<std::int64_t>(std::llround(x));
        return Duration{std::clamp(v, dist.min.count(), dist.max.count())};
    }
    }
    return dist.min;
}

void VirtualClock::advance_to(Duration t) {
    if (t < now_) throw std::logic_error("virtual clock cannot move backwards");
    now_ = t;
}

Duration quantize_timeout(Duration tick, Duration timeout) {
    if (tick.count() <= 0) return timeout;
    const std::int64_t q = tick.count();
    return Duration{(timeout.count() + q - 1) / q * q};
}

Duration quantize_timeout(const VirtualClock& clock, Duration timeout) {
    return quantize_timeout(clock.tick_resolution(), timeout);
}

Duration worst_case_phase_sum(const PhaseBudget& budget, Duration tick) {
    return budget.read_in.max + quantize_timeout(tick, budget.comm_timeout) + budget.calc.max + budget.write_out.max;
}

void validate_budget(const PhaseBudget& budget, Duration tick) {
    if (!budget.read_in.valid()) throw ConfigError("budget.read_in: invalid distribution");
    if (!budget.calc.valid()) throw ConfigError("budget.calc: invalid distribution");
    if (!budget.write_out.valid()) throw ConfigError("budget.write_out: invalid distribution");
    if (budget.comm_timeout.count() <= 0) throw ConfigError("budget.comm_timeout: must be > 0");
    if (budget.target_cycle.count() <= 0) throw ConfigError("budget.target_cycle: must be > 0");
    if (budget.output_jitter.count() < 0) throw ConfigError("budget.output_jitter: must be >= 0");
    const Duration worst = worst_case_phase_sum(budget, tick);
    if (worst + budget.output_jitter > budget.target_cycle) {
        throw ConfigError("budget.target_cycle: worst-case phase sum " + std::to_string(worst.count()) +
                          " us plus output jitter " + std::to_string(budget.output_jitter.count()) +
                          " us exceeds target cycle " + std::to_string(budget.target_cycle.count()) + " us");
    }
}

std::variant<Duration, Overrun> compute_delay(const PhaseBudget& budget, Duration read_in, Duration comm,
                                              Duration calc, Duration write_out) {
    const Duration used = read_in + comm + calc + write_out;
    if (used > budget.target_cycle) return Overrun{used - budget.target_cycle};
    return budget.target_cycle - used;
}

} // namespace secplc
