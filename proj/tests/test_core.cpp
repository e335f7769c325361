#include "secplc/core.hpp"

#include <doctest.h>

#include <array>
#include <set>

using namespace secplc;
using namespace secplc::literals;

TEST_SUITE("core") {

TEST_CASE("delay pads the phase sum up to the target cycle") {
    PhaseBudget b;
    b.target_cycle = 1000_us;
    CHECK(std::get<Duration>(compute_delay(b, 100_us, 500_us, 50_us, 50_us)) == 300_us);
    CHECK(std::get<Duration>(compute_delay(b, 0_us, 0_us, 0_us, 0_us)) == 1000_us);
    CHECK(std::get<Overrun>(compute_delay(b, 400_us, 500_us, 80_us, 50_us)) == Overrun{30_us});
    CHECK(std::get<Duration>(compute_delay(b, 400_us, 500_us, 50_us, 50_us)) == 0_us);
}

TEST_CASE("delay plus phase sum equals the target whenever feasible") {
    Rng rng(7);
    PhaseBudget b;
    for (int i = 0; i < 100'000; ++i) {
        b.target_cycle = Duration{rng.uniform_int(1, 20'000)};
        const Duration r{rng.uniform_int(0, 5000)}, c{rng.uniform_int(0, 5000)};
        const Duration k{rng.uniform_int(0, 5000)}, w{rng.uniform_int(0, 5000)};
        const Duration sum = r + c + k + w;
        const auto d = compute_delay(b, r, c, k, w);
        if (sum <= b.target_cycle) {
            REQUIRE(std::holds_alternative<Duration>(d));
            CHECK(std::get<Duration>(d) + sum == b.target_cycle);
            CHECK(std::get<Duration>(d) >= 0_us);
        } else {
            REQUIRE(std::holds_alternative<Overrun>(d));
            CHECK(std::get<Overrun>(d).overshoot == sum - b.target_cycle);
        }
    }
}

TEST_CASE("timeouts round up to whole ticks") {
    CHECK(quantize_timeout(100_us, 500_us) == 500_us);
    CHECK(quantize_timeout(100_us, 450_us) == 500_us);
    CHECK(quantize_timeout(100_us, 0_us) == 0_us);
    CHECK(quantize_timeout(100_us, 1_us) == 100_us);
    VirtualClock clock(250_us);
    CHECK(quantize_timeout(clock, 501_us) == 750_us);
}

TEST_CASE("virtual clock only moves forward") {
    VirtualClock clock;
    clock.advance_to(10_us);
    clock.advance_to(10_us);
    CHECK(clock.now() == 10_us);
    CHECK_THROWS_AS(clock.advance_to(9_us), std::logic_error);
}

TEST_CASE("distributions stay inside their support") {
    Rng rng(11);
    CHECK(sample(DurationDistribution::constant(50_us), rng) == 50_us);
    Rng first(1);
    const Duration v = sample(DurationDistribution::uniform(40_us, 60_us), first);
    CHECK(v >= 40_us);
    CHECK(v <= 60_us);

    std::set<std::int64_t> seen;
    const auto tri = DurationDistribution::triangular(10_us, 12_us, 20_us);
    for (int i = 0; i < 100'000; ++i) {
        const Duration u = sample(DurationDistribution::uniform(40_us, 60_us), rng);
        REQUIRE(u >= 40_us);
        REQUIRE(u <= 60_us);
        seen.insert(u.count());
        const Duration t = sample(tri, rng);
        REQUIRE(t >= 10_us);
        REQUIRE(t <= 20_us);
    }
    CHECK(seen.size() == 21);
}

TEST_CASE("triangular mean matches (min + mode + max) / 3") {
    Rng rng(2024);
    const auto tri = DurationDistribution::triangular(40_us, 50_us, 60_us);
    double sum = 0;
    constexpr int n = 1'000'000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(sample(tri, rng).count());
    CHECK(sum / n == doctest::Approx(50.0).epsilon(0.1 / 50.0));
}

TEST_CASE("invalid distributions are rejected") {
    CHECK_FALSE(DurationDistribution::uniform(60_us, 40_us).valid());
    CHECK_FALSE(DurationDistribution::triangular(40_us, 70_us, 60_us).valid());
    CHECK_FALSE(DurationDistribution::constant(Duration{-1}).valid());
    CHECK(DurationDistribution::triangular(40_us, 40_us, 60_us).valid());
}

TEST_CASE("budget validation uses the quantized comm window") {
    PhaseBudget b;
    CHECK_NOTHROW(validate_budget(b, 100_us));
    CHECK(worst_case_phase_sum(b, 100_us) == 100_us + 500_us + 80_us + 50_us);
    b.comm_timeout = 801_us; // rounds to 900 us
    CHECK_THROWS_AS(validate_budget(b, 100_us), ConfigError);
    b.comm_timeout = 500_us;
    b.output_jitter = 300_us;
    CHECK_THROWS_AS(validate_budget(b, 100_us), ConfigError);
}

TEST_CASE("random streams are reproducible and distinct") {
    Rng a = derive_stream(5, Stream::io), b = derive_stream(5, Stream::io);
    Rng c = derive_stream(5, Stream::traffic);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("uniform_int covers both ends without bias") {
    Rng rng(3);
    std::array<int, 3> hits{};
    for (int i = 0; i < 30'000; ++i) ++hits[static_cast<std::size_t>(rng.uniform_int(-1, 1) + 1)];
    for (int h : hits) CHECK(h == doctest::Approx(10'000).epsilon(0.05));
}

} // TEST_SUITE
