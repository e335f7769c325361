#include "secplc/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace secplc;
using namespace secplc::literals;
using namespace secplc::metrics;

namespace {

std::vector<Duration> series(std::initializer_list<std::int64_t> v) {
    std::vector<Duration> out;
    for (auto x : v) out.emplace_back(x);
    return out;
}

CycleRecord record(std::uint64_t index, Duration total) {
    CycleRecord c;
    c.index = index;
    c.segment = "pre_idle";
    c.start = Duration{static_cast<std::int64_t>(index) * 1000};
    c.t_read_in = 100_us;
    c.t_comm = 10_us;
    c.t_calc = 40_us;
    c.t_write_out = 50_us;
    c.t_delay = total - 200_us;
    c.total = total;
    c.comm_result = ExchangeResult::ok;
    return c;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("constant series has zero jitter") {
    const std::vector<Duration> s(500, 1000_us);
    const auto st = summarize_series("pre_idle", s, 1000_us);
    CHECK(st.jitter_pct == 0.0);
    CHECK(st.jitter_abs == 0_us);
    for (Duration q : {st.min, st.q1, st.median, st.q3, st.max, st.mean, st.whisker_lo, st.whisker_hi})
        CHECK(q == 1000_us);
    CHECK(st.histogram.counts == std::vector<std::uint64_t>{500});
}

TEST_CASE("range over nominal") {
    const auto st = summarize_series("attack", series({990, 1000, 1010}), 1000_us);
    CHECK(st.jitter_abs == 20_us);
    CHECK(st.jitter_pct == doctest::Approx(2.0));
    CHECK(st.median == 1000_us);
    CHECK(st.histogram.bin_width == 10_us);
    CHECK(st.histogram.origin == 990_us);
    CHECK(st.histogram.counts == std::vector<std::uint64_t>{1, 1, 1});
}

TEST_CASE("nearest-rank quantiles match a sort-and-index oracle") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 1 + gen() % 1000;
        std::vector<Duration> v;
        for (std::size_t i = 0; i < n; ++i) v.emplace_back(static_cast<std::int64_t>(gen() % 5000));
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const auto st = summarize_series("custom", v, 1000_us);
        auto oracle = [&](double p) {
            const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(p * static_cast<double>(n))));
            return sorted[rank - 1];
        };
        REQUIRE(st.q1 == oracle(0.25));
        REQUIRE(st.median == oracle(0.5));
        REQUIRE(st.q3 == oracle(0.75));
        REQUIRE(st.min == sorted.front());
        REQUIRE(st.max == sorted.back());
        std::uint64_t total = 0;
        for (auto c : st.histogram.counts) total += c;
        REQUIRE(total == n);
    }
}

TEST_CASE("whiskers stop at the last point within 1.5 IQR") {
    // q1 = 20, q3 = 40, IQR = 20: fences at -10 and 70.
    const auto st = summarize_series("custom", series({10, 20, 30, 40, 60, 71, 200, 20}), 100_us);
    CHECK(st.q1 == 20_us);
    CHECK(st.q3 == 60_us);
    const auto st2 = summarize_series("custom", series({20, 20, 30, 40, 40, 40, 70, 71}), 100_us);
    CHECK(st2.q1 == 20_us);
    CHECK(st2.q3 == 40_us);
    CHECK(st2.whisker_hi == 70_us);
    CHECK(st2.whisker_lo == 20_us);
}

TEST_CASE("permutation invariance and scale equivariance") {
    std::mt19937_64 gen(9);
    std::vector<Duration> v;
    for (int i = 0; i < 777; ++i) v.emplace_back(static_cast<std::int64_t>(900 + gen() % 300));
    const auto base = summarize_series("custom", v, 1000_us);
    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(summarize_series("custom", shuffled, 1000_us) == base);

    for (std::int64_t k : {2, 7, 10}) {
        std::vector<Duration> scaled;
        for (Duration d : v) scaled.push_back(d * k);
        const auto s = summarize_series("custom", scaled, 1000_us * k);
        CHECK(s.min == base.min * k);
        CHECK(s.max == base.max * k);
        CHECK(s.q1 == base.q1 * k);
        CHECK(s.median == base.median * k);
        CHECK(s.q3 == base.q3 * k);
        CHECK(s.jitter_abs == base.jitter_abs * k);
        CHECK(std::abs(s.mean.count() - base.mean.count() * k) <= k);
        CHECK(s.jitter_pct == doctest::Approx(base.jitter_pct));
    }
}

TEST_CASE("empty series is an error") {
    CHECK_THROWS_AS(summarize_series("attack", {}, 1000_us), MetricsError);
}

TEST_CASE("cycles.csv has a header and one row per cycle and round-trips") {
    std::vector<CycleRecord> cycles{record(0, 1000_us), record(1, 1000_us), record(2, 1010_us)};
    cycles[2].comm_result = ExchangeResult::timeout;
    cycles[2].segment = "attack";
    const std::string csv = cycles_csv(cycles);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.substr(0, kCyclesHeader.size()) == kCyclesHeader);
    CHECK(parse_cycles_csv(csv) == cycles);
}

TEST_CASE("export refuses rows whose phases do not add up") {
    auto bad = record(0, 1000_us);
    bad.total = 999_us;
    CHECK_THROWS_AS(cycles_csv(std::vector<CycleRecord>{bad}), MetricsError);
}

TEST_CASE("malformed cycles.csv is reported with its line number") {
    const std::string text = std::string(kCyclesHeader) + "\n0,pre_idle,0,100,x,1,1,1,1,ok,0\n";
    CHECK_THROWS_WITH_AS(parse_cycles_csv(text), doctest::Contains("line 2"), MetricsError);
}

TEST_CASE("summary.csv carries one row per segment with a sparse histogram") {
    Trace t;
    t.segments = {SegmentSummary{"pre_idle", 0_us, 3_ms, {}}};
    t.cycles = {record(0, 1000_us), record(1, 990_us), record(2, 1000_us)};
    const auto text = summary_csv(summarize(t, 1000_us));
    CHECK(text == std::string(kSummaryHeader) +
                      "\npre_idle,3,1000,990,990,1000,1000,1000,997,990,1000,10,1.0000,10,990,990:1;1000:2\n");
}

} // TEST_SUITE
