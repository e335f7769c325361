#include "secplc/baseline.hpp"
#include "secplc/engine.hpp"

#include <doctest.h>

using namespace secplc;
using namespace secplc::literals;

namespace {

SimConfig constant_baseline(Arrival arrival, Duration length) {
    SimConfig cfg;
    cfg.mode = Mode::baseline;
    cfg.budget.read_in = DurationDistribution::constant(100_us);
    cfg.budget.calc = DurationDistribution::constant(50_us);
    cfg.budget.write_out = DurationDistribution::constant(50_us);
    cfg.net_cpu.queue_capacity = 1'000'000;
    cfg.traffic.segments = {TrafficSegment{"custom", length, arrival}};
    return cfg;
}

double mean_total(const Trace& t, std::string_view segment) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& c : t.cycles)
        if (c.segment == segment) {
            sum += static_cast<double>(c.total.count());
            ++n;
        }
    return sum / static_cast<double>(n);
}

// Fixed point of t = base + c * r * t.
double queueing_oracle(double base_us, double cost_us, double rate_per_s) {
    const double rho = cost_us * rate_per_s / 1e6;
    return base_us / (1.0 - rho);
}

} // namespace

TEST_SUITE("baseline") {

TEST_CASE("no traffic, constant phases: every cycle is the plain phase sum") {
    const auto trace = sim::run(constant_baseline(Arrival::none(), 1_s));
    CHECK(trace.cycles.size() == 5000);
    for (const auto& c : trace.cycles) {
        REQUIRE(c.total == 200_us);
        REQUIRE(c.t_delay == 0_us);
        REQUIRE(c.t_comm == 0_us);
    }
}

TEST_CASE("mean cycle follows the queueing fixed point") {
    for (double rho : {0.1, 0.3, 0.5, 0.7, 0.8}) {
        const double rate = rho / 20e-6;
        const auto trace = sim::run(constant_baseline(Arrival::poisson(rate), 20_s));
        CAPTURE(rho);
        REQUIRE(trace.cycles.size() >= 10'000);
        CHECK(mean_total(trace, "custom") == doctest::Approx(queueing_oracle(200, 20, rate)).epsilon(0.05));
    }
}

TEST_CASE("utilization 0.9 stretches the mean cycle about tenfold") {
    const auto trace = sim::run(constant_baseline(Arrival::poisson(45'000), 60_s));
    CHECK(mean_total(trace, "custom") / 200.0 == doctest::Approx(10.0).epsilon(0.15));
}

TEST_CASE("mean cycle does not decrease with flood rate") {
    double prev = 0;
    for (double rate : {0.0, 5'000.0, 15'000.0, 25'000.0, 35'000.0, 40'000.0}) {
        const auto trace = sim::run(constant_baseline(rate > 0 ? Arrival::poisson(rate) : Arrival::none(), 5_s));
        const double m = mean_total(trace, "custom");
        CAPTURE(rate);
        CHECK(m >= prev);
        prev = m;
    }
}

TEST_CASE("the cycle recovers after the flood ends") {
    SimConfig cfg = constant_baseline(Arrival::poisson(10), 10_s);
    cfg.traffic.segments = {TrafficSegment{"pre_idle", 10_s, Arrival::poisson(10)},
                            TrafficSegment{"attack", 10_s, Arrival::poisson(40'000)},
                            TrafficSegment{"post_idle", 10_s, Arrival::poisson(10)}};
    const auto trace = sim::run(cfg);
    std::vector<const CycleRecord*> post;
    for (const auto& c : trace.cycles)
        if (c.segment == "post_idle") post.push_back(&c);
    REQUIRE(post.size() > 200);
    double sum = 0;
    for (std::size_t i = 100; i < post.size(); ++i) sum += static_cast<double>(post[i]->total.count());
    const double post_mean = sum / static_cast<double>(post.size() - 100);
    CHECK(post_mean == doctest::Approx(mean_total(trace, "pre_idle")).epsilon(0.01));
    CHECK(mean_total(trace, "attack") > 4 * mean_total(trace, "pre_idle"));
}

TEST_CASE("the drain cap bounds packets per cycle") {
    net::NetCpuModel model;
    model.baseline_packet_cap = 3;
    model.queue_capacity = 10;
    baseline::BaselineState s;
    for (int i = 0; i < 12; ++i) baseline::ingest_packet(s, model);
    CHECK(s.pending_packets == 10);
    CHECK(s.packets_dropped == 2);
    Rng rng(1);
    PhaseBudget b;
    const auto step = baseline::run_baseline_cycle(s, b, model, rng);
    CHECK(step.state.pending_packets == 7);
    CHECK(step.record.t_comm == 60_us);
    CHECK(step.record.phase_sum() == step.record.total);
}

} // TEST_SUITE
