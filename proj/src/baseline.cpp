#include "secplc/baseline.hpp"

#include <algorithm>

namespace secplc::baseline {

void ingest_packet(BaselineState& state, const net::NetCpuModel& model) {
    ++state.packets_arrived;
    if (state.pending_packets >= model.queue_capacity) {
        ++state.packets_dropped;
        return;
    }
    ++state.pending_packets;
}

CycleStep run_baseline_cycle(BaselineState state, const PhaseBudget& budget, const net::NetCpuModel& model,
                             Rng& rng) {
    const Duration read_cost = sample(budget.read_in, rng);
    const Duration calc_cost = sample(budget.calc, rng);
    const Duration write_cost = sample(budget.write_out, rng);

    std::int64_t drained = state.pending_packets;
    if (model.baseline_packet_cap > 0) drained = std::min(drained, model.baseline_packet_cap);
    state.pending_packets -= drained;
    state.packets_processed += static_cast<std::uint64_t>(drained);

    CycleRecord rec;
    rec.index = state.cycle_counter;
    rec.start = state.cycle_start;
    rec.t_read_in = read_cost;
    rec.t_comm = model.per_packet_cost * drained;
    rec.t_calc = calc_cost;
    rec.t_delay = Duration{0};
    rec.t_write_out = write_cost;
    rec.total = rec.phase_sum();
    rec.comm_result = ExchangeResult::ok;

    if (state.cycle_counter % state.toggle_period == 0) state.outputs ^= 0x1u;

    state.cycle_start += rec.total;
    ++state.cycle_counter;
    return {state, std::move(rec)};
}

} // namespace secplc::baseline
