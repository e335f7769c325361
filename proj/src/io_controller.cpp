#include "secplc/io_controller.hpp"

#include <variant>

namespace secplc::io {

IoState initialize(std::uint32_t toggle_period, Duration first_cycle_start) {
    IoState s;
    s.toggle_period = toggle_period == 0 ? 1 : toggle_period;
    s.cycle_start = first_cycle_start;
    s.phase = Phase::read_inputs;
    return s;
}

channel::UpstreamFrame upstream_for(const IoState& state) {
    channel::UpstreamFrame up;
    up.seq = state.last_good_command ? state.last_good_command->seq : 0;
    up.status = state.last_cycle_overran ? channel::Status::overrun_seen : channel::Status::ok;
    up.input_state = state.inputs;
    up.output_state = state.outputs;
    up.cycle_counter = static_cast<std::uint32_t>(state.cycle_counter);
    return up;
}

IoState apply_config(IoState state, const channel::DownstreamFrame& frame) {
    if (frame.type != channel::MsgType::config) return state;
    state.last_good_command = frame;
    if (frame.cycle_config != 0) state.toggle_period = frame.cycle_config;
    return state;
}

CycleStep run_cycle(IoState state, const VirtualClock& clock, const PhaseBudget& budget, SlaveEndpoint& endpoint,
                    Rng& rng, const PhaseObserver& observe) {
    auto enter = [&](Phase p, Duration at) {
        state.phase = p;
        if (observe) observe(p, at, state);
    };

    // Cycle timer reset.
    const Duration start = state.cycle_start;
    const Duration read_cost = sample(budget.read_in, rng);
    const Duration calc_cost = sample(budget.calc, rng);
    const Duration write_cost = sample(budget.write_out, rng);
    const Duration jitter = budget.output_jitter.count() > 0
                                ? Duration{rng.uniform_int(-budget.output_jitter.count(), budget.output_jitter.count())}
                                : Duration{0};

    enter(Phase::read_inputs, start);
    state.inputs = state.outputs; // outputs are wired back to the inputs

    const Duration window_open = start + read_cost;
    const Duration window = quantize_timeout(clock, budget.comm_timeout);
    enter(Phase::communication, window_open);

    const channel::FrameBytes response = channel::encode(upstream_for(state));
    std::optional<channel::DownstreamFrame> fresh;
    ExchangeResult comm_result = ExchangeResult::timeout;
    Duration comm_cost = window;
    while (auto delivery = endpoint.next(window_open, window_open + window, response)) {
        if (delivery->at < window_open || delivery->at > window_open + window) continue;
        auto decoded = channel::decode_downstream(delivery->bytes);
        if (auto* frame = std::get_if<channel::DownstreamFrame>(&decoded)) {
            fresh = *frame;
            comm_result = ExchangeResult::ok;
            comm_cost = delivery->at - window_open;
            endpoint.accepted(delivery->at);
            break;
        }
        comm_result = ExchangeResult::rejected;
    }

    const Duration calc_start = window_open + comm_cost;
    enter(Phase::calculation, calc_start);
    if (fresh) {
        if (fresh->type == channel::MsgType::config) {
            state = apply_config(std::move(state), *fresh);
        } else {
            state.last_good_command = *fresh;
            state.commanded_outputs = static_cast<std::uint16_t>(fresh->output_command & 0xFFFEu);
        }
    }
    std::uint16_t bit0 = state.outputs & 0x1u;
    if (state.cycle_counter % state.toggle_period == 0) bit0 ^= 0x1u;
    state.pending_outputs = static_cast<std::uint16_t>(state.commanded_outputs | bit0);

    const Duration wait_start = calc_start + calc_cost;

    CycleRecord rec;
    rec.index = state.cycle_counter;
    rec.start = start;
    rec.t_read_in = read_cost;
    rec.t_comm = comm_cost;
    rec.t_calc = calc_cost;
    rec.t_write_out = write_cost;
    rec.comm_result = comm_result;

    const auto delay = compute_delay(budget, read_cost, comm_cost, calc_cost, write_cost);
    if (const auto* d = std::get_if<Duration>(&delay)) {
        enter(Phase::wait, wait_start);
        const Duration padded = *d + jitter;
        rec.t_delay = padded.count() > 0 ? padded : Duration{0};
        state.last_cycle_overran = false;
    } else {
        // No wait state: the next cycle starts as soon as the outputs are written.
        rec.overrun = true;
        rec.t_delay = Duration{0};
        ++state.overrun_count;
        state.last_cycle_overran = true;
    }

    enter(Phase::update_outputs, wait_start + rec.t_delay);
    state.outputs = state.pending_outputs;

    rec.total = rec.phase_sum();
    state.cycle_start = start + rec.total;
    ++state.cycle_counter;
    state.phase = Phase::read_inputs;
    return {std::move(state), std::move(rec)};
}

} // namespace secplc::io
