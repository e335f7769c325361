#include "secplc/network_controller.hpp"

#include <algorithm>

namespace secplc::net {

void validate_net_cpu(const NetCpuModel& model) {
    if (model.per_packet_cost.count() <= 0) throw ConfigError("net_cpu.per_packet_cost: must be > 0");
    if (model.queue_capacity < 1) throw ConfigError("net_cpu.queue_capacity: must be >= 1");
    if (model.poll_interval.count() <= 0) throw ConfigError("net_cpu.poll_interval: must be > 0");
    if (model.baseline_packet_cap < 0) throw ConfigError("net_cpu.baseline_packet_cap: must be >= 0");
}

NetworkController::NetworkController(NetCpuModel model, channel::ChannelConfig link)
    : model_(model), link_(link) {}

void NetworkController::advance(Duration now) {
    while (!queue_.empty() && queue_.front().scheduled && queue_.front().completes <= now) {
        queue_.pop_front();
        ++state_.packets_processed;
    }
    state_.queue_depth = static_cast<std::int64_t>(queue_.size());
}

void NetworkController::ingest_packet(Duration now) {
    advance(now);
    ++state_.packets_arrived;
    if (static_cast<std::int64_t>(queue_.size()) >= model_.queue_capacity) {
        ++state_.packets_dropped;
        return;
    }
    Packet p;
    if (!master_blocked_) {
        p.completes = std::max(cpu_free_at_, now) + model_.per_packet_cost;
        p.scheduled = true;
        cpu_free_at_ = p.completes;
        state_.busy_until = cpu_free_at_;
    }
    queue_.push_back(p);
    state_.queue_depth = static_cast<std::int64_t>(queue_.size());
}

std::optional<Duration> NetworkController::poll_fired(Duration now, bool is_retry) {
    advance(now);
    if (!is_retry) {
        if (outstanding_) {
            ++state_.polls_coalesced;
            return std::nullopt;
        }
        outstanding_ = true;
        ++seq_;
    }
    issued_at_ = now;
    started_at_ = std::max(now, cpu_free_at_);
    master_blocked_ = true;
    return started_at_;
}

MasterRequest NetworkController::request() const {
    MasterRequest req;
    req.issued_at = issued_at_;
    req.started_at = started_at_;
    req.frame.seq = seq_;
    if (pending_config_) {
        req.frame.type = channel::MsgType::config;
        req.frame.cycle_config = *pending_config_;
        req.frame.output_command = commanded_outputs_;
    } else {
        req.frame.type = channel::MsgType::io_update;
        req.frame.output_command = commanded_outputs_;
    }
    return req;
}

void NetworkController::exchange_finished(const channel::ExchangeOutcome& outcome, Duration cpu_release) {
    ++state_.exchange_attempts;
    switch (outcome.result) {
    case channel::ExchangeResult::ok:
        ++state_.exchange_ok;
        state_.last_upstream = outcome.upstream;
        outstanding_ = false;
        pending_config_.reset();
        break;
    case channel::ExchangeResult::timeout:
        ++state_.exchange_timeouts;
        break;
    case channel::ExchangeResult::rejected:
        ++state_.exchange_rejected;
        break;
    }

    master_blocked_ = false;
    cpu_free_at_ = std::max(cpu_free_at_, cpu_release);
    for (auto& p : queue_) {
        if (p.scheduled) continue;
        p.completes = cpu_free_at_ + model_.per_packet_cost;
        p.scheduled = true;
        cpu_free_at_ = p.completes;
    }
    state_.busy_until = cpu_free_at_;
}

} // namespace secplc::net
