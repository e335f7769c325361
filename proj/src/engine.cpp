#include "secplc/engine.hpp"

#include "secplc/baseline.hpp"
#include "secplc/channel.hpp"
#include "secplc/io_controller.hpp"
#include "secplc/network_controller.hpp"

#include <algorithm>
#include <cmath>

namespace secplc::sim {

void EventQueue::schedule(Duration time, EventKind kind, std::uint32_t tag, std::uint64_t arg) {
    heap_.push(Event{time, kind, next_seq_++, tag, arg});
}

std::optional<Event> EventQueue::next() {
    if (heap_.empty()) return std::nullopt;
    Event e = heap_.top();
    heap_.pop();
    return e;
}

namespace {

// poll_timer sub-kinds
enum PollTag : std::uint32_t { periodic = 0, retry = 1, execute = 2, deadline = 3 };

class Engine final : public io::SlaveEndpoint {
public:
    explicit Engine(const SimConfig& cfg)
        : cfg_(cfg),
          clock_(cfg.tick_resolution),
          io_rng_(derive_stream(cfg.seed, Stream::io)),
          traffic_rng_(derive_stream(cfg.seed, Stream::traffic)),
          link_rng_(derive_stream(cfg.seed, Stream::link)),
          net_(cfg.net_cpu, cfg.channel),
          end_(cfg.traffic.total_duration()),
          timeout_(quantize_timeout(cfg.tick_resolution, cfg.channel.slave_timeout)) {
        io_ = io::initialize(cfg.toggle_period_cycles);
        base_.toggle_period = cfg.toggle_period_cycles;
    }

    Trace run() {
        Duration t;
        for (std::size_t i = 0; i < cfg_.traffic.segments.size(); ++i) {
            seg_start_.push_back(t);
            queue_.schedule(t, EventKind::segment_boundary, 0, i);
            t += cfg_.traffic.segments[i].duration;
        }
        queue_.schedule(Duration{0}, EventKind::io_cycle_boundary);
        if (cfg_.mode == Mode::dual) queue_.schedule(Duration{0}, EventKind::poll_timer, periodic);

        while (!queue_.empty() && queue_.top().time < end_) {
            const Event ev = *queue_.next();
            clock_.advance_to(ev.time);
            dispatch(ev);
        }
        close_segment(end_);

        trace_.config_hash = config_hash(cfg_);
        trace_.seed = cfg_.seed;
        trace_.overrun_count = cfg_.mode == Mode::dual ? io_.overrun_count : 0;
        return std::move(trace_);
    }

    std::optional<io::Delivery> next(Duration open, Duration close, const channel::FrameBytes& response) override {
        if (!window_ || window_->open != open) {
            window_ = Window{open, close, response};
            if (waiting_) resolve(net_.request(), waiting_->started_at);
        }
        for (;;) {
            if (pending_delivery_) {
                auto d = std::exchange(pending_delivery_, std::nullopt);
                return d;
            }
            if (queue_.empty()) break;
            const Event& top = queue_.top();
            if (top.time >= window_->close || top.time >= end_) break;
            const Event ev = *queue_.next();
            clock_.advance_to(ev.time);
            dispatch(ev);
        }
        return std::nullopt;
    }

    void accepted(Duration at) override {
        if (window_) window_->close = at;
    }

private:
    struct Window {
        Duration open;
        Duration close; // pulled in when the slave accepts a frame
        channel::FrameBytes response;
    };

    struct Waiting {
        std::uint64_t attempt;
        Duration started_at;
    };

    void dispatch(const Event& ev) {
        switch (ev.kind) {
        case EventKind::segment_boundary: on_segment(static_cast<std::size_t>(ev.arg)); break;
        case EventKind::io_cycle_boundary: on_io_cycle(); break;
        case EventKind::poll_timer: on_poll(ev); break;
        case EventKind::packet_arrival: on_packet(static_cast<std::size_t>(ev.arg)); break;
        }
    }

    SegmentCounters counters_now(Duration now) {
        SegmentCounters c;
        if (cfg_.mode == Mode::dual) {
            net_.advance(now);
            const auto& s = net_.state();
            c.packets_arrived = s.packets_arrived;
            c.packets_processed = s.packets_processed;
            c.packets_dropped = s.packets_dropped;
            c.exchange_attempts = s.exchange_attempts;
            c.exchange_ok = s.exchange_ok;
            c.exchange_timeouts = s.exchange_timeouts;
            c.exchange_rejected = s.exchange_rejected;
        } else {
            c.packets_arrived = base_.packets_arrived;
            c.packets_processed = base_.packets_processed;
            c.packets_dropped = base_.packets_dropped;
        }
        return c;
    }

    void close_segment(Duration now) {
        if (trace_.segments.empty()) return;
        const SegmentCounters c = counters_now(now);
        auto& cur = trace_.segments.back().counters;
        cur.packets_arrived = c.packets_arrived - begin_.packets_arrived;
        cur.packets_processed = c.packets_processed - begin_.packets_processed;
        cur.packets_dropped = c.packets_dropped - begin_.packets_dropped;
        cur.exchange_attempts = c.exchange_attempts - begin_.exchange_attempts;
        cur.exchange_ok = c.exchange_ok - begin_.exchange_ok;
        cur.exchange_timeouts = c.exchange_timeouts - begin_.exchange_timeouts;
        cur.exchange_rejected = c.exchange_rejected - begin_.exchange_rejected;
        begin_ = c;
    }

    void on_segment(std::size_t index) {
        close_segment(clock_.now());
        if (trace_.segments.empty()) begin_ = counters_now(clock_.now());
        const auto& seg = cfg_.traffic.segments[index];
        trace_.segments.push_back(SegmentSummary{seg.label, seg_start_[index], seg.duration, {}});
        current_seg_ = index;
        cursor_ns_ = seg_start_[index].count() * 1000;
        schedule_arrival(index, true);
    }

    void schedule_arrival(std::size_t index, bool first = false) {
        const auto& seg = cfg_.traffic.segments[index];
        std::int64_t gap_ns = 0;
        switch (seg.arrival.kind) {
        case Arrival::Kind::none: return;
        case Arrival::Kind::poisson:
            if (seg.arrival.rate <= 0.0) return;
            gap_ns = std::llround(traffic_rng_.exponential(1e9 / seg.arrival.rate));
            break;
        case Arrival::Kind::constant_interval:
            gap_ns = first ? 0 : seg.arrival.gap.count() * 1000;
            break;
        }
        cursor_ns_ += gap_ns;
        const Duration at{cursor_ns_ / 1000};
        if (at < seg_start_[index] + seg.duration) queue_.schedule(at, EventKind::packet_arrival, 0, index);
    }

    void on_packet(std::size_t index) {
        if (cfg_.mode == Mode::dual) net_.ingest_packet(clock_.now());
        else baseline::ingest_packet(base_, cfg_.net_cpu);
        schedule_arrival(index);
    }

    void on_io_cycle() {
        const std::string& label = cfg_.traffic.segments[current_seg_].label;
        CycleRecord rec;
        Duration next_start;
        if (cfg_.mode == Mode::dual) {
            auto step = io::run_cycle(std::move(io_), clock_, cfg_.budget, *this, io_rng_);
            window_.reset();
            io_ = std::move(step.state);
            rec = std::move(step.record);
            next_start = io_.cycle_start;
        } else {
            auto step = baseline::run_baseline_cycle(base_, cfg_.budget, cfg_.net_cpu, io_rng_);
            base_ = step.state;
            rec = std::move(step.record);
            next_start = base_.cycle_start;
        }
        rec.segment = label;
        trace_.cycles.push_back(std::move(rec));
        if (next_start < end_) queue_.schedule(next_start, EventKind::io_cycle_boundary);
    }

    void on_poll(const Event& ev) {
        const Duration now = clock_.now();
        switch (static_cast<PollTag>(ev.tag)) {
        case periodic:
            if (now + cfg_.net_cpu.poll_interval < end_)
                queue_.schedule(now + cfg_.net_cpu.poll_interval, EventKind::poll_timer, periodic);
            [[fallthrough]];
        case retry:
            if (auto start = net_.poll_fired(now, ev.tag == retry)) {
                if (*start + channel::transfer_time(cfg_.channel) > now + timeout_) {
                    withdraw(now);
                    break;
                }
                ++attempt_;
                queue_.schedule(*start, EventKind::poll_timer, execute, attempt_);
            }
            break;
        case execute:
            attempt(now);
            break;
        case deadline:
            if (waiting_ && waiting_->attempt == ev.arg) resolve(net_.request(), waiting_->started_at);
            break;
        }
    }

    // The backlog ahead of the master outlasts its timeout: the request
    // expires without ever running and the retry timer is armed from the
    // deadline.
    void withdraw(Duration issued) {
        channel::ExchangeOutcome out;
        out.result = channel::ExchangeResult::timeout;
        out.elapsed = timeout_;
        out.retry_at = issued + timeout_ + cfg_.channel.master_retry_delay;
        net_.exchange_finished(out, issued);
        if (*out.retry_at < end_) queue_.schedule(*out.retry_at, EventKind::poll_timer, retry);
    }

    // The master owns the CPU from `start` on.
    void attempt(Duration start) {
        const net::MasterRequest req = net_.request();
        if (offer_at(start) || start >= req.issued_at + timeout_) {
            resolve(req, start);
            return;
        }
        waiting_ = Waiting{attempt_, start};
        queue_.schedule(req.issued_at + timeout_, EventKind::poll_timer, deadline, attempt_);
    }

    [[nodiscard]] std::optional<channel::SlaveOffer> offer_at(Duration start) const {
        if (!window_) return std::nullopt;
        const Duration ready = std::max(start, window_->open);
        if (ready + channel::transfer_time(cfg_.channel) > window_->close) return std::nullopt;
        return channel::SlaveOffer{ready, window_->response};
    }

    void resolve(const net::MasterRequest& req, Duration start) {
        VirtualClock at(cfg_.tick_resolution);
        at.advance_to(start);
        const auto out = channel::master_exchange(at, cfg_.channel, req.issued_at, req.frame, offer_at(start), link_rng_);
        const Duration release = out.delivered_at ? *out.delivered_at : std::max(start, req.issued_at + timeout_);
        net_.exchange_finished(out, release);
        if (out.delivered) pending_delivery_ = io::Delivery{*out.delivered_at, *out.delivered};
        if (out.retry_at && *out.retry_at < end_) queue_.schedule(*out.retry_at, EventKind::poll_timer, retry);
        waiting_.reset();
    }

    const SimConfig& cfg_;
    VirtualClock clock_;
    EventQueue queue_;
    Rng io_rng_;
    Rng traffic_rng_;
    Rng link_rng_;
    io::IoState io_;
    baseline::BaselineState base_;
    net::NetworkController net_;
    Duration end_;
    Duration timeout_;

    std::vector<Duration> seg_start_;
    std::size_t current_seg_ = 0;
    std::int64_t cursor_ns_ = 0;
    SegmentCounters begin_;
    Trace trace_;

    std::optional<Window> window_;
    std::optional<io::Delivery> pending_delivery_;
    std::optional<Waiting> waiting_;
    std::uint64_t attempt_ = 0;
};

} // namespace

Trace run(const SimConfig& config) {
    validate(config);
    Engine engine(config);
    return engine.run();
}

} // namespace secplc::sim
