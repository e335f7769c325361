#pragma once

// The time-critical controller. Every cycle runs read -> communicate ->
// calculate -> wait -> write, and the wait pads the cycle to its target so
// nothing the master does can stretch or shrink it.

#include "secplc/channel.hpp"
#include "secplc/core.hpp"
#include "secplc/trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace secplc::io {

enum class Phase { initialize, read_inputs, communication, calculation, wait, update_outputs };

struct IoState {
    Phase phase = Phase::initialize;
    std::uint64_t cycle_counter = 0;
    Duration cycle_start;
    std::uint16_t inputs = 0;
    std::uint16_t outputs = 0;
    std::uint16_t pending_outputs = 0;
    // Output bits 1..15 as last commanded by the master; bit 0 belongs to the
    // toggle program.
    std::uint16_t commanded_outputs = 0;
    std::optional<channel::DownstreamFrame> last_good_command;
    std::uint32_t toggle_period = 10;
    std::uint64_t overrun_count = 0;
    bool last_cycle_overran = false;

    bool operator==(const IoState&) const = default;
};

/// Power-on initialization; leaves the state ready for the first read.
IoState initialize(std::uint32_t toggle_period, Duration first_cycle_start = Duration{0});

/// A frame the master clocked in and the instant the transfer finished.
struct Delivery {
    Duration at;
    channel::FrameBytes bytes;
};

/// The IO side of the link during one comm window.
class SlaveEndpoint {
public:
    virtual ~SlaveEndpoint() = default;

    /// Next transfer completed inside [open, close), or nothing once the
    /// window has expired. Called repeatedly until the slave accepts a frame.
    /// `response` is what the slave shifts out on every transfer.
    virtual std::optional<Delivery> next(Duration open, Duration close, const channel::FrameBytes& response) = 0;

    /// The slave accepted a frame completed at `at`; the window ends there.
    virtual void accepted(Duration at) = 0;
};

/// An endpoint with no master attached.
class SilentEndpoint final : public SlaveEndpoint {
public:
    std::optional<Delivery> next(Duration, Duration, const channel::FrameBytes&) override { return std::nullopt; }
    void accepted(Duration) override {}
};

/// Observer for phase entry, called with the phase and its start instant.
using PhaseObserver = std::function<void(Phase, Duration, const IoState&)>;

struct CycleStep {
    IoState state;
    CycleRecord record;
};

/// Upstream frame the slave offers during the current cycle's window.
channel::UpstreamFrame upstream_for(const IoState& state);

/// Runs one complete cycle starting at state.cycle_start.
///
/// Phase costs are drawn from `rng` in a fixed order (read, calc, write,
/// jitter) before the link is touched, so the draw sequence never depends
/// on what the master did.
CycleStep run_cycle(IoState state, const VirtualClock& clock, const PhaseBudget& budget, SlaveEndpoint& endpoint,
                    Rng& rng, const PhaseObserver& observe = {});

/// Applies a config frame's toggle period; 0 and non-config frames leave the
/// period unchanged.
IoState apply_config(IoState state, const channel::DownstreamFrame& frame);

} // namespace secplc::io
