#pragma once

// Cycle-time statistics and the two CSV contracts (cycles.csv, summary.csv)
// consumed by the plotting scripts.

#include "secplc/core.hpp"
#include "secplc/trace.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace secplc::metrics {

/// Statistics over an empty series, or a malformed CSV.
class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system failures; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Histogram {
    Duration bin_width;
    Duration origin; // lower edge of counts[0]
    std::vector<std::uint64_t> counts;

    bool operator==(const Histogram&) const = default;
};

struct SegmentStats {
    std::string segment;
    std::uint64_t count = 0;
    Duration nominal;
    Duration min, q1, median, q3, max;
    Duration mean; // rounded to the nearest microsecond
    Duration whisker_lo, whisker_hi;
    Duration jitter_abs;
    double jitter_pct = 0.0;
    Histogram histogram;

    bool operator==(const SegmentStats&) const = default;
};

struct JitterSummary {
    std::vector<SegmentStats> segments;

    /// Throws std::out_of_range for an unknown label.
    [[nodiscard]] const SegmentStats& at(std::string_view segment) const;
};

/// Nearest-rank quantile of an ascending series: element ceil(p * n), 1-based.
/// p is given as the fraction num/den to keep the rank exact.
Duration nearest_rank(std::span<const Duration> sorted, std::int64_t num, std::int64_t den);

/// Statistics of one series; throws MetricsError when it is empty.
SegmentStats summarize_series(std::string segment, std::span<const Duration> totals, Duration nominal);

/// One entry per trace segment, in trace order.
JitterSummary summarize(const Trace& trace, Duration nominal);

inline constexpr std::string_view kCyclesHeader =
    "index,segment,start_us,read_us,comm_us,calc_us,delay_us,write_us,total_us,comm_result,overrun";
inline constexpr std::string_view kSummaryHeader =
    "segment,count,nominal_us,min_us,q1_us,median_us,q3_us,max_us,mean_us,whisker_lo_us,whisker_hi_us,"
    "jitter_abs_us,jitter_pct,hist_bin_us,hist_origin_us,histogram";

/// Throws MetricsError if a record's phases do not add up to its total.
std::string cycles_csv(std::span<const CycleRecord> cycles);
std::vector<CycleRecord> parse_cycles_csv(std::string_view text);
std::string summary_csv(const JitterSummary& summary);

void write_file(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

} // namespace secplc::metrics
