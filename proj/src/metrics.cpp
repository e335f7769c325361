#include "secplc/metrics.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace secplc::metrics {

namespace {

std::int64_t div_round(std::int64_t num, std::int64_t den) {
    // den > 0; half away from zero
    return num >= 0 ? (num + den / 2) / den : -((-num + den / 2) / den);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t from = 0;
    for (;;) {
        const auto at = line.find(sep, from);
        if (at == std::string_view::npos) {
            out.push_back(line.substr(from));
            return out;
        }
        out.push_back(line.substr(from, at - from));
        from = at + 1;
    }
}

template <class T>
T parse_int(std::string_view field, std::size_t line_no, std::string_view column) {
    T v{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw MetricsError("cycles.csv line " + std::to_string(line_no) + ": bad " + std::string(column) + " '" +
                           std::string(field) + "'");
    return v;
}

} // namespace

const SegmentStats& JitterSummary::at(std::string_view segment) const {
    for (const auto& s : segments)
        if (s.segment == segment) return s;
    throw std::out_of_range("no segment '" + std::string(segment) + "' in summary");
}

Duration nearest_rank(std::span<const Duration> sorted, std::int64_t num, std::int64_t den) {
    if (sorted.empty()) throw MetricsError("quantile of an empty series");
    const auto n = static_cast<std::int64_t>(sorted.size());
    std::int64_t rank = (num * n + den - 1) / den;
    rank = std::clamp<std::int64_t>(rank, 1, n);
    return sorted[static_cast<std::size_t>(rank - 1)];
}

SegmentStats summarize_series(std::string segment, std::span<const Duration> totals, Duration nominal) {
    if (totals.empty()) throw MetricsError("segment '" + segment + "' has no cycles");
    std::vector<Duration> sorted(totals.begin(), totals.end());
    std::sort(sorted.begin(), sorted.end());

    SegmentStats s;
    s.segment = std::move(segment);
    s.count = sorted.size();
    s.nominal = nominal;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = nearest_rank(sorted, 1, 4);
    s.median = nearest_rank(sorted, 1, 2);
    s.q3 = nearest_rank(sorted, 3, 4);

    std::int64_t sum = 0;
    for (Duration d : sorted) sum += d.count();
    s.mean = Duration{div_round(sum, static_cast<std::int64_t>(sorted.size()))};

    // Whiskers reach the most extreme data within 1.5 IQR of the box; compared
    // at double scale to stay integral.
    const std::int64_t iqr = (s.q3 - s.q1).count();
    const std::int64_t lo_limit2 = 2 * s.q1.count() - 3 * iqr;
    const std::int64_t hi_limit2 = 2 * s.q3.count() + 3 * iqr;
    s.whisker_lo = *std::find_if(sorted.begin(), sorted.end(), [&](Duration d) { return 2 * d.count() >= lo_limit2; });
    s.whisker_hi = *std::find_if(sorted.rbegin(), sorted.rend(), [&](Duration d) { return 2 * d.count() <= hi_limit2; });

    s.jitter_abs = s.max - s.min;
    s.jitter_pct = nominal.count() > 0
                       ? 100.0 * static_cast<double>(s.jitter_abs.count()) / static_cast<double>(nominal.count())
                       : 0.0;

    const std::int64_t width = std::max<std::int64_t>(1, nominal.count() / 100);
    s.histogram.bin_width = Duration{width};
    s.histogram.origin = Duration{floor_div(s.min.count(), width) * width};
    const std::int64_t bins = floor_div(s.max.count() - s.histogram.origin.count(), width) + 1;
    s.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
    for (Duration d : sorted) ++s.histogram.counts[static_cast<std::size_t>((d - s.histogram.origin).count() / width)];
    return s;
}

JitterSummary summarize(const Trace& trace, Duration nominal) {
    JitterSummary out;
    for (const auto& seg : trace.segments) {
        std::vector<Duration> totals;
        for (const auto& c : trace.cycles)
            if (c.segment == seg.label) totals.push_back(c.total);
        out.segments.push_back(summarize_series(seg.label, totals, nominal));
    }
    return out;
}

std::string cycles_csv(std::span<const CycleRecord> cycles) {
    std::string out;
    out.reserve(64 * (cycles.size() + 1));
    out.append(kCyclesHeader).push_back('\n');
    char buf[256];
    for (const auto& c : cycles) {
        if (c.phase_sum() != c.total)
            throw MetricsError("cycle " + std::to_string(c.index) + ": phases sum to " +
                               std::to_string(c.phase_sum().count()) + " us but total is " +
                               std::to_string(c.total.count()) + " us");
        const int n = std::snprintf(buf, sizeof buf, "%llu,%s,%lld,%lld,%lld,%lld,%lld,%lld,%lld,%s,%d\n",
                                    static_cast<unsigned long long>(c.index), c.segment.c_str(),
                                    static_cast<long long>(c.start.count()), static_cast<long long>(c.t_read_in.count()),
                                    static_cast<long long>(c.t_comm.count()), static_cast<long long>(c.t_calc.count()),
                                    static_cast<long long>(c.t_delay.count()),
                                    static_cast<long long>(c.t_write_out.count()),
                                    static_cast<long long>(c.total.count()),
                                    std::string(channel::to_string(c.comm_result)).c_str(), c.overrun ? 1 : 0);
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

std::vector<CycleRecord> parse_cycles_csv(std::string_view text) {
    std::vector<CycleRecord> out;
    std::size_t line_no = 0;
    std::size_t from = 0;
    while (from < text.size()) {
        auto nl = text.find('\n', from);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(from, nl - from);
        from = nl + 1;
        ++line_no;
        if (line_no == 1) {
            if (line != kCyclesHeader) throw MetricsError("cycles.csv line 1: unexpected header");
            continue;
        }
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 11)
            throw MetricsError("cycles.csv line " + std::to_string(line_no) + ": expected 11 fields, got " +
                               std::to_string(f.size()));
        CycleRecord c;
        c.index = parse_int<std::uint64_t>(f[0], line_no, "index");
        c.segment = std::string(f[1]);
        c.start = Duration{parse_int<std::int64_t>(f[2], line_no, "start_us")};
        c.t_read_in = Duration{parse_int<std::int64_t>(f[3], line_no, "read_us")};
        c.t_comm = Duration{parse_int<std::int64_t>(f[4], line_no, "comm_us")};
        c.t_calc = Duration{parse_int<std::int64_t>(f[5], line_no, "calc_us")};
        c.t_delay = Duration{parse_int<std::int64_t>(f[6], line_no, "delay_us")};
        c.t_write_out = Duration{parse_int<std::int64_t>(f[7], line_no, "write_us")};
        c.total = Duration{parse_int<std::int64_t>(f[8], line_no, "total_us")};
        if (f[9] == "ok") c.comm_result = ExchangeResult::ok;
        else if (f[9] == "timeout") c.comm_result = ExchangeResult::timeout;
        else if (f[9] == "rejected") c.comm_result = ExchangeResult::rejected;
        else throw MetricsError("cycles.csv line " + std::to_string(line_no) + ": bad comm_result '" + std::string(f[9]) + "'");
        const int overrun = parse_int<int>(f[10], line_no, "overrun");
        if (overrun != 0 && overrun != 1)
            throw MetricsError("cycles.csv line " + std::to_string(line_no) + ": overrun must be 0 or 1");
        c.overrun = overrun == 1;
        out.push_back(std::move(c));
    }
    if (line_no == 0) throw MetricsError("cycles.csv: empty file");
    return out;
}

std::string summary_csv(const JitterSummary& summary) {
    std::ostringstream out;
    out << kSummaryHeader << '\n';
    char pct[64];
    for (const auto& s : summary.segments) {
        std::snprintf(pct, sizeof pct, "%.4f", s.jitter_pct);
        out << s.segment << ',' << s.count << ',' << s.nominal.count() << ',' << s.min.count() << ','
            << s.q1.count() << ',' << s.median.count() << ',' << s.q3.count() << ',' << s.max.count() << ','
            << s.mean.count() << ',' << s.whisker_lo.count() << ',' << s.whisker_hi.count() << ','
            << s.jitter_abs.count() << ',' << pct << ',' << s.histogram.bin_width.count() << ','
            << s.histogram.origin.count() << ',';
        bool first = true;
        for (std::size_t i = 0; i < s.histogram.counts.size(); ++i) {
            if (s.histogram.counts[i] == 0) continue;
            if (!first) out << ';';
            first = false;
            out << (s.histogram.origin.count() + static_cast<std::int64_t>(i) * s.histogram.bin_width.count()) << ':'
                << s.histogram.counts[i];
        }
        out << '\n';
    }
    return out.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing: " + std::strerror(errno));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(path + ": write failed");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open for reading: " + std::strerror(errno));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace secplc::metrics
