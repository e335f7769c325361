#include "secplc/config.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace secplc {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    [[nodiscard]] std::string key_path(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json* find(std::string_view key) {
        seen_.emplace(key);
        auto it = j_.find(std::string(key));
        return it == j_.end() ? nullptr : &*it;
    }

    void get(std::string_view key, Duration& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected integer microseconds");
            out = Duration{v->get<std::int64_t>()};
        }
    }

    void get(std::string_view key, std::int64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
            out = v->get<std::int64_t>();
        }
    }

    void get(std::string_view key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(key_path(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void get(std::string_view key, std::uint32_t& out) {
        std::uint64_t wide = out;
        get(key, wide);
        if (wide > 0xFFFFFFFFu) throw ConfigError(key_path(key) + ": out of range");
        out = static_cast<std::uint32_t>(wide);
    }

    void get(std::string_view key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(key_path(key) + ": expected a number");
            out = v->get<double>();
        }
    }

    void get(std::string_view key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(key_path(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    void nested(std::string_view key, const std::function<void(ObjectReader&)>& fn) {
        if (const json* v = find(key)) {
            ObjectReader inner(*v, key_path(key));
            fn(inner);
            inner.finish();
        }
    }

    void finish() const {
        for (const auto& item : j_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(key_path(item.key()) + ": unknown key");
        }
    }

    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

json dist_to_json(const DurationDistribution& d) {
    switch (d.kind) {
    case DurationDistribution::Kind::constant:
        return {{"kind", "constant"}, {"value", d.min.count()}};
    case DurationDistribution::Kind::uniform:
        return {{"kind", "uniform"}, {"min", d.min.count()}, {"max", d.max.count()}};
    case DurationDistribution::Kind::triangular:
        return {{"kind", "triangular"}, {"min", d.min.count()}, {"mode", d.mode.count()}, {"max", d.max.count()}};
    }
    return {};
}

void read_dist(ObjectReader& r, DurationDistribution& d) {
    std::string kind = to_string(d.kind);
    r.get("kind", kind);
    if (kind == "constant") {
        Duration v = d.min;
        r.get("value", v);
        d = DurationDistribution::constant(v);
    } else if (kind == "uniform") {
        Duration lo = d.min, hi = d.max;
        r.get("min", lo);
        r.get("max", hi);
        d = DurationDistribution::uniform(lo, hi);
    } else if (kind == "triangular") {
        Duration lo = d.min, mode = d.mode, hi = d.max;
        r.get("min", lo);
        r.get("mode", mode);
        r.get("max", hi);
        d = DurationDistribution::triangular(lo, mode, hi);
    } else {
        throw ConfigError(r.key_path("kind") + ": unknown distribution '" + kind + "'");
    }
}

json arrival_to_json(const Arrival& a) {
    switch (a.kind) {
    case Arrival::Kind::none: return {{"kind", "none"}};
    case Arrival::Kind::poisson: return {{"kind", "poisson"}, {"rate", a.rate}};
    case Arrival::Kind::constant_interval: return {{"kind", "constant_interval"}, {"gap", a.gap.count()}};
    }
    return {};
}

void read_arrival(ObjectReader& r, Arrival& a) {
    std::string kind = "none";
    r.get("kind", kind);
    if (kind == "none") {
        a = Arrival::none();
    } else if (kind == "poisson") {
        double rate = 0.0;
        r.get("rate", rate);
        a = Arrival::poisson(rate);
    } else if (kind == "constant_interval") {
        Duration gap;
        r.get("gap", gap);
        a = Arrival::constant_interval(gap);
    } else {
        throw ConfigError(r.key_path("kind") + ": unknown arrival kind '" + kind + "'");
    }
}

} // namespace

TrafficProfile TrafficProfile::standard(double attack_rate) {
    using namespace literals;
    return TrafficProfile{{
        {"pre_idle", 60_s, Arrival::poisson(10.0)},
        {"attack", 60_s, Arrival::poisson(attack_rate)},
        {"post_idle", 60_s, Arrival::poisson(10.0)},
    }};
}

Duration TrafficProfile::total_duration() const {
    Duration total;
    for (const auto& s : segments) total += s.duration;
    return total;
}

std::string_view to_string(Mode mode) { return mode == Mode::dual ? "dual" : "baseline"; }

void validate(const SimConfig& cfg) {
    if (cfg.toggle_period_cycles < 1) throw ConfigError("toggle_period_cycles: must be >= 1");
    if (cfg.tick_resolution.count() <= 0) throw ConfigError("tick_resolution: must be > 0");
    if (cfg.mode == Mode::dual) {
        validate_budget(cfg.budget, cfg.tick_resolution);
        channel::validate_channel(cfg.channel, cfg.tick_resolution);
    } else {
        // The free-running baseline has no wait state, so only the shapes matter.
        if (!cfg.budget.read_in.valid()) throw ConfigError("budget.read_in: invalid distribution");
        if (!cfg.budget.calc.valid()) throw ConfigError("budget.calc: invalid distribution");
        if (!cfg.budget.write_out.valid()) throw ConfigError("budget.write_out: invalid distribution");
        if (cfg.budget.target_cycle.count() <= 0) throw ConfigError("budget.target_cycle: must be > 0");
    }
    net::validate_net_cpu(cfg.net_cpu);

    if (cfg.traffic.segments.empty()) throw ConfigError("traffic.segments: at least one segment required");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < cfg.traffic.segments.size(); ++i) {
        const auto& s = cfg.traffic.segments[i];
        const std::string key = "traffic.segments." + std::to_string(i);
        if (s.label != "pre_idle" && s.label != "attack" && s.label != "post_idle" && s.label != "custom")
            throw ConfigError(key + ".label: must be pre_idle, attack, post_idle or custom");
        if (!labels.insert(s.label).second) throw ConfigError(key + ".label: duplicate label '" + s.label + "'");
        if (s.duration.count() <= 0) throw ConfigError(key + ".duration: must be > 0");
        if (s.arrival.kind == Arrival::Kind::poisson && !(s.arrival.rate >= 0.0))
            throw ConfigError(key + ".arrival.rate: must be >= 0");
        if (s.arrival.kind == Arrival::Kind::constant_interval && s.arrival.gap.count() <= 0)
            throw ConfigError(key + ".arrival.gap: must be > 0");
    }
}

json to_json(const SimConfig& cfg) {
    json segments = json::array();
    for (const auto& s : cfg.traffic.segments) {
        segments.push_back({{"label", s.label}, {"duration", s.duration.count()}, {"arrival", arrival_to_json(s.arrival)}});
    }
    return {
        {"mode", std::string(to_string(cfg.mode))},
        {"seed", cfg.seed},
        {"tick_resolution", cfg.tick_resolution.count()},
        {"toggle_period_cycles", cfg.toggle_period_cycles},
        {"budget",
         {{"read_in", dist_to_json(cfg.budget.read_in)},
          {"comm_timeout", cfg.budget.comm_timeout.count()},
          {"calc", dist_to_json(cfg.budget.calc)},
          {"write_out", dist_to_json(cfg.budget.write_out)},
          {"target_cycle", cfg.budget.target_cycle.count()},
          {"output_jitter", cfg.budget.output_jitter.count()}}},
        {"channel",
         {{"bitrate", cfg.channel.bitrate},
          {"frame_size", cfg.channel.frame_size},
          {"slave_timeout", cfg.channel.slave_timeout.count()},
          {"master_retry_delay", cfg.channel.master_retry_delay.count()},
          {"corruption_probability", cfg.channel.corruption_probability}}},
        {"traffic", {{"segments", segments}}},
        {"net_cpu",
         {{"per_packet_cost", cfg.net_cpu.per_packet_cost.count()},
          {"queue_capacity", cfg.net_cpu.queue_capacity},
          {"poll_interval", cfg.net_cpu.poll_interval.count()},
          {"baseline_packet_cap", cfg.net_cpu.baseline_packet_cap},
          {"drop_policy", "tail_drop"}}},
    };
}

SimConfig config_from_json(const json& j) {
    SimConfig cfg;
    ObjectReader root(j, "");

    std::string mode = std::string(to_string(cfg.mode));
    root.get("mode", mode);
    if (mode == "dual") cfg.mode = Mode::dual;
    else if (mode == "baseline") cfg.mode = Mode::baseline;
    else throw ConfigError("mode: expected \"dual\" or \"baseline\", got \"" + mode + "\"");

    root.get("seed", cfg.seed);
    root.get("tick_resolution", cfg.tick_resolution);
    root.get("toggle_period_cycles", cfg.toggle_period_cycles);

    root.nested("budget", [&](ObjectReader& r) {
        r.nested("read_in", [&](ObjectReader& d) { read_dist(d, cfg.budget.read_in); });
        r.get("comm_timeout", cfg.budget.comm_timeout);
        r.nested("calc", [&](ObjectReader& d) { read_dist(d, cfg.budget.calc); });
        r.nested("write_out", [&](ObjectReader& d) { read_dist(d, cfg.budget.write_out); });
        r.get("target_cycle", cfg.budget.target_cycle);
        r.get("output_jitter", cfg.budget.output_jitter);
    });

    root.nested("channel", [&](ObjectReader& r) {
        r.get("bitrate", cfg.channel.bitrate);
        r.get("frame_size", cfg.channel.frame_size);
        r.get("slave_timeout", cfg.channel.slave_timeout);
        r.get("master_retry_delay", cfg.channel.master_retry_delay);
        r.get("corruption_probability", cfg.channel.corruption_probability);
    });

    root.nested("traffic", [&](ObjectReader& r) {
        if (const json* segs = r.find("segments")) {
            if (!segs->is_array()) throw ConfigError("traffic.segments: expected an array");
            cfg.traffic.segments.clear();
            for (std::size_t i = 0; i < segs->size(); ++i) {
                TrafficSegment seg;
                ObjectReader sr((*segs)[i], "traffic.segments." + std::to_string(i));
                sr.get("label", seg.label);
                sr.get("duration", seg.duration);
                sr.nested("arrival", [&](ObjectReader& a) { read_arrival(a, seg.arrival); });
                sr.finish();
                cfg.traffic.segments.push_back(std::move(seg));
            }
        }
    });

    root.nested("net_cpu", [&](ObjectReader& r) {
        r.get("per_packet_cost", cfg.net_cpu.per_packet_cost);
        r.get("queue_capacity", cfg.net_cpu.queue_capacity);
        r.get("poll_interval", cfg.net_cpu.poll_interval);
        r.get("baseline_packet_cap", cfg.net_cpu.baseline_packet_cap);
        std::string policy = "tail_drop";
        r.get("drop_policy", policy);
        if (policy != "tail_drop") throw ConfigError("net_cpu.drop_policy: only \"tail_drop\" is supported");
    });

    root.finish();
    return cfg;
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config_from_json(j);
}

std::string canonical_json(const SimConfig& cfg) { return to_json(cfg).dump(); }

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const SimConfig& cfg) { return fnv1a64(canonical_json(cfg)); }

} // namespace secplc
