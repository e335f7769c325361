#include "secplc/cli.hpp"

#include "secplc/config.hpp"
#include "secplc/engine.hpp"
#include "secplc/live.hpp"
#include "secplc/metrics.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace secplc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

void install_signal_handlers() {
    g_stop.store(false);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// A config file, or a run manifest whose embedded config is used.
json config_document(const std::string& path) {
    json j = read_json(path);
    if (j.is_object() && j.contains("artifact_version") && j.contains("config")) return j.at("config");
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json manifest(const SimConfig& cfg, const Trace& trace) {
    json segments = json::array();
    for (const auto& s : trace.segments) {
        const auto& c = s.counters;
        segments.push_back({{"label", s.label},
                            {"start_us", s.start.count()},
                            {"duration_us", s.duration.count()},
                            {"packets_arrived", c.packets_arrived},
                            {"packets_processed", c.packets_processed},
                            {"packets_dropped", c.packets_dropped},
                            {"exchange_attempts", c.exchange_attempts},
                            {"exchange_ok", c.exchange_ok},
                            {"exchange_timeouts", c.exchange_timeouts},
                            {"exchange_rejected", c.exchange_rejected}});
    }
    return json{{"artifact_version", std::string(kArtifactVersion)},
                {"config", to_json(cfg)},
                {"config_hash", hex64(trace.config_hash)},
                {"seed", trace.seed},
                {"mode", std::string(to_string(cfg.mode))},
                {"nominal_us", cfg.budget.target_cycle.count()},
                {"cycles", trace.cycles.size()},
                {"overrun_count", trace.overrun_count},
                {"segments", segments}};
}

void prepare_out_dir(const fs::path& dir, bool force) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw metrics::IoError(dir.string() + ": cannot create directory: " + ec.message());
    if (force) return;
    for (const char* name : {"cycles.csv", "summary.csv", "run-manifest.json"})
        if (fs::exists(dir / name))
            throw metrics::IoError((dir / name).string() + ": already exists (use --force to overwrite)");
}

struct RunOutput {
    SimConfig cfg;
    metrics::JitterSummary summary;
};

RunOutput run_to_dir(const SimConfig& cfg, const fs::path& dir, bool force) {
    prepare_out_dir(dir, force);
    const Trace trace = sim::run(cfg);
    const auto summary = metrics::summarize(trace, cfg.budget.target_cycle);
    metrics::write_file((dir / "cycles.csv").string(), metrics::cycles_csv(trace.cycles));
    metrics::write_file((dir / "summary.csv").string(), metrics::summary_csv(summary));
    metrics::write_file((dir / "run-manifest.json").string(), manifest(cfg, trace).dump(2) + "\n");
    return {cfg, summary};
}

void print_table(std::ostream& out, const metrics::JitterSummary& summary) {
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %8s %8s %8s %8s %8s %8s %8s %10s %10s\n", "segment", "count", "min",
                  "q1", "median", "q3", "max", "mean", "jitter_us", "jitter_%");
    out << line;
    for (const auto& s : summary.segments) {
        std::snprintf(line, sizeof line, "%-10s %8llu %8lld %8lld %8lld %8lld %8lld %8lld %10lld %10.4f\n",
                      s.segment.c_str(), static_cast<unsigned long long>(s.count),
                      static_cast<long long>(s.min.count()), static_cast<long long>(s.q1.count()),
                      static_cast<long long>(s.median.count()), static_cast<long long>(s.q3.count()),
                      static_cast<long long>(s.max.count()), static_cast<long long>(s.mean.count()),
                      static_cast<long long>(s.jitter_abs.count()), s.jitter_pct);
        out << line;
    }
}

/// Sets a dotted key inside a JSON document, creating objects as needed.
/// Array elements are addressed by index, e.g. traffic.segments.1.arrival.rate.
void set_dotted(json& doc, const std::string& dotted, const json& value) {
    json* node = &doc;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("--param: empty key");
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const bool last = i + 1 == parts.size();
        if (node->is_array()) {
            const auto& p = parts[i];
            if (p.empty() || p.find_first_not_of("0123456789") != std::string::npos ||
                std::stoul(p) >= node->size())
                throw ConfigError(dotted + ": bad array index '" + p + "'");
            node = &(*node)[std::stoul(p)];
        } else {
            if (!node->is_object()) *node = json::object();
            node = &(*node)[parts[i]];
        }
        if (last) *node = value;
    }
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

std::string dir_safe(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-' && c != '_') c = '_';
    return s;
}

// ------------------------------------------------------------ subcommands

int cmd_sim_run(const std::string& config_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
                bool force, std::ostream& out) {
    SimConfig cfg = config_from_json(config_document(config_path));
    if (seed) cfg.seed = *seed;
    validate(cfg);
    const auto result = run_to_dir(cfg, out_dir, force);
    print_table(out, result.summary);
    return ok;
}

int cmd_sim_sweep(const std::string& config_path, const std::string& param, const std::vector<std::string>& values,
                  const std::string& out_dir, bool force, std::ostream& out) {
    const json base = config_document(config_path);
    std::vector<SimConfig> configs;
    for (const auto& v : values) {
        json doc = base;
        set_dotted(doc, param, parse_value(v));
        SimConfig cfg = config_from_json(doc);
        validate(cfg);
        configs.push_back(std::move(cfg));
    }

    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<RunOutput>> running;
    std::vector<RunOutput> results;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const fs::path dir = fs::path(out_dir) / dir_safe(param + "=" + values[i]);
        running.push_back(std::async(std::launch::async, run_to_dir, configs[i], dir, force));
        if (running.size() >= workers) {
            for (auto& f : running) results.push_back(f.get());
            running.clear();
        }
    }
    for (auto& f : running) results.push_back(f.get());

    for (std::size_t i = 0; i < results.size(); ++i) {
        out << param << " = " << values[i] << '\n';
        print_table(out, results[i].summary);
    }
    return ok;
}

int cmd_report(const std::string& in_dir, std::optional<std::int64_t> nominal, std::ostream& out) {
    const fs::path cycles = fs::path(in_dir) / "cycles.csv";
    if (!fs::exists(cycles)) throw ConfigError("no cycles.csv found in " + in_dir);
    if (!nominal) {
        const fs::path man = fs::path(in_dir) / "run-manifest.json";
        if (!fs::exists(man)) throw ConfigError("no run-manifest.json in " + in_dir + "; pass --nominal");
        const json j = read_json(man.string());
        if (!j.contains("nominal_us") || !j["nominal_us"].is_number_integer())
            throw ConfigError(man.string() + ": nominal_us missing");
        nominal = j["nominal_us"].get<std::int64_t>();
    }
    if (*nominal <= 0) throw ConfigError("--nominal: must be positive");
    const auto records = metrics::parse_cycles_csv(metrics::read_file(cycles.string()));
    metrics::JitterSummary summary;
    std::vector<std::string> order;
    for (const auto& r : records)
        if (std::find(order.begin(), order.end(), r.segment) == order.end()) order.push_back(r.segment);
    for (const auto& label : order) {
        std::vector<Duration> totals;
        for (const auto& r : records)
            if (r.segment == label) totals.push_back(r.total);
        summary.segments.push_back(metrics::summarize_series(label, totals, Duration{*nominal}));
    }
    print_table(out, summary);
    return ok;
}

int cmd_live_serve(const std::string& config_path, std::ostream& out) {
    const auto cfg = live::load_live_config(config_path);
    install_signal_handlers();
    const auto report = live::run_network(cfg, g_stop);
    out << live::to_json(report).dump() << std::endl;
    return ok;
}

int cmd_live_io(const std::string& config_path, std::ostream& out) {
    const auto cfg = live::load_live_config(config_path);
    install_signal_handlers();
    const auto report = live::run_io(cfg, g_stop);
    out << live::to_json(report).dump() << std::endl;
    return ok;
}

int cmd_live_flood(const std::string& target, const std::string& rate, double duration, const std::string& transport,
                   std::ostream& out) {
    live::FloodConfig cfg;
    cfg.target = target;
    cfg.duration_s = duration;
    if (rate == "max") {
        cfg.rate = -1.0;
    } else {
        try {
            std::size_t used = 0;
            cfg.rate = std::stod(rate, &used);
            if (used != rate.size() || cfg.rate < 0) throw std::invalid_argument(rate);
        } catch (const std::logic_error&) {
            throw ConfigError("--rate: expected a non-negative number or 'max'");
        }
    }
    if (transport == "connect") cfg.transport = live::FloodTransport::connect;
    else if (transport != "datagram") throw ConfigError("--transport: expected datagram or connect");
    install_signal_handlers();
    const auto report = live::flood(cfg, &g_stop);
    out << live::to_json(report).dump() << std::endl;
    return ok;
}

} // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Secure dual-controller PLC simulator and benchmark harness", "secplc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kArtifactVersion));

    std::string config, out_dir, in_dir, param, target, rate, transport = "datagram";
    std::vector<std::string> values;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> nominal;
    double duration = 10.0;
    bool force = false;

    auto* run = app.add_subcommand("sim-run", "Simulate one scenario and write cycles.csv, summary.csv, run-manifest.json");
    run->add_option("--config", config, "Config JSON or a previous run-manifest.json")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Override the config seed");
    run->add_flag("--force", force, "Overwrite existing output files");

    auto* sweep = app.add_subcommand("sim-sweep", "Simulate one scenario per value of a config key");
    sweep->add_option("--config", config, "Base config JSON")->required();
    sweep->add_option("--param", param, "Dotted config key, e.g. net_cpu.per_packet_cost")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
    sweep->add_option("--out", out_dir, "Output directory (one subdirectory per value)")->required();
    sweep->add_flag("--force", force, "Overwrite existing output files");

    auto* serve = app.add_subcommand("live-serve", "Network side: Modbus/TCP, datagram intake, link master");
    serve->add_option("--config", config, "Live config JSON")->required();

    auto* io = app.add_subcommand("live-io", "IO side: fixed-cycle loop serving the link");
    io->add_option("--config", config, "Live config JSON")->required();

    auto* fl = app.add_subcommand("live-flood", "Send a traffic flood and print a JSON report");
    fl->add_option("--target", target, "host:port")->required();
    fl->add_option("--rate", rate, "Packets per second, or 'max'")->required();
    fl->add_option("--duration", duration, "Seconds")->required();
    fl->add_option("--transport", transport, "datagram (default) or connect");

    auto* rep = app.add_subcommand("report", "Print the per-segment jitter table of a run directory");
    rep->add_option("--in", in_dir, "Run directory")->required();
    rep->add_option("--nominal", nominal, "Nominal cycle in microseconds (default: from run-manifest.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*run) return cmd_sim_run(config, out_dir, seed, force, out);
        if (*sweep) return cmd_sim_sweep(config, param, values, out_dir, force, out);
        if (*serve) return cmd_live_serve(config, out);
        if (*io) return cmd_live_io(config, out);
        if (*fl) return cmd_live_flood(target, rate, duration, transport, out);
        if (*rep) return cmd_report(in_dir, nominal, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    } catch (const metrics::MetricsError& e) {
        err << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return io_error;
    }
    return config_error;
}

} // namespace secplc::cli
