#include "secplc/cli.hpp"
#include "secplc/metrics.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;
using secplc::cli::Exit;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "secplc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = secplc::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("secplc-test-" + name);
    fs::remove_all(p);
    return p;
}

std::string config_path(const std::string& name) { return std::string(SECPLC_SOURCE_DIR) + "/configs/" + name; }

// Shortened copy of a shipped config.
std::string short_config(const std::string& name, std::int64_t segment_us, const fs::path& dir) {
    auto j = nlohmann::json::parse(secplc::metrics::read_file(config_path(name)));
    for (auto& s : j["traffic"]["segments"]) s["duration"] = segment_us;
    fs::create_directories(dir);
    const auto path = (dir / name).string();
    secplc::metrics::write_file(path, j.dump());
    return path;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("report over an empty directory fails with exit 1") {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    const auto r = cli({"report", "--in", dir.string()});
    CHECK(r.code == Exit::config_error);
    CHECK(r.err.find("no cycles.csv found") != std::string::npos);
}

TEST_CASE("unknown flags and bad configs exit 1") {
    CHECK(cli({"sim-run", "--bogus"}).code == Exit::config_error);
    CHECK(cli({}).code == Exit::config_error);
    const auto dir = scratch("badcfg");
    fs::create_directories(dir);
    secplc::metrics::write_file((dir / "c.json").string(), R"({"budget": {"cycle": 5}})");
    const auto r = cli({"sim-run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
    CHECK(r.code == Exit::config_error);
    CHECK(r.err.find("budget.cycle") != std::string::npos);
}

TEST_CASE("sim-run writes the three artifacts and refuses to overwrite them") {
    const auto dir = scratch("run");
    const auto cfg = short_config("dual-default.json", 2'000'000, dir);
    const auto out = (dir / "out").string();
    REQUIRE(cli({"sim-run", "--config", cfg, "--out", out}).code == Exit::ok);
    for (const char* f : {"cycles.csv", "summary.csv", "run-manifest.json"}) CHECK(fs::exists(fs::path(out) / f));

    const auto again = cli({"sim-run", "--config", cfg, "--out", out});
    CHECK(again.code == Exit::io_error);
    CHECK(again.err.find("--force") != std::string::npos);
    CHECK(cli({"sim-run", "--config", cfg, "--out", out, "--force"}).code == Exit::ok);

    const auto manifest = nlohmann::json::parse(secplc::metrics::read_file(out + "/run-manifest.json"));
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(manifest["artifact_version"] == std::string(secplc::cli::kArtifactVersion));

    const auto summary = secplc::metrics::read_file(out + "/summary.csv");
    std::istringstream lines(summary);
    std::string line;
    std::getline(lines, line);
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        CHECK(line.find(",0.0000,") != std::string::npos);
    }
    CHECK(rows == 3);

    const auto rep = cli({"report", "--in", out});
    CHECK(rep.code == Exit::ok);
    CHECK(rep.out.find("attack") != std::string::npos);
}

TEST_CASE("the manifest reproduces the run byte for byte") {
    const auto dir = scratch("replay");
    const auto cfg = short_config("dual-jitter-figure.json", 1'000'000, dir);
    const auto first = (dir / "a").string(), second = (dir / "b").string();
    REQUIRE(cli({"sim-run", "--config", cfg, "--out", first, "--seed", "9"}).code == Exit::ok);
    REQUIRE(cli({"sim-run", "--config", first + "/run-manifest.json", "--out", second}).code == Exit::ok);
    CHECK(secplc::metrics::read_file(first + "/cycles.csv") == secplc::metrics::read_file(second + "/cycles.csv"));
}

TEST_CASE("sim-sweep runs one scenario per value") {
    const auto dir = scratch("sweep");
    const auto cfg = short_config("sweep-utilization.json", 1'000'000, dir);
    const auto r = cli({"sim-sweep", "--config", cfg, "--param", "net_cpu.per_packet_cost", "--values", "10,20,30",
                        "--out", (dir / "out").string()});
    REQUIRE(r.code == Exit::ok);
    for (const char* v : {"10", "20", "30"})
        CHECK(fs::exists(dir / "out" / (std::string("net_cpu.per_packet_cost_") + v) / "cycles.csv"));
    const auto bad = cli({"sim-sweep", "--config", cfg, "--param", "net_cpu.per_packet_cost", "--values", "0",
                          "--out", (dir / "bad").string()});
    CHECK(bad.code == Exit::config_error);
}

TEST_CASE("shipped baseline figure config shows the tenfold slowdown") {
    const auto dir = scratch("baseline");
    const auto out = (dir / "out").string();
    REQUIRE(cli({"sim-run", "--config", config_path("baseline-figure.json"), "--out", out}).code == Exit::ok);
    const auto cycles = secplc::metrics::parse_cycles_csv(secplc::metrics::read_file(out + "/cycles.csv"));
    std::vector<secplc::Duration> idle, attack;
    for (const auto& c : cycles) {
        if (c.segment == "pre_idle") idle.push_back(c.total);
        if (c.segment == "attack") attack.push_back(c.total);
    }
    const auto i = secplc::metrics::summarize_series("pre_idle", idle, secplc::Duration{1000});
    const auto a = secplc::metrics::summarize_series("attack", attack, secplc::Duration{1000});
    const double ratio = static_cast<double>(a.median.count()) / static_cast<double>(i.median.count());
    CHECK(ratio >= 8.5);
    CHECK(ratio <= 11.5);
}

} // TEST_SUITE
