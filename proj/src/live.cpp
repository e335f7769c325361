#include "secplc/live.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace secplc::live {

using nlohmann::json;

HostPort parse_host_port(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw ConfigError("address '" + text + "': expected host:port");
    HostPort hp;
    hp.host = text.substr(0, colon);
    if (hp.host == "localhost") hp.host = "127.0.0.1";
    in_addr probe{};
    if (inet_pton(AF_INET, hp.host.c_str(), &probe) != 1)
        throw ConfigError("address '" + text + "': host must be an IPv4 literal or localhost");
    const std::string port = text.substr(colon + 1);
    if (port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5)
        throw ConfigError("address '" + text + "': bad port");
    const unsigned long value = std::stoul(port);
    if (value == 0 || value > 65535) throw ConfigError("address '" + text + "': port out of range");
    hp.port = static_cast<std::uint16_t>(value);
    return hp;
}

// ---------------------------------------------------------------- config

namespace {

class Keys {
public:
    Keys(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError((path_.empty() ? "live config" : path_) + ": expected an object");
    }

    const json* find(const std::string& key) {
        seen_.push_back(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    [[nodiscard]] std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void get(const std::string& key, Duration& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
                throw ConfigError(where(key) + ": expected non-negative integer microseconds");
            out = Duration{v->get<std::int64_t>()};
        }
    }
    void get(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, std::int64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
            out = v->get<std::int64_t>();
        }
    }
    void get(const std::string& key, std::uint32_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned() || v->get<std::uint64_t>() > 0xFFFFFFFFu)
                throw ConfigError(where(key) + ": expected a non-negative 32-bit integer");
            out = v->get<std::uint32_t>();
        }
    }
    void get(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(where(it.key()) + ": unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

} // namespace

LiveConfig live_config_from_json(const json& j) {
    LiveConfig cfg;
    Keys top(j, "");
    top.get("listen_address", cfg.listen_address);
    top.get("io_link_address", cfg.io_link_address);
    if (const json* io = top.find("io")) {
        Keys k(*io, "io");
        k.get("target_cycle", cfg.io.target_cycle);
        k.get("comm_timeout", cfg.io.comm_timeout);
        k.get("write_cost", cfg.io.write_cost);
        k.get("toggle_period", cfg.io.toggle_period);
        k.get("duration_s", cfg.io.duration_s);
        k.get("log_path", cfg.io.log_path);
        k.finish();
    }
    if (const json* net = top.find("net")) {
        Keys k(*net, "net");
        k.get("slave_timeout", cfg.net.slave_timeout);
        k.get("retry_delay", cfg.net.retry_delay);
        k.get("per_packet_cost", cfg.net.per_packet_cost);
        k.get("queue_capacity", cfg.net.queue_capacity);
        k.get("duration_s", cfg.net.duration_s);
        k.finish();
    }
    if (const json* fl = top.find("flood")) {
        Keys k(*fl, "flood");
        k.get("target", cfg.flood.target);
        std::string transport = "datagram";
        k.get("transport", transport);
        if (transport == "datagram") cfg.flood.transport = FloodTransport::datagram;
        else if (transport == "connect") cfg.flood.transport = FloodTransport::connect;
        else throw ConfigError("flood.transport: expected datagram or connect");
        k.get("rate", cfg.flood.rate);
        k.get("payload_size", cfg.flood.payload_size);
        k.get("duration_s", cfg.flood.duration_s);
        k.finish();
    }
    top.finish();

    parse_host_port(cfg.listen_address);
    parse_host_port(cfg.io_link_address);
    if (cfg.io.target_cycle.count() <= 0) throw ConfigError("io.target_cycle: must be positive");
    if (cfg.io.comm_timeout + cfg.io.write_cost >= cfg.io.target_cycle)
        throw ConfigError("io.comm_timeout: comm window and write leave no room in the cycle");
    if (cfg.io.toggle_period == 0) throw ConfigError("io.toggle_period: must be at least 1");
    if (cfg.io.duration_s < 0) throw ConfigError("io.duration_s: must be >= 0");
    if (cfg.net.queue_capacity < 1) throw ConfigError("net.queue_capacity: must be at least 1");
    if (cfg.net.duration_s < 0) throw ConfigError("net.duration_s: must be >= 0");
    if (cfg.flood.payload_size < 1 || cfg.flood.payload_size > 1400)
        throw ConfigError("flood.payload_size: must be within 1..1400");
    return cfg;
}

LiveConfig load_live_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return live_config_from_json(j);
}

// ---------------------------------------------------------------- modbus

namespace {

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::uint16_t get16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

std::vector<std::uint8_t> exception(std::uint8_t function, std::uint8_t code) {
    return {static_cast<std::uint8_t>(function | 0x80), code};
}

} // namespace

std::optional<MbapHeader> parse_mbap(std::span<const std::uint8_t, 7> b) {
    MbapHeader h;
    h.transaction_id = get16(&b[0]);
    h.protocol_id = get16(&b[2]);
    h.length = get16(&b[4]);
    h.unit_id = b[6];
    if (h.protocol_id != 0 || h.length < 2 || h.length > 254) return std::nullopt;
    return h;
}

std::vector<std::uint8_t> handle_pdu(std::span<const std::uint8_t> pdu, RegisterBank& bank) {
    if (pdu.empty()) return {};
    const std::uint8_t fn = pdu[0];
    switch (fn) {
    case 0x03: {
        if (pdu.size() != 5) return {};
        const std::uint16_t start = get16(&pdu[1]);
        const std::uint16_t quantity = get16(&pdu[3]);
        if (quantity < 1 || quantity > 125) return exception(fn, 0x03);
        if (static_cast<std::uint32_t>(start) + quantity > kRegisterCount) return exception(fn, 0x02);
        std::vector<std::uint8_t> out{fn, static_cast<std::uint8_t>(2 * quantity)};
        for (std::uint16_t i = 0; i < quantity; ++i) put16(out, bank.read(static_cast<std::uint16_t>(start + i)));
        return out;
    }
    case 0x06: {
        if (pdu.size() != 5) return {};
        const std::uint16_t address = get16(&pdu[1]);
        const std::uint16_t value = get16(&pdu[3]);
        if (address != kRegTogglePeriod) return exception(fn, 0x02);
        bank.write_toggle_period(value);
        return {pdu.begin(), pdu.end()};
    }
    default:
        return exception(fn, 0x01);
    }
}

std::vector<std::uint8_t> handle_adu(std::span<const std::uint8_t> adu, RegisterBank& bank) {
    if (adu.size() < 8) return {};
    const auto header = parse_mbap(adu.first<7>());
    if (!header || adu.size() != static_cast<std::size_t>(6 + header->length)) return {};
    const auto pdu = handle_pdu(adu.subspan(7), bank);
    if (pdu.empty()) return {};
    std::vector<std::uint8_t> out;
    out.reserve(7 + pdu.size());
    put16(out, header->transaction_id);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(pdu.size() + 1));
    out.push_back(header->unit_id);
    out.insert(out.end(), pdu.begin(), pdu.end());
    return out;
}

// ---------------------------------------------------------------- sockets

namespace {

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }

    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    [[nodiscard]] int get() const { return fd_; }
    explicit operator bool() const { return fd_ >= 0; }

private:
    int fd_ = -1;
};

[[noreturn]] void sys_fail(const std::string& what) { throw std::runtime_error(what + ": " + std::strerror(errno)); }

sockaddr_in to_sockaddr(const HostPort& hp) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(hp.port);
    inet_pton(AF_INET, hp.host.c_str(), &sa.sin_addr);
    return sa;
}

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

Fd bind_socket(const std::string& address, int type) {
    const HostPort hp = parse_host_port(address);
    Fd fd(::socket(AF_INET, type, 0));
    if (!fd) sys_fail("socket");
    int one = 1;
    setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const sockaddr_in sa = to_sockaddr(hp);
    if (::bind(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) sys_fail("bind " + address);
    if (type == SOCK_STREAM && ::listen(fd.get(), 8) != 0) sys_fail("listen " + address);
    return fd;
}

Fd connect_tcp(const std::string& address) {
    const HostPort hp = parse_host_port(address);
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd) return fd;
    const sockaddr_in sa = to_sockaddr(hp);
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) return Fd{};
    int one = 1;
    setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    set_nonblocking(fd.get());
    return fd;
}

/// Waits for readability for at most `us` microseconds.
bool wait_readable(int fd, std::int64_t us) {
    pollfd p{fd, POLLIN, 0};
    timespec ts{};
    us = std::max<std::int64_t>(us, 0);
    ts.tv_sec = us / 1'000'000;
    ts.tv_nsec = (us % 1'000'000) * 1000;
    return ::ppoll(&p, 1, &ts, nullptr) > 0;
}

bool send_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t sent = ::send(fd, data, n, MSG_NOSIGNAL);
        if (sent < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                pollfd p{fd, POLLOUT, 0};
                if (::poll(&p, 1, 100) <= 0) return false;
                continue;
            }
            return false;
        }
        data += sent;
        n -= static_cast<std::size_t>(sent);
    }
    return true;
}

/// Reads exactly n bytes from a blocking socket with a receive timeout,
/// checking `stop` between timeouts. False on EOF, error or stop.
bool recv_exact(int fd, std::uint8_t* out, std::size_t n, const std::atomic<bool>& stop) {
    while (n > 0) {
        const ssize_t got = ::recv(fd, out, n, 0);
        if (got == 0) return false;
        if (got < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK) {
                if (stop.load()) return false;
                continue;
            }
            return false;
        }
        out += got;
        n -= static_cast<std::size_t>(got);
    }
    return true;
}

void set_recv_timeout(int fd, int ms) {
    timeval tv{ms / 1000, (ms % 1000) * 1000};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

void spin_for(std::int64_t us) {
    const std::int64_t until = monotonic_us() + us;
    while (monotonic_us() < until) {
    }
}

/// Sleeps most of the way, then spins to the exact instant.
void wait_until(std::int64_t at_us) {
    constexpr std::int64_t kSpin = 200;
    const std::int64_t now = monotonic_us();
    if (at_us - now > kSpin) std::this_thread::sleep_for(std::chrono::microseconds(at_us - now - kSpin));
    while (monotonic_us() < at_us) {
    }
}

} // namespace

std::int64_t monotonic_us() {
    timespec ts{};
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000 + ts.tv_nsec / 1000;
}

// ---------------------------------------------------------------- flood

json to_json(const FloodReport& r) {
    return json{{"packets_sent", r.packets_sent},
                {"send_errors", r.send_errors},
                {"duration", r.duration_s},
                {"achieved_rate", r.achieved_rate}};
}

FloodReport flood(const FloodConfig& cfg, const std::atomic<bool>* stop) {
    const HostPort hp = parse_host_port(cfg.target);
    if (cfg.duration_s <= 0) throw ConfigError("flood.duration_s: must be positive");
    Fd fd(::socket(AF_INET, SOCK_DGRAM, 0));
    if (!fd) sys_fail("socket");
    const sockaddr_in sa = to_sockaddr(hp);
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(cfg.payload_size), 0x5A);

    FloodReport report;
    if (cfg.rate == 0) return report;
    const std::int64_t t0 = monotonic_us();
    const auto budget_us = static_cast<std::int64_t>(std::llround(cfg.duration_s * 1e6));
    std::uint64_t attempts = 0;
    for (;;) {
        const std::int64_t elapsed = monotonic_us() - t0;
        if (elapsed >= budget_us || (stop && stop->load())) break;
        if (cfg.rate > 0) {
            const auto due = static_cast<std::uint64_t>(cfg.rate * static_cast<double>(elapsed) / 1e6) + 1;
            if (attempts >= due) {
                const auto next_at = static_cast<std::int64_t>(static_cast<double>(attempts) * 1e6 / cfg.rate);
                const std::int64_t gap = std::min(next_at, budget_us) - elapsed;
                if (gap > 0) std::this_thread::sleep_for(std::chrono::microseconds(std::min<std::int64_t>(gap, 10'000)));
                continue;
            }
        }
        ++attempts;
        payload[0] = static_cast<std::uint8_t>(attempts);
        if (cfg.transport == FloodTransport::connect) {
            // Half-open connection attempts, abandoned immediately.
            Fd c(::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK, 0));
            const int rc = c ? ::connect(c.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) : -1;
            if (rc == 0 || errno == EINPROGRESS) ++report.packets_sent;
            else ++report.send_errors;
            continue;
        }
        const ssize_t n = ::sendto(fd.get(), payload.data(), payload.size(), 0,
                                   reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
        if (n == static_cast<ssize_t>(payload.size())) ++report.packets_sent;
        else ++report.send_errors;
    }
    report.duration_s = static_cast<double>(monotonic_us() - t0) / 1e6;
    report.achieved_rate = report.duration_s > 0 ? static_cast<double>(report.packets_sent) / report.duration_s : 0.0;
    return report;
}

// ---------------------------------------------------------------- process B

json to_json(const IoRunReport& r) {
    return json{{"cycles", r.cycles},
                {"frames_accepted", r.frames_accepted},
                {"frames_rejected", r.frames_rejected},
                {"overruns", r.overruns},
                {"min_cycle_us", r.min_cycle_us},
                {"max_cycle_us", r.max_cycle_us},
                {"max_comm_us", r.max_comm_us}};
}

namespace {

class CycleLog {
public:
    explicit CycleLog(const std::string& path) {
        if (path.empty()) return;
        file_ = std::fopen(path.c_str(), "w");
        if (!file_) sys_fail(path);
        std::fputs("counter,write_at_us,duration_us,outputs,toggle_period,comm_result,comm_us\n", file_);
    }
    CycleLog(const CycleLog&) = delete;
    CycleLog& operator=(const CycleLog&) = delete;
    ~CycleLog() {
        if (file_) std::fclose(file_);
    }

    void add(const IoCycleSample& s) {
        if (!file_) return;
        std::fprintf(file_, "%llu,%lld,%lld,%u,%u,%s,%lld\n", static_cast<unsigned long long>(s.counter),
                     static_cast<long long>(s.write_at_us), static_cast<long long>(s.duration_us), s.outputs,
                     s.toggle_period, std::string(channel::to_string(s.comm)).c_str(),
                     static_cast<long long>(s.comm_us));
        if (s.counter % 100 == 99) std::fflush(file_);
    }

private:
    std::FILE* file_ = nullptr;
};

} // namespace

IoRunReport run_io(const LiveConfig& cfg, const std::atomic<bool>& stop, const IoObserver& observe) {
    const IoLoopConfig& io = cfg.io;
    Fd listener = bind_socket(cfg.io_link_address, SOCK_STREAM);
    set_nonblocking(listener.get());
    Fd link;
    CycleLog log(io.log_path);

    IoRunReport report;
    report.min_cycle_us = std::numeric_limits<std::int64_t>::max();
    std::uint64_t counter = 0;
    std::uint16_t outputs = 0;
    std::uint16_t commanded = 0;
    std::uint32_t toggle_period = io.toggle_period;
    std::uint8_t last_seq = 0;
    bool overran = false;
    std::int64_t last_write = -1;

    const std::int64_t t0 = monotonic_us();
    const auto stop_after = static_cast<std::int64_t>(std::llround(io.duration_s * 1e6));
    std::int64_t start = t0;

    while (!stop.load() && (stop_after == 0 || monotonic_us() - t0 < stop_after)) {
        const std::uint16_t inputs = outputs;

        // Communication window.
        const std::int64_t window_open = monotonic_us();
        const std::int64_t window_close = window_open + io.comm_timeout.count();
        for (;;) {
            const int fd = ::accept(listener.get(), nullptr, nullptr);
            if (fd < 0) break;
            link = Fd(fd);
            int one = 1;
            setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            set_nonblocking(fd);
        }
        auto result = channel::ExchangeResult::timeout;
        std::optional<channel::DownstreamFrame> fresh;
        if (link) {
            std::uint8_t scratch[512];
            for (;;) {
                const ssize_t n = ::recv(link.get(), scratch, sizeof scratch, 0);
                if (n > 0) continue;
                if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) link.reset();
                break;
            }
        }
        if (link) {
            channel::UpstreamFrame up;
            up.seq = last_seq;
            up.status = overran ? channel::Status::overrun_seen : channel::Status::ok;
            up.input_state = inputs;
            up.output_state = outputs;
            up.cycle_counter = static_cast<std::uint32_t>(counter);
            const auto bytes = channel::encode(up);
            if (::send(link.get(), bytes.data(), bytes.size(), MSG_NOSIGNAL | MSG_DONTWAIT) !=
                static_cast<ssize_t>(bytes.size()))
                link.reset();
        }
        channel::FrameBytes buf{};
        std::size_t have = 0;
        while (link) {
            const std::int64_t left = window_close - monotonic_us();
            if (left <= 0 || !wait_readable(link.get(), left)) break;
            const ssize_t n = ::recv(link.get(), buf.data() + have, buf.size() - have, 0);
            if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) {
                link.reset();
                break;
            }
            if (n < 0) continue;
            have += static_cast<std::size_t>(n);
            if (have < buf.size()) continue;
            have = 0;
            auto decoded = channel::decode_downstream(buf);
            if (auto* frame = std::get_if<channel::DownstreamFrame>(&decoded)) {
                fresh = *frame;
                result = channel::ExchangeResult::ok;
                break;
            }
            result = channel::ExchangeResult::rejected;
            ++report.frames_rejected;
        }
        const std::int64_t comm_us = monotonic_us() - window_open;

        // Calculation.
        if (fresh) {
            ++report.frames_accepted;
            last_seq = fresh->seq;
            if (fresh->type == channel::MsgType::config) {
                if (fresh->cycle_config != 0) toggle_period = fresh->cycle_config;
            } else {
                commanded = static_cast<std::uint16_t>(fresh->output_command & 0xFFFEu);
            }
        }
        std::uint16_t bit0 = outputs & 0x1u;
        if (counter % toggle_period == 0) bit0 ^= 0x1u;
        const auto pending = static_cast<std::uint16_t>(commanded | bit0);

        // Delay, then write.
        wait_until(start + io.target_cycle.count() - io.write_cost.count());
        outputs = pending;
        const std::int64_t write_at = monotonic_us();

        IoCycleSample s;
        s.counter = counter;
        s.write_at_us = write_at;
        s.duration_us = last_write < 0 ? 0 : write_at - last_write;
        s.outputs = outputs;
        s.toggle_period = toggle_period;
        s.comm = result;
        s.comm_us = comm_us;
        last_write = write_at;
        if (s.duration_us > 0) {
            report.min_cycle_us = std::min(report.min_cycle_us, s.duration_us);
            report.max_cycle_us = std::max(report.max_cycle_us, s.duration_us);
        }
        report.max_comm_us = std::max(report.max_comm_us, comm_us);
        log.add(s);
        if (observe) observe(s);

        ++counter;
        ++report.cycles;
        start += io.target_cycle.count();
        const std::int64_t now = monotonic_us();
        overran = now > start;
        if (overran) {
            ++report.overruns;
            start = now;
        } else {
            wait_until(start);
        }
    }
    if (report.min_cycle_us == std::numeric_limits<std::int64_t>::max()) report.min_cycle_us = 0;
    return report;
}

// ---------------------------------------------------------------- process A

json to_json(const NetRunReport& r) {
    return json{{"packets_received", r.packets_received},   {"packets_processed", r.packets_processed},
                {"packets_dropped", r.packets_dropped},     {"exchanges_ok", r.exchanges_ok},
                {"exchange_timeouts", r.exchange_timeouts}, {"reconnects", r.reconnects},
                {"modbus_requests", r.modbus_requests}};
}

namespace {

/// State shared between the poller, the datagram intake and the Modbus
/// connections. The upstream snapshot is a single atomic word so register
/// reads never wait on the poller.
struct Shared {
    std::atomic<std::uint64_t> snapshot{0}; // output_state | cycle_counter << 16
    std::atomic<std::uint16_t> toggle_period{10};
    std::atomic<std::int64_t> pending_config{-1};
    std::atomic<std::int64_t> queue_depth{0};
    std::atomic<std::uint64_t> received{0};
    std::atomic<std::uint64_t> dropped{0};
    std::atomic<std::uint64_t> modbus_requests{0};
};

class SharedBank final : public RegisterBank {
public:
    explicit SharedBank(Shared& s) : s_(s) {}

    std::uint16_t read(std::uint16_t address) override {
        const std::uint64_t snap = s_.snapshot.load();
        switch (address) {
        case kRegOutputState: return static_cast<std::uint16_t>(snap & 0xFFFF);
        case kRegCycleCounterLow: return static_cast<std::uint16_t>((snap >> 16) & 0xFFFF);
        default: return s_.toggle_period.load();
        }
    }

    void write_toggle_period(std::uint16_t value) override {
        s_.toggle_period.store(value);
        s_.pending_config.store(value);
    }

private:
    Shared& s_;
};

void serve_modbus_connection(Fd conn, Shared& shared, const std::atomic<bool>& stop) {
    set_recv_timeout(conn.get(), 100);
    SharedBank bank(shared);
    std::vector<std::uint8_t> adu;
    while (!stop.load()) {
        std::array<std::uint8_t, 7> head{};
        if (!recv_exact(conn.get(), head.data(), head.size(), stop)) return;
        const auto header = parse_mbap(head);
        if (!header) return;
        adu.assign(head.begin(), head.end());
        adu.resize(6 + header->length);
        if (!recv_exact(conn.get(), adu.data() + 7, adu.size() - 7, stop)) return;
        shared.modbus_requests.fetch_add(1);
        const auto reply = handle_adu(adu, bank);
        if (reply.empty() || !send_all(conn.get(), reply.data(), reply.size())) return;
    }
}

void modbus_server(Fd listener, Shared& shared, const std::atomic<bool>& stop) {
    std::vector<std::thread> connections;
    while (!stop.load()) {
        if (!wait_readable(listener.get(), 100'000)) continue;
        const int fd = ::accept(listener.get(), nullptr, nullptr);
        if (fd < 0) continue;
        connections.emplace_back(serve_modbus_connection, Fd(fd), std::ref(shared), std::cref(stop));
    }
    for (auto& t : connections) t.join();
}

void datagram_intake(Fd sock, Shared& shared, std::int64_t capacity, const std::atomic<bool>& stop) {
    set_recv_timeout(sock.get(), 100);
    std::uint8_t buf[2048];
    while (!stop.load()) {
        const ssize_t n = ::recv(sock.get(), buf, sizeof buf, 0);
        if (n < 0) continue;
        shared.received.fetch_add(1);
        std::int64_t depth = shared.queue_depth.load();
        for (;;) {
            if (depth >= capacity) {
                shared.dropped.fetch_add(1);
                break;
            }
            if (shared.queue_depth.compare_exchange_weak(depth, depth + 1)) break;
        }
    }
}

bool take_packet(Shared& shared) {
    std::int64_t depth = shared.queue_depth.load();
    while (depth > 0)
        if (shared.queue_depth.compare_exchange_weak(depth, depth - 1)) return true;
    return false;
}

} // namespace

NetRunReport run_network(const LiveConfig& cfg, const std::atomic<bool>& stop) {
    const NetSideConfig& net = cfg.net;
    Shared shared;
    shared.toggle_period.store(static_cast<std::uint16_t>(std::min<std::uint32_t>(cfg.io.toggle_period, 0xFFFF)));

    std::atomic<bool> halt{false};
    Fd tcp = bind_socket(cfg.listen_address, SOCK_STREAM);
    Fd udp = bind_socket(cfg.listen_address, SOCK_DGRAM);
    std::thread server(modbus_server, std::move(tcp), std::ref(shared), std::cref(halt));
    std::thread intake(datagram_intake, std::move(udp), std::ref(shared), net.queue_capacity, std::cref(halt));

    NetRunReport report;
    Fd link;
    bool ever_connected = false;
    std::int64_t next_connect = 0;
    std::uint8_t seq = 0;
    std::int64_t config = -1;     // toggle period still to be delivered
    std::int32_t config_seq = -1; // seq of the frame that last carried it
    channel::FrameBytes buf{};
    std::size_t have = 0;
    // The slave offers once per IO cycle; silence for longer than that plus
    // the slave timeout counts as a missed exchange.
    const std::int64_t silence_limit = cfg.io.target_cycle.count() + net.slave_timeout.count();
    std::int64_t last_offer = 0;

    const std::int64_t t0 = monotonic_us();
    const auto stop_after = static_cast<std::int64_t>(std::llround(net.duration_s * 1e6));
    auto process_one = [&] {
        if (!take_packet(shared)) return false;
        spin_for(net.per_packet_cost.count());
        ++report.packets_processed;
        return true;
    };

    while (!stop.load() && (stop_after == 0 || monotonic_us() - t0 < stop_after)) {
        const std::int64_t now = monotonic_us();
        if (const std::int64_t p = shared.pending_config.exchange(-1); p >= 0) {
            config = p;
            config_seq = -1;
        }

        if (!link) {
            if (now >= next_connect) {
                link = connect_tcp(cfg.io_link_address);
                if (link) {
                    if (ever_connected) ++report.reconnects;
                    ever_connected = true;
                    have = 0;
                    last_offer = now;
                } else {
                    next_connect = now + net.retry_delay.count();
                }
            }
            if (!link && !process_one()) std::this_thread::sleep_for(std::chrono::microseconds(100));
            continue;
        }

        if (now - last_offer > silence_limit) {
            ++report.exchange_timeouts;
            last_offer = now;
        }

        // Between readiness checks at most one packet is processed.
        const bool busy = shared.queue_depth.load() > 0;
        if (!wait_readable(link.get(), busy ? 0 : 1000)) {
            process_one();
            continue;
        }
        const ssize_t n = ::recv(link.get(), buf.data() + have, buf.size() - have, 0);
        if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) {
            link.reset();
            next_connect = monotonic_us() + net.retry_delay.count();
            continue;
        }
        if (n < 0) continue;
        have += static_cast<std::size_t>(n);
        if (have < buf.size()) continue;
        have = 0;
        auto decoded = channel::decode_upstream(buf);
        const auto* up = std::get_if<channel::UpstreamFrame>(&decoded);
        if (!up) continue;
        last_offer = monotonic_us();
        shared.snapshot.store(static_cast<std::uint64_t>(up->output_state) |
                              (static_cast<std::uint64_t>(up->cycle_counter) << 16));
        if (config >= 0 && up->seq == config_seq) {
            config = -1;
            config_seq = -1;
        }

        channel::DownstreamFrame down;
        down.seq = ++seq;
        if (config >= 0) {
            down.type = channel::MsgType::config;
            down.cycle_config = static_cast<std::uint32_t>(config);
            config_seq = down.seq;
        }
        const auto bytes = channel::encode(down);
        if (!send_all(link.get(), bytes.data(), bytes.size())) {
            link.reset();
            next_connect = monotonic_us() + net.retry_delay.count();
            continue;
        }
        ++report.exchanges_ok;
    }

    halt.store(true);
    server.join();
    intake.join();
    report.packets_received = shared.received.load();
    report.packets_dropped = shared.dropped.load();
    report.modbus_requests = shared.modbus_requests.load();
    return report;
}

} // namespace secplc::live
