#include "hsprobe/mitm_sim.hpp"

#include <poll.h>

#include <array>
#include <fstream>
#include <random>

#include "hsprobe/prober.hpp"
#include "hsprobe/tls_codec.hpp"

namespace hsprobe::sim {

namespace {

using Clock = std::chrono::steady_clock;

// WebMiTM serves its one provided certificate after a fixed small delay;
// there is no per-target generation step.
constexpr std::chrono::milliseconds kWebmitmProcessingDelay{5};

constexpr std::chrono::milliseconds kHelloTimeout{10000};

struct HelloRead {
    std::optional<tls::ParsedClientHello> hello;
    tls::ProtocolVersion version = tls::kTls12;  // clamped response version
    std::vector<std::uint8_t> raw;               // every byte consumed, verbatim
    bool reset = false;
};

tls::ProtocolVersion clamp_version(tls::ProtocolVersion client) {
    if (client.major != 3 || client.minor > 3)
        return tls::kTls12;
    if (client.minor < 1)
        return tls::kTls10;
    return client;
}

// Reads until one complete ClientHello is buffered. Keeps the raw bytes so
// a passive relay can forward them unmodified.
HelloRead read_client_hello(net::Socket& sock,
                            std::chrono::milliseconds timeout) {
    HelloRead out;
    const auto deadline = Clock::now() + timeout;
    std::size_t parsed = 0;
    tls::HandshakeReassembler reasm;
    std::array<std::uint8_t, 4096> chunk;

    for (;;) {
        try {
            for (;;) {
                auto rp = tls::parse_record(std::span(out.raw).subspan(parsed));
                if (rp.status == tls::RecordStatus::needs_more_data)
                    break;
                parsed += rp.consumed;
                if (rp.record.content_type != tls::kContentHandshake)
                    return out;
                reasm.feed(rp.record.payload);
                if (auto msg = reasm.next()) {
                    if (msg->msg_type != tls::kHsClientHello)
                        return out;
                    auto hello = tls::parse_client_hello(*msg);
                    out.version = clamp_version(hello.version);
                    out.hello = std::move(hello);
                    return out;
                }
            }
        } catch (const tls::CodecError&) {
            return out;
        }
        const auto now = Clock::now();
        if (now >= deadline)
            return out;
        std::size_t n = 0;
        try {
            n = sock.recv_some(chunk, std::chrono::duration_cast<net::Millis>(
                                          deadline - now));
        } catch (const net::IoError& e) {
            out.reset = e.code == net::IoErrc::reset;
            return out;
        }
        if (n == 0)
            return out;
        out.raw.insert(out.raw.end(), chunk.begin(),
                       chunk.begin() + static_cast<std::ptrdiff_t>(n));
    }
}

// Incremental record tap over a relayed byte stream; reports whether a
// Certificate handshake message has passed by.
class CertificateTap {
public:
    void feed(std::span<const std::uint8_t> bytes) {
        if (broken_ || saw_certificate_)
            return;
        buf_.insert(buf_.end(), bytes.begin(), bytes.end());
        try {
            for (;;) {
                auto rp = tls::parse_record(std::span(buf_).subspan(parsed_));
                if (rp.status == tls::RecordStatus::needs_more_data)
                    return;
                parsed_ += rp.consumed;
                if (rp.record.content_type != tls::kContentHandshake)
                    continue;
                reasm_.feed(rp.record.payload);
                while (auto msg = reasm_.next()) {
                    if (msg->msg_type == tls::kHsCertificate) {
                        saw_certificate_ = true;
                        return;
                    }
                }
            }
        } catch (const tls::CodecError&) {
            broken_ = true;
        }
    }

    bool saw_certificate() const { return saw_certificate_; }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t parsed_ = 0;
    tls::HandshakeReassembler reasm_;
    bool saw_certificate_ = false;
    bool broken_ = false;
};

}  // namespace

std::string_view to_string(SimMode m) {
    switch (m) {
    case SimMode::ettercap: return "ettercap";
    case SimMode::webmitm: return "webmitm";
    case SimMode::cain: return "cain";
    }
    return "ettercap";
}

std::optional<SimMode> mode_from_string(std::string_view s) {
    if (s == "ettercap") return SimMode::ettercap;
    if (s == "webmitm") return SimMode::webmitm;
    if (s == "cain") return SimMode::cain;
    return std::nullopt;
}

std::optional<DerChain> ForgedCertRegistry::get(const std::string& identity) const {
    std::lock_guard lock(mutex_);
    auto it = chains_.find(identity);
    if (it == chains_.end())
        return std::nullopt;
    return it->second;
}

bool ForgedCertRegistry::has(const std::string& identity) const {
    std::lock_guard lock(mutex_);
    return chains_.count(identity) > 0;
}

bool ForgedCertRegistry::begin_forge(const std::string& identity) {
    std::lock_guard lock(mutex_);
    if (chains_.count(identity) > 0 || forging_.count(identity) > 0)
        return false;
    forging_.insert(identity);
    return true;
}

void ForgedCertRegistry::store(const std::string& identity, DerChain chain) {
    std::lock_guard lock(mutex_);
    forging_.erase(identity);
    chains_.emplace(identity, std::move(chain));
}

void ForgedCertRegistry::abandon(const std::string& identity) {
    std::lock_guard lock(mutex_);
    forging_.erase(identity);
}

std::vector<std::string> ForgedCertRegistry::identities() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [identity, chain] : chains_)
        out.push_back(identity);
    return out;
}

class Simulator::ByteLogWriter {
public:
    explicit ByteLogWriter(const std::filesystem::path& path)
        : out_(path, std::ios::binary | std::ios::trunc), start_(Clock::now()) {
        if (!out_)
            throw std::runtime_error("cannot open byte log: " + path.string());
    }

    void log(std::uint32_t conn_id, std::uint8_t direction,
             std::span<const std::uint8_t> bytes) {
        const auto t_ns = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() -
                                                                 start_)
                .count());
        std::lock_guard lock(mutex_);
        write_le(conn_id);
        out_.put(static_cast<char>(direction));
        write_le(t_ns);
        write_le(static_cast<std::uint32_t>(bytes.size()));
        out_.write(reinterpret_cast<const char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size()));
        out_.flush();
    }

private:
    template <typename T>
    void write_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            out_.put(static_cast<char>(v >> (8 * i)));
    }

    std::mutex mutex_;
    std::ofstream out_;
    Clock::time_point start_;
};

std::vector<ByteLogFrame> read_byte_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::vector<ByteLogFrame> frames;
    auto read_le = [&in](auto& v) {
        using T = std::remove_reference_t<decltype(v)>;
        v = T{};
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            const int c = in.get();
            if (c == EOF)
                return false;
            v |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
        }
        return true;
    };
    for (;;) {
        ByteLogFrame f;
        std::uint32_t len = 0;
        if (!read_le(f.connection_id))
            break;
        const int dir = in.get();
        if (dir == EOF)
            break;
        f.direction = static_cast<std::uint8_t>(dir);
        if (!read_le(f.t_ns) || !read_le(len))
            break;
        f.data.resize(len);
        in.read(reinterpret_cast<char*>(f.data.data()), len);
        if (in.gcount() != static_cast<std::streamsize>(len))
            break;
        frames.push_back(std::move(f));
    }
    return frames;
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {}

Simulator::~Simulator() { stop(); }

void Simulator::start() {
    if (cfg_.mode == SimMode::webmitm &&
        (!cfg_.static_cert || cfg_.static_cert->empty()))
        throw std::invalid_argument("webmitm mode requires a static certificate");
    if (cfg_.cert_gen_delay.count() < 0 || cfg_.upstream_extra_delay.count() < 0 ||
        cfg_.cert_gen_jitter.count() < 0)
        throw std::invalid_argument("simulator delays must be >= 0");

    if (cfg_.byte_log_path)
        byte_log_ = std::make_unique<ByteLogWriter>(*cfg_.byte_log_path);

    listeners_.push_back(net::Listener::open(cfg_.listen_host, cfg_.listen_port));
    running_ = true;
    acceptors_.emplace_back([this] { accept_loop(0); });
}

void Simulator::stop() {
    if (!running_.exchange(false)) {
        for (auto& l : listeners_)
            l.shutdown();
        return;
    }
    for (auto& l : listeners_)
        l.shutdown();
    for (auto& t : acceptors_)
        if (t.joinable())
            t.join();
    acceptors_.clear();
    std::lock_guard lock(conns_mutex_);
    for (auto& t : conns_)
        if (t.joinable())
            t.join();
    conns_.clear();
}

std::uint16_t Simulator::port() const {
    return listeners_.empty() ? 0 : listeners_.front().port();
}

std::uint16_t Simulator::open_intercept_port(std::uint16_t port) {
    if (cfg_.mode != SimMode::ettercap || !cfg_.accept_all_ports)
        throw std::logic_error(
            "intercept ports require ettercap mode with accept_all_ports");
    if (!running_)
        throw std::logic_error("simulator is not running");
    listeners_.push_back(net::Listener::open(cfg_.listen_host, port));
    const std::size_t index = listeners_.size() - 1;
    acceptors_.emplace_back([this, index] { accept_loop(index); });
    return listeners_[index].port();
}

bool Simulator::is_impersonating(const std::string& identity) const {
    return registry_.has(identity);
}

std::optional<DerChain> Simulator::forged_chain(const std::string& identity) const {
    return registry_.get(identity);
}

std::string Simulator::default_identity() const {
    return cfg_.upstream_host + ":" + std::to_string(cfg_.upstream_port);
}

std::chrono::milliseconds Simulator::generation_delay() {
    auto delay = cfg_.cert_gen_delay;
    if (cfg_.cert_gen_jitter.count() > 0) {
        thread_local std::mt19937_64 rng{std::random_device{}()};
        std::uniform_int_distribution<std::int64_t> dist(
            0, cfg_.cert_gen_jitter.count());
        delay += std::chrono::milliseconds(dist(rng));
    }
    return delay;
}

void Simulator::accept_loop(std::size_t listener_index) {
    // The upstream for an auxiliary intercepted port is the same-numbered
    // port on the upstream host.
    const std::uint16_t upstream_port = listener_index == 0
                                            ? cfg_.upstream_port
                                            : listeners_[listener_index].port();
    while (running_) {
        auto sock = listeners_[listener_index].accept(std::chrono::milliseconds(200));
        if (!sock.valid())
            continue;
        std::lock_guard lock(conns_mutex_);
        conns_.emplace_back([this, s = std::move(sock), upstream_port]() mutable {
            handle_connection(std::move(s), upstream_port);
        });
    }
}

void Simulator::handle_connection(net::Socket sock, std::uint16_t upstream_port) {
    const std::uint32_t conn_id = next_conn_id_.fetch_add(1);
    switch (cfg_.mode) {
    case SimMode::ettercap:
        handle_ettercap(sock, conn_id, upstream_port);
        break;
    case SimMode::webmitm:
        handle_webmitm(sock, conn_id);
        break;
    case SimMode::cain:
        handle_cain(sock, conn_id, upstream_port);
        break;
    }
}

void Simulator::serve_and_hold(net::Socket& sock, std::uint32_t conn_id,
                               const DerChain& chain,
                               std::uint8_t version_minor) {
    std::vector<std::uint8_t> flight;
    try {
        flight = tls::build_certificate_flight(
            chain, tls::ProtocolVersion{3, version_minor});
        sock.send_all(flight, std::chrono::seconds(10));
    } catch (const std::exception&) {
        return;
    }
    if (byte_log_)
        byte_log_->log(conn_id, kDirSimToClient, flight);
    interceptions_.fetch_add(1);

    std::array<std::uint8_t, 512> sink;
    const auto idle_deadline = Clock::now() + std::chrono::seconds(30);
    while (running_ && Clock::now() < idle_deadline) {
        try {
            const auto n = sock.recv_some(sink, std::chrono::milliseconds(100));
            if (n == 0)
                return;
            if (byte_log_)
                byte_log_->log(conn_id, kDirClientToSim,
                               std::span(sink).first(n));
        } catch (const net::IoError& e) {
            if (e.code != net::IoErrc::timed_out)
                return;
        }
    }
}

void Simulator::handle_ettercap(net::Socket& sock, std::uint32_t conn_id,
                                std::uint16_t upstream_port) {
    if (!cfg_.accept_all_ports) {
        // Pre-check the upstream before letting the handshake start.
        auto pre = net::connect_timed(cfg_.upstream_host, upstream_port,
                                      cfg_.upstream_timeout);
        if (pre.error) {
            sock.close_rst();
            return;
        }
    }

    auto hello = read_client_hello(sock, kHelloTimeout);
    if (byte_log_ && !hello.raw.empty())
        byte_log_->log(conn_id, kDirClientToSim, hello.raw);
    if (!hello.hello) {
        sock.close_rst();
        return;
    }

    const std::string identity =
        hello.hello->sni.value_or(cfg_.upstream_host + ":" +
                                  std::to_string(upstream_port));

    // Fetch the genuine certificate, paying the injected path latency each
    // way; forging happens after the fetch, never overlapped with it.
    if (cfg_.upstream_extra_delay.count() > 0)
        std::this_thread::sleep_for(cfg_.upstream_extra_delay);
    TargetSpec upstream{.host = cfg_.upstream_host, .port = upstream_port,
                        .sni = hello.hello->sni, .label = identity};
    ProbeOptions po;
    po.connect_timeout = po.read_timeout = cfg_.upstream_timeout;
    po.hello.client_random = tls::fresh_random();
    const auto upstream_sample = probe_handshake(upstream, po);
    if (cfg_.upstream_extra_delay.count() > 0)
        std::this_thread::sleep_for(cfg_.upstream_extra_delay);

    if (upstream_sample.outcome != ProbeOutcome::ok) {
        // Non-TLS (or unreachable) upstream: the connection was accepted
        // anyway; reveal nothing more than a reset after the ClientHello.
        interceptions_.fetch_add(1);
        sock.close_rst();
        return;
    }

    std::this_thread::sleep_for(generation_delay());
    if (registry_.begin_forge(identity))
        registry_.store(identity, forge_certificate(identity, {}, cfg_.forge_seed));
    const auto chain = registry_.get(identity);
    if (!chain)
        return;
    serve_and_hold(sock, conn_id, *chain, hello.version.minor);
}

void Simulator::handle_webmitm(net::Socket& sock, std::uint32_t conn_id) {
    auto hello = read_client_hello(sock, kHelloTimeout);
    if (byte_log_ && !hello.raw.empty())
        byte_log_->log(conn_id, kDirClientToSim, hello.raw);
    if (hello.raw.empty())
        return;
    // Catch-all: the SNI (or its absence) never changes the answer.
    std::this_thread::sleep_for(kWebmitmProcessingDelay);
    serve_and_hold(sock, conn_id, *cfg_.static_cert, hello.version.minor);
}

void Simulator::handle_cain(net::Socket& sock, std::uint32_t conn_id,
                            std::uint16_t upstream_port) {
    auto hello = read_client_hello(sock, kHelloTimeout);
    if (byte_log_ && !hello.raw.empty())
        byte_log_->log(conn_id, kDirClientToSim, hello.raw);
    if (!hello.hello) {
        sock.close_rst();
        return;
    }
    const std::string identity =
        hello.hello->sni.value_or(cfg_.upstream_host + ":" +
                                  std::to_string(upstream_port));

    if (const auto chain = registry_.get(identity)) {
        // Impersonation: accept immediately, sign a fresh copy for this
        // connection (the generation delay), serve the forged chain.
        std::this_thread::sleep_for(generation_delay());
        serve_and_hold(sock, conn_id, *chain, hello.version.minor);
        return;
    }

    // Passive: relay byte-for-byte, watching for the genuine certificate.
    auto upstream = net::connect_timed(cfg_.upstream_host, upstream_port,
                                       cfg_.upstream_timeout);
    if (upstream.error) {
        sock.close_rst();  // nothing to relay to
        return;
    }
    bool client_rst = hello.reset;
    CertificateTap tap;
    try {
        upstream.sock.send_all(hello.raw, cfg_.upstream_timeout);
    } catch (const net::IoError&) {
        sock.close_rst();
        return;
    }

    std::array<std::uint8_t, 8192> buf;
    bool open = !client_rst;
    while (open && running_) {
        pollfd fds[2] = {{sock.fd(), POLLIN, 0}, {upstream.sock.fd(), POLLIN, 0}};
        const int rc = ::poll(fds, 2, 200);
        if (rc < 0)
            break;
        if (rc == 0)
            continue;
        if (fds[0].revents != 0) {
            try {
                const auto n = sock.recv_some(buf, std::chrono::milliseconds(0));
                if (n == 0)
                    break;
                if (byte_log_)
                    byte_log_->log(conn_id, kDirClientToSim, std::span(buf).first(n));
                upstream.sock.send_all(std::span(buf).first(n),
                                       cfg_.upstream_timeout);
            } catch (const net::IoError& e) {
                if (e.code != net::IoErrc::timed_out) {
                    client_rst = client_rst || e.code == net::IoErrc::reset;
                    break;
                }
            }
        }
        if (fds[1].revents != 0) {
            try {
                const auto n = upstream.sock.recv_some(buf, std::chrono::milliseconds(0));
                if (n == 0)
                    break;
                tap.feed(std::span(buf).first(n));
                if (byte_log_)
                    byte_log_->log(conn_id, kDirSimToClient, std::span(buf).first(n));
                sock.send_all(std::span(buf).first(n), std::chrono::seconds(10));
            } catch (const net::IoError& e) {
                if (e.code != net::IoErrc::timed_out) {
                    client_rst = client_rst || e.code == net::IoErrc::reset;
                    break;
                }
            }
        }
    }

    // A mid-handshake client RST disturbs fragile capture: forging is
    // postponed until a later, cleaner observation.
    if (!tap.saw_certificate())
        return;
    if (cfg_.fragile_capture && client_rst)
        return;
    if (registry_.begin_forge(identity)) {
        std::this_thread::sleep_for(generation_delay());
        registry_.store(identity, forge_certificate(identity, {}, cfg_.forge_seed));
    }
}

}  // namespace hsprobe::sim
