#pragma once

// Local intercepting proxy reproducing three attacker behaviors against a
// TLS endpoint:
//   ettercap - accepts everything, fetches the upstream certificate, then
//              serves a freshly forged one after an injected generation
//              delay; sends a TCP RST after the ClientHello when the
//              upstream does not speak TLS on that port.
//   webmitm  - reads the SNI but always serves one static certificate
//              after a fixed small processing delay.
//   cain     - relays connections transparently until it has observed a
//              handshake for an identity, then forges a certificate for it
//              and impersonates from the next connection on.
// The simulator addresses its upstream explicitly; it performs no ARP or
// DNS redirection. Timing signals are injected where the corresponding
// tool would incur them.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "hsprobe/cert_forge.hpp"
#include "hsprobe/net.hpp"

namespace hsprobe::sim {

enum class SimMode { ettercap, webmitm, cain };

std::string_view to_string(SimMode m);
std::optional<SimMode> mode_from_string(std::string_view s);

struct SimConfig {
    SimMode mode = SimMode::ettercap;
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;  // 0 = ephemeral
    std::string upstream_host = "127.0.0.1";
    std::uint16_t upstream_port = 0;
    std::chrono::milliseconds cert_gen_delay{100};
    std::chrono::milliseconds cert_gen_jitter{0};     // uniform extra, per connection
    std::chrono::milliseconds upstream_extra_delay{0};  // injected path latency, each way
    std::optional<DerChain> static_cert;              // required in webmitm mode
    bool accept_all_ports = true;                     // ettercap behavior toggle
    std::optional<std::filesystem::path> byte_log_path;
    bool fragile_capture = false;  // cain: a client RST aborts certificate capture
    std::uint64_t forge_seed = 0x5eed;
    std::chrono::milliseconds upstream_timeout{5000};
};

// Forged chains by target identity (SNI or upstream label). First forger
// wins; concurrent passive observations never forge twice.
class ForgedCertRegistry {
public:
    std::optional<DerChain> get(const std::string& identity) const;
    bool has(const std::string& identity) const;
    // Claims the identity for forging; false when already forged or claimed.
    bool begin_forge(const std::string& identity);
    void store(const std::string& identity, DerChain chain);
    void abandon(const std::string& identity);
    std::vector<std::string> identities() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, DerChain> chains_;
    std::set<std::string> forging_;
};

// Byte-log frame: every client-visible byte, both directions.
struct ByteLogFrame {
    std::uint32_t connection_id = 0;
    std::uint8_t direction = 0;  // kDirClientToSim or kDirSimToClient
    std::uint64_t t_ns = 0;      // monotonic, since simulator start
    std::vector<std::uint8_t> data;
};

inline constexpr std::uint8_t kDirClientToSim = 0;
inline constexpr std::uint8_t kDirSimToClient = 1;

std::vector<ByteLogFrame> read_byte_log(const std::filesystem::path& path);

class Simulator {
public:
    explicit Simulator(SimConfig cfg);
    ~Simulator();

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    void start();  // throws net::BindError on bind failure
    void stop();

    std::uint16_t port() const;

    // Additional intercepted port (ettercap accept-all behavior); the
    // upstream for its connections is upstream_host at the same port number.
    // Returns the bound port.
    std::uint16_t open_intercept_port(std::uint16_t port = 0);

    std::size_t interception_count() const { return interceptions_.load(); }

    // Cain state: a forged chain exists for the identity.
    bool is_impersonating(const std::string& identity) const;
    std::optional<DerChain> forged_chain(const std::string& identity) const;

    // Identity used when a client offers no SNI: "<upstream_host>:<port>".
    std::string default_identity() const;

    const SimConfig& config() const { return cfg_; }

private:
    class ByteLogWriter;

    void accept_loop(std::size_t listener_index);
    void handle_connection(net::Socket sock, std::uint16_t upstream_port);
    void handle_ettercap(net::Socket& sock, std::uint32_t conn_id,
                         std::uint16_t upstream_port);
    void handle_webmitm(net::Socket& sock, std::uint32_t conn_id);
    void handle_cain(net::Socket& sock, std::uint32_t conn_id,
                     std::uint16_t upstream_port);
    void serve_and_hold(net::Socket& sock, std::uint32_t conn_id,
                        const DerChain& chain, std::uint8_t version_minor);
    std::chrono::milliseconds generation_delay();

    SimConfig cfg_;
    std::vector<net::Listener> listeners_;
    std::vector<std::thread> acceptors_;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> interceptions_{0};
    std::atomic<std::uint32_t> next_conn_id_{0};
    ForgedCertRegistry registry_;
    std::unique_ptr<ByteLogWriter> byte_log_;
    std::mutex conns_mutex_;
    std::vector<std::thread> conns_;
};

}  // namespace hsprobe::sim
