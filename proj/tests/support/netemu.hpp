#pragma once

// Test-support WAN emulator. Userspace servers cannot delay TCP connect
// completion (the kernel answers SYN-ACK regardless of accept timing), so
// emulated path latency that is visible in connect timing needs a network
// the tests control. This creates a TUN interface and answers TCP flows to
// virtual endpoints with a minimal userspace TCP responder: the SYN-ACK is
// released after a per-connection policy delay and relayed bytes after half
// of it per direction, exactly what a symmetric WAN path would do. Requires
// /dev/net/tun and CAP_NET_ADMIN (available in CI; see README).

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

namespace netemu {

// Whether a TUN interface can be created and configured here. Cached.
bool available();
const std::string& unavailable_reason();

// Evaluated once per connection, at SYN time.
using DelayPolicy = std::function<std::chrono::milliseconds()>;

inline DelayPolicy fixed_rtt(std::chrono::milliseconds rtt) {
    return [rtt] { return rtt; };
}

class WanEmulator {
public:
    WanEmulator();
    ~WanEmulator();
    WanEmulator(const WanEmulator&) = delete;
    WanEmulator& operator=(const WanEmulator&) = delete;

    struct Endpoint {
        std::string host;  // virtual IP literal
        std::uint16_t port;
    };

    // Relay to a real upstream socket; connect completion is delayed by
    // synack_delay() per connection. Connections to a refused upstream are
    // reset after the same delay.
    Endpoint add_forward(const std::string& upstream_host,
                         std::uint16_t upstream_port, DelayPolicy synack_delay,
                         std::uint16_t vport = 443);

    // Never answers; connects time out.
    Endpoint add_blackhole(std::uint16_t vport = 443);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace netemu
