#pragma once

// Minimal genuine-server stand-in: answers a ClientHello with
// ServerHello + Certificate + ServerHelloDone after a configurable
// processing delay, then holds the connection until the client closes.
// Never completes a handshake; there is nothing to complete it with.

#include <atomic>
#include <chrono>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hsprobe/cert_forge.hpp"
#include "hsprobe/net.hpp"

namespace hsprobe {

struct ResponderConfig {
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;  // 0 = ephemeral
    sim::DerChain cert_chain;       // non-empty
    std::chrono::milliseconds processing_delay{0};
    // Engaged = strict policy: alert on SNI values not in the list (and on
    // absent SNI). Disengaged = serve any.
    std::optional<std::vector<std::string>> sni_allowlist;
    std::chrono::milliseconds hello_timeout{10000};
};

class Responder {
public:
    explicit Responder(ResponderConfig cfg);
    ~Responder();

    Responder(const Responder&) = delete;
    Responder& operator=(const Responder&) = delete;

    void start();  // throws net::BindError / std::invalid_argument
    void stop();

    std::uint16_t port() const { return listener_.port(); }
    std::size_t connections_served() const { return served_.load(); }

private:
    void accept_loop();
    void handle_connection(net::Socket sock);

    ResponderConfig cfg_;
    net::Listener listener_;
    std::atomic<bool> running_{false};
    std::atomic<std::size_t> served_{0};
    std::thread acceptor_;
    std::mutex conns_mutex_;
    std::vector<std::thread> conns_;
};

}  // namespace hsprobe
