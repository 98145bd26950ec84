#pragma once

// Thin POSIX socket layer: timed connects, deadline IO, listeners.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace hsprobe::net {

using Millis = std::chrono::milliseconds;

enum class IoErrc { timed_out, reset, other };

class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, int sys_errno, const std::string& what)
        : std::runtime_error(what), code(code), sys_errno(sys_errno) {}

    IoErrc code;
    int sys_errno;
};

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

    void close();      // ordinary close (FIN)
    void close_rst();  // SO_LINGER 0 then close (RST)

    // Sends the whole buffer or throws IoError.
    void send_all(std::span<const std::uint8_t> data, Millis timeout);

    // Receives up to buf.size() bytes. Returns 0 on orderly EOF. Throws
    // IoError{timed_out} when nothing arrives within the timeout.
    std::size_t recv_some(std::span<std::uint8_t> buf, Millis timeout);

private:
    int fd_ = -1;
};

enum class ConnectErrc { refused, timed_out, unreachable, other };
std::string_view to_string(ConnectErrc);

struct ConnectOutcome {
    Socket sock;                        // valid iff !error
    double connect_ms = 0.0;            // connect-initiation to completion
    std::optional<ConnectErrc> error;
    int sys_errno = 0;
};

// Resolves host (DNS name or IP literal) and attempts addresses in order;
// returns the first established connection with its monotonic-clock timing.
ConnectOutcome connect_timed(const std::string& host, std::uint16_t port,
                             Millis timeout);

class BindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Listener {
public:
    Listener() = default;
    Listener(Listener&& other) noexcept;
    Listener& operator=(Listener&& other) noexcept;
    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;
    ~Listener();

    static Listener open(const std::string& host, std::uint16_t port);

    bool valid() const { return fd_ >= 0; }
    std::uint16_t port() const { return port_; }

    // Waits up to timeout; an invalid Socket means timeout or shutdown.
    Socket accept(Millis timeout);

    // Unblocks pending accept() calls; the listener stays closed.
    void shutdown();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace hsprobe::net
