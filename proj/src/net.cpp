#include "hsprobe/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace hsprobe::net {

namespace {

using Clock = std::chrono::steady_clock;

int poll_one(int fd, short events, Clock::time_point deadline) {
    for (;;) {
        const auto now = Clock::now();
        const int wait_ms =
            now >= deadline
                ? 0
                : static_cast<int>(std::chrono::duration_cast<Millis>(deadline - now).count()) + 1;
        pollfd p{fd, events, 0};
        const int rc = ::poll(&p, 1, wait_ms);
        if (rc < 0 && errno == EINTR)
            continue;
        return rc;
    }
}

void set_nonblocking(int fd) {
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

std::string_view to_string(ConnectErrc e) {
    switch (e) {
    case ConnectErrc::refused: return "refused";
    case ConnectErrc::timed_out: return "timed_out";
    case ConnectErrc::unreachable: return "unreachable";
    case ConnectErrc::other: return "other";
    }
    return "other";
}

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::close_rst() {
    if (fd_ < 0)
        return;
    linger lg{1, 0};
    ::setsockopt(fd_, SOL_SOCKET, SO_LINGER, &lg, sizeof lg);
    ::close(fd_);
    fd_ = -1;
}

void Socket::send_all(std::span<const std::uint8_t> data, Millis timeout) {
    const auto deadline = Clock::now() + timeout;
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd_, data.data() + off, data.size() - off,
                                 MSG_NOSIGNAL);
        if (n > 0) {
            off += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            const int rc = poll_one(fd_, POLLOUT, deadline);
            if (rc == 0)
                throw IoError(IoErrc::timed_out, ETIMEDOUT, "send timed out");
            if (rc < 0)
                throw IoError(IoErrc::other, errno, "poll failed");
            continue;
        }
        if (n < 0 && errno == EINTR)
            continue;
        if (n < 0 && (errno == ECONNRESET || errno == EPIPE))
            throw IoError(IoErrc::reset, errno, "connection reset");
        throw IoError(IoErrc::other, errno,
                      std::string("send failed: ") + std::strerror(errno));
    }
}

std::size_t Socket::recv_some(std::span<std::uint8_t> buf, Millis timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
        const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n > 0)
            return static_cast<std::size_t>(n);
        if (n == 0)
            return 0;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
            const int rc = poll_one(fd_, POLLIN, deadline);
            if (rc == 0)
                throw IoError(IoErrc::timed_out, ETIMEDOUT, "recv timed out");
            if (rc < 0)
                throw IoError(IoErrc::other, errno, "poll failed");
            continue;
        }
        if (errno == EINTR)
            continue;
        if (errno == ECONNRESET)
            throw IoError(IoErrc::reset, errno, "connection reset");
        throw IoError(IoErrc::other, errno,
                      std::string("recv failed: ") + std::strerror(errno));
    }
}

ConnectOutcome connect_timed(const std::string& host, std::uint16_t port,
                             Millis timeout) {
    ConnectOutcome out;

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 ||
        res == nullptr) {
        out.error = ConnectErrc::unreachable;
        out.sys_errno = EHOSTUNREACH;
        return out;
    }

    out.error = ConnectErrc::other;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        set_nonblocking(fd);

        const auto t0 = Clock::now();
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc != 0 && errno == EINPROGRESS) {
            const int prc = poll_one(fd, POLLOUT, t0 + timeout);
            if (prc == 0) {
                ::close(fd);
                out.error = ConnectErrc::timed_out;
                out.sys_errno = ETIMEDOUT;
                continue;
            }
            int so_err = 0;
            socklen_t len = sizeof so_err;
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &so_err, &len);
            rc = so_err == 0 ? 0 : -1;
            errno = so_err;
        }
        if (rc == 0) {
            out.connect_ms =
                std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
            out.sock = Socket(fd);
            out.error.reset();
            out.sys_errno = 0;
            break;
        }
        out.sys_errno = errno;
        switch (errno) {
        case ECONNREFUSED: out.error = ConnectErrc::refused; break;
        case ETIMEDOUT: out.error = ConnectErrc::timed_out; break;
        case ENETUNREACH:
        case EHOSTUNREACH: out.error = ConnectErrc::unreachable; break;
        default: out.error = ConnectErrc::other; break;
        }
        ::close(fd);
    }
    ::freeaddrinfo(res);
    return out;
}

Listener::Listener(Listener&& other) noexcept
    : fd_(other.fd_), port_(other.port_) {
    other.fd_ = -1;
}

Listener& Listener::operator=(Listener&& other) noexcept {
    if (this != &other) {
        shutdown();
        fd_ = other.fd_;
        port_ = other.port_;
        other.fd_ = -1;
    }
    return *this;
}

Listener::~Listener() { shutdown(); }

Listener Listener::open(const std::string& host, std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0)
        throw BindError(std::string("socket: ") + std::strerror(errno));

    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw BindError("listen address must be an IPv4 literal: " + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const int e = errno;
        ::close(fd);
        throw BindError(std::string("bind ") + host + ":" +
                        std::to_string(port) + ": " + std::strerror(e));
    }
    if (::listen(fd, 64) != 0) {
        const int e = errno;
        ::close(fd);
        throw BindError(std::string("listen: ") + std::strerror(e));
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);

    set_nonblocking(fd);
    Listener l;
    l.fd_ = fd;
    l.port_ = ntohs(addr.sin_port);
    return l;
}

Socket Listener::accept(Millis timeout) {
    if (fd_ < 0)
        return {};
    const int rc = poll_one(fd_, POLLIN, Clock::now() + timeout);
    if (rc <= 0)
        return {};
    const int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0)
        return {};
    set_nonblocking(cfd);
    return Socket(cfd);
}

void Listener::shutdown() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace hsprobe::net
