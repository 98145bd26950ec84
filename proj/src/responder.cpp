#include "hsprobe/responder.hpp"

#include <algorithm>

#include "hsprobe/tls_codec.hpp"

namespace hsprobe {

namespace {

using Clock = std::chrono::steady_clock;

// Reads records until one complete handshake message is available.
// Returns nullopt on timeout, disconnect, or non-handshake traffic.
std::optional<tls::HandshakeMessage> read_one_handshake_message(
    net::Socket& sock, std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    std::vector<std::uint8_t> buf;
    std::size_t parsed = 0;
    tls::HandshakeReassembler reasm;
    std::array<std::uint8_t, 4096> chunk;

    for (;;) {
        try {
            for (;;) {
                auto rp = tls::parse_record(std::span(buf).subspan(parsed));
                if (rp.status == tls::RecordStatus::needs_more_data)
                    break;
                parsed += rp.consumed;
                if (rp.record.content_type != tls::kContentHandshake)
                    return std::nullopt;
                reasm.feed(rp.record.payload);
                if (auto msg = reasm.next())
                    return msg;
            }
        } catch (const tls::CodecError&) {
            return std::nullopt;
        }
        const auto now = Clock::now();
        if (now >= deadline)
            return std::nullopt;
        std::size_t n = 0;
        try {
            n = sock.recv_some(chunk, std::chrono::duration_cast<net::Millis>(
                                          deadline - now));
        } catch (const net::IoError&) {
            return std::nullopt;
        }
        if (n == 0)
            return std::nullopt;
        buf.insert(buf.end(), chunk.begin(),
                   chunk.begin() + static_cast<std::ptrdiff_t>(n));
    }
}

tls::ProtocolVersion clamp_version(tls::ProtocolVersion client) {
    if (client.major != 3 || client.minor > 3)
        return tls::kTls12;
    if (client.minor < 1)
        return tls::kTls10;
    return client;
}

}  // namespace

Responder::Responder(ResponderConfig cfg) : cfg_(std::move(cfg)) {}

Responder::~Responder() { stop(); }

void Responder::start() {
    if (cfg_.cert_chain.empty())
        throw std::invalid_argument("responder requires a non-empty cert chain");
    if (cfg_.processing_delay.count() < 0)
        throw std::invalid_argument("responder delay must be >= 0");

    listener_ = net::Listener::open(cfg_.listen_host, cfg_.listen_port);
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void Responder::stop() {
    if (!running_.exchange(false)) {
        listener_.shutdown();
        return;
    }
    listener_.shutdown();
    if (acceptor_.joinable())
        acceptor_.join();
    std::lock_guard lock(conns_mutex_);
    for (auto& t : conns_)
        if (t.joinable())
            t.join();
    conns_.clear();
}

void Responder::accept_loop() {
    while (running_) {
        auto sock = listener_.accept(std::chrono::milliseconds(200));
        if (!sock.valid())
            continue;
        std::lock_guard lock(conns_mutex_);
        conns_.emplace_back(
            [this, s = std::move(sock)]() mutable { handle_connection(std::move(s)); });
    }
}

void Responder::handle_connection(net::Socket sock) {
    auto msg = read_one_handshake_message(sock, cfg_.hello_timeout);
    if (!msg || msg->msg_type != tls::kHsClientHello)
        return;  // close silently

    tls::ParsedClientHello hello;
    try {
        hello = tls::parse_client_hello(*msg);
    } catch (const tls::CodecError&) {
        return;
    }
    const auto version = clamp_version(hello.version);

    if (cfg_.sni_allowlist) {
        const bool allowed =
            hello.sni && std::find(cfg_.sni_allowlist->begin(),
                                   cfg_.sni_allowlist->end(),
                                   *hello.sni) != cfg_.sni_allowlist->end();
        if (!allowed) {
            try {
                sock.send_all(tls::build_alert(tls::kAlertLevelFatal,
                                               tls::kAlertUnrecognizedName,
                                               version),
                              std::chrono::seconds(2));
            } catch (const net::IoError&) {
            }
            return;
        }
    }

    if (cfg_.processing_delay.count() > 0)
        std::this_thread::sleep_for(cfg_.processing_delay);

    try {
        sock.send_all(tls::build_certificate_flight(cfg_.cert_chain, version),
                      std::chrono::seconds(10));
    } catch (const net::IoError&) {
        return;
    }
    served_.fetch_add(1);

    // Hold until the client closes (or we are stopped / the peer idles out).
    std::array<std::uint8_t, 512> sink;
    const auto idle_deadline = Clock::now() + std::chrono::seconds(30);
    while (running_ && Clock::now() < idle_deadline) {
        try {
            if (sock.recv_some(sink, std::chrono::milliseconds(100)) == 0)
                return;
        } catch (const net::IoError& e) {
            if (e.code != net::IoErrc::timed_out)
                return;
        }
    }
}

}  // namespace hsprobe
