#include "hsprobe/prober.hpp"

#include <arpa/inet.h>

#include <thread>

#include "hsprobe/util.hpp"

namespace hsprobe {

namespace {

using Clock = std::chrono::steady_clock;

bool is_ip_literal(const std::string& host) {
    in_addr v4{};
    in6_addr v6{};
    return ::inet_pton(AF_INET, host.c_str(), &v4) == 1 ||
           ::inet_pton(AF_INET6, host.c_str(), &v6) == 1;
}

ProbeOutcome outcome_for_connect_error(net::ConnectErrc e) {
    return e == net::ConnectErrc::refused ? ProbeOutcome::connect_refused
                                          : ProbeOutcome::connect_timeout;
}

}  // namespace

std::optional<std::string> TargetSpec::effective_sni() const {
    if (sni)
        return sni;
    if (!host.empty() && !is_ip_literal(host))
        return host;
    return std::nullopt;
}

std::string_view to_string(ProbeOutcome o) {
    switch (o) {
    case ProbeOutcome::ok: return "ok";
    case ProbeOutcome::connect_refused: return "connect_refused";
    case ProbeOutcome::connect_timeout: return "connect_timeout";
    case ProbeOutcome::read_timeout: return "read_timeout";
    case ProbeOutcome::reset_during_handshake: return "reset_during_handshake";
    case ProbeOutcome::protocol_error: return "protocol_error";
    }
    return "protocol_error";
}

std::optional<ProbeOutcome> outcome_from_string(std::string_view s) {
    for (auto o : {ProbeOutcome::ok, ProbeOutcome::connect_refused,
                   ProbeOutcome::connect_timeout, ProbeOutcome::read_timeout,
                   ProbeOutcome::reset_during_handshake,
                   ProbeOutcome::protocol_error}) {
        if (to_string(o) == s)
            return o;
    }
    return std::nullopt;
}

std::string_view to_string(PortProbeResult r) {
    switch (r) {
    case PortProbeResult::accepted: return "accepted";
    case PortProbeResult::refused: return "refused";
    case PortProbeResult::timed_out: return "timed_out";
    }
    return "timed_out";
}

RttEstimate measure_rtt(const TargetSpec& target, std::size_t probe_count,
                        std::chrono::milliseconds timeout) {
    if (probe_count < 1)
        throw std::invalid_argument("measure_rtt requires probe_count >= 1");

    RttEstimate est;
    std::optional<net::ConnectErrc> last_error;
    for (std::size_t i = 0; i < probe_count; ++i) {
        auto conn = net::connect_timed(target.host, target.port, timeout);
        if (conn.error) {
            ++est.failed_count;
            last_error = conn.error;
            continue;
        }
        est.sample_durations.push_back(conn.connect_ms);
        conn.sock.close();
    }
    est.count = est.sample_durations.size();
    if (est.count == 0)
        throw ProbeError(ProbeError::Kind::all_probes_failed,
                         "all " + std::to_string(probe_count) +
                             " rtt probes to " + target.host + ":" +
                             std::to_string(target.port) + " failed (" +
                             std::string(to_string(*last_error)) + ")",
                         last_error);
    double sum = 0;
    for (double d : est.sample_durations)
        sum += d;
    est.mean_ms = sum / static_cast<double>(est.count);
    return est;
}

ProbeSample probe_handshake(const TargetSpec& target, const ProbeOptions& opts) {
    ProbeSample sample;
    sample.started_at = std::chrono::system_clock::now();

    auto conn = net::connect_timed(target.host, target.port, opts.connect_timeout);
    if (conn.error) {
        sample.outcome = outcome_for_connect_error(*conn.error);
        return sample;
    }
    sample.tcp_connect_ms = conn.connect_ms;

    auto hello_cfg = opts.hello;
    if (!hello_cfg.sni)
        hello_cfg.sni = target.effective_sni();
    std::vector<std::uint8_t> hello;
    try {
        hello = tls::build_client_hello(hello_cfg);
    } catch (const tls::CodecError&) {
        conn.sock.close();
        throw;  // invalid configuration is a caller bug, not a probe outcome
    }

    const auto teardown = [&](ProbeOutcome outcome) {
        if (opts.abort_mode == AbortMode::rst)
            conn.sock.close_rst();
        else
            conn.sock.close();
        sample.outcome = outcome;
        return sample;
    };

    const auto t0 = Clock::now();
    try {
        conn.sock.send_all(hello, opts.read_timeout);
    } catch (const net::IoError& e) {
        return teardown(e.code == net::IoErrc::reset
                            ? ProbeOutcome::reset_during_handshake
                            : ProbeOutcome::read_timeout);
    }

    const auto deadline = t0 + opts.read_timeout;
    std::vector<std::uint8_t> buf;
    std::size_t parsed = 0;
    tls::HandshakeReassembler reasm;
    std::array<std::uint8_t, 4096> chunk;

    for (;;) {
        // Drain complete records already buffered.
        try {
            for (;;) {
                auto rp = tls::parse_record(
                    std::span(buf).subspan(parsed));
                if (rp.status == tls::RecordStatus::needs_more_data)
                    break;
                parsed += rp.consumed;
                if (rp.record.content_type == tls::kContentAlert)
                    return teardown(ProbeOutcome::protocol_error);
                if (rp.record.content_type != tls::kContentHandshake)
                    return teardown(ProbeOutcome::protocol_error);
                reasm.feed(rp.record.payload);
                while (auto msg = reasm.next()) {
                    if (msg->msg_type == tls::kHsServerHello) {
                        sample.negotiated_version =
                            tls::parse_server_hello(*msg).version;
                    } else if (msg->msg_type == tls::kHsCertificate) {
                        const auto t_cert = Clock::now();
                        sample.cert = tls::parse_certificate_message(*msg, t_cert);
                        sample.hello_to_cert_ms = to_ms(t_cert - t0);
                        return teardown(ProbeOutcome::ok);
                    }
                    // ServerHelloDone or anything else before Certificate: skip.
                }
            }
        } catch (const tls::CodecError&) {
            return teardown(ProbeOutcome::protocol_error);
        }

        const auto now = Clock::now();
        if (now >= deadline)
            return teardown(ProbeOutcome::read_timeout);
        std::size_t n = 0;
        try {
            n = conn.sock.recv_some(
                chunk, std::chrono::duration_cast<net::Millis>(deadline - now));
        } catch (const net::IoError& e) {
            if (e.code == net::IoErrc::timed_out)
                return teardown(ProbeOutcome::read_timeout);
            if (e.code == net::IoErrc::reset)
                return teardown(ProbeOutcome::reset_during_handshake);
            return teardown(ProbeOutcome::protocol_error);
        }
        if (n == 0)  // orderly close before any certificate
            return teardown(ProbeOutcome::protocol_error);
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(n));
    }
}

SessionResult run_session(const TargetSpec& target,
                          const SamplingSchedule& schedule,
                          const ProbeOptions& opts) {
    if (schedule.sample_count < 1)
        throw std::invalid_argument("schedule.sample_count must be >= 1");
    if (schedule.total_duration.count() < 0)
        throw std::invalid_argument("schedule.total_duration must be >= 0");
    if (schedule.rtt_probe_count < 1)
        throw std::invalid_argument("schedule.rtt_probe_count must be >= 1");

    SessionResult result;
    result.rtt = measure_rtt(target, schedule.rtt_probe_count, opts.connect_timeout);

    const auto spacing = schedule.total_duration /
                         static_cast<double>(schedule.sample_count);
    const auto start = Clock::now();
    for (std::size_t i = 0; i < schedule.sample_count; ++i) {
        std::this_thread::sleep_until(
            start + std::chrono::duration_cast<Clock::duration>(
                        spacing * static_cast<double>(i)));
        auto per_probe = opts;
        per_probe.hello.client_random = tls::fresh_random();
        result.samples.push_back(probe_handshake(target, per_probe));
    }
    return result;
}

PortProbeResult probe_closed_port(const std::string& host, std::uint16_t port,
                                  std::chrono::milliseconds timeout) {
    auto conn = net::connect_timed(host, port, timeout);
    if (!conn.error) {
        conn.sock.close();
        return PortProbeResult::accepted;
    }
    return *conn.error == net::ConnectErrc::refused ? PortProbeResult::refused
                                                    : PortProbeResult::timed_out;
}

SniPairResult probe_sni_pair(const std::string& host, std::uint16_t port,
                             const std::string& sni_a, const std::string& sni_b,
                             const ProbeOptions& opts) {
    if (sni_a == sni_b)
        throw std::invalid_argument("probe_sni_pair requires sni_a != sni_b");
    if (!tls::is_valid_hostname(sni_a) || !tls::is_valid_hostname(sni_b))
        throw std::invalid_argument("probe_sni_pair requires valid hostnames");

    TargetSpec target{.host = host, .port = port, .sni = std::nullopt,
                      .label = host + ":" + std::to_string(port)};
    SniPairResult result{sni_a, sni_b, {}, {}};
    auto opts_a = opts;
    opts_a.hello.sni = sni_a;
    opts_a.hello.client_random = tls::fresh_random();
    result.a = probe_handshake(target, opts_a);
    auto opts_b = opts;
    opts_b.hello.sni = sni_b;
    opts_b.hello.client_random = tls::fresh_random();
    result.b = probe_handshake(target, opts_b);
    return result;
}

}  // namespace hsprobe
