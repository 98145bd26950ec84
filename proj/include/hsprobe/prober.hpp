#pragma once

// The measurement procedure run against one endpoint: TCP-connect RTT
// estimation, timed partial TLS handshake (close right after the
// Certificate message), the sampling schedule, and the two active
// behavioral probes (closed-port and SNI-pair).

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsprobe/net.hpp"
#include "hsprobe/tls_codec.hpp"

namespace hsprobe {

struct TargetSpec {
    std::string host;
    std::uint16_t port = 443;
    std::optional<std::string> sni;  // default: host, when host is a DNS name
    std::string label;

    std::optional<std::string> effective_sni() const;
};

struct RttEstimate {
    std::vector<double> sample_durations;  // ms; successful probes only
    double mean_ms = 0.0;
    std::size_t count = 0;                 // == sample_durations.size()
    std::size_t failed_count = 0;
};

enum class ProbeOutcome {
    ok,
    connect_refused,
    connect_timeout,
    read_timeout,
    reset_during_handshake,
    protocol_error,
};

std::string_view to_string(ProbeOutcome o);
std::optional<ProbeOutcome> outcome_from_string(std::string_view s);

struct ProbeSample {
    std::chrono::system_clock::time_point started_at{};
    // Timing fields are absent (not zero) for phases the probe never reached.
    std::optional<double> tcp_connect_ms;
    std::optional<double> hello_to_cert_ms;  // first hello byte written -> Certificate fully received
    std::optional<tls::CertificateInfo> cert;
    std::optional<tls::ProtocolVersion> negotiated_version;
    ProbeOutcome outcome = ProbeOutcome::protocol_error;
};

struct SamplingSchedule {
    std::size_t sample_count = 19;
    std::chrono::duration<double> total_duration = std::chrono::seconds(300);
    std::size_t rtt_probe_count = 5;
};

enum class AbortMode { fin, rst };

struct ProbeOptions {
    std::chrono::milliseconds connect_timeout{10000};
    std::chrono::milliseconds read_timeout{10000};
    AbortMode abort_mode = AbortMode::fin;
    tls::ClientHelloConfig hello;
};

class ProbeError : public std::runtime_error {
public:
    enum class Kind { all_probes_failed };

    ProbeError(Kind kind, const std::string& what,
               std::optional<net::ConnectErrc> cause = {})
        : std::runtime_error(what), kind(kind), cause(cause) {}

    Kind kind;
    std::optional<net::ConnectErrc> cause;
};

// Opens probe_count TCP connections sequentially, timing each with a
// monotonic clock and closing immediately on establishment. Failures are
// excluded from the mean but tallied; throws all_probes_failed if none
// succeed.
RttEstimate measure_rtt(const TargetSpec& target, std::size_t probe_count,
                        std::chrono::milliseconds timeout);

// One partial handshake: connect, send ClientHello, read until the
// Certificate message is complete, close without continuing. Network
// failures land in the sample's outcome, never in an exception.
ProbeSample probe_handshake(const TargetSpec& target, const ProbeOptions& opts);

struct SessionResult {
    RttEstimate rtt;
    std::vector<ProbeSample> samples;
};

// One measure_rtt pass, then schedule.sample_count handshake probes spaced
// evenly across total_duration (first probe immediate). Individual sample
// failures never abort the session.
SessionResult run_session(const TargetSpec& target,
                          const SamplingSchedule& schedule,
                          const ProbeOptions& opts);

enum class PortProbeResult { accepted, refused, timed_out };
std::string_view to_string(PortProbeResult r);

// Caller asserts the port is expected-closed on the genuine server; any
// established connection is closed immediately.
PortProbeResult probe_closed_port(const std::string& host, std::uint16_t port,
                                  std::chrono::milliseconds timeout);

struct SniPairResult {
    std::string sni_a;
    std::string sni_b;
    ProbeSample a;
    ProbeSample b;
};

// Two handshake probes against the same endpoint differing only in SNI.
SniPairResult probe_sni_pair(const std::string& host, std::uint16_t port,
                             const std::string& sni_a, const std::string& sni_b,
                             const ProbeOptions& opts);

}  // namespace hsprobe
