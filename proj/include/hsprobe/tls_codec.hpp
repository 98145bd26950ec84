#pragma once

// Minimal TLS 1.0-1.2 wire codec: just enough to start a handshake and
// recognize the certificate flight. No key exchange, no signature checks;
// the only cryptography is digesting certificate bytes.

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hsprobe::tls {

struct ProtocolVersion {
    std::uint8_t major = 3;
    std::uint8_t minor = 3;

    bool operator==(const ProtocolVersion&) const = default;
    std::string str() const;  // "3.3"
};

inline constexpr ProtocolVersion kTls10{3, 1};
inline constexpr ProtocolVersion kTls11{3, 2};
inline constexpr ProtocolVersion kTls12{3, 3};

// Record content types (RFC 5246 6.2.1). Unknown values are carried as-is.
inline constexpr std::uint8_t kContentChangeCipherSpec = 20;
inline constexpr std::uint8_t kContentAlert = 21;
inline constexpr std::uint8_t kContentHandshake = 22;
inline constexpr std::uint8_t kContentApplicationData = 23;

// Handshake message types.
inline constexpr std::uint8_t kHsClientHello = 1;
inline constexpr std::uint8_t kHsServerHello = 2;
inline constexpr std::uint8_t kHsCertificate = 11;
inline constexpr std::uint8_t kHsServerHelloDone = 14;

// Alert levels / descriptions used here.
inline constexpr std::uint8_t kAlertLevelFatal = 2;
inline constexpr std::uint8_t kAlertHandshakeFailure = 40;
inline constexpr std::uint8_t kAlertUnrecognizedName = 112;

inline constexpr std::size_t kMaxRecordPayload = std::size_t{1} << 14;
// Sanity cap on a single handshake message body; real flights are far smaller.
inline constexpr std::size_t kMaxHandshakeBody = std::size_t{1} << 20;

class CodecError : public std::runtime_error {
public:
    enum class Kind {
        invalid_config,
        malformed_record,
        malformed_handshake,
        malformed_certificate_list,
        empty_input,
    };

    CodecError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}

    Kind kind;
};

// DNS hostname check: non-empty, <= 255 chars, no NUL, labels of
// [A-Za-z0-9-] separated by single dots.
bool is_valid_hostname(std::string_view name);

// Fixed broadly-accepted TLS 1.2 suite list, overridable via config.
const std::vector<std::uint16_t>& default_cipher_suites();
std::array<std::uint8_t, 32> fresh_random();

struct ClientHelloConfig {
    ProtocolVersion max_version = kTls12;
    std::optional<std::string> sni;
    std::vector<std::uint16_t> cipher_suite_ids = default_cipher_suites();
    std::vector<std::uint8_t> session_id;          // length 0..32
    std::array<std::uint8_t, 32> client_random{};
};

struct TlsRecord {
    std::uint8_t content_type = kContentHandshake;
    ProtocolVersion version = kTls10;
    std::vector<std::uint8_t> payload;             // <= kMaxRecordPayload

    std::vector<std::uint8_t> serialize() const;   // 5-byte header + payload
};

struct HandshakeMessage {
    std::uint8_t msg_type = 0;
    std::vector<std::uint8_t> body;

    std::vector<std::uint8_t> serialize() const;   // 4-byte header + body
};

struct CertificateInfo {
    std::vector<std::uint8_t> leaf_der;
    std::size_t chain_length = 0;
    std::string leaf_digest;                       // sha-256(leaf_der), lowercase hex
    std::chrono::steady_clock::time_point received_at{};
};

struct ParsedClientHello {
    ProtocolVersion version;
    std::array<std::uint8_t, 32> random{};
    std::vector<std::uint8_t> session_id;
    std::vector<std::uint16_t> cipher_suite_ids;
    std::optional<std::string> sni;
};

struct ParsedServerHello {
    ProtocolVersion version;
    std::uint16_t cipher_suite = 0;
};

// Complete TLS record carrying the ClientHello. The record-layer version is
// pinned to 3.1 for maximum server compatibility; config.max_version goes in
// the handshake body. Includes an SNI extension iff config.sni is present.
std::vector<std::uint8_t> build_client_hello(const ClientHelloConfig& config);

enum class RecordStatus { ok, needs_more_data };

struct RecordParse {
    RecordStatus status = RecordStatus::needs_more_data;
    TlsRecord record;
    std::size_t consumed = 0;  // bytes consumed when status == ok
};

// Consumes exactly 5 + declared-length bytes. Throws malformed_record when
// the declared length exceeds kMaxRecordPayload or the framing is not TLS.
RecordParse parse_record(std::span<const std::uint8_t> buffer);

// Handshake messages may span or share records; feed record payloads in wire
// order and drain complete messages with next().
class HandshakeReassembler {
public:
    void feed(std::span<const std::uint8_t> record_payload);
    std::optional<HandshakeMessage> next();
    bool in_progress() const { return pos_ < buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

// One-shot reassembly over a complete record sequence. Throws
// malformed_handshake if a partial message remains at end of input.
std::vector<HandshakeMessage> extract_handshake_messages(
    std::span<const TlsRecord> records);

ParsedClientHello parse_client_hello(const HandshakeMessage& msg);
ParsedServerHello parse_server_hello(const HandshakeMessage& msg);

CertificateInfo parse_certificate_message(
    const HandshakeMessage& msg,
    std::chrono::steady_clock::time_point received_at =
        std::chrono::steady_clock::now());

// ServerHello + Certificate + ServerHelloDone as serialized records; payloads
// larger than one record are fragmented. Round-trips with the parsers above.
std::vector<std::uint8_t> build_certificate_flight(
    std::span<const std::vector<std::uint8_t>> certs, ProtocolVersion version);

std::vector<std::uint8_t> build_alert(std::uint8_t level,
                                      std::uint8_t description,
                                      ProtocolVersion version);

}  // namespace hsprobe::tls
