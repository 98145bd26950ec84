#include "hsprobe/tls_codec.hpp"

#include <cstdio>
#include <random>

#include "hsprobe/digest.hpp"

namespace hsprobe::tls {

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

void put_u16(Bytes& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u24(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_bytes(Bytes& out, std::span<const std::uint8_t> data) {
    out.insert(out.end(), data.begin(), data.end());
}

// Bounds-checked big-endian reader; overruns throw a CodecError of the
// kind the caller is parsing.
class Reader {
public:
    Reader(std::span<const std::uint8_t> data, CodecError::Kind err_kind)
        : data_(data), err_(err_kind) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] << 8 | b[1]);
    }

    std::uint32_t u24() {
        auto b = take(3);
        return static_cast<std::uint32_t>(b[0]) << 16 |
               static_cast<std::uint32_t>(b[1]) << 8 | b[2];
    }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > remaining())
            throw CodecError(err_, "truncated field");
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    CodecError::Kind err_;
};

}  // namespace

std::string ProtocolVersion::str() const {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%u.%u", major, minor);
    return buf;
}

bool is_valid_hostname(std::string_view name) {
    if (name.empty() || name.size() > 255)
        return false;
    std::size_t label_len = 0;
    for (char c : name) {
        if (c == '.') {
            if (label_len == 0)
                return false;  // empty label
            label_len = 0;
            continue;
        }
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '-';
        if (!ok)
            return false;
        if (++label_len > 63)
            return false;
    }
    return label_len > 0;  // no trailing dot
}

const std::vector<std::uint16_t>& default_cipher_suites() {
    static const std::vector<std::uint16_t> suites = {
        0xc02b,  // ECDHE-ECDSA-AES128-GCM-SHA256
        0xc02f,  // ECDHE-RSA-AES128-GCM-SHA256
        0xc02c,  // ECDHE-ECDSA-AES256-GCM-SHA384
        0xc030,  // ECDHE-RSA-AES256-GCM-SHA384
        0xc013,  // ECDHE-RSA-AES128-SHA
        0xc014,  // ECDHE-RSA-AES256-SHA
        0x009c,  // AES128-GCM-SHA256
        0x009d,  // AES256-GCM-SHA384
        0x002f,  // AES128-SHA
        0x0035,  // AES256-SHA
    };
    return suites;
}

std::array<std::uint8_t, 32> fresh_random() {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::array<std::uint8_t, 32> out{};
    for (std::size_t i = 0; i < out.size(); i += 8) {
        std::uint64_t v = rng();
        for (std::size_t j = 0; j < 8; ++j)
            out[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
    return out;
}

std::vector<std::uint8_t> TlsRecord::serialize() const {
    if (payload.size() > kMaxRecordPayload)
        throw CodecError(CodecError::Kind::malformed_record,
                         "record payload exceeds 2^14");
    Bytes out;
    out.reserve(5 + payload.size());
    put_u8(out, content_type);
    put_u8(out, version.major);
    put_u8(out, version.minor);
    put_u16(out, static_cast<std::uint16_t>(payload.size()));
    put_bytes(out, payload);
    return out;
}

std::vector<std::uint8_t> HandshakeMessage::serialize() const {
    Bytes out;
    out.reserve(4 + body.size());
    put_u8(out, msg_type);
    put_u24(out, static_cast<std::uint32_t>(body.size()));
    put_bytes(out, body);
    return out;
}

std::vector<std::uint8_t> build_client_hello(const ClientHelloConfig& config) {
    if (config.cipher_suite_ids.empty())
        throw CodecError(CodecError::Kind::invalid_config,
                         "cipher suite list must be non-empty");
    if (config.session_id.size() > 32)
        throw CodecError(CodecError::Kind::invalid_config,
                         "session id longer than 32 bytes");
    if (config.sni && !is_valid_hostname(*config.sni))
        throw CodecError(CodecError::Kind::invalid_config,
                         "sni is not a valid DNS hostname");

    Bytes body;
    put_u8(body, config.max_version.major);
    put_u8(body, config.max_version.minor);
    put_bytes(body, config.client_random);
    put_u8(body, static_cast<std::uint8_t>(config.session_id.size()));
    put_bytes(body, config.session_id);
    put_u16(body, static_cast<std::uint16_t>(2 * config.cipher_suite_ids.size()));
    for (std::uint16_t id : config.cipher_suite_ids)
        put_u16(body, id);
    put_u8(body, 1);  // one compression method
    put_u8(body, 0);  // null

    if (config.sni) {
        const auto& name = *config.sni;
        const auto n = static_cast<std::uint16_t>(name.size());
        // server_name extension (RFC 6066): list of one host_name entry
        Bytes ext;
        put_u16(ext, 0x0000);                 // extension type: server_name
        put_u16(ext, static_cast<std::uint16_t>(2 + 3 + n));
        put_u16(ext, static_cast<std::uint16_t>(3 + n));  // list length
        put_u8(ext, 0);                       // name type: host_name
        put_u16(ext, n);
        put_bytes(ext, {reinterpret_cast<const std::uint8_t*>(name.data()),
                        name.size()});
        put_u16(body, static_cast<std::uint16_t>(ext.size()));
        put_bytes(body, ext);
    }

    HandshakeMessage msg{kHsClientHello, std::move(body)};
    TlsRecord record{kContentHandshake, kTls10, msg.serialize()};
    return record.serialize();
}

RecordParse parse_record(std::span<const std::uint8_t> buffer) {
    RecordParse out;
    if (buffer.size() < 5)
        return out;
    const std::uint8_t content = buffer[0];
    const ProtocolVersion version{buffer[1], buffer[2]};
    if (version.major != 3)
        throw CodecError(CodecError::Kind::malformed_record,
                         "record version is not TLS");
    const std::size_t len = static_cast<std::size_t>(buffer[3]) << 8 | buffer[4];
    if (len > kMaxRecordPayload)
        throw CodecError(CodecError::Kind::malformed_record,
                         "record length exceeds 2^14");
    if (buffer.size() < 5 + len)
        return out;
    out.status = RecordStatus::ok;
    out.record.content_type = content;
    out.record.version = version;
    out.record.payload.assign(buffer.begin() + 5, buffer.begin() + 5 + len);
    out.consumed = 5 + len;
    return out;
}

void HandshakeReassembler::feed(std::span<const std::uint8_t> record_payload) {
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    buf_.insert(buf_.end(), record_payload.begin(), record_payload.end());
}

std::optional<HandshakeMessage> HandshakeReassembler::next() {
    const std::size_t avail = buf_.size() - pos_;
    if (avail < 4)
        return std::nullopt;
    const std::uint8_t type = buf_[pos_];
    const std::size_t len = static_cast<std::size_t>(buf_[pos_ + 1]) << 16 |
                            static_cast<std::size_t>(buf_[pos_ + 2]) << 8 |
                            buf_[pos_ + 3];
    if (len > kMaxHandshakeBody)
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "handshake message implausibly large");
    if (avail < 4 + len)
        return std::nullopt;
    HandshakeMessage msg;
    msg.msg_type = type;
    msg.body.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 4),
                    buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 4 + len));
    pos_ += 4 + len;
    return msg;
}

std::vector<HandshakeMessage> extract_handshake_messages(
    std::span<const TlsRecord> records) {
    HandshakeReassembler reasm;
    std::vector<HandshakeMessage> out;
    for (const auto& record : records) {
        if (record.content_type != kContentHandshake)
            throw CodecError(CodecError::Kind::malformed_handshake,
                             "record stream contains non-handshake record");
        reasm.feed(record.payload);
        while (auto msg = reasm.next())
            out.push_back(std::move(*msg));
    }
    if (reasm.in_progress())
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "message length exceeds remaining input");
    return out;
}

ParsedClientHello parse_client_hello(const HandshakeMessage& msg) {
    if (msg.msg_type != kHsClientHello)
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "not a client hello");
    Reader r(msg.body, CodecError::Kind::malformed_handshake);
    ParsedClientHello out;
    out.version.major = r.u8();
    out.version.minor = r.u8();
    auto random = r.take(32);
    std::copy(random.begin(), random.end(), out.random.begin());
    const std::uint8_t sid_len = r.u8();
    if (sid_len > 32)
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "session id longer than 32 bytes");
    auto sid = r.take(sid_len);
    out.session_id.assign(sid.begin(), sid.end());
    const std::uint16_t suites_len = r.u16();
    if (suites_len == 0 || suites_len % 2 != 0)
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "bad cipher suite vector length");
    for (std::size_t i = 0; i < suites_len / 2; ++i)
        out.cipher_suite_ids.push_back(r.u16());
    const std::uint8_t comp_len = r.u8();
    r.take(comp_len);
    if (r.done())
        return out;  // no extensions

    const std::uint16_t ext_total = r.u16();
    Reader ext(r.take(ext_total), CodecError::Kind::malformed_handshake);
    while (!ext.done()) {
        const std::uint16_t type = ext.u16();
        const std::uint16_t len = ext.u16();
        Reader payload(ext.take(len), CodecError::Kind::malformed_handshake);
        if (type != 0x0000 || out.sni)
            continue;
        payload.u16();  // server_name_list length
        const std::uint8_t name_type = payload.u8();
        const std::uint16_t name_len = payload.u16();
        auto name = payload.take(name_len);
        if (name_type == 0)
            out.sni = std::string(name.begin(), name.end());
    }
    return out;
}

ParsedServerHello parse_server_hello(const HandshakeMessage& msg) {
    if (msg.msg_type != kHsServerHello)
        throw CodecError(CodecError::Kind::malformed_handshake,
                         "not a server hello");
    Reader r(msg.body, CodecError::Kind::malformed_handshake);
    ParsedServerHello out;
    out.version.major = r.u8();
    out.version.minor = r.u8();
    r.take(32);                 // server random
    r.take(r.u8());             // session id
    out.cipher_suite = r.u16();
    r.u8();                     // compression method
    return out;                 // trailing extensions ignored
}

CertificateInfo parse_certificate_message(
    const HandshakeMessage& msg,
    std::chrono::steady_clock::time_point received_at) {
    if (msg.msg_type != kHsCertificate)
        throw CodecError(CodecError::Kind::malformed_certificate_list,
                         "not a certificate message");
    Reader r(msg.body, CodecError::Kind::malformed_certificate_list);
    const std::uint32_t list_len = r.u24();
    if (list_len != r.remaining())
        throw CodecError(CodecError::Kind::malformed_certificate_list,
                         "certificate list length disagrees with body");
    CertificateInfo info;
    while (!r.done()) {
        const std::uint32_t entry_len = r.u24();
        auto der = r.take(entry_len);
        if (info.chain_length == 0)
            info.leaf_der.assign(der.begin(), der.end());
        ++info.chain_length;
    }
    if (info.chain_length == 0)
        throw CodecError(CodecError::Kind::malformed_certificate_list,
                         "certificate list is empty");
    info.leaf_digest = sha256_hex(info.leaf_der);
    info.received_at = received_at;
    return info;
}

namespace {

// Splits one serialized handshake message into records of at most
// kMaxRecordPayload bytes each.
void append_as_records(Bytes& out, const Bytes& handshake_bytes,
                       ProtocolVersion version) {
    std::size_t off = 0;
    do {
        const std::size_t n =
            std::min(kMaxRecordPayload, handshake_bytes.size() - off);
        TlsRecord record{kContentHandshake, version,
                         Bytes(handshake_bytes.begin() + static_cast<std::ptrdiff_t>(off),
                               handshake_bytes.begin() + static_cast<std::ptrdiff_t>(off + n))};
        put_bytes(out, record.serialize());
        off += n;
    } while (off < handshake_bytes.size());
}

}  // namespace

std::vector<std::uint8_t> build_certificate_flight(
    std::span<const std::vector<std::uint8_t>> certs, ProtocolVersion version) {
    if (certs.empty())
        throw CodecError(CodecError::Kind::empty_input,
                         "certificate chain must be non-empty");

    Bytes sh_body;
    put_u8(sh_body, version.major);
    put_u8(sh_body, version.minor);
    put_bytes(sh_body, fresh_random());
    put_u8(sh_body, 0);        // empty session id
    put_u16(sh_body, 0x002f);  // AES128-SHA; never actually negotiated further
    put_u8(sh_body, 0);        // null compression

    Bytes cert_body;
    std::size_t list_len = 0;
    for (const auto& der : certs)
        list_len += 3 + der.size();
    put_u24(cert_body, static_cast<std::uint32_t>(list_len));
    for (const auto& der : certs) {
        put_u24(cert_body, static_cast<std::uint32_t>(der.size()));
        put_bytes(cert_body, der);
    }

    Bytes out;
    append_as_records(out, HandshakeMessage{kHsServerHello, std::move(sh_body)}.serialize(), version);
    append_as_records(out, HandshakeMessage{kHsCertificate, std::move(cert_body)}.serialize(), version);
    append_as_records(out, HandshakeMessage{kHsServerHelloDone, {}}.serialize(), version);
    return out;
}

std::vector<std::uint8_t> build_alert(std::uint8_t level,
                                      std::uint8_t description,
                                      ProtocolVersion version) {
    TlsRecord record{kContentAlert, version, {level, description}};
    return record.serialize();
}

}  // namespace hsprobe::tls
