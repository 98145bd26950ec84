#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hsprobe/digest.hpp"
#include "hsprobe/tls_codec.hpp"

#include "support/properties.hpp"

using namespace hsprobe;
using Bytes = std::vector<std::uint8_t>;

namespace {

Bytes from_hex(std::string_view hex) {
    Bytes out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<std::uint8_t>(
            std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
    return out;
}

// ClientHello emitted by OpenSSL (via Python ssl, maximum_version=TLSv1.2,
// server_hostname="example.org"), captured off a live socket.
constexpr std::string_view kOpensslClientHelloHex =
    "16030100b1010000ad03034e42f3821ac31d8c6e7db60dd285505d1c750a1bc1937518"
    "5acfd36c0ae8f95500001ec02cc030c02bc02fcca9cca8c024c028c023c027009f009e"
    "006b006700ff0100006600000010000e00000b6578616d706c652e6f7267000b000403"
    "000102000a000c000a001d0017001e00190018002300000016000000170000000d002a"
    "0028040305030603080708080809080a080b080408050806040105010601030303010302"
    "040205020602";

tls::ClientHelloConfig basic_config() {
    tls::ClientHelloConfig cfg;
    cfg.cipher_suite_ids = {0x002f};
    cfg.session_id.clear();
    cfg.client_random.fill(0x42);
    return cfg;
}

std::vector<tls::TlsRecord> parse_all_records(std::span<const std::uint8_t> wire) {
    std::vector<tls::TlsRecord> records;
    std::size_t off = 0;
    while (off < wire.size()) {
        auto rp = tls::parse_record(wire.subspan(off));
        REQUIRE(rp.status == tls::RecordStatus::ok);
        records.push_back(std::move(rp.record));
        off += rp.consumed;
    }
    return records;
}

}  // namespace

TEST_CASE("build_client_hello framing matches the TLS wire format") {
    const auto wire = tls::build_client_hello(basic_config());
    REQUIRE(wire.size() > 5);
    CHECK(wire[0] == 0x16);  // handshake record
    CHECK(wire[1] == 0x03);
    CHECK(wire[2] == 0x01);  // record-layer version pinned to 3.1
    // record length covers the rest exactly
    const std::size_t len = static_cast<std::size_t>(wire[3]) << 8 | wire[4];
    CHECK(wire.size() == 5 + len);
    CHECK(wire[5] == 0x01);  // client_hello handshake type
}

TEST_CASE("build_client_hello sni round-trips") {
    auto cfg = basic_config();
    cfg.sni = "example.org";
    const auto wire = tls::build_client_hello(cfg);

    auto rp = tls::parse_record(wire);
    REQUIRE(rp.status == tls::RecordStatus::ok);
    tls::HandshakeReassembler reasm;
    reasm.feed(rp.record.payload);
    auto msg = reasm.next();
    REQUIRE(msg.has_value());
    const auto parsed = tls::parse_client_hello(*msg);
    CHECK(parsed.sni == "example.org");

    // And the raw extension bytes carry the name.
    const std::string needle = "example.org";
    CHECK(std::search(wire.begin(), wire.end(), needle.begin(), needle.end()) !=
          wire.end());
}

TEST_CASE("build_client_hello rejects invalid configs") {
    auto cfg = basic_config();
    cfg.sni = std::string("bad\0host", 8);
    CHECK_THROWS_AS(tls::build_client_hello(cfg), tls::CodecError);

    cfg = basic_config();
    cfg.cipher_suite_ids.clear();
    CHECK_THROWS_AS(tls::build_client_hello(cfg), tls::CodecError);

    cfg = basic_config();
    cfg.session_id.assign(33, 0);
    CHECK_THROWS_AS(tls::build_client_hello(cfg), tls::CodecError);
}

TEST_CASE("parser handles a reference implementation's ClientHello") {
    const auto wire = from_hex(kOpensslClientHelloHex);
    auto rp = tls::parse_record(wire);
    REQUIRE(rp.status == tls::RecordStatus::ok);
    CHECK(rp.consumed == wire.size());
    CHECK(rp.record.content_type == tls::kContentHandshake);
    CHECK(rp.record.version == tls::kTls10);

    tls::HandshakeReassembler reasm;
    reasm.feed(rp.record.payload);
    auto msg = reasm.next();
    REQUIRE(msg.has_value());
    REQUIRE(msg->msg_type == tls::kHsClientHello);
    const auto hello = tls::parse_client_hello(*msg);
    CHECK(hello.version == tls::kTls12);
    CHECK(hello.sni == "example.org");
    CHECK(hello.cipher_suite_ids.size() == 15);
    CHECK(hello.cipher_suite_ids.front() == 0xc02c);
    CHECK(hello.session_id.size() == 0);
}

TEST_CASE("parse_record consumes exactly one record and leaves the rest") {
    tls::TlsRecord record{tls::kContentHandshake, tls::kTls12, {1, 2, 3}};
    auto wire = record.serialize();
    const Bytes junk = {0xde, 0xad, 0xbe, 0xef};
    wire.insert(wire.end(), junk.begin(), junk.end());

    auto rp = tls::parse_record(wire);
    REQUIRE(rp.status == tls::RecordStatus::ok);
    CHECK(rp.record.payload == Bytes{1, 2, 3});
    CHECK(Bytes(wire.begin() + static_cast<std::ptrdiff_t>(rp.consumed), wire.end()) == junk);
}

TEST_CASE("parse_record wants more data on short buffers") {
    const Bytes three = {0x16, 0x03, 0x01};
    CHECK(tls::parse_record(three).status == tls::RecordStatus::needs_more_data);

    // Complete header, truncated payload.
    const Bytes header = {0x16, 0x03, 0x01, 0x00, 0x10, 0xaa};
    CHECK(tls::parse_record(header).status == tls::RecordStatus::needs_more_data);
}

TEST_CASE("parse_record rejects oversized and non-TLS framing") {
    const Bytes oversized = {0x16, 0x03, 0x01, 0x80, 0x00};  // 2^15
    CHECK_THROWS_AS(tls::parse_record(oversized), tls::CodecError);

    const Bytes not_tls = {0x16, 0x07, 0x01, 0x00, 0x00};
    CHECK_THROWS_AS(tls::parse_record(not_tls), tls::CodecError);
}

TEST_CASE("extract_handshake_messages splits a shared record") {
    const Bytes c1 = {0x30, 0x82, 0x01, 0x00};
    const auto flight = tls::build_certificate_flight(std::vector<Bytes>{c1}, tls::kTls12);

    // Re-pack all three messages into a single record.
    auto records = parse_all_records(flight);
    Bytes all;
    for (const auto& r : records)
        all.insert(all.end(), r.payload.begin(), r.payload.end());
    const std::vector<tls::TlsRecord> one{{tls::kContentHandshake, tls::kTls12, all}};

    const auto messages = tls::extract_handshake_messages(one);
    REQUIRE(messages.size() == 3);
    CHECK(messages[0].msg_type == tls::kHsServerHello);
    CHECK(messages[1].msg_type == tls::kHsCertificate);
    CHECK(messages[2].msg_type == tls::kHsServerHelloDone);
}

TEST_CASE("extract_handshake_messages reassembles across record boundaries") {
    const Bytes der(700, 0xab);
    const auto flight = tls::build_certificate_flight(std::vector<Bytes>{der}, tls::kTls12);
    auto records = parse_all_records(flight);

    // Split the concatenated stream at an arbitrary offset inside the
    // certificate message.
    Bytes stream;
    for (const auto& r : records)
        stream.insert(stream.end(), r.payload.begin(), r.payload.end());
    const std::size_t split = stream.size() / 2;
    const std::vector<tls::TlsRecord> two{
        {tls::kContentHandshake, tls::kTls12, Bytes(stream.begin(), stream.begin() + split)},
        {tls::kContentHandshake, tls::kTls12, Bytes(stream.begin() + split, stream.end())},
    };

    const auto messages = tls::extract_handshake_messages(two);
    REQUIRE(messages.size() == 3);
    const auto info = tls::parse_certificate_message(messages[1]);
    CHECK(info.leaf_der == der);
}

TEST_CASE("extract_handshake_messages on empty input") {
    CHECK(tls::extract_handshake_messages({}).empty());
}

TEST_CASE("extract_handshake_messages rejects a trailing partial message") {
    tls::HandshakeMessage msg{tls::kHsServerHello, Bytes(40, 0)};
    auto bytes = msg.serialize();
    bytes.resize(bytes.size() - 10);  // cut mid-body, no continuation
    const std::vector<tls::TlsRecord> records{
        {tls::kContentHandshake, tls::kTls12, bytes}};
    CHECK_THROWS_AS(tls::extract_handshake_messages(records), tls::CodecError);
}

TEST_CASE("parse_certificate_message walks the chain") {
    const Bytes c1 = {0x01, 0x02, 0x03};
    const Bytes c2 = {0x04, 0x05};
    const auto flight =
        tls::build_certificate_flight(std::vector<Bytes>{c1, c2}, tls::kTls12);
    const auto messages = tls::extract_handshake_messages(parse_all_records(flight));
    REQUIRE(messages.size() == 3);

    const auto info = tls::parse_certificate_message(messages[1]);
    CHECK(info.chain_length == 2);
    CHECK(info.leaf_der == c1);

    const auto again = tls::parse_certificate_message(messages[1]);
    CHECK(info.leaf_digest == again.leaf_digest);
    CHECK(info.leaf_digest.size() == 64);
}

TEST_CASE("parse_certificate_message rejects inconsistent lengths") {
    // list length says 10, entry claims 20
    tls::HandshakeMessage msg;
    msg.msg_type = tls::kHsCertificate;
    msg.body = {0x00, 0x00, 0x0a, 0x00, 0x00, 0x14, 0x01, 0x02, 0x03, 0x04,
                0x05, 0x06, 0x07};
    CHECK_THROWS_AS(tls::parse_certificate_message(msg), tls::CodecError);

    // empty list
    tls::HandshakeMessage empty;
    empty.msg_type = tls::kHsCertificate;
    empty.body = {0x00, 0x00, 0x00};
    CHECK_THROWS_AS(tls::parse_certificate_message(empty), tls::CodecError);
}

TEST_CASE("build_certificate_flight round-trips and rejects empty input") {
    const Bytes c = {0xaa, 0xbb, 0xcc};
    const auto flight = tls::build_certificate_flight(std::vector<Bytes>{c}, tls::kTls12);
    const auto messages = tls::extract_handshake_messages(parse_all_records(flight));
    REQUIRE(messages.size() == 3);
    CHECK(tls::parse_certificate_message(messages[1]).leaf_der == c);

    CHECK_THROWS_AS(tls::build_certificate_flight({}, tls::kTls12), tls::CodecError);
}

TEST_CASE("large flights fragment into legal records") {
    const Bytes der(40000, 0x5a);  // larger than one record
    const auto flight = tls::build_certificate_flight(std::vector<Bytes>{der}, tls::kTls12);
    const auto records = parse_all_records(flight);
    CHECK(records.size() > 3);
    for (const auto& r : records)
        CHECK(r.payload.size() <= tls::kMaxRecordPayload);
    const auto messages = tls::extract_handshake_messages(records);
    REQUIRE(messages.size() == 3);
    CHECK(tls::parse_certificate_message(messages[1]).leaf_der == der);
}

TEST_CASE("digest is deterministic and input-sensitive") {
    const Bytes a = {1, 2, 3};
    const Bytes b = {1, 2, 4};
    CHECK(sha256_hex(a) == sha256_hex(a));
    CHECK(sha256_hex(a) != sha256_hex(b));
    // Known vector: sha256("abc")
    const Bytes abc = {'a', 'b', 'c'};
    CHECK(sha256_hex(abc) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("hostname validation") {
    CHECK(tls::is_valid_hostname("example.org"));
    CHECK(tls::is_valid_hostname("a-b.c-d.example"));
    CHECK_FALSE(tls::is_valid_hostname(""));
    CHECK_FALSE(tls::is_valid_hostname(std::string("x\0y", 3)));
    CHECK_FALSE(tls::is_valid_hostname("trailing.dot."));
    CHECK_FALSE(tls::is_valid_hostname("empty..label"));
    CHECK_FALSE(tls::is_valid_hostname(std::string(256, 'a')));
}

TEST_CASE("property: client hello round-trip over randomized configs") {
    const auto result = testsupport::codec_round_trip_property(1000, 0xc0de);
    CHECK_MESSAGE(result.ok, result.detail);
}

TEST_CASE("property: fragmentation invariance") {
    const auto result = testsupport::fragmentation_invariance_property(1000, 0xf7a6);
    CHECK_MESSAGE(result.ok, result.detail);
}
