#include "hsprobe/cert_forge.hpp"

#include <random>
#include <stdexcept>
#include <thread>

namespace hsprobe::sim {

namespace {

using Bytes = std::vector<std::uint8_t>;

Bytes encode_len(std::size_t len) {
    if (len < 0x80)
        return {static_cast<std::uint8_t>(len)};
    if (len <= 0xff)
        return {0x81, static_cast<std::uint8_t>(len)};
    return {0x82, static_cast<std::uint8_t>(len >> 8),
            static_cast<std::uint8_t>(len)};
}

Bytes tlv(std::uint8_t tag, const Bytes& content) {
    Bytes out{tag};
    const Bytes len = encode_len(content.size());
    out.insert(out.end(), len.begin(), len.end());
    out.insert(out.end(), content.begin(), content.end());
    return out;
}

Bytes cat(std::initializer_list<Bytes> parts) {
    Bytes out;
    for (const auto& p : parts)
        out.insert(out.end(), p.begin(), p.end());
    return out;
}

Bytes der_seq(std::initializer_list<Bytes> parts) { return tlv(0x30, cat(parts)); }
Bytes der_set(std::initializer_list<Bytes> parts) { return tlv(0x31, cat(parts)); }

Bytes der_int(Bytes magnitude) {
    if (magnitude.empty())
        magnitude.push_back(0);
    if (magnitude.front() & 0x80)
        magnitude.insert(magnitude.begin(), 0x00);
    return tlv(0x02, magnitude);
}

Bytes der_oid(const Bytes& encoded) { return tlv(0x06, encoded); }
Bytes der_null() { return {0x05, 0x00}; }
Bytes der_utf8(const std::string& s) {
    return tlv(0x0c, Bytes(s.begin(), s.end()));
}
Bytes der_utctime(const std::string& s) {
    return tlv(0x17, Bytes(s.begin(), s.end()));
}

Bytes der_bitstring(const Bytes& content) {
    Bytes padded{0x00};  // zero unused bits
    padded.insert(padded.end(), content.begin(), content.end());
    return tlv(0x03, padded);
}

Bytes der_explicit(std::uint8_t n, const Bytes& content) {
    return tlv(0xa0 | n, content);
}

const Bytes kOidSha256WithRsa = {0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d,
                                 0x01, 0x01, 0x0b};
const Bytes kOidRsaEncryption = {0x2a, 0x86, 0x48, 0x86, 0xf7, 0x0d,
                                 0x01, 0x01, 0x01};
const Bytes kOidCommonName = {0x55, 0x04, 0x03};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Bytes pseudo_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<std::uint8_t>(rng() >> 32);
    return out;
}

}  // namespace

std::vector<std::uint8_t> make_self_signed_der(const std::string& common_name,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ fnv1a(common_name));

    Bytes serial = pseudo_bytes(rng, 8);
    serial.front() &= 0x7f;  // keep the INTEGER positive

    // 2048-bit modulus shape: top bit set, odd.
    Bytes modulus = pseudo_bytes(rng, 256);
    modulus.front() |= 0x80;
    modulus.back() |= 0x01;
    Bytes signature = pseudo_bytes(rng, 256);

    const Bytes name = der_seq({der_set({der_seq(
        {der_oid(kOidCommonName), der_utf8(common_name)})})});
    const Bytes sig_alg = der_seq({der_oid(kOidSha256WithRsa), der_null()});
    const Bytes validity =
        der_seq({der_utctime("250101000000Z"), der_utctime("350101000000Z")});
    const Bytes rsa_pub = der_seq({der_int(std::move(modulus)),
                                   der_int({0x01, 0x00, 0x01})});
    const Bytes spki = der_seq(
        {der_seq({der_oid(kOidRsaEncryption), der_null()}), der_bitstring(rsa_pub)});

    const Bytes tbs = der_seq({
        der_explicit(0, der_int({0x02})),  // version v3
        der_int(std::move(serial)),
        sig_alg,
        name,      // issuer
        validity,
        name,      // subject
        spki,
    });

    return der_seq({tbs, sig_alg, der_bitstring(signature)});
}

DerChain forge_certificate(const std::string& identity,
                           std::chrono::milliseconds delay, std::uint64_t seed) {
    if (identity.empty())
        throw std::invalid_argument("forge_certificate requires an identity");
    if (delay.count() > 0)
        std::this_thread::sleep_for(delay);
    return {make_self_signed_der(identity, seed)};
}

}  // namespace hsprobe::sim
