#pragma once

// Deterministic fabrication of syntactically valid self-signed X.509
// certificates. Key material and signature bytes are seed-derived pseudo
// randomness, not real cryptography: the detectable signal is the forging
// delay and the fingerprint, never signature validity.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace hsprobe::sim {

using DerChain = std::vector<std::vector<std::uint8_t>>;

// DER certificate with subject and issuer CN = common_name; byte-identical
// for identical (common_name, seed).
std::vector<std::uint8_t> make_self_signed_der(const std::string& common_name,
                                               std::uint64_t seed);

// Sleeps for delay (the simulated forging cost), then returns a one-element
// chain for the identity. Total duration >= delay.
DerChain forge_certificate(const std::string& identity,
                           std::chrono::milliseconds delay, std::uint64_t seed);

}  // namespace hsprobe::sim
