#pragma once

// Property suites shared between the unit tests and the acceptance runner.
// Each returns ok=false with a human-readable detail on the first
// counterexample.

#include <cstdint>
#include <filesystem>
#include <string>

namespace testsupport {

struct PropertyResult {
    bool ok = true;
    std::string detail;
};

// build_client_hello -> parse recovers version, sni, suites, session id and
// random exactly, over randomized configs.
PropertyResult codec_round_trip_property(std::size_t cases, std::uint64_t seed);

// extract_handshake_messages yields identical message sequences no matter
// how the byte stream is split into records.
PropertyResult fragmentation_invariance_property(std::size_t cases,
                                                 std::uint64_t seed);

// compute_profile means/variances match a long-double brute-force
// recomputation to within rel_tol.
PropertyResult statistics_oracle_property(std::size_t cases, std::uint64_t seed,
                                          double rel_tol);

// Raising shift_ratio never turns a non-fired timing_shift into fired.
PropertyResult shift_monotonicity_property(std::size_t cases,
                                           std::uint64_t seed);

// Every detector is a pure function of its inputs and config.
PropertyResult detector_determinism_property(std::uint64_t seed);

// Append-then-reload yields structurally identical records.
PropertyResult store_round_trip_property(const std::filesystem::path& dir);

// Truncating the store at any byte boundary loses at most the in-flight
// record.
PropertyResult store_truncation_property(const std::filesystem::path& dir);

std::filesystem::path make_temp_dir(const std::string& prefix);

}  // namespace testsupport
