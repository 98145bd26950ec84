#pragma once

// Newline-delimited JSON persistence for per-target timing profiles and
// certificate fingerprint history. One document per line, schema version
// "v":1. Single-writer, multi-reader within one process; multi-process
// writing is unsupported.

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hsprobe/analysis.hpp"

namespace hsprobe {

class StoreError : public std::runtime_error {
public:
    enum class Kind { io_failure };

    StoreError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}

    Kind kind;
};

struct BaselineRecord {
    std::string label;
    std::string recorded_at;  // RFC 3339 UTC
    TimingProfile profile;
    std::vector<FingerprintEntry> fingerprints;  // timestamp-ascending
};

class BaselineStore {
public:
    explicit BaselineStore(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const { return path_; }

    // Durably appends one record; a torn final line never corrupts prior
    // records and is skipped on load.
    void append(const BaselineRecord& record);

    std::optional<BaselineRecord> latest(const std::string& label);

    // Fingerprint lists concatenated across all records for the label,
    // timestamp-ordered.
    std::vector<FingerprintEntry> fingerprint_history(const std::string& label);

    // All parseable records in file order. Unparseable lines (e.g. a write
    // cut short by a crash) are skipped.
    std::vector<BaselineRecord> load_all();

private:
    std::filesystem::path path_;
    std::mutex write_mutex_;
};

}  // namespace hsprobe
