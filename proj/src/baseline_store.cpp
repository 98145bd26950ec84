#include "hsprobe/baseline_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hsprobe {

namespace {

nlohmann::json record_to_json(const BaselineRecord& record) {
    nlohmann::json fingerprints = nlohmann::json::array();
    for (const auto& fp : record.fingerprints)
        fingerprints.push_back({fp.ts, fp.digest});
    return {
        {"v", 1},
        {"label", record.label},
        {"recorded_at", record.recorded_at},
        {"profile", profile_to_json(record.profile)},
        {"fingerprints", fingerprints},
    };
}

std::optional<BaselineRecord> record_from_json(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("v").get<int>() != 1)
            return std::nullopt;
        BaselineRecord record;
        record.label = j.at("label").get<std::string>();
        record.recorded_at = j.at("recorded_at").get<std::string>();
        record.profile = profile_from_json(j.at("profile"), record.label);
        for (const auto& fp : j.at("fingerprints")) {
            record.fingerprints.push_back(
                {fp.at(0).get<std::string>(), fp.at(1).get<std::string>()});
        }
        return record;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

void BaselineStore::append(const BaselineRecord& record) {
    if (!std::is_sorted(record.fingerprints.begin(), record.fingerprints.end(),
                        [](const auto& a, const auto& b) { return a.ts < b.ts; }))
        throw std::invalid_argument("fingerprints must be timestamp-ascending");

    std::lock_guard lock(write_mutex_);
    std::error_code ec;
    if (std::filesystem::is_directory(path_, ec))
        throw StoreError(StoreError::Kind::io_failure,
                         "store path is a directory: " + path_.string());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out)
        throw StoreError(StoreError::Kind::io_failure,
                         "cannot open store for append: " + path_.string());
    out << record_to_json(record).dump() << '\n';
    out.flush();
    if (!out)
        throw StoreError(StoreError::Kind::io_failure,
                         "write to store failed: " + path_.string());
}

std::vector<BaselineRecord> BaselineStore::load_all() {
    std::vector<BaselineRecord> records;
    std::error_code ec;
    if (!std::filesystem::exists(path_, ec))
        return records;
    if (std::filesystem::is_directory(path_, ec))
        throw StoreError(StoreError::Kind::io_failure,
                         "store path is a directory: " + path_.string());
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        throw StoreError(StoreError::Kind::io_failure,
                         "cannot open store: " + path_.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (auto record = record_from_json(line))
            records.push_back(std::move(*record));
    }
    return records;
}

std::optional<BaselineRecord> BaselineStore::latest(const std::string& label) {
    std::optional<BaselineRecord> best;
    for (auto& record : load_all()) {
        if (record.label == label)
            best = std::move(record);
    }
    return best;
}

std::vector<FingerprintEntry> BaselineStore::fingerprint_history(
    const std::string& label) {
    std::vector<FingerprintEntry> history;
    for (const auto& record : load_all()) {
        if (record.label != label)
            continue;
        history.insert(history.end(), record.fingerprints.begin(),
                       record.fingerprints.end());
    }
    std::stable_sort(history.begin(), history.end(),
                     [](const auto& a, const auto& b) { return a.ts < b.ts; });
    return history;
}

}  // namespace hsprobe
