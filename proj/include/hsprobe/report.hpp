#pragma once

// Report assembly and serialization: the JSON document described by
// docs/report.schema.json, and the fixed-column CSV projection with one
// row per sample.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsprobe/analysis.hpp"
#include "hsprobe/prober.hpp"

namespace hsprobe {

inline constexpr std::string_view kToolName = "hsprobe";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct TargetReport {
    TargetSpec target;
    std::optional<RttEstimate> rtt;
    std::vector<ProbeSample> samples;
    std::optional<TimingProfile> profile;
    std::vector<Indicator> indicators;   // per-target indicators
    std::optional<std::string> error;    // session-level failure
};

struct Report {
    std::string generated_at;  // RFC 3339
    std::vector<TargetReport> targets;
    std::vector<Indicator> global_indicators;
    bool mitm_suspected = false;
    std::string verdict;
};

nlohmann::json indicator_to_json(const Indicator& indicator);
nlohmann::json sample_to_json(const ProbeSample& sample, std::size_t index,
                              std::optional<double> rtt_mean_ms);
nlohmann::json report_to_json(const Report& report);

// Columns: label, sample_index, started_at, tcp_connect_ms,
// hello_to_cert_ms, cert_time_ms, leaf_digest, outcome.
std::string report_to_csv(const Report& report);

}  // namespace hsprobe
