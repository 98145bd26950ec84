#pragma once

// Turns probe samples into per-target timing profiles (RTT mean/variance,
// derived certificate time) and evaluates the detection indicators.
// Everything here is pure computation over its inputs.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsprobe/prober.hpp"

namespace hsprobe {

struct TimingProfile {
    std::string target_label;
    double rtt_mean_ms = 0.0;
    double rtt_variance = 0.0;       // population variance of rtt samples
    double cert_time_mean_ms = 0.0;  // mean over ok samples of max(0, hello_to_cert - rtt_mean)
    double cert_time_variance = 0.0;
    std::size_t ok_sample_count = 0;
    std::map<ProbeOutcome, std::size_t> failure_counts;

    std::size_t total_samples() const;
};

nlohmann::json profile_to_json(const TimingProfile& profile);
TimingProfile profile_from_json(const nlohmann::json& j, const std::string& label);

enum class IndicatorKind {
    timing_shift,
    rtt_variance_collapse,
    fingerprint_change,
    sni_mismatch,
    closed_port_accept,
    baseline_shift,
};

std::string_view to_string(IndicatorKind k);

struct Indicator {
    IndicatorKind kind;
    bool fired = false;
    nlohmann::json evidence;          // numbers compared; non-empty when fired
    nlohmann::json threshold_config;  // snapshot of the thresholds used
};

struct DetectorConfig {
    double shift_ratio = 10.0;            // cert time at least this multiple of RTT
    std::size_t min_ok_samples = 5;
    double variance_collapse_cv = 0.25;   // coefficient of variation across targets
    double baseline_rtt_drop_factor = 2.0;
    double baseline_cert_rise_factor = 2.0;
};

// Absolute rise floor used when the baseline certificate time is zero.
inline constexpr double kZeroBaselineCertFloorMs = 10.0;

class AnalysisError : public std::runtime_error {
public:
    enum class Kind { insufficient_targets, insufficient_history, label_mismatch, empty_inputs };

    AnalysisError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind(kind) {}

    Kind kind;
};

struct FingerprintEntry {
    std::string ts;      // RFC 3339
    std::string digest;  // lowercase hex sha-256
};

// Means and population variances over ok samples only; the certificate time
// of each sample is floored at zero after the RTT subtraction.
TimingProfile compute_profile(std::span<const ProbeSample> samples,
                              const RttEstimate& rtt, const std::string& label);

Indicator detect_timing_shift(const TimingProfile& profile,
                              const DetectorConfig& cfg);

// Coefficient of variation of rtt_mean_ms across >= 3 diverse targets.
Indicator detect_variance_collapse(std::span<const TimingProfile> profiles,
                                   const DetectorConfig& cfg);

Indicator detect_fingerprint_change(std::span<const FingerprintEntry> history);

Indicator detect_sni_mismatch(const SniPairResult& pair);

Indicator detect_baseline_shift(const TimingProfile& current,
                                const TimingProfile& baseline,
                                const DetectorConfig& cfg);

struct ClosedPortObservation {
    std::string host;
    std::uint16_t port = 0;
    PortProbeResult result = PortProbeResult::timed_out;
};

Indicator detect_closed_port_accept(
    std::span<const ClosedPortObservation> observations);

struct DetectionInputs {
    std::vector<TimingProfile> profiles;
    std::map<std::string, TimingProfile> baselines;  // label -> stored baseline
    std::map<std::string, std::vector<FingerprintEntry>> fingerprints;
    std::vector<SniPairResult> sni_pairs;
    std::vector<ClosedPortObservation> closed_ports;
};

struct DetectionReport {
    std::vector<Indicator> indicators;
    bool mitm_suspected = false;
    std::string verdict;  // "mitm_suspected" or "no indicators fired"
};

// Runs every indicator whose inputs are available. The verdict is a
// disjunction; a quiet report is "no indicators fired", never "no MITM".
DetectionReport evaluate_all(const DetectionInputs& inputs,
                             const DetectorConfig& cfg);

}  // namespace hsprobe
