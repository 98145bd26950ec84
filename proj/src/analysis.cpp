#include "hsprobe/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace hsprobe {

namespace {

double mean_of(std::span<const double> xs) {
    if (xs.empty())
        return 0.0;
    double sum = 0;
    for (double x : xs)
        sum += x;
    return sum / static_cast<double>(xs.size());
}

double pop_variance(std::span<const double> xs, double mean) {
    if (xs.empty())
        return 0.0;
    double acc = 0;
    for (double x : xs)
        acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

nlohmann::json thresholds_json(const DetectorConfig& cfg,
                               std::initializer_list<std::string_view> keys) {
    nlohmann::json t = nlohmann::json::object();
    for (auto k : keys) {
        if (k == "shift_ratio") t["shift_ratio"] = cfg.shift_ratio;
        else if (k == "min_ok_samples") t["min_ok_samples"] = cfg.min_ok_samples;
        else if (k == "variance_collapse_cv") t["variance_collapse_cv"] = cfg.variance_collapse_cv;
        else if (k == "baseline_rtt_drop_factor") t["baseline_rtt_drop_factor"] = cfg.baseline_rtt_drop_factor;
        else if (k == "baseline_cert_rise_factor") t["baseline_cert_rise_factor"] = cfg.baseline_cert_rise_factor;
    }
    return t;
}

}  // namespace

std::size_t TimingProfile::total_samples() const {
    std::size_t n = ok_sample_count;
    for (const auto& [outcome, count] : failure_counts)
        n += count;
    return n;
}

nlohmann::json profile_to_json(const TimingProfile& profile) {
    nlohmann::json failures = nlohmann::json::object();
    for (const auto& [outcome, count] : profile.failure_counts)
        failures[std::string(to_string(outcome))] = count;
    return {
        {"rtt_mean_ms", profile.rtt_mean_ms},
        {"rtt_variance", profile.rtt_variance},
        {"cert_time_mean_ms", profile.cert_time_mean_ms},
        {"cert_time_variance", profile.cert_time_variance},
        {"ok_sample_count", profile.ok_sample_count},
        {"failures", failures},
    };
}

TimingProfile profile_from_json(const nlohmann::json& j, const std::string& label) {
    TimingProfile p;
    p.target_label = label;
    p.rtt_mean_ms = j.at("rtt_mean_ms").get<double>();
    p.rtt_variance = j.at("rtt_variance").get<double>();
    p.cert_time_mean_ms = j.at("cert_time_mean_ms").get<double>();
    p.cert_time_variance = j.at("cert_time_variance").get<double>();
    p.ok_sample_count = j.at("ok_sample_count").get<std::size_t>();
    for (const auto& [key, value] : j.at("failures").items()) {
        auto outcome = outcome_from_string(key);
        if (!outcome)
            throw std::invalid_argument("unknown outcome in stored profile: " + key);
        p.failure_counts[*outcome] = value.get<std::size_t>();
    }
    return p;
}

std::string_view to_string(IndicatorKind k) {
    switch (k) {
    case IndicatorKind::timing_shift: return "timing_shift";
    case IndicatorKind::rtt_variance_collapse: return "rtt_variance_collapse";
    case IndicatorKind::fingerprint_change: return "fingerprint_change";
    case IndicatorKind::sni_mismatch: return "sni_mismatch";
    case IndicatorKind::closed_port_accept: return "closed_port_accept";
    case IndicatorKind::baseline_shift: return "baseline_shift";
    }
    return "unknown";
}

TimingProfile compute_profile(std::span<const ProbeSample> samples,
                              const RttEstimate& rtt, const std::string& label) {
    if (samples.empty())
        throw std::invalid_argument("compute_profile requires at least one sample");

    TimingProfile profile;
    profile.target_label = label;
    profile.rtt_mean_ms = rtt.mean_ms;
    profile.rtt_variance = pop_variance(rtt.sample_durations, rtt.mean_ms);

    std::vector<double> cert_times;
    for (const auto& s : samples) {
        if (s.outcome == ProbeOutcome::ok) {
            ++profile.ok_sample_count;
            cert_times.push_back(std::max(0.0, *s.hello_to_cert_ms - rtt.mean_ms));
        } else {
            ++profile.failure_counts[s.outcome];
        }
    }
    profile.cert_time_mean_ms = mean_of(cert_times);
    profile.cert_time_variance = pop_variance(cert_times, profile.cert_time_mean_ms);
    return profile;
}

Indicator detect_timing_shift(const TimingProfile& profile,
                              const DetectorConfig& cfg) {
    Indicator ind;
    ind.kind = IndicatorKind::timing_shift;
    ind.threshold_config = thresholds_json(cfg, {"shift_ratio", "min_ok_samples"});

    const bool enough = profile.ok_sample_count >= cfg.min_ok_samples;
    const bool rtt_positive = profile.rtt_mean_ms > 0.0;
    const double ratio =
        rtt_positive ? profile.cert_time_mean_ms / profile.rtt_mean_ms : 0.0;
    ind.fired = enough && rtt_positive &&
                profile.cert_time_mean_ms >= cfg.shift_ratio * profile.rtt_mean_ms;
    ind.evidence = {
        {"target", profile.target_label},
        {"rtt_mean_ms", profile.rtt_mean_ms},
        {"cert_time_mean_ms", profile.cert_time_mean_ms},
        {"ratio", ratio},
        {"ok_sample_count", profile.ok_sample_count},
    };
    return ind;
}

Indicator detect_variance_collapse(std::span<const TimingProfile> profiles,
                                   const DetectorConfig& cfg) {
    if (profiles.size() < 3)
        throw AnalysisError(AnalysisError::Kind::insufficient_targets,
                            "variance collapse needs >= 3 targets");

    std::vector<double> means;
    nlohmann::json per_target = nlohmann::json::array();
    for (const auto& p : profiles) {
        means.push_back(p.rtt_mean_ms);
        per_target.push_back({{"target", p.target_label},
                              {"rtt_mean_ms", p.rtt_mean_ms}});
    }
    const double mean = mean_of(means);
    const double stddev = std::sqrt(pop_variance(means, mean));
    const double cv = mean > 0.0 ? stddev / mean : 0.0;

    Indicator ind;
    ind.kind = IndicatorKind::rtt_variance_collapse;
    ind.threshold_config = thresholds_json(cfg, {"variance_collapse_cv"});
    ind.fired = mean > 0.0 && cv < cfg.variance_collapse_cv;
    ind.evidence = {
        {"rtt_means", per_target},
        {"mean_of_means_ms", mean},
        {"stddev_ms", stddev},
        {"cv", cv},
    };
    return ind;
}

Indicator detect_fingerprint_change(std::span<const FingerprintEntry> history) {
    if (history.size() < 2)
        throw AnalysisError(AnalysisError::Kind::insufficient_history,
                            "fingerprint change needs >= 2 observations");

    Indicator ind;
    ind.kind = IndicatorKind::fingerprint_change;
    ind.threshold_config = nlohmann::json::object();
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (history[i].digest != history[i - 1].digest) {
            ind.fired = true;
            ind.evidence = {
                {"index", i},
                {"previous", {{"ts", history[i - 1].ts}, {"digest", history[i - 1].digest}}},
                {"current", {{"ts", history[i].ts}, {"digest", history[i].digest}}},
            };
            return ind;
        }
    }
    ind.evidence = {
        {"observations", history.size()},
        {"digest", history.front().digest},
    };
    return ind;
}

Indicator detect_sni_mismatch(const SniPairResult& pair) {
    Indicator ind;
    ind.kind = IndicatorKind::sni_mismatch;
    ind.threshold_config = nlohmann::json::object();
    ind.evidence = {
        {"sni_a", pair.sni_a},
        {"sni_b", pair.sni_b},
        {"outcome_a", std::string(to_string(pair.a.outcome))},
        {"outcome_b", std::string(to_string(pair.b.outcome))},
    };
    if (pair.a.outcome == ProbeOutcome::ok && pair.b.outcome == ProbeOutcome::ok) {
        const auto& da = pair.a.cert->leaf_digest;
        const auto& db = pair.b.cert->leaf_digest;
        ind.evidence["digest_a"] = da;
        ind.evidence["digest_b"] = db;
        ind.fired = da == db;
        if (ind.fired)
            ind.evidence["shared_digest"] = da;
    }
    return ind;
}

Indicator detect_baseline_shift(const TimingProfile& current,
                                const TimingProfile& baseline,
                                const DetectorConfig& cfg) {
    if (current.target_label != baseline.target_label)
        throw AnalysisError(AnalysisError::Kind::label_mismatch,
                            "baseline shift compares one target: '" +
                                current.target_label + "' vs '" +
                                baseline.target_label + "'");

    const bool rtt_dropped =
        baseline.rtt_mean_ms >= cfg.baseline_rtt_drop_factor * current.rtt_mean_ms &&
        baseline.rtt_mean_ms > 0.0;
    const bool cert_rose =
        baseline.cert_time_mean_ms == 0.0
            ? current.cert_time_mean_ms >= kZeroBaselineCertFloorMs
            : current.cert_time_mean_ms >=
                  cfg.baseline_cert_rise_factor * baseline.cert_time_mean_ms;

    Indicator ind;
    ind.kind = IndicatorKind::baseline_shift;
    ind.threshold_config = thresholds_json(
        cfg, {"baseline_rtt_drop_factor", "baseline_cert_rise_factor"});
    ind.threshold_config["zero_baseline_cert_floor_ms"] = kZeroBaselineCertFloorMs;
    ind.fired = rtt_dropped && cert_rose;
    ind.evidence = {
        {"target", current.target_label},
        {"baseline_rtt_mean_ms", baseline.rtt_mean_ms},
        {"current_rtt_mean_ms", current.rtt_mean_ms},
        {"baseline_cert_time_mean_ms", baseline.cert_time_mean_ms},
        {"current_cert_time_mean_ms", current.cert_time_mean_ms},
        {"rtt_dropped", rtt_dropped},
        {"cert_rose", cert_rose},
    };
    return ind;
}

Indicator detect_closed_port_accept(
    std::span<const ClosedPortObservation> observations) {
    Indicator ind;
    ind.kind = IndicatorKind::closed_port_accept;
    ind.threshold_config = nlohmann::json::object();
    nlohmann::json ports = nlohmann::json::array();
    std::size_t accepted = 0;
    for (const auto& obs : observations) {
        if (obs.result == PortProbeResult::accepted)
            ++accepted;
        ports.push_back({{"host", obs.host},
                         {"port", obs.port},
                         {"result", std::string(to_string(obs.result))}});
    }
    ind.fired = accepted > 0;
    ind.evidence = {{"ports", ports}, {"accepted_count", accepted}};
    return ind;
}

DetectionReport evaluate_all(const DetectionInputs& inputs,
                             const DetectorConfig& cfg) {
    DetectionReport report;
    bool ran_any = false;

    for (const auto& profile : inputs.profiles) {
        report.indicators.push_back(detect_timing_shift(profile, cfg));
        ran_any = true;
    }
    if (inputs.profiles.size() >= 3) {
        report.indicators.push_back(detect_variance_collapse(inputs.profiles, cfg));
        ran_any = true;
    }
    for (const auto& profile : inputs.profiles) {
        auto it = inputs.baselines.find(profile.target_label);
        if (it == inputs.baselines.end())
            continue;
        report.indicators.push_back(detect_baseline_shift(profile, it->second, cfg));
        ran_any = true;
    }
    for (const auto& [label, history] : inputs.fingerprints) {
        if (history.size() < 2)
            continue;
        auto ind = detect_fingerprint_change(history);
        ind.evidence["target"] = label;
        report.indicators.push_back(std::move(ind));
        ran_any = true;
    }
    for (const auto& pair : inputs.sni_pairs) {
        report.indicators.push_back(detect_sni_mismatch(pair));
        ran_any = true;
    }
    if (!inputs.closed_ports.empty()) {
        report.indicators.push_back(detect_closed_port_accept(inputs.closed_ports));
        ran_any = true;
    }

    if (!ran_any)
        throw AnalysisError(AnalysisError::Kind::empty_inputs,
                            "no indicator had usable inputs");

    report.mitm_suspected =
        std::any_of(report.indicators.begin(), report.indicators.end(),
                    [](const Indicator& i) { return i.fired; });
    report.verdict = report.mitm_suspected ? "mitm_suspected" : "no indicators fired";
    return report;
}

}  // namespace hsprobe
