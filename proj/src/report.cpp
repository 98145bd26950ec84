#include "hsprobe/report.hpp"

#include <cstdio>

#include "hsprobe/util.hpp"

namespace hsprobe {

namespace {

std::string fmt_ms(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::optional<double> cert_time_of(const ProbeSample& sample,
                                   std::optional<double> rtt_mean_ms) {
    if (!sample.hello_to_cert_ms || !rtt_mean_ms)
        return std::nullopt;
    return std::max(0.0, *sample.hello_to_cert_ms - *rtt_mean_ms);
}

}  // namespace

nlohmann::json indicator_to_json(const Indicator& indicator) {
    return {
        {"kind", std::string(to_string(indicator.kind))},
        {"fired", indicator.fired},
        {"evidence", indicator.evidence},
        {"thresholds", indicator.threshold_config},
    };
}

nlohmann::json sample_to_json(const ProbeSample& sample, std::size_t index,
                              std::optional<double> rtt_mean_ms) {
    nlohmann::json j{
        {"index", index},
        {"started_at", to_rfc3339(sample.started_at)},
        {"outcome", std::string(to_string(sample.outcome))},
    };
    j["tcp_connect_ms"] =
        sample.tcp_connect_ms ? nlohmann::json(*sample.tcp_connect_ms) : nullptr;
    j["hello_to_cert_ms"] =
        sample.hello_to_cert_ms ? nlohmann::json(*sample.hello_to_cert_ms) : nullptr;
    const auto ct = cert_time_of(sample, rtt_mean_ms);
    j["cert_time_ms"] = ct ? nlohmann::json(*ct) : nullptr;
    j["leaf_digest"] =
        sample.cert ? nlohmann::json(sample.cert->leaf_digest) : nullptr;
    j["chain_length"] =
        sample.cert ? nlohmann::json(sample.cert->chain_length) : nullptr;
    j["negotiated_version"] = sample.negotiated_version
                                  ? nlohmann::json(sample.negotiated_version->str())
                                  : nullptr;
    return j;
}

nlohmann::json report_to_json(const Report& report) {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& tr : report.targets) {
        nlohmann::json t{
            {"label", tr.target.label},
            {"host", tr.target.host},
            {"port", tr.target.port},
        };
        const auto sni = tr.target.effective_sni();
        t["sni"] = sni ? nlohmann::json(*sni) : nullptr;
        t["error"] = tr.error ? nlohmann::json(*tr.error) : nullptr;
        if (tr.rtt) {
            t["rtt"] = {
                {"mean_ms", tr.rtt->mean_ms},
                {"count", tr.rtt->count},
                {"failed_count", tr.rtt->failed_count},
                {"sample_durations_ms", tr.rtt->sample_durations},
            };
        } else {
            t["rtt"] = nullptr;
        }
        t["profile"] = tr.profile ? profile_to_json(*tr.profile) : nlohmann::json(nullptr);
        nlohmann::json samples = nlohmann::json::array();
        std::optional<double> rtt_mean;
        if (tr.rtt)
            rtt_mean = tr.rtt->mean_ms;
        for (std::size_t i = 0; i < tr.samples.size(); ++i)
            samples.push_back(sample_to_json(tr.samples[i], i, rtt_mean));
        t["samples"] = std::move(samples);
        nlohmann::json indicators = nlohmann::json::array();
        for (const auto& ind : tr.indicators)
            indicators.push_back(indicator_to_json(ind));
        t["indicators"] = std::move(indicators);
        targets.push_back(std::move(t));
    }

    nlohmann::json global = nlohmann::json::array();
    for (const auto& ind : report.global_indicators)
        global.push_back(indicator_to_json(ind));

    return {
        {"tool", std::string(kToolName)},
        {"version", std::string(kToolVersion)},
        {"generated_at", report.generated_at},
        {"targets", std::move(targets)},
        {"global_indicators", std::move(global)},
        {"mitm_suspected", report.mitm_suspected},
        {"verdict", report.verdict},
    };
}

std::string report_to_csv(const Report& report) {
    std::string out =
        "label,sample_index,started_at,tcp_connect_ms,hello_to_cert_ms,"
        "cert_time_ms,leaf_digest,outcome\n";
    for (const auto& tr : report.targets) {
        std::optional<double> rtt_mean;
        if (tr.rtt)
            rtt_mean = tr.rtt->mean_ms;
        for (std::size_t i = 0; i < tr.samples.size(); ++i) {
            const auto& s = tr.samples[i];
            out += tr.target.label;
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += to_rfc3339(s.started_at);
            out += ',';
            if (s.tcp_connect_ms)
                out += fmt_ms(*s.tcp_connect_ms);
            out += ',';
            if (s.hello_to_cert_ms)
                out += fmt_ms(*s.hello_to_cert_ms);
            out += ',';
            if (const auto ct = cert_time_of(s, rtt_mean))
                out += fmt_ms(*ct);
            out += ',';
            if (s.cert)
                out += s.cert->leaf_digest;
            out += ',';
            out += to_string(s.outcome);
            out += '\n';
        }
    }
    return out;
}

}  // namespace hsprobe
