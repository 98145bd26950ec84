#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hsprobe/analysis.hpp"

#include "support/properties.hpp"

using namespace hsprobe;

namespace {

ProbeSample ok_sample(double hello_to_cert_ms, const std::string& digest = "d") {
    ProbeSample s;
    s.outcome = ProbeOutcome::ok;
    s.tcp_connect_ms = 1.0;
    s.hello_to_cert_ms = hello_to_cert_ms;
    s.cert = tls::CertificateInfo{{}, 1, digest, {}};
    return s;
}

ProbeSample failed_sample(ProbeOutcome outcome) {
    ProbeSample s;
    s.outcome = outcome;
    return s;
}

RttEstimate rtt_of(std::vector<double> durations) {
    RttEstimate rtt;
    rtt.sample_durations = std::move(durations);
    rtt.count = rtt.sample_durations.size();
    double sum = 0;
    for (double d : rtt.sample_durations)
        sum += d;
    rtt.mean_ms = rtt.count ? sum / static_cast<double>(rtt.count) : 0.0;
    return rtt;
}

TimingProfile profile_of(const std::string& label, double rtt_mean,
                         double cert_mean, std::size_t ok_count = 5) {
    TimingProfile p;
    p.target_label = label;
    p.rtt_mean_ms = rtt_mean;
    p.cert_time_mean_ms = cert_mean;
    p.ok_sample_count = ok_count;
    return p;
}

}  // namespace

TEST_CASE("compute_profile subtracts the session RTT mean") {
    // hello_to_cert {110,112,114} against rtt mean 100 -> cert times
    // {10,12,14}: mean 12, population variance 8/3.
    const std::vector<ProbeSample> samples{ok_sample(110), ok_sample(112),
                                           ok_sample(114)};
    const auto profile = compute_profile(samples, rtt_of({100, 100, 100}), "t");
    CHECK(profile.cert_time_mean_ms == doctest::Approx(12.0));
    CHECK(profile.cert_time_variance == doctest::Approx(8.0 / 3.0));
    CHECK(profile.ok_sample_count == 3);
    CHECK(profile.rtt_mean_ms == doctest::Approx(100.0));
    CHECK(profile.rtt_variance == doctest::Approx(0.0));
}

TEST_CASE("compute_profile floors the subtraction at zero") {
    const std::vector<ProbeSample> samples{ok_sample(100)};
    const auto profile = compute_profile(samples, rtt_of({100}), "t");
    CHECK(profile.cert_time_mean_ms == 0.0);
}

TEST_CASE("compute_profile with no ok samples is flagged, not an error") {
    const std::vector<ProbeSample> samples{
        failed_sample(ProbeOutcome::read_timeout),
        failed_sample(ProbeOutcome::connect_refused),
        failed_sample(ProbeOutcome::read_timeout)};
    const auto profile = compute_profile(samples, rtt_of({5}), "t");
    CHECK(profile.ok_sample_count == 0);
    CHECK(profile.cert_time_mean_ms == 0.0);
    CHECK(profile.failure_counts.at(ProbeOutcome::read_timeout) == 2);
    CHECK(profile.failure_counts.at(ProbeOutcome::connect_refused) == 1);
    CHECK(profile.total_samples() == 3);
}

TEST_CASE("compute_profile requires at least one sample") {
    CHECK_THROWS_AS(compute_profile({}, rtt_of({1}), "t"), std::invalid_argument);
}

TEST_CASE("detect_timing_shift fires on an order-of-magnitude ratio") {
    DetectorConfig cfg;
    const auto fired = detect_timing_shift(profile_of("t", 3.0, 180.0), cfg);
    CHECK(fired.fired);
    CHECK(fired.evidence.at("ratio").get<double>() == doctest::Approx(60.0));

    const auto quiet = detect_timing_shift(profile_of("t", 80.0, 40.0), cfg);
    CHECK_FALSE(quiet.fired);

    // Gating: too few ok samples means no verdict regardless of ratio.
    const auto gated = detect_timing_shift(profile_of("t", 3.0, 180.0, 2), cfg);
    CHECK_FALSE(gated.fired);

    // Degenerate zero RTT never fires.
    const auto zero = detect_timing_shift(profile_of("t", 0.0, 180.0), cfg);
    CHECK_FALSE(zero.fired);
}

TEST_CASE("detect_variance_collapse evaluates the cross-target CV") {
    DetectorConfig cfg;
    const std::vector<TimingProfile> collapsed{
        profile_of("a", 3.0, 1), profile_of("b", 3.1, 1), profile_of("c", 2.9, 1)};
    const auto fired = detect_variance_collapse(collapsed, cfg);
    CHECK(fired.fired);
    CHECK(fired.evidence.at("cv").get<double>() == doctest::Approx(0.0272).epsilon(0.05));

    const std::vector<TimingProfile> diverse{
        profile_of("a", 20, 1), profile_of("b", 90, 1), profile_of("c", 250, 1)};
    const auto quiet = detect_variance_collapse(diverse, cfg);
    CHECK_FALSE(quiet.fired);
    CHECK(quiet.evidence.at("cv").get<double>() == doctest::Approx(0.802).epsilon(0.01));

    const std::vector<TimingProfile> two{profile_of("a", 1, 1), profile_of("b", 1, 1)};
    CHECK_THROWS_AS(detect_variance_collapse(two, cfg), AnalysisError);
}

TEST_CASE("detect_fingerprint_change fires on the first differing pair") {
    const std::vector<FingerprintEntry> changed{
        {"t0", "A"}, {"t1", "A"}, {"t2", "B"}};
    const auto fired = detect_fingerprint_change(changed);
    CHECK(fired.fired);
    CHECK(fired.evidence.at("index").get<std::size_t>() == 2);
    CHECK(fired.evidence.at("previous").at("digest") == "A");
    CHECK(fired.evidence.at("current").at("digest") == "B");

    const std::vector<FingerprintEntry> stable{{"t0", "A"}, {"t1", "A"}, {"t2", "A"}};
    CHECK_FALSE(detect_fingerprint_change(stable).fired);

    const std::vector<FingerprintEntry> single{{"t0", "A"}};
    CHECK_THROWS_AS(detect_fingerprint_change(single), AnalysisError);
}

TEST_CASE("detect_sni_mismatch fires only on identical certs for distinct names") {
    SniPairResult pair{"a.example", "b.example", ok_sample(1, "X"), ok_sample(1, "X")};
    const auto fired = detect_sni_mismatch(pair);
    CHECK(fired.fired);
    CHECK(fired.evidence.at("shared_digest") == "X");

    SniPairResult distinct{"a.example", "b.example", ok_sample(1, "X"), ok_sample(1, "Y")};
    CHECK_FALSE(detect_sni_mismatch(distinct).fired);

    SniPairResult errored{"a.example", "b.example", ok_sample(1, "X"),
                          failed_sample(ProbeOutcome::protocol_error)};
    CHECK_FALSE(detect_sni_mismatch(errored).fired);
}

TEST_CASE("detect_baseline_shift needs both the RTT drop and the cert rise") {
    DetectorConfig cfg;
    const auto baseline = profile_of("t", 120.0, 15.0);
    const auto attack = profile_of("t", 2.0, 160.0);
    CHECK(detect_baseline_shift(attack, baseline, cfg).fired);

    // Identical profiles cannot fire with factors > 1.
    CHECK_FALSE(detect_baseline_shift(baseline, baseline, cfg).fired);

    // Label mismatch is a caller error.
    CHECK_THROWS_AS(
        detect_baseline_shift(profile_of("x", 1, 1), profile_of("y", 1, 1), cfg),
        AnalysisError);
}

TEST_CASE("detect_baseline_shift uses an absolute floor on a zero baseline") {
    DetectorConfig cfg;
    const auto baseline = profile_of("t", 100.0, 0.0);
    CHECK(detect_baseline_shift(profile_of("t", 1.0, 12.0), baseline, cfg).fired);
    CHECK_FALSE(detect_baseline_shift(profile_of("t", 1.0, 8.0), baseline, cfg).fired);
}

TEST_CASE("closed port observations aggregate into one indicator") {
    const std::vector<ClosedPortObservation> accepted{
        {"h", 443, PortProbeResult::accepted},
        {"h", 8443, PortProbeResult::refused}};
    const auto fired = detect_closed_port_accept(accepted);
    CHECK(fired.fired);
    CHECK(fired.evidence.at("accepted_count").get<std::size_t>() == 1);

    const std::vector<ClosedPortObservation> clean{
        {"h", 443, PortProbeResult::refused},
        {"h", 8443, PortProbeResult::timed_out}};
    CHECK_FALSE(detect_closed_port_accept(clean).fired);
}

TEST_CASE("evaluate_all runs what it can and states a disjunction verdict") {
    DetectorConfig cfg;

    DetectionInputs inputs;
    inputs.fingerprints["t"] = {{"t0", "A"}, {"t1", "B"}};
    auto report = evaluate_all(inputs, cfg);
    REQUIRE(report.indicators.size() == 1);
    CHECK(report.indicators[0].kind == IndicatorKind::fingerprint_change);
    CHECK(report.mitm_suspected);
    CHECK(report.verdict == "mitm_suspected");

    DetectionInputs quiet;
    quiet.fingerprints["t"] = {{"t0", "A"}, {"t1", "A"}};
    report = evaluate_all(quiet, cfg);
    CHECK_FALSE(report.mitm_suspected);
    // A quiet report is explicitly not a clean bill of health.
    CHECK(report.verdict == "no indicators fired");

    DetectionInputs empty;
    CHECK_THROWS_AS(evaluate_all(empty, cfg), AnalysisError);

    // Short fingerprint histories are skipped rather than fatal.
    DetectionInputs short_history;
    short_history.fingerprints["t"] = {{"t0", "A"}};
    CHECK_THROWS_AS(evaluate_all(short_history, cfg), AnalysisError);
}

TEST_CASE("evaluate_all can fire every indicator kind at once") {
    DetectorConfig cfg;
    DetectionInputs inputs;
    inputs.profiles = {profile_of("a", 3.0, 180.0), profile_of("b", 3.1, 170.0),
                       profile_of("c", 2.9, 160.0)};
    inputs.baselines.emplace("a", profile_of("a", 120.0, 15.0));
    inputs.fingerprints["a"] = {{"t0", "A"}, {"t1", "B"}};
    inputs.sni_pairs = {{"a.example", "b.example", ok_sample(1, "X"), ok_sample(1, "X")}};
    inputs.closed_ports = {{"h", 4443, PortProbeResult::accepted}};

    const auto report = evaluate_all(inputs, cfg);
    CHECK(report.mitm_suspected);
    std::set<IndicatorKind> fired;
    for (const auto& ind : report.indicators)
        if (ind.fired)
            fired.insert(ind.kind);
    CHECK(fired == std::set<IndicatorKind>{
                       IndicatorKind::timing_shift,
                       IndicatorKind::rtt_variance_collapse,
                       IndicatorKind::fingerprint_change,
                       IndicatorKind::sni_mismatch,
                       IndicatorKind::closed_port_accept,
                       IndicatorKind::baseline_shift,
                   });
}

TEST_CASE("property: statistics oracle at 1e-9") {
    const auto result = testsupport::statistics_oracle_property(500, 0x57a7, 1e-9);
    CHECK_MESSAGE(result.ok, result.detail);
}

TEST_CASE("property: shift_ratio monotonicity") {
    const auto result = testsupport::shift_monotonicity_property(2000, 0x3010);
    CHECK_MESSAGE(result.ok, result.detail);
}

TEST_CASE("property: detector determinism") {
    const auto result = testsupport::detector_determinism_property(0xdede);
    CHECK_MESSAGE(result.ok, result.detail);
}
