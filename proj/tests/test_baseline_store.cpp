#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hsprobe/baseline_store.hpp"

#include "support/properties.hpp"

using namespace hsprobe;

namespace {

BaselineRecord record_for(const std::string& label, double rtt_mean,
                          std::vector<FingerprintEntry> fingerprints,
                          const std::string& ts = "2026-08-11T00:00:00.000Z") {
    BaselineRecord record;
    record.label = label;
    record.recorded_at = ts;
    record.profile.target_label = label;
    record.profile.rtt_mean_ms = rtt_mean;
    record.profile.ok_sample_count = 5;
    record.fingerprints = std::move(fingerprints);
    return record;
}

}  // namespace

TEST_CASE("append then load ends with the new record") {
    const auto dir = testsupport::make_temp_dir("store");
    BaselineStore store(dir / "b.jsonl");
    store.append(record_for("t", 1.0, {{"t0", "A"}}));
    store.append(record_for("t", 2.0, {{"t1", "B"}}));

    const auto all = store.load_all();
    REQUIRE(all.size() == 2);
    CHECK(all.back().profile.rtt_mean_ms == 2.0);
}

TEST_CASE("latest picks the most recent record per label") {
    const auto dir = testsupport::make_temp_dir("store");
    BaselineStore store(dir / "b.jsonl");
    CHECK_FALSE(store.latest("t").has_value());

    store.append(record_for("t", 1.0, {}));
    store.append(record_for("other", 9.0, {}));
    store.append(record_for("t", 2.0, {}));

    const auto latest = store.latest("t");
    REQUIRE(latest.has_value());
    CHECK(latest->profile.rtt_mean_ms == 2.0);
    CHECK_FALSE(store.latest("unknown").has_value());
}

TEST_CASE("fingerprint_history concatenates across records in time order") {
    const auto dir = testsupport::make_temp_dir("store");
    BaselineStore store(dir / "b.jsonl");
    store.append(record_for("t", 1.0, {{"2026-08-01T00:00:00.000Z", "A"}}));
    store.append(record_for("t", 1.0,
                            {{"2026-08-02T00:00:00.000Z", "A"},
                             {"2026-08-03T00:00:00.000Z", "B"}}));

    const auto history = store.fingerprint_history("t");
    REQUIRE(history.size() == 3);
    CHECK(history[0].digest == "A");
    CHECK(history[1].digest == "A");
    CHECK(history[2].digest == "B");

    CHECK(store.fingerprint_history("unknown").empty());

    // A single record's list comes back unchanged.
    BaselineStore single(dir / "single.jsonl");
    single.append(record_for("s", 1.0, {{"t0", "X"}, {"t1", "Y"}}));
    const auto one = single.fingerprint_history("s");
    REQUIRE(one.size() == 2);
    CHECK(one[0].digest == "X");
    CHECK(one[1].digest == "Y");
}

TEST_CASE("append to an unwritable path reports io-failure") {
    const auto dir = testsupport::make_temp_dir("store");
    // A directory path can never be appended to, even running as root.
    BaselineStore store(dir);
    CHECK_THROWS_AS(store.append(record_for("t", 1.0, {})), StoreError);
}

TEST_CASE("unordered fingerprints are rejected at append") {
    const auto dir = testsupport::make_temp_dir("store");
    BaselineStore store(dir / "b.jsonl");
    CHECK_THROWS_AS(
        store.append(record_for("t", 1.0, {{"t9", "A"}, {"t1", "B"}})),
        std::invalid_argument);
}

TEST_CASE("empty store reads cleanly") {
    const auto dir = testsupport::make_temp_dir("store");
    BaselineStore store(dir / "missing.jsonl");
    CHECK(store.load_all().empty());
    CHECK_FALSE(store.latest("t").has_value());
    CHECK(store.fingerprint_history("t").empty());
}

TEST_CASE("property: store round-trip") {
    const auto result =
        testsupport::store_round_trip_property(testsupport::make_temp_dir("store"));
    CHECK_MESSAGE(result.ok, result.detail);
}

TEST_CASE("property: fuzz truncation loses at most the in-flight record") {
    const auto result =
        testsupport::store_truncation_property(testsupport::make_temp_dir("store"));
    CHECK_MESSAGE(result.ok, result.detail);
}
