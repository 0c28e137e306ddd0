#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "taps/relays.hpp"

using namespace taps;
using namespace taps::test;

TEST_SUITE_BEGIN("relays");

namespace {

Consensus snapshot(std::int64_t ts_hours, std::vector<Relay> relays) {
    Consensus c;
    c.timestamp_hours = ts_hours;
    c.relays = std::move(relays);
    return c;
}

}  // namespace

TEST_CASE("absent relay has zero uptime") {
    FamilyUptimeTracker tracker;
    tracker.update(snapshot(100, {}));
    tracker.update(snapshot(101, {}));
    CHECK(tracker.relay_uptime("R1") == 0.0);
}

TEST_CASE("hourly presence approaches the closed-form fixed point") {
    FamilyUptimeTracker tracker;
    Relay r = make_relay("R1", 0, kRFV, 10);
    double prev = 0.0;
    std::vector<std::pair<double, bool>> trace;
    for (int h = 0; h < 24 * 200; ++h) {
        tracker.update(snapshot(1000 + h, {r}));
        double u = tracker.relay_uptime("R1");
        CHECK(u > prev);  // strictly increasing while present
        prev = u;
        trace.emplace_back(1.0 / 24.0, true);
    }
    // fixed point of u <- l u + (1-l) H with H = 1/24 days is H itself
    double fixed_point = 1.0 / 24.0;
    CHECK(prev < fixed_point);
    CHECK(prev == doctest::Approx(fixed_point).epsilon(1e-3));
    CHECK(prev == doctest::Approx(oracle_ewma(trace)).epsilon(1e-12));
}

TEST_CASE("thirty days of absence halves uptime exactly") {
    FamilyUptimeTracker tracker;
    Relay r = make_relay("R1", 0, kRFV, 10);
    tracker.update(snapshot(5000, {r}));
    double after_presence = tracker.relay_uptime("R1");
    CHECK(after_presence > 0.0);
    tracker.update(snapshot(5000 + 30 * 24, {}));
    double after_absence = tracker.relay_uptime("R1");
    CHECK(std::fabs(after_absence - after_presence / 2.0) <=
          1e-12 * std::fabs(after_presence / 2.0));
}

TEST_CASE("presence requires running fast and valid") {
    FamilyUptimeTracker tracker;
    Relay degraded = make_relay("R1", 0, kFlagRunning | kFlagValid, 10);
    tracker.update(snapshot(100, {degraded}));
    CHECK(tracker.relay_uptime("R1") == 0.0);
}

TEST_CASE("out of order consensus rejected") {
    FamilyUptimeTracker tracker;
    tracker.update(snapshot(100, {}));
    CHECK_THROWS_AS(tracker.update(snapshot(100, {})), OrderingError);
    CHECK_THROWS_AS(tracker.update(snapshot(99, {})), OrderingError);
}

TEST_CASE("uptime monotone in presence") {
    // R2 present in strictly more consensuses than R1
    FamilyUptimeTracker tracker;
    Relay r1 = make_relay("R1", 0, kRFV, 1);
    Relay r2 = make_relay("R2", 0, kRFV, 1);
    Rng rng(99);
    for (int h = 0; h < 500; ++h) {
        std::vector<Relay> relays = {r2};
        if (rng.bernoulli(0.5)) relays.push_back(r1);
        tracker.update(snapshot(2000 + h, relays));
    }
    CHECK(tracker.relay_uptime("R2") >= tracker.relay_uptime("R1"));
}

TEST_CASE("family uptime is the sum of member uptimes") {
    FamilyUptimeTracker tracker;
    Relay a = make_relay("A", 0, kRFV, 1, 7);
    Relay b = make_relay("B", 0, kRFV, 1, 7);
    for (int h = 0; h < 100; ++h) {
        std::vector<Relay> relays = {a};
        if (h >= 50) relays.push_back(b);
        tracker.update(snapshot(3000 + h, relays));
    }
    std::vector<Consensus> seq = {snapshot(3099, {a, b})};
    RelayPopulation pop = RelayPopulation::build(seq, tracker);
    CHECK(pop.family_uptime.at(7) ==
          doctest::Approx(tracker.relay_uptime("A") + tracker.relay_uptime("B"))
              .epsilon(1e-12));
    CHECK(pop.family_size.at(7) == 2);
}

TEST_CASE("family compromise probability endpoints") {
    CHECK(family_compromise_probability(0.0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(std::fabs(family_compromise_probability(1e12) - 0.02) <= 1e-12);
    CHECK(family_compromise_probability(10.0) < family_compromise_probability(1.0));
}

TEST_CASE("positional weight follows flags") {
    Relay exit_only = make_relay("E", 0, kExitFlags, 100);
    CHECK(positional_weight(exit_only, Position::guard) == 0.0);
    CHECK(positional_weight(exit_only, Position::exit) == 100.0);
    CHECK(positional_weight(exit_only, Position::middle) == 100.0);

    Relay guard = make_relay("G", 0, kGuardFlags, 100);
    CHECK(positional_weight(guard, Position::guard) == 100.0);
    CHECK(positional_weight(guard, Position::exit) == 0.0);

    Relay dual = make_relay("D", 0, kGuardFlags | kFlagExit, 50);
    CHECK(positional_weight(dual, Position::guard) == 50.0);
    CHECK(positional_weight(dual, Position::exit) == 50.0);
}

TEST_CASE("exit policy first match decides, default accept") {
    Relay reject_all = make_relay("R", 0, kExitFlags, 1);
    reject_all.exit_policy = {{false, IpPrefix{}, 1, 65535}};
    CHECK(!exit_policy_allows(reject_all, parse_ipv4("1.2.3.4"), 80));
    CHECK(!exit_policy_allows(reject_all, parse_ipv4("9.9.9.9"), 443));

    Relay web = make_relay("W", 0, kExitFlags, 1);
    web.exit_policy = {{true, IpPrefix{}, 443, 443}, {false, IpPrefix{}, 1, 65535}};
    CHECK(exit_policy_allows(web, parse_ipv4("1.2.3.4"), 443));
    CHECK(!exit_policy_allows(web, parse_ipv4("1.2.3.4"), 80));

    Relay open = make_relay("O", 0, kExitFlags, 1);
    CHECK(exit_policy_allows(open, parse_ipv4("1.2.3.4"), 1234));

    Relay prefixed = make_relay("P", 0, kExitFlags, 1);
    prefixed.exit_policy = {{false, parse_prefix("10.0.0.0/8"), 1, 65535}};
    CHECK(!exit_policy_allows(prefixed, parse_ipv4("10.1.1.1"), 80));
    CHECK(exit_policy_allows(prefixed, parse_ipv4("11.1.1.1"), 80));
}

TEST_CASE("consensus jsonl round trip") {
    SyntheticMapSpec mspec;
    mspec.n_locations = 20;
    mspec.n_entities = 10;
    NetworkMap map = generate_synthetic_map(mspec, 1);
    SyntheticConsensusSpec spec;
    spec.n_relays = 15;
    spec.n_consensuses = 5;
    std::vector<Consensus> seq = generate_synthetic_consensuses(spec, map, 2);
    std::string text = consensuses_to_jsonl(seq);
    std::vector<Consensus> back = consensuses_from_jsonl(text);
    CHECK(consensuses_to_jsonl(back) == text);
    REQUIRE(back.size() == seq.size());
    CHECK(back[0].relays.size() == seq[0].relays.size());
}

TEST_CASE("synthetic consensuses churn and stay deterministic") {
    SyntheticMapSpec mspec;
    mspec.n_locations = 30;
    mspec.n_entities = 12;
    NetworkMap map = generate_synthetic_map(mspec, 1);
    SyntheticConsensusSpec spec;
    spec.n_relays = 40;
    spec.n_consensuses = 72;
    spec.churn_per_hour = 0.02;
    std::vector<Consensus> a = generate_synthetic_consensuses(spec, map, 5);
    std::vector<Consensus> b = generate_synthetic_consensuses(spec, map, 5);
    CHECK(consensuses_to_jsonl(a) == consensuses_to_jsonl(b));
    bool changed = false;
    for (std::size_t i = 1; i < a.size(); ++i)
        changed = changed || a[i].relays.size() != a[0].relays.size();
    CHECK(changed);
}

TEST_SUITE_END();
