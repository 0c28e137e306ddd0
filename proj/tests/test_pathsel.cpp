#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "taps/pathsel.hpp"

using namespace taps;
using namespace taps::test;

TEST_SUITE_BEGIN("pathsel");

namespace {

std::set<std::uint32_t> as_set(const std::vector<std::uint32_t>& v) {
    return std::set<std::uint32_t>(v.begin(), v.end());
}

std::vector<std::uint32_t> iota_rank(std::size_t n) {
    std::vector<std::uint32_t> r(n);
    for (std::uint32_t i = 0; i < n; ++i) r[i] = i;
    return r;
}

}  // namespace

TEST_CASE("all relays safe when every score is one") {
    AlphaSlice a{0.95, 2.0, 0.5, 5.0, 0.2};
    std::vector<double> scores = {1.0, 1.0, 1.0};
    std::vector<double> weights = {0.5, 0.3, 0.2};
    auto out = secure_relays_trustall(a, scores, weights, iota_rank(3));
    CHECK(out.size() == 3);
}

TEST_CASE("worked example from the algorithm pseudocode") {
    // s* = 0.9. r1 and r2 both pass the safe tests (0.88 >= 0.855 and
    // 0.12 <= 0.2); r3 fails safe, passes acceptable bounds, but the safe
    // weight 0.8 already exceeds alpha_w = 0.2.
    AlphaSlice a{0.95, 2.0, 0.5, 5.0, 0.2};
    std::vector<double> scores = {0.9, 0.88, 0.5};
    std::vector<double> weights = {0.5, 0.3, 0.2};
    auto out = secure_relays_trustall(a, scores, weights, iota_rank(3));
    auto oracle = oracle_trustall(0.95, 2.0, 0.5, 5.0, 0.2, scores, weights, iota_rank(3));
    CHECK(as_set(out) == as_set(oracle));
    CHECK(as_set(out) == std::set<std::uint32_t>{0, 1});
}

TEST_CASE("acceptable relays extend until the weight fraction") {
    AlphaSlice a{0.95, 2.0, 0.5, 5.0, 0.6};
    std::vector<double> scores = {0.9, 0.88, 0.52, 0.46, 0.2};
    std::vector<double> weights = {0.1, 0.1, 0.3, 0.3, 0.2};
    auto out = secure_relays_trustall(a, scores, weights, iota_rank(5));
    // safe: {0, 1} w=0.2; acceptable: r2 (0.52 >= 0.45, 0.48 <= ~0.5)
    // w=0.5, r3 (0.54 exceeds the compromised bound) stops the walk.
    CHECK(as_set(out) == std::set<std::uint32_t>{0, 1, 2});
}

TEST_CASE("trustone takes the descending prefix to the fraction") {
    std::vector<double> scores = {0.9, 0.8, 0.7};
    std::vector<double> weights = {0.4, 0.4, 0.2};
    auto out = secure_relays_trustone(0.5, scores, weights, iota_rank(3));
    CHECK(out == std::vector<std::uint32_t>{0, 1});
    auto all = secure_relays_trustone(1.0, scores, weights, iota_rank(3));
    CHECK(all.size() == 3);
}

TEST_CASE("filters match the transliterated oracles on random instances") {
    Rng rng(20240601);
    for (int iter = 0; iter < 2000; ++iter) {
        std::size_t n = 1 + rng.below(50);
        std::vector<double> scores(n), weights(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.below(8) == 0 ? 1.0 : rng.next_unit();
            weights[i] = rng.next_unit() + 1e-3;
            total += weights[i];
        }
        for (double& w : weights) w /= total;
        // a few duplicate scores to exercise tie handling
        if (n > 3) scores[n - 1] = scores[0];
        std::vector<std::uint32_t> rank = iota_rank(n);

        double a_su = 0.5 + 0.5 * rng.next_unit();
        double a_sc = 1.0 + 4.0 * rng.next_unit();
        double a_au = a_su * rng.next_unit();
        double a_ac = a_sc + 5.0 * rng.next_unit();
        double a_w = rng.next_unit() + 1e-6;
        AlphaSlice a{a_su, a_sc, a_au, a_ac, a_w};

        auto fast = secure_relays_trustall(a, scores, weights, rank);
        auto slow = oracle_trustall(a_su, a_sc, a_au, a_ac, a_w, scores, weights, rank);
        REQUIRE(fast == slow);

        auto fast1 = secure_relays_trustone(a_w, scores, weights, rank);
        auto slow1 = oracle_trustone(a_w, scores, weights, rank);
        REQUIRE(fast1 == slow1);
    }
}

TEST_CASE("safe relays ignore the weight budget") {
    AlphaSlice a{0.9, 2.0, 0.5, 5.0, 1e-9};
    std::vector<double> scores = {0.9, 0.88, 0.87};
    std::vector<double> weights = {0.5, 0.3, 0.2};
    auto out = secure_relays_trustall(a, scores, weights, iota_rank(3));
    CHECK(as_set(out) == std::set<std::uint32_t>{0, 1, 2});
}

TEST_CASE("a perfect best score admits only perfect relays") {
    // s* = 1 collapses both compromised bounds to zero.
    AlphaSlice a{0.9, 2.0, 0.1, 10.0, 1.0};
    std::vector<double> scores = {1.0, 0.95, 0.92};
    std::vector<double> weights = {0.2, 0.3, 0.5};
    auto out = secure_relays_trustall(a, scores, weights, iota_rank(3));
    CHECK(as_set(out) == std::set<std::uint32_t>{0});
}

TEST_CASE("no returned relay scores below the acceptable floor") {
    Rng rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t n = 2 + rng.below(30);
        std::vector<double> scores(n), weights(n, 1.0 / static_cast<double>(n));
        for (double& s : scores) s = rng.next_unit();
        AlphaSlice a{0.95, 2.0, 0.5, 5.0, 0.9};
        auto out = secure_relays_trustall(a, scores, weights, iota_rank(n));
        double s_star = *std::max_element(scores.begin(), scores.end());
        for (std::uint32_t idx : out) CHECK(scores[idx] >= s_star * a.acc_unc);

        auto one = secure_relays_trustone(0.4, scores, weights, iota_rank(n));
        // descending-score prefix of the sorted order
        std::vector<double> sorted_scores = scores;
        std::sort(sorted_scores.rbegin(), sorted_scores.rend());
        double min_sel = 2.0;
        for (std::uint32_t idx : one) min_sel = std::min(min_sel, scores[idx]);
        for (std::uint32_t i = 0; i < n; ++i) {
            bool in = std::find(one.begin(), one.end(), i) != one.end();
            if (!in && scores[i] > min_sel) {
                // only permissible when a tie at min_sel was cut by budget
                CHECK(scores[i] <= min_sel);
            }
        }
    }
}

TEST_CASE("empty relay list raises") {
    AlphaSlice a;
    CHECK_THROWS_AS(secure_relays_trustall(a, {}, {}, {}), ArgumentError);
    CHECK_THROWS_AS(secure_relays_trustone(0.5, {}, {}, {}), ArgumentError);
}

TEST_CASE("path params invariants validated") {
    PathParams p = PathParams::preset("trustall-paper");
    CHECK(p.guard.safe_unc == 0.95);
    CHECK(p.exit.acc_comp == 10.0);
    CHECK(p.guard.weight_frac == 0.2);
    p.guard.safe_unc = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    PathParams one = PathParams::preset("trustone-hidden");
    CHECK(one.exit.weight_frac == 1.0);
    CHECK(one.guard.weight_frac == 0.005);
    CHECK(PathParams::preset("trustone-open").exit.weight_frac == 0.005);
    CHECK_THROWS_AS(PathParams::preset("nope"), ConfigError);
    PathParams back = path_params_from_json(path_params_to_json(one));
    CHECK(back.mode == SelectionMode::trustone);
    CHECK(back.exit.weight_frac == 1.0);
}

namespace {

// Shared fixture: a small world with guards, exits and controllable link
// entity sets. Locations: 0 client, 1..3 guard sites, 4..6 exit sites,
// 7 destination A, 8 destination B, 9 middle site.
struct World {
    NetworkMap map;
    Consensus consensus;
    RelayView view;
    Clustering clients;
    Clustering dests;
    TheManConfig cfg;

    World() : map(build_map()) {
        consensus.timestamp_hours = 500000;
        auto add = [&](const char* fp, LocationId loc, std::uint8_t flags, double w,
                       std::optional<FamilyId> fam = {}, std::uint32_t subnet = 0) {
            consensus.relays.push_back(make_relay(fp, loc, flags, w, fam, subnet));
        };
        add("G1", 1, kGuardFlags, 100);
        add("G2", 2, kGuardFlags, 100);
        add("G3", 3, kGuardFlags, 50);
        add("E1", 4, kExitFlags, 100);
        add("E2", 5, kExitFlags, 100);
        add("E3", 6, kExitFlags, 50);
        add("M1", 9, kRFV, 80);
        add("M2", 9, kRFV, 20);
        view = RelayView::build(consensus);

        clients.kind = ClusterKind::client;
        clients.representatives = {0};
        dests.kind = ClusterKind::destination;
        dests.representatives = {7, 8};
        for (const Location& l : map.locations()) {
            clients.assignment[l.id] = 0;
            dests.assignment[l.id] = l.id == 8 ? 8 : 7;
        }
        cfg = zeroed_config(map);
        cfg.overrides[25] = 0.2;  // baseline entry-side exposure
    }

    static NetworkMap build_map() {
        MapBuilder b;
        for (EntityId e = 0; e < 10; ++e) b.entity(e);
        b.entity(20);
        b.entity(21);
        b.entity(22);
        b.entity(25);
        for (LocationId l = 0; l < 10; ++l) b.location(l, l);
        // every entry link carries entity 25 so exit-side risk matters;
        // G3's site additionally shares entity 20 with the client path
        b.link(0, 1, {25});
        b.link(0, 2, {25});
        b.link(0, 3, {25, 20});
        // exit links from destination A: E3 risky
        b.link(7, 4, {});
        b.link(7, 5, {});
        b.link(7, 6, {21});
        // exit links from destination B: E1 risky, E2/E3 clean
        b.link(8, 4, {22});
        b.link(8, 5, {});
        b.link(8, 6, {});
        b.prefix("7.0.0.0/8", 7);
        b.prefix("8.0.0.0/8", 8);
        return b.build();
    }
};

}  // namespace

TEST_CASE("guard selection avoids exposed guards when scores differ") {
    World w;
    w.cfg.overrides[20] = 0.5;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 2;
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 42);
    session.connect(w.view, parse_ipv4("7.0.0.1"), 443, 500000 * 3600);
    REQUIRE(session.guards().size() == 2);
    for (const GuardEntry& g : session.guards()) CHECK(g.fingerprint != "G3");
}

TEST_CASE("single guard-flagged relay is chosen when alone") {
    World w;
    Consensus c = w.consensus;
    std::erase_if(c.relays, [](const Relay& r) {
        return r.has(kFlagGuard) && r.fingerprint != "G1";
    });
    RelayView view = RelayView::build(c);
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 1;
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 1);
    session.connect(view, parse_ipv4("7.0.0.1"), 443, 500000 * 3600);
    REQUIRE(session.guards().size() == 1);
    CHECK(session.guards()[0].fingerprint == "G1");
}

TEST_CASE("connect reuses a fresh circuit for a repeat destination") {
    World w;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 7);
    std::int64_t t0 = 500000LL * 3600;
    ConnectResult first = session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0);
    CHECK(first.action == ConnectAction::fresh);
    ConnectResult second = session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0 + 1);
    CHECK(second.action == ConnectAction::reused);
    CHECK(second.circuit_index == first.circuit_index);
}

TEST_CASE("too dirty circuits are rebuilt") {
    World w;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 7);
    std::int64_t t0 = 500000LL * 3600;
    ConnectResult first = session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0);
    ConnectResult later = session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0 + 11 * 60);
    CHECK(later.action == ConnectAction::fresh);
    CHECK(later.circuit_index != first.circuit_index);
}

TEST_CASE("incompatible exit triggers a splice that keeps guard and middle") {
    World w;
    // destination B's secure exits exclude E1 strongly when entity 22 is hot
    w.cfg.overrides[22] = 0.9;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 1;
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 11);
    std::int64_t t0 = 500000LL * 3600;

    ConnectResult first = session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0);
    const Circuit c1 = session.circuit_log()[first.circuit_index];
    // find a destination whose secure set excludes the current exit
    ConnectResult second = session.connect(w.view, parse_ipv4("8.0.0.1"), 443, t0 + 5);
    const Circuit& c2 = session.circuit_log()[second.circuit_index];
    if (second.action == ConnectAction::spliced) {
        CHECK(c2.guard_fp == c1.guard_fp);
        CHECK(c2.middle_fp == c1.middle_fp);
        CHECK(c2.exit_fp != c1.exit_fp);
        CHECK(c2.created_at == c1.created_at);
        CHECK(c2.first_stream_at == c1.first_stream_at);
    } else {
        CHECK(second.action == ConnectAction::reused);
        CHECK(c2.exit_fp != "E1");
    }
}

TEST_CASE("splice occurs when the reused exit leaves the secure set") {
    World w;
    w.cfg.overrides[22] = 0.9;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 1;
    // E1 is the only exit compatible with port 25 (policy tweak below), so
    // the first circuit lands on E1; destination B then rejects it.
    Consensus c = w.consensus;
    for (Relay& r : c.relays) {
        if (r.fingerprint == "E2" || r.fingerprint == "E3")
            r.exit_policy = {{true, IpPrefix{}, 443, 443}, {false, IpPrefix{}, 1, 65535}};
    }
    RelayView view = RelayView::build(c);
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 13);
    std::int64_t t0 = 500000LL * 3600;
    ConnectResult first = session.connect(view, parse_ipv4("7.0.0.1"), 25, t0);
    const Circuit c1 = session.circuit_log()[first.circuit_index];
    CHECK(c1.exit_fp == "E1");
    ConnectResult second = session.connect(view, parse_ipv4("8.0.0.1"), 443, t0 + 5);
    CHECK(second.action == ConnectAction::spliced);
    const Circuit& c2 = session.circuit_log()[second.circuit_index];
    CHECK(c2.guard_fp == c1.guard_fp);
    CHECK(c2.middle_fp == c1.middle_fp);
    CHECK(c2.exit_fp != "E1");
}

TEST_CASE("no compatible exit raises and the stream is skippable") {
    World w;
    Consensus c = w.consensus;
    for (Relay& r : c.relays)
        if (r.has(kFlagExit)) r.exit_policy = {{false, IpPrefix{}, 1, 65535}};
    RelayView view = RelayView::build(c);
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 3);
    CHECK_THROWS_AS(session.connect(view, parse_ipv4("7.0.0.1"), 443, 500000LL * 3600),
                    SelectionError);
}

TEST_CASE("vanilla never pairs guard and exit from one family or subnet") {
    World w;
    Consensus c = w.consensus;
    for (Relay& r : c.relays) {
        if (r.fingerprint == "G1") r.family = 9;
        if (r.fingerprint == "E1") r.family = 9;
        if (r.fingerprint == "G2") r.subnet16 = 77;
        if (r.fingerprint == "E2") r.subnet16 = 77;
    }
    RelayView view = RelayView::build(c);
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("vanilla");
    params.num_guards = 3;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        ClientSession session(w.map, policy, w.clients, w.dests, params, 0, seed);
        std::int64_t t0 = 500000LL * 3600;
        for (int i = 0; i < 6; ++i)
            session.connect(view, parse_ipv4(i % 2 ? "7.0.0.1" : "8.0.0.1"), 443,
                            t0 + i * 700);
        for (const Circuit& circ : session.circuit_log()) {
            auto gi = view.index_of(circ.guard_fp);
            auto ei = view.index_of(circ.exit_fp);
            const Relay& g = view.relays[*gi];
            const Relay& e = view.relays[*ei];
            bool same_family = g.family && e.family && *g.family == *e.family;
            bool same_subnet = g.subnet16 != 0 && g.subnet16 == e.subnet16;
            CHECK(!same_family);
            CHECK(!same_subnet);
            CHECK(circ.guard_fp != circ.middle_fp);
            CHECK(circ.middle_fp != circ.exit_fp);
        }
    }
}

TEST_CASE("vanilla bandwidth weighting matches relay weight ratios") {
    World w;
    Rng rng(99);
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t i : w.view.exits) eligible.push_back(i);
    // draw from E1:100, E2:100, E3:50
    std::unordered_map<std::string, int> hits;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        std::uint32_t pick = vanilla_select(w.view, Position::exit, rng, eligible);
        ++hits[w.view.relays[pick].fingerprint];
    }
    double p1 = hits["E1"] / double(n);
    double expect = 100.0 / 250.0;
    CHECK(std::fabs(p1 - expect) <= 3 * std::sqrt(expect * (1 - expect) / n));
    CHECK(vanilla_select(w.view, Position::guard, rng, {&w.view.guards[0], 1}) ==
          w.view.guards[0]);
    CHECK_THROWS_AS(vanilla_select(w.view, Position::exit, rng, {}), SelectionError);
}

TEST_CASE("trustone exit candidates equal vanilla eligibility") {
    World w;
    Consensus c = w.consensus;
    for (Relay& r : c.relays) {
        if (r.fingerprint == "G1") r.family = 9;
        if (r.fingerprint == "E1") r.family = 9;
    }
    RelayView view = RelayView::build(c);
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustone-hidden");
    params.num_guards = 1;
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 5);
    std::int64_t t0 = 500000LL * 3600;
    session.connect(view, parse_ipv4("7.0.0.1"), 443, t0);
    const GuardEntry& g = session.guards()[0];
    auto secure = session.secure_exit_set(view, g, 7, parse_ipv4("7.0.0.1"), 443);
    // alpha_w_e = 1: the secure set equals the vanilla-eligible candidates
    std::set<std::string> got;
    for (std::uint32_t i : secure) got.insert(view.relays[i].fingerprint);
    std::set<std::string> expect;
    for (std::uint32_t i : view.exits) {
        const Relay& e = view.relays[i];
        if (e.fingerprint == g.fingerprint) continue;
        bool fam = g.family && e.family && *g.family == *e.family;
        bool net = g.subnet16 != 0 && g.subnet16 == e.subnet16;
        if (!fam && !net) expect.insert(e.fingerprint);
    }
    CHECK(got == expect);
}

TEST_CASE("guard oblivious exit sets depend only on guard and cluster") {
    World w;
    w.cfg.overrides[21] = 0.3;
    w.cfg.overrides[22] = 0.3;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 2;
    std::int64_t t0 = 500000LL * 3600;

    // two sessions with different histories but identical guard identities
    ClientSession s1(w.map, policy, w.clients, w.dests, params, 0, 21);
    ClientSession s2(w.map, policy, w.clients, w.dests, params, 0, 21);
    s1.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0);
    s1.connect(w.view, parse_ipv4("8.0.0.1"), 443, t0 + 2);
    s2.connect(w.view, parse_ipv4("8.0.0.1"), 443, t0);

    REQUIRE(s1.guards().size() == s2.guards().size());
    for (std::size_t i = 0; i < s1.guards().size(); ++i) {
        const GuardEntry& g = s1.guards()[i];
        for (LocationId dst : {7u, 8u}) {
            auto a = s1.secure_exit_set(w.view, g, dst, dst == 7 ? parse_ipv4("7.0.0.1")
                                                                 : parse_ipv4("8.0.0.1"), 443);
            auto b = s2.secure_exit_set(w.view, s2.guards()[i], dst,
                                        dst == 7 ? parse_ipv4("7.0.0.1") : parse_ipv4("8.0.0.1"),
                                        443);
            CHECK(a == b);
        }
    }
}

TEST_CASE("connect never returns a too dirty circuit") {
    World w;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 99);
    std::int64_t t0 = 500000LL * 3600;
    Rng rng(1);
    std::int64_t now = t0;
    for (int i = 0; i < 200; ++i) {
        now += static_cast<std::int64_t>(rng.below(400));
        ConnectResult res =
            session.connect(w.view, rng.bernoulli(0.5) ? parse_ipv4("7.0.0.1")
                                                       : parse_ipv4("8.0.0.1"),
                            443, now);
        const Circuit& c = session.circuit_log()[res.circuit_index];
        REQUIRE(c.first_stream_at.has_value());
        CHECK(static_cast<double>(now - *c.first_stream_at) <= params.dirtiness_threshold_s);
    }
}

TEST_CASE("unresponsive guards are retained then dropped at the horizon") {
    World w;
    TheManPolicy policy(w.map, {}, w.cfg);
    PathParams params = PathParams::preset("trustall-paper");
    params.num_guards = 1;
    ClientSession session(w.map, policy, w.clients, w.dests, params, 0, 31);
    std::int64_t t0 = 500000LL * 3600;
    session.connect(w.view, parse_ipv4("7.0.0.1"), 443, t0);
    std::string first_guard = session.guards()[0].fingerprint;

    // same consensus minus that guard, one hour later: retained, a second
    // guard gets selected
    Consensus without = w.consensus;
    std::erase_if(without.relays,
                  [&](const Relay& r) { return r.fingerprint == first_guard; });
    without.timestamp_hours = w.consensus.timestamp_hours + 1;
    RelayView gone = RelayView::build(without);
    session.connect(gone, parse_ipv4("7.0.0.1"), 443, (500000 + 1) * 3600LL);
    CHECK(session.guards().size() == 2);

    // far beyond the absence horizon: dropped for good
    without.timestamp_hours = w.consensus.timestamp_hours + 24 * 40;
    RelayView later = RelayView::build(without);
    session.connect(later, parse_ipv4("7.0.0.1"), 443, (500000 + 24 * 40) * 3600LL);
    for (const GuardEntry& g : session.guards()) CHECK(g.fingerprint != first_guard);
}

TEST_SUITE_END();
