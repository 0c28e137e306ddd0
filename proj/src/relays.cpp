#include "taps/relays.hpp"

#include <cmath>
#include <cstdio>

#include "taps/rng.hpp"

namespace taps {

bool exit_policy_allows(const Relay& relay, std::uint32_t addr, std::uint16_t port) {
    for (const ExitPolicyRule& rule : relay.exit_policy) {
        if (port < rule.port_lo || port > rule.port_hi) continue;
        if (!rule.prefix.contains(addr)) continue;
        return rule.accept;
    }
    return true;
}

double positional_weight(const Relay& relay, Position pos) {
    switch (pos) {
        case Position::guard:
            return relay.has(kFlagGuard) ? relay.weight : 0.0;
        case Position::exit:
            return relay.has(kFlagExit) ? relay.weight : 0.0;
        case Position::middle:
            return relay.weight;
    }
    return 0.0;
}

void FamilyUptimeTracker::update(const Consensus& consensus) {
    if (last_ts_ && consensus.timestamp_hours <= *last_ts_)
        throw OrderingError("consensus timestamp " + std::to_string(consensus.timestamp_hours) +
                            " does not follow " + std::to_string(*last_ts_));
    double gap_hours = last_ts_ ? static_cast<double>(consensus.timestamp_hours - *last_ts_) : 1.0;
    double gap_days = gap_hours / 24.0;
    double lambda = std::exp2(-gap_days / 30.0);

    for (auto& [fp, u] : uptime_) u *= lambda;
    double credit = (1.0 - lambda) * gap_days;
    for (const Relay& r : consensus.relays) {
        if (!r.eligible()) continue;
        uptime_[r.fingerprint] += credit;
    }
    last_ts_ = consensus.timestamp_hours;
}

double family_compromise_probability(double family_uptime_days) {
    return (0.1 - 0.02) / (family_uptime_days + 1.0) + 0.02;
}

std::vector<Consensus> generate_synthetic_consensuses(const SyntheticConsensusSpec& spec,
                                                      const NetworkMap& map,
                                                      std::uint64_t seed) {
    if (spec.n_relays == 0) throw ConfigError("synthetic consensus: n_relays must be > 0");
    if (spec.n_consensuses == 0)
        throw ConfigError("synthetic consensus: n_consensuses must be > 0");
    std::uint32_t n_locs = spec.n_relay_locations
                               ? spec.n_relay_locations
                               : static_cast<std::uint32_t>(map.locations().size());
    if (n_locs > map.locations().size())
        throw ConfigError("synthetic consensus: n_relay_locations exceeds map locations");

    Rng rng(derive_seed(seed, 0x636F6E73));  // "cons"

    struct Template {
        Relay relay;
        bool present;
    };
    std::vector<Template> pool;
    FamilyId next_family = 1;
    std::uint32_t family_room = 0;

    auto make_relay = [&](std::uint32_t idx) {
        Relay r;
        char buf[24];
        std::snprintf(buf, sizeof buf, "R%08u", idx);
        r.fingerprint = buf;
        r.location = map.locations()[rng.below(n_locs)].id;
        r.flags = kFlagRunning | kFlagFast | kFlagValid;
        if (rng.bernoulli(spec.guard_fraction)) r.flags |= kFlagGuard;
        if (rng.bernoulli(spec.exit_fraction)) r.flags |= kFlagExit;
        if (!(r.flags & (kFlagGuard | kFlagExit))) r.flags |= kFlagGuard;  // avoid dead weight
        // Pareto-ish weight spread so bandwidth-weighted choices are nontrivial.
        double u = rng.next_unit();
        r.weight = 1.0 + 99.0 * u * u * u;
        r.subnet16 = static_cast<std::uint32_t>(rng.below(1u << 12));
        if (family_room > 0) {
            r.family = next_family;
            if (--family_room == 0) ++next_family;
        } else if (rng.bernoulli(spec.family_fraction)) {
            std::uint32_t extra = 1 + static_cast<std::uint32_t>(
                                          rng.below(2 * spec.mean_family_size - 1));
            r.family = next_family;
            family_room = extra;  // this many future relays join the family
        }
        if (r.has(kFlagExit) && rng.below(100) < spec.restricted_exit_percent) {
            // web-only policy
            r.exit_policy.push_back({true, IpPrefix{}, 80, 80});
            r.exit_policy.push_back({true, IpPrefix{}, 443, 443});
            r.exit_policy.push_back({false, IpPrefix{}, 1, 65535});
        }
        return r;
    };

    for (std::uint32_t i = 0; i < spec.n_relays; ++i)
        pool.push_back({make_relay(i), true});
    std::uint32_t next_idx = spec.n_relays;

    std::vector<Consensus> out;
    out.reserve(spec.n_consensuses);
    for (std::uint32_t h = 0; h < spec.n_consensuses; ++h) {
        if (h > 0) {
            for (auto& t : pool)
                if (rng.bernoulli(spec.churn_per_hour)) t.present = !t.present;
            std::uint32_t births = rng.poisson(spec.birth_per_hour, 16);
            for (std::uint32_t b = 0; b < births; ++b)
                pool.push_back({make_relay(next_idx++), true});
        }
        Consensus c;
        c.timestamp_hours = spec.start_hour + h;
        for (const auto& t : pool)
            if (t.present) c.relays.push_back(t.relay);
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace taps
