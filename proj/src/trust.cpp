#include "taps/trust.hpp"

#include <algorithm>
#include <cmath>

#include "taps/hash.hpp"

namespace taps {

RelayPopulation RelayPopulation::build(std::span<const Consensus> seq,
                                       const FamilyUptimeTracker& tracker) {
    RelayPopulation pop;
    for (const Consensus& c : seq) {
        for (const Relay& r : c.relays) {
            auto [it, fresh] = pop.relays.try_emplace(r.fingerprint);
            it->second.family = r.family;  // last declaration wins
            it->second.location = r.location;
            if (fresh) it->second.uptime = tracker.relay_uptime(r.fingerprint);
        }
    }
    for (const auto& [fp, info] : pop.relays) {
        if (!info.family) continue;
        pop.family_uptime[*info.family] += info.uptime;
        pop.family_size[*info.family] += 1;
    }
    return pop;
}

bool observes_entry(const AdversaryInstance& adv, const NetworkMap& map, LocationId client_loc,
                    const Relay& guard) {
    if (adv.link_compromised(client_loc, guard.location)) return true;
    if (guard.family && adv.families.count(*guard.family)) return true;
    if (!adv.relays.empty() && adv.relays.count(guard.fingerprint)) return true;
    bool hit = false;
    map.for_each_entity_on_link(client_loc, guard.location,
                                [&](EntityId e) { hit = hit || adv.entities.count(e) != 0; });
    return hit;
}

bool observes_exit(const AdversaryInstance& adv, const NetworkMap& map, LocationId dst_loc,
                   const Relay& exit) {
    return observes_entry(adv, map, dst_loc, exit);
}

ErrorAdversarySpec ErrorAdversarySpec::parse(const std::string& name) {
    using Type = ErrorAdversarySpec::Type;
    static const std::pair<const char*, Type> table[] = {
        {"0", Type::t0},   {"1", Type::t1}, {"2a", Type::t2a}, {"2b", Type::t2b},
        {"3", Type::t3},   {"4", Type::t4}, {"5", Type::t5},   {"6", Type::t6},
        {"7", Type::t7},
    };
    for (const auto& [n, t] : table)
        if (name == n) return ErrorAdversarySpec{t};
    throw ConfigError("unknown adversary type: " + name);
}

std::string ErrorAdversarySpec::name() const {
    switch (type) {
        case Type::t0: return "0";
        case Type::t1: return "1";
        case Type::t2a: return "2a";
        case Type::t2b: return "2b";
        case Type::t3: return "3";
        case Type::t4: return "4";
        case Type::t5: return "5";
        case Type::t6: return "6";
        case Type::t7: return "7";
    }
    return "?";
}

AdversaryModel::AdversaryModel(const NetworkMap& map, RelayPopulation population,
                               ErrorAdversarySpec spec, TheManConfig base)
    : map_(&map), pop_(std::move(population)), spec_(spec), base_(base) {
    for (const Entity& e : map.entities()) {
        if (map.is_lone_as(e.id))
            lone_as_.push_back(e.id);
        else if (e.kind == EntityKind::as_org)
            org_as_.push_back(e.id);
        else
            org_ixp_.push_back(e.id);
    }
    for (const auto& [fid, up] : pop_.family_uptime)
        families_.push_back({fid, up, pop_.family_size.at(fid)});
    std::sort(families_.begin(), families_.end(),
              [](const FamilyEntry& a, const FamilyEntry& b) { return a.id < b.id; });
    for (const auto& [fp, info] : pop_.relays) {
        all_relays_.push_back(fp);
        if (!info.family)
            singleton_relays_.push_back(fp);
        else if (pop_.family_size.at(*info.family) == 1)
            trivial_family_relays_.push_back(fp);
    }
    std::sort(all_relays_.begin(), all_relays_.end());
    std::sort(singleton_relays_.begin(), singleton_relays_.end());
    std::sort(trivial_family_relays_.begin(), trivial_family_relays_.end());
}

AdversaryInstance AdversaryModel::sample(Rng& rng) const {
    using Type = ErrorAdversarySpec::Type;
    AdversaryInstance adv;
    const double pmin = spec_.p_min;
    const double pmax = spec_.p_max;
    const double scale = spec_.type == Type::t1 ? 1.25 : 1.0;

    if (spec_.type == Type::t5) {
        // Relays and virtual links compromised directly; organizations and
        // families play no role.
        for (const std::string& fp : all_relays_)
            if (rng.bernoulli(0.1)) adv.relays.insert(fp);
        adv.links_enabled = true;
        adv.link_seed = rng.next_u64();
        adv.link_probability = 0.3439;  // 1 - 0.9^4
        return adv;
    }

    // Organizations and lone ASes.
    if (spec_.type == Type::t3) {
        // Half the organizations at 0.15, the rest at 0.05, redrawn per
        // instance; lone ASes get a per-id fair coin between the two.
        std::uint64_t coin_seed = rng.next_u64();
        auto split = [&](const std::vector<EntityId>& orgs) {
            std::vector<EntityId> shuffled(orgs);
            for (std::size_t i = shuffled.size(); i > 1; --i)
                std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
            std::size_t half = (shuffled.size() + 1) / 2;
            for (std::size_t i = 0; i < shuffled.size(); ++i)
                if (rng.bernoulli(i < half ? 0.15 : 0.05)) adv.entities.insert(shuffled[i]);
        };
        split(org_as_);
        split(org_ixp_);
        for (EntityId e : lone_as_) {
            double p = hash_bernoulli(coin_seed, e, 0.5) ? 0.15 : 0.05;
            if (hash_bernoulli(coin_seed ^ 0x5EED, e, p)) adv.entities.insert(e);
        }
    } else {
        auto org_p = [&](EntityId e) {
            auto it = base_.overrides.find(e);
            return (it == base_.overrides.end() ? base_.entity_probability : it->second) * scale;
        };
        for (EntityId e : org_as_)
            if (rng.bernoulli(org_p(e))) adv.entities.insert(e);
        for (EntityId e : org_ixp_)
            if (rng.bernoulli(org_p(e))) adv.entities.insert(e);
        for (EntityId e : lone_as_) {
            double p = org_p(e);
            if (spec_.type == Type::t2a) p = 0.0;
            if (spec_.type == Type::t2b) p = 0.05;
            if (rng.bernoulli(p)) adv.entities.insert(e);
        }
    }

    // Families. Singleton relays count as their own trivial families.
    auto longevity_p = [&](double uptime) {
        if (base_.family_probability) return *base_.family_probability;
        return (pmax - pmin) / (uptime + 1.0) + pmin;
    };
    switch (spec_.type) {
        case Type::t4:
            for (const FamilyEntry& f : families_)
                if (rng.bernoulli(type4_family_probability(f.uptime, pmin, pmax)))
                    adv.families.insert(f.id);
            for (const std::string& fp : singleton_relays_)
                if (rng.bernoulli(
                        type4_family_probability(pop_.relays.at(fp).uptime, pmin, pmax)))
                    adv.relays.insert(fp);
            break;
        case Type::t6:
            for (const FamilyEntry& f : families_)
                if (f.size >= 2 && rng.bernoulli(0.1)) adv.families.insert(f.id);
            for (const std::string& fp : trivial_family_relays_)
                if (rng.bernoulli(0.05)) adv.relays.insert(fp);
            for (const std::string& fp : singleton_relays_)
                if (rng.bernoulli(0.05)) adv.relays.insert(fp);
            break;
        case Type::t7:
            for (const FamilyEntry& f : families_)
                if (rng.bernoulli(type7_family_probability(f.size, pmin, pmax)))
                    adv.families.insert(f.id);
            for (const std::string& fp : singleton_relays_)
                if (rng.bernoulli(type7_family_probability(1, pmin, pmax)))
                    adv.relays.insert(fp);
            break;
        default:
            for (const FamilyEntry& f : families_)
                if (rng.bernoulli(longevity_p(f.uptime) * scale)) adv.families.insert(f.id);
            for (const std::string& fp : singleton_relays_)
                if (rng.bernoulli(longevity_p(pop_.relays.at(fp).uptime) * scale))
                    adv.relays.insert(fp);
            break;
    }
    return adv;
}

namespace {

// Compromise factors are deduplicated by a tagged 64-bit key; entities,
// declared families and singleton-relay families live in disjoint ranges.
inline std::uint64_t entity_key(EntityId e) { return e; }
inline std::uint64_t family_key(FamilyId f) { return (1ULL << 62) | f; }
inline std::uint64_t solo_key(const std::string& fp) {
    return (2ULL << 62) | (fnv1a64(fp) & ((1ULL << 62) - 1));
}

class FactorSet {
  public:
    void add(std::uint64_t key, double p) {
        for (const auto& f : factors_)
            if (f.first == key) return;
        factors_.emplace_back(key, p);
    }
    double prob_none() const {
        double q = 1.0;
        for (const auto& f : factors_) q *= 1.0 - f.second;
        return q;
    }
    const std::vector<std::pair<std::uint64_t, double>>& items() const { return factors_; }
    bool contains(std::uint64_t key) const {
        for (const auto& f : factors_)
            if (f.first == key) return true;
        return false;
    }

  private:
    std::vector<std::pair<std::uint64_t, double>> factors_;
};

}  // namespace

TheManPolicy::TheManPolicy(const NetworkMap& map, RelayPopulation population, TheManConfig cfg)
    : map_(&map), pop_(std::move(population)), cfg_(std::move(cfg)) {
    model_ = std::make_unique<AdversaryModel>(map, pop_, ErrorAdversarySpec{}, cfg_);
}

double TheManPolicy::family_probability_of(const Relay& r) const {
    if (cfg_.family_probability) return *cfg_.family_probability;
    double uptime = 0.0;
    if (r.family) {
        auto it = pop_.family_uptime.find(*r.family);
        if (it != pop_.family_uptime.end()) uptime = it->second;
    } else {
        auto it = pop_.relays.find(r.fingerprint);
        if (it != pop_.relays.end()) uptime = it->second.uptime;
    }
    return family_compromise_probability(uptime);
}

double TheManPolicy::location_distance(LocationId loc1, LocationId loc2,
                                       std::span<const LocationId> relay_locs,
                                       std::span<const double> relay_weights) const {
    if (relay_locs.size() != relay_weights.size())
        throw ArgumentError("location_distance: relays/weights length mismatch");
    if (relay_locs.empty()) throw ArgumentError("location_distance: no relays");
    if (loc1 == loc2) return 0.0;

    double total = 0.0;
    for (std::size_t i = 0; i < relay_locs.size(); ++i) {
        LocationId r = relay_locs[i];
        FactorSet side1, side2;
        map_->for_each_entity_on_link(loc1, r,
                                      [&](EntityId e) { side1.add(entity_key(e), entity_probability(e)); });
        map_->for_each_entity_on_link(loc2, r,
                                      [&](EntityId e) { side2.add(entity_key(e), entity_probability(e)); });
        // Partition into both-sides / only-side1 / only-side2.
        double no_shared = 1.0, no_only1 = 1.0, no_only2 = 1.0;
        for (const auto& [key, p] : side1.items()) {
            if (side2.contains(key))
                no_shared *= 1.0 - p;
            else
                no_only1 *= 1.0 - p;
        }
        for (const auto& [key, p] : side2.items())
            if (!side1.contains(key)) no_only2 *= 1.0 - p;
        double p_r = no_shared * ((1.0 - no_only1) * no_only2 + no_only1 * (1.0 - no_only2));
        total += relay_weights[i] * p_r;
    }
    return total;
}

double TheManPolicy::guard_security(LocationId client_loc,
                                    std::span<const Relay* const> guards) const {
    if (guards.empty()) throw ArgumentError("guard_security: no guards");
    FactorSet factors;
    for (const Relay* g : guards) {
        map_->for_each_entity_on_link(client_loc, g->location,
                                      [&](EntityId e) { factors.add(entity_key(e), entity_probability(e)); });
        std::uint64_t fam = g->family ? family_key(*g->family) : solo_key(g->fingerprint);
        factors.add(fam, family_probability_of(*g));
    }
    return factors.prob_none();
}

double TheManPolicy::exit_security(LocationId client_loc, LocationId dst_loc, const Relay& guard,
                                   const Relay& exit) const {
    FactorSet entry, exitside;
    map_->for_each_entity_on_link(client_loc, guard.location,
                                  [&](EntityId e) { entry.add(entity_key(e), entity_probability(e)); });
    entry.add(guard.family ? family_key(*guard.family) : solo_key(guard.fingerprint),
              family_probability_of(guard));
    map_->for_each_entity_on_link(dst_loc, exit.location,
                                  [&](EntityId e) { exitside.add(entity_key(e), entity_probability(e)); });
    exitside.add(exit.family ? family_key(*exit.family) : solo_key(exit.fingerprint),
                 family_probability_of(exit));

    double no_shared = 1.0, no_entry_only = 1.0, no_exit_only = 1.0;
    for (const auto& [key, p] : entry.items()) {
        if (exitside.contains(key))
            no_shared *= 1.0 - p;
        else
            no_entry_only *= 1.0 - p;
    }
    for (const auto& [key, p] : exitside.items())
        if (!entry.contains(key)) no_exit_only *= 1.0 - p;

    return no_shared *
           (no_entry_only + no_exit_only - no_entry_only * no_exit_only);
}

std::vector<AdversaryInstance> TheManPolicy::sample_adversaries(Rng& rng) const {
    std::vector<AdversaryInstance> out;
    out.push_back(model_->sample(rng));
    return out;
}

CountriesPolicy::CountriesPolicy(const NetworkMap& map, RelayPopulation population,
                                 CountriesConfig cfg)
    : map_(&map), pop_(std::move(population)) {
    if (cfg.countries.empty()) {
        std::vector<std::string> derived;
        for (const Entity& e : map.entities())
            if (!e.country.empty()) derived.push_back(e.country);
        std::sort(derived.begin(), derived.end());
        derived.erase(std::unique(derived.begin(), derived.end()), derived.end());
        countries_ = std::move(derived);
    } else {
        countries_ = cfg.countries;
    }
    if (countries_.empty()) throw ConfigError("countries policy: no countries");
    weights_.resize(countries_.size(), 1.0);
    for (std::size_t i = 0; i < countries_.size(); ++i) {
        index_[countries_[i]] = static_cast<int>(i);
        auto it = cfg.weights.find(countries_[i]);
        if (it != cfg.weights.end()) {
            if (it->second < 0.0 || it->second > 1.0)
                throw ConfigError("country weight out of [0,1]");
            weights_[i] = it->second;
        }
        total_weight_ += weights_[i];
    }
    if (!(total_weight_ > 0.0)) throw ConfigError("countries policy: zero total weight");
    for (const Entity& e : map.entities()) {
        auto it = index_.find(e.country);
        entity_country_[e.id] = it == index_.end() ? -1 : it->second;
    }
}

int CountriesPolicy::entity_country(EntityId e) const {
    auto it = entity_country_.find(e);
    return it == entity_country_.end() ? -1 : it->second;
}

int CountriesPolicy::country_index(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

template <class Fn>
void CountriesPolicy::for_each_link_country(LocationId a, LocationId b, Fn&& fn) const {
    map_->for_each_entity_on_link(a, b, [&](EntityId e) {
        int c = entity_country(e);
        if (c >= 0) fn(c);
    });
}

std::vector<bool> CountriesPolicy::link_countries(LocationId a, LocationId b) const {
    std::vector<bool> present(countries_.size(), false);
    for_each_link_country(a, b, [&](int c) { present[static_cast<std::size_t>(c)] = true; });
    return present;
}

double CountriesPolicy::location_distance(LocationId loc1, LocationId loc2,
                                          std::span<const LocationId> relay_locs,
                                          std::span<const double> relay_weights) const {
    if (relay_locs.size() != relay_weights.size())
        throw ArgumentError("location_distance: relays/weights length mismatch");
    if (relay_locs.empty()) throw ArgumentError("location_distance: no relays");
    if (loc1 == loc2) return 0.0;

    double total = 0.0;
    for (std::size_t i = 0; i < relay_locs.size(); ++i) {
        std::vector<bool> s1 = link_countries(loc1, relay_locs[i]);
        std::vector<bool> s2 = link_countries(loc2, relay_locs[i]);
        double diff = 0.0;
        for (std::size_t c = 0; c < countries_.size(); ++c)
            if (s1[c] != s2[c]) diff += weights_[c];
        total += relay_weights[i] * diff;
    }
    return total;
}

double CountriesPolicy::guard_security(LocationId client_loc,
                                       std::span<const Relay* const> guards) const {
    if (guards.empty()) throw ArgumentError("guard_security: no guards");
    std::vector<bool> bad(countries_.size(), false);
    for (const Relay* g : guards) {
        for_each_link_country(client_loc, g->location,
                              [&](int c) { bad[static_cast<std::size_t>(c)] = true; });
        int rc = relay_country(*g);
        if (rc >= 0) bad[static_cast<std::size_t>(rc)] = true;
    }
    double bad_weight = 0.0;
    for (std::size_t c = 0; c < countries_.size(); ++c)
        if (bad[c]) bad_weight += weights_[c];
    return (total_weight_ - bad_weight) / total_weight_;
}

double CountriesPolicy::exit_security(LocationId client_loc, LocationId dst_loc,
                                      const Relay& guard, const Relay& exit) const {
    std::vector<bool> entry(countries_.size(), false);
    for_each_link_country(client_loc, guard.location,
                          [&](int c) { entry[static_cast<std::size_t>(c)] = true; });
    if (int rc = relay_country(guard); rc >= 0) entry[static_cast<std::size_t>(rc)] = true;

    std::vector<bool> exitside(countries_.size(), false);
    for_each_link_country(dst_loc, exit.location,
                          [&](int c) { exitside[static_cast<std::size_t>(c)] = true; });
    if (int rc = relay_country(exit); rc >= 0) exitside[static_cast<std::size_t>(rc)] = true;

    double bad_weight = 0.0;
    for (std::size_t c = 0; c < countries_.size(); ++c)
        if (entry[c] && exitside[c]) bad_weight += weights_[c];
    return (total_weight_ - bad_weight) / total_weight_;
}

std::vector<AdversaryInstance> CountriesPolicy::sample_adversaries(Rng&) const {
    std::vector<AdversaryInstance> out(countries_.size());
    for (const Entity& e : map_->entities()) {
        int c = entity_country(e.id);
        if (c >= 0) out[static_cast<std::size_t>(c)].entities.insert(e.id);
    }
    for (const auto& [fp, info] : pop_.relays) {
        int c = entity_country(map_->owner_of(info.location));
        if (c >= 0) out[static_cast<std::size_t>(c)].relays.insert(fp);
    }
    return out;
}

}  // namespace taps
