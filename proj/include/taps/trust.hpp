#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "taps/netmap.hpp"
#include "taps/relays.hpp"
#include "taps/rng.hpp"

namespace taps {

// The trust API: an abstract distance between locations, security scores
// for guard and exit placements, and adversary sampling for simulation.
// Two backends are provided. TheMan models one adversary compromising each
// AS organization, IXP organization, and relay family independently;
// Countries models every country as a deterministic adversary observing
// everything inside it.

// Universe of relays seen across a consensus sequence, with per-relay
// uptimes and per-family aggregates. Built once, then read-only.
struct RelayPopulation {
    struct Info {
        std::optional<FamilyId> family;
        LocationId location = 0;
        double uptime = 0.0;
    };
    std::unordered_map<std::string, Info> relays;
    std::unordered_map<FamilyId, double> family_uptime;      // days, summed over members
    std::unordered_map<FamilyId, std::uint32_t> family_size; // distinct members

    static RelayPopulation build(std::span<const Consensus> seq,
                                 const FamilyUptimeTracker& tracker);
};

// One sampled adversary: the sets it compromises. Immutable once built and
// reproducible from (model, seed). Type 5 compromises virtual links by a
// pure function of (link_seed, pair), so the infinite link space needs no
// materialized set.
struct AdversaryInstance {
    std::unordered_set<EntityId> entities;
    std::unordered_set<FamilyId> families;
    std::unordered_set<std::string> relays;  // fingerprints
    bool links_enabled = false;
    std::uint64_t link_seed = 0;
    double link_probability = 0.0;

    bool empty() const {
        return entities.empty() && families.empty() && relays.empty() && !links_enabled;
    }
    bool link_compromised(LocationId a, LocationId b) const {
        return links_enabled &&
               hash_bernoulli(link_seed, VirtualLinkTable::key(a, b), link_probability);
    }
};

bool observes_entry(const AdversaryInstance& adv, const NetworkMap& map, LocationId client_loc,
                    const Relay& guard);
bool observes_exit(const AdversaryInstance& adv, const NetworkMap& map, LocationId dst_loc,
                   const Relay& exit);

struct TheManConfig {
    double entity_probability = 0.1;
    std::unordered_map<EntityId, double> overrides;
    // When set, replaces the longevity formula for every family; mainly for
    // constructing exact scoring fixtures.
    std::optional<double> family_probability;
};

// Family compromise probabilities of the mismatch adversaries.
inline double type4_family_probability(double uptime_days, double p_min = 0.02,
                                       double p_max = 0.1) {
    return p_max - (p_max - p_min) / (uptime_days + 1.0);
}
inline double type7_family_probability(std::uint32_t f_size, double p_min = 0.02,
                                       double p_max = 0.1) {
    return p_max - (p_max - p_min) * std::exp2(-(static_cast<double>(f_size) - 1.0));
}

// Mismatch adversaries: variations of The Man the client may face while
// still choosing paths against her (possibly wrong) beliefs.
struct ErrorAdversarySpec {
    enum class Type { t0, t1, t2a, t2b, t3, t4, t5, t6, t7 };
    Type type = Type::t0;
    double p_min = 0.02;
    double p_max = 0.1;

    static ErrorAdversarySpec parse(const std::string& name);
    std::string name() const;
};

class AdversaryModel {
  public:
    AdversaryModel(const NetworkMap& map, RelayPopulation population, ErrorAdversarySpec spec,
                   TheManConfig base = {});

    AdversaryInstance sample(Rng& rng) const;
    const ErrorAdversarySpec& spec() const { return spec_; }

  private:
    struct FamilyEntry {
        FamilyId id;
        double uptime;
        std::uint32_t size;
    };
    const NetworkMap* map_;
    RelayPopulation pop_;
    ErrorAdversarySpec spec_;
    TheManConfig base_;
    std::vector<EntityId> lone_as_;
    std::vector<EntityId> org_as_;   // as orgs that are not lone ASes
    std::vector<EntityId> org_ixp_;
    std::vector<FamilyEntry> families_;
    std::vector<std::string> singleton_relays_;  // no declared family
    std::vector<std::string> trivial_family_relays_;  // declared family of size 1
    std::vector<std::string> all_relays_;
};

class TrustPolicy {
  public:
    virtual ~TrustPolicy() = default;

    // Abstract distance between two locations: the expected weight of
    // adversaries that can tell them apart across the given relay
    // locations. Symmetric, nonnegative, zero on identical locations.
    virtual double location_distance(LocationId loc1, LocationId loc2,
                                     std::span<const LocationId> relay_locs,
                                     std::span<const double> relay_weights) const = 0;

    // Expected weight of adversaries not present on any client-guard path,
    // normalized to [0, 1].
    virtual double guard_security(LocationId client_loc,
                                  std::span<const Relay* const> guards) const = 0;

    // Expected weight of adversaries unable to correlate the circuit,
    // normalized to [0, 1].
    virtual double exit_security(LocationId client_loc, LocationId dst_loc, const Relay& guard,
                                 const Relay& exit) const = 0;

    // One instance per adversary the policy worries about. TheMan draws a
    // single random instance; Countries returns its fixed per-country
    // instances regardless of the rng.
    virtual std::vector<AdversaryInstance> sample_adversaries(Rng& rng) const = 0;

    virtual std::string kind() const = 0;
};

class TheManPolicy : public TrustPolicy {
  public:
    TheManPolicy(const NetworkMap& map, RelayPopulation population, TheManConfig cfg = {});

    double location_distance(LocationId, LocationId, std::span<const LocationId>,
                             std::span<const double>) const override;
    double guard_security(LocationId, std::span<const Relay* const>) const override;
    double exit_security(LocationId, LocationId, const Relay&, const Relay&) const override;
    std::vector<AdversaryInstance> sample_adversaries(Rng& rng) const override;
    std::string kind() const override { return "theman"; }

    double entity_probability(EntityId e) const {
        auto it = cfg_.overrides.find(e);
        return it == cfg_.overrides.end() ? cfg_.entity_probability : it->second;
    }
    // Probability that the relay's family (declared or its own singleton
    // family) is compromised, from the longevity formula.
    double family_probability_of(const Relay& r) const;

  private:
    const NetworkMap* map_;
    RelayPopulation pop_;
    TheManConfig cfg_;
    std::unique_ptr<AdversaryModel> model_;
};

struct CountriesConfig {
    std::vector<std::string> countries;  // empty: derive from map entities
    std::unordered_map<std::string, double> weights;  // default 1 per country
};

class CountriesPolicy : public TrustPolicy {
  public:
    CountriesPolicy(const NetworkMap& map, RelayPopulation population, CountriesConfig cfg = {});

    double location_distance(LocationId, LocationId, std::span<const LocationId>,
                             std::span<const double>) const override;
    double guard_security(LocationId, std::span<const Relay* const>) const override;
    double exit_security(LocationId, LocationId, const Relay&, const Relay&) const override;
    std::vector<AdversaryInstance> sample_adversaries(Rng&) const override;
    std::string kind() const override { return "countries"; }

    const std::vector<std::string>& countries() const { return countries_; }
    // -1 when the entity has no (known) country.
    int entity_country(EntityId e) const;
    int relay_country(const Relay& r) const { return entity_country(map_->owner_of(r.location)); }
    int country_index(const std::string& name) const;

    // Countries present on the virtual link {a, b} as a bitset over the
    // country list; used by scoring and by the simulator's fast path.
    std::vector<bool> link_countries(LocationId a, LocationId b) const;

  private:
    double total_weight() const { return total_weight_; }
    template <class Fn>
    void for_each_link_country(LocationId a, LocationId b, Fn&& fn) const;

    const NetworkMap* map_;
    RelayPopulation pop_;
    std::vector<std::string> countries_;
    std::vector<double> weights_;
    double total_weight_ = 0.0;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<EntityId, int> entity_country_;
};

}  // namespace taps
