#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "taps/common.hpp"
#include "taps/rng.hpp"

namespace taps {

// AS-level network model: locations (ASes), network entities (AS and IXP
// organizations), and the entity sets present on virtual links. A virtual
// link is an unordered pair of locations; an adversary observing any entity
// on the link observes the link. The entities owning the two endpoints are
// always on their own links.

struct Location {
    LocationId id = 0;
    std::uint64_t size = 1;  // addresses originated
    EntityId owner = 0;      // owning AS organization
    std::optional<std::uint32_t> client_rank;  // 1 = most popular
};

enum class EntityKind : std::uint8_t { as_org = 0, ixp_org = 1 };

struct Entity {
    EntityId id = 0;
    EntityKind kind = EntityKind::as_org;
    std::string country;  // empty = unassigned
};

struct IpPrefix {
    std::uint32_t bits = 0;  // network byte significant part, host bits zero
    std::uint8_t len = 0;

    bool contains(std::uint32_t addr) const {
        if (len == 0) return true;
        std::uint32_t mask = len >= 32 ? 0xFFFFFFFFu : ~((1u << (32 - len)) - 1);
        return (addr & mask) == bits;
    }
};

struct PrefixEntry {
    IpPrefix prefix;
    LocationId location = 0;
};

// Deterministic fallback for link entity sets. When enabled, any pair
// without an explicit table entry gets a transit set derived purely from
// (seed, unordered pair), so arbitrarily large maps stay representable.
struct ProceduralLinkParams {
    bool enabled = false;
    std::uint64_t seed = 0;
    double mean_transit = 0.0;    // mean entities per link beyond the endpoints
    std::uint32_t max_transit = 16;
};

class VirtualLinkTable {
  public:
    static std::uint64_t key(LocationId a, LocationId b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    // Stored sets hold transit entities only; endpoint owners are added at
    // lookup time. Input is sorted and deduplicated here.
    void set_link(LocationId a, LocationId b, std::vector<EntityId> transit) {
        std::sort(transit.begin(), transit.end());
        transit.erase(std::unique(transit.begin(), transit.end()), transit.end());
        table_[key(a, b)] = std::move(transit);
    }

    const std::vector<EntityId>* find(LocationId a, LocationId b) const {
        auto it = table_.find(key(a, b));
        return it == table_.end() ? nullptr : &it->second;
    }

    std::size_t explicit_count() const { return table_.size(); }
    const std::unordered_map<std::uint64_t, std::vector<EntityId>>& raw() const { return table_; }

    ProceduralLinkParams procedural;

  private:
    std::unordered_map<std::uint64_t, std::vector<EntityId>> table_;
};

class NetworkMap {
  public:
    NetworkMap(std::vector<Location> locations, std::vector<Entity> entities,
               VirtualLinkTable links, std::vector<PrefixEntry> ip_index);

    const std::vector<Location>& locations() const { return locations_; }
    const std::vector<Entity>& entities() const { return entities_; }
    const VirtualLinkTable& links() const { return links_; }
    const std::vector<PrefixEntry>& ip_index() const { return ip_index_; }

    bool has_location(LocationId id) const { return loc_pos_.count(id) != 0; }
    const Location& location(LocationId id) const;
    const Entity& entity(EntityId id) const;
    EntityId owner_of(LocationId id) const { return location(id).owner; }

    // Number of locations owned by the entity; an as_org owning exactly one
    // is a lone AS (its own singleton organization).
    std::uint32_t owned_location_count(EntityId id) const;
    bool is_lone_as(EntityId id) const {
        return entity(id).kind == EntityKind::as_org && owned_location_count(id) == 1;
    }

    // Entities on the virtual link {a, b}: endpoint owners plus the stored
    // or procedural transit set. Symmetric in (a, b); sorted, unique.
    std::vector<EntityId> entities_on_link(LocationId a, LocationId b) const;

    // Non-allocating visit of the same set (owners may duplicate transit
    // entries for hand-written maps; uses a small local filter).
    template <class Fn>
    void for_each_entity_on_link(LocationId a, LocationId b, Fn&& fn) const {
        EntityId oa = owner_of(a);
        EntityId ob = owner_of(b);
        fn(oa);
        if (ob != oa) fn(ob);
        visit_transit(a, b, [&](EntityId e) {
            if (e != oa && e != ob) fn(e);
        });
    }

    // Longest-prefix match; throws UnmappedAddressError when nothing covers.
    LocationId ip_to_location(std::uint32_t addr) const;

    bool operator==(const NetworkMap& other) const;

  private:
    template <class Fn>
    void visit_transit(LocationId a, LocationId b, Fn&& fn) const {
        if (const auto* t = links_.find(a, b)) {
            for (EntityId e : *t) fn(e);
            return;
        }
        if (links_.procedural.enabled && a != b) procedural_transit(a, b, fn);
    }

    template <class Fn>
    void procedural_transit(LocationId a, LocationId b, Fn&& fn) const {
        const auto& p = links_.procedural;
        std::uint64_t k = VirtualLinkTable::key(a, b);
        std::uint64_t h = splitmix64(p.seed ^ k);
        Rng rng(h);
        std::uint32_t count = rng.poisson(p.mean_transit, p.max_transit);
        std::uint32_t n = static_cast<std::uint32_t>(entities_.size());
        // distinct draws via linear probing over the entity index space
        std::uint32_t picked[64];
        std::uint32_t npicked = 0;
        for (std::uint32_t i = 0; i < count && npicked < 64; ++i) {
            std::uint32_t idx = static_cast<std::uint32_t>(rng.below(n));
            bool dup = false;
            for (std::uint32_t j = 0; j < npicked; ++j) dup = dup || picked[j] == idx;
            if (dup) continue;
            picked[npicked++] = idx;
            fn(entities_[idx].id);
        }
    }

    std::vector<Location> locations_;
    std::vector<Entity> entities_;
    VirtualLinkTable links_;
    std::vector<PrefixEntry> ip_index_;
    std::unordered_map<LocationId, std::uint32_t> loc_pos_;
    std::unordered_map<EntityId, std::uint32_t> ent_pos_;
    std::vector<std::uint32_t> owned_count_;  // parallel to entities_
};

struct SyntheticMapSpec {
    std::uint32_t n_locations = 0;
    std::uint32_t n_entities = 0;
    double mean_entities_per_link = 4.0;  // including the two endpoint owners
    std::uint32_t n_client_ranked = 0;
    double ixp_fraction = 0.2;
    std::uint32_t n_countries = 10;
};

NetworkMap generate_synthetic_map(const SyntheticMapSpec& spec, std::uint64_t seed);

std::vector<std::uint8_t> serialize_map(const NetworkMap& map);
NetworkMap deserialize_map(std::span<const std::uint8_t> data);

// JSON import/export of the same schema, for hand-written test maps.
NetworkMap map_from_json(const std::string& text);
std::string map_to_json(const NetworkMap& map);

std::uint32_t parse_ipv4(const std::string& dotted);
std::string format_ipv4(std::uint32_t addr);
IpPrefix parse_prefix(const std::string& cidr);
std::string format_prefix(const IpPrefix& p);

}  // namespace taps
