#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taps/netmap.hpp"
#include "taps/relays.hpp"
#include "taps/trust.hpp"

namespace taps::test {

struct MapBuilder {
    std::vector<Location> locations;
    std::vector<Entity> entities;
    VirtualLinkTable links;
    std::vector<PrefixEntry> prefixes;

    MapBuilder& entity(EntityId id, EntityKind kind = EntityKind::as_org,
                       std::string country = "") {
        entities.push_back({id, kind, std::move(country)});
        return *this;
    }
    MapBuilder& location(LocationId id, EntityId owner, std::uint64_t size = 1,
                         std::optional<std::uint32_t> rank = {}) {
        locations.push_back({id, size, owner, rank});
        return *this;
    }
    MapBuilder& link(LocationId a, LocationId b, std::vector<EntityId> transit) {
        links.set_link(a, b, std::move(transit));
        return *this;
    }
    MapBuilder& prefix(const std::string& cidr, LocationId loc) {
        prefixes.push_back({parse_prefix(cidr), loc});
        return *this;
    }
    NetworkMap build() {
        return NetworkMap(std::move(locations), std::move(entities), std::move(links),
                          std::move(prefixes));
    }
};

inline Relay make_relay(std::string fp, LocationId loc, std::uint8_t flags, double weight,
                        std::optional<FamilyId> family = {}, std::uint32_t subnet16 = 0) {
    Relay r;
    r.fingerprint = std::move(fp);
    r.location = loc;
    r.flags = flags;
    r.weight = weight;
    r.family = family;
    r.subnet16 = subnet16;
    return r;
}

constexpr std::uint8_t kRFV = kFlagRunning | kFlagFast | kFlagValid;
constexpr std::uint8_t kGuardFlags = kRFV | kFlagGuard;
constexpr std::uint8_t kExitFlags = kRFV | kFlagExit;

// The Man with all endpoint-owner probabilities zeroed and no family risk,
// so scoring fixtures control the factor sets exactly.
inline TheManConfig zeroed_config(const NetworkMap& map, double named_probability = 0.1,
                                  std::vector<EntityId> named = {}) {
    TheManConfig cfg;
    cfg.entity_probability = 0.0;
    cfg.family_probability = 0.0;
    for (EntityId e : named) cfg.overrides[e] = named_probability;
    (void)map;
    return cfg;
}

}  // namespace taps::test
