#include "taps/netmap.hpp"

#include <algorithm>
#include <cstdio>

#include "taps/wire.hpp"

namespace taps {

NetworkMap::NetworkMap(std::vector<Location> locations, std::vector<Entity> entities,
                       VirtualLinkTable links, std::vector<PrefixEntry> ip_index)
    : locations_(std::move(locations)),
      entities_(std::move(entities)),
      links_(std::move(links)),
      ip_index_(std::move(ip_index)) {
    std::sort(locations_.begin(), locations_.end(),
              [](const Location& a, const Location& b) { return a.id < b.id; });
    std::sort(entities_.begin(), entities_.end(),
              [](const Entity& a, const Entity& b) { return a.id < b.id; });
    std::sort(ip_index_.begin(), ip_index_.end(), [](const PrefixEntry& a, const PrefixEntry& b) {
        return a.prefix.bits != b.prefix.bits ? a.prefix.bits < b.prefix.bits
                                              : a.prefix.len < b.prefix.len;
    });

    ent_pos_.reserve(entities_.size());
    for (std::uint32_t i = 0; i < entities_.size(); ++i) {
        if (!ent_pos_.emplace(entities_[i].id, i).second)
            throw ArgumentError("duplicate entity id " + std::to_string(entities_[i].id));
    }
    loc_pos_.reserve(locations_.size());
    owned_count_.assign(entities_.size(), 0);
    std::vector<std::uint32_t> seen_ranks;
    for (std::uint32_t i = 0; i < locations_.size(); ++i) {
        const Location& loc = locations_[i];
        if (!loc_pos_.emplace(loc.id, i).second)
            throw ArgumentError("duplicate location id " + std::to_string(loc.id));
        if (loc.size < 1) throw ArgumentError("location size must be >= 1");
        auto it = ent_pos_.find(loc.owner);
        if (it == ent_pos_.end())
            throw ArgumentError("location " + std::to_string(loc.id) + " owner entity unknown");
        ++owned_count_[it->second];
        if (loc.client_rank) seen_ranks.push_back(*loc.client_rank);
    }
    std::sort(seen_ranks.begin(), seen_ranks.end());
    if (std::adjacent_find(seen_ranks.begin(), seen_ranks.end()) != seen_ranks.end())
        throw ArgumentError("duplicate client_rank");

    for (const auto& [key, transit] : links_.raw()) {
        LocationId a = static_cast<LocationId>(key >> 32);
        LocationId b = static_cast<LocationId>(key & 0xFFFFFFFFu);
        if (!loc_pos_.count(a) || !loc_pos_.count(b))
            throw ArgumentError("link references unknown location");
        for (EntityId e : transit)
            if (!ent_pos_.count(e)) throw ArgumentError("link references unknown entity");
    }
    for (const PrefixEntry& pe : ip_index_)
        if (!loc_pos_.count(pe.location)) throw ArgumentError("prefix maps to unknown location");
}

const Location& NetworkMap::location(LocationId id) const {
    auto it = loc_pos_.find(id);
    if (it == loc_pos_.end()) throw LookupError("unknown location " + std::to_string(id));
    return locations_[it->second];
}

const Entity& NetworkMap::entity(EntityId id) const {
    auto it = ent_pos_.find(id);
    if (it == ent_pos_.end()) throw LookupError("unknown entity " + std::to_string(id));
    return entities_[it->second];
}

std::uint32_t NetworkMap::owned_location_count(EntityId id) const {
    auto it = ent_pos_.find(id);
    if (it == ent_pos_.end()) throw LookupError("unknown entity " + std::to_string(id));
    return owned_count_[it->second];
}

std::vector<EntityId> NetworkMap::entities_on_link(LocationId a, LocationId b) const {
    std::vector<EntityId> out;
    for_each_entity_on_link(a, b, [&](EntityId e) { out.push_back(e); });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

LocationId NetworkMap::ip_to_location(std::uint32_t addr) const {
    int best_len = -1;
    LocationId best = 0;
    for (const PrefixEntry& pe : ip_index_) {
        if (pe.prefix.contains(addr) && pe.prefix.len > best_len) {
            best_len = pe.prefix.len;
            best = pe.location;
        }
    }
    if (best_len < 0)
        throw UnmappedAddressError("no covering prefix for " + format_ipv4(addr));
    return best;
}

bool NetworkMap::operator==(const NetworkMap& other) const {
    auto loc_eq = [](const Location& a, const Location& b) {
        return a.id == b.id && a.size == b.size && a.owner == b.owner &&
               a.client_rank == b.client_rank;
    };
    auto ent_eq = [](const Entity& a, const Entity& b) {
        return a.id == b.id && a.kind == b.kind && a.country == b.country;
    };
    if (locations_.size() != other.locations_.size() || entities_.size() != other.entities_.size())
        return false;
    for (std::size_t i = 0; i < locations_.size(); ++i)
        if (!loc_eq(locations_[i], other.locations_[i])) return false;
    for (std::size_t i = 0; i < entities_.size(); ++i)
        if (!ent_eq(entities_[i], other.entities_[i])) return false;
    if (ip_index_.size() != other.ip_index_.size()) return false;
    for (std::size_t i = 0; i < ip_index_.size(); ++i) {
        const auto& a = ip_index_[i];
        const auto& b = other.ip_index_[i];
        if (a.prefix.bits != b.prefix.bits || a.prefix.len != b.prefix.len ||
            a.location != b.location)
            return false;
    }
    const auto& p = links_.procedural;
    const auto& q = other.links_.procedural;
    if (p.enabled != q.enabled || p.seed != q.seed || p.mean_transit != q.mean_transit ||
        p.max_transit != q.max_transit)
        return false;
    return links_.raw() == other.links_.raw();
}

NetworkMap generate_synthetic_map(const SyntheticMapSpec& spec, std::uint64_t seed) {
    if (spec.n_locations == 0) throw ConfigError("synthetic map: n_locations must be > 0");
    if (spec.n_entities == 0) throw ConfigError("synthetic map: n_entities must be > 0");
    if (spec.n_client_ranked > spec.n_locations)
        throw ConfigError("synthetic map: n_client_ranked exceeds n_locations");
    if (spec.mean_entities_per_link < 2.0 && spec.n_locations > 1)
        throw ConfigError("synthetic map: mean_entities_per_link must be >= 2");

    Rng rng(derive_seed(seed, 0x6D6170));  // "map"

    std::vector<Entity> entities(spec.n_entities);
    std::uint32_t n_ixp = static_cast<std::uint32_t>(spec.ixp_fraction * spec.n_entities);
    std::uint32_t n_as = spec.n_entities - n_ixp;
    if (n_as == 0) {
        n_as = 1;
        --n_ixp;
    }
    for (std::uint32_t i = 0; i < spec.n_entities; ++i) {
        entities[i].id = i;
        entities[i].kind = i < n_as ? EntityKind::as_org : EntityKind::ixp_org;
        if (spec.n_countries > 0) {
            std::uint32_t c = static_cast<std::uint32_t>(rng.below(spec.n_countries));
            char buf[16];
            std::snprintf(buf, sizeof buf, "C%02u", c);
            entities[i].country = buf;
        }
    }

    // Owners are drawn with a bias toward low entity ids so that some
    // organizations own many ASes and a tail owns exactly one (lone ASes).
    std::vector<Location> locations(spec.n_locations);
    for (std::uint32_t i = 0; i < spec.n_locations; ++i) {
        locations[i].id = i;
        double u = rng.next_unit();
        locations[i].owner = static_cast<EntityId>(u * u * n_as);
        // heavy-tailed sizes; exponent of 2 keeps the spread within ~4 decades
        double s = rng.next_unit();
        locations[i].size = 1 + static_cast<std::uint64_t>(1e4 * s * s * s * s);
    }

    // Client ranks over a seeded shuffle, rank 1 most popular.
    std::vector<std::uint32_t> order(spec.n_locations);
    for (std::uint32_t i = 0; i < spec.n_locations; ++i) order[i] = i;
    for (std::uint32_t i = spec.n_locations; i > 1; --i) {
        std::uint32_t j = static_cast<std::uint32_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
    }
    for (std::uint32_t r = 0; r < spec.n_client_ranked; ++r)
        locations[order[r]].client_rank = r + 1;

    std::vector<PrefixEntry> prefixes(spec.n_locations);
    for (std::uint32_t i = 0; i < spec.n_locations; ++i) {
        prefixes[i].prefix.bits = (1u << 24) + i * 256u;
        prefixes[i].prefix.len = 24;
        prefixes[i].location = i;
    }

    VirtualLinkTable links;
    links.procedural.enabled = true;
    links.procedural.seed = derive_seed(seed, 0x6C696E6B);  // "link"
    links.procedural.mean_transit = std::max(0.0, spec.mean_entities_per_link - 2.0);
    links.procedural.max_transit = 16;

    return NetworkMap(std::move(locations), std::move(entities), std::move(links),
                      std::move(prefixes));
}

namespace {

constexpr char kMapMagic[4] = {'T', 'A', 'P', 'M'};
constexpr std::uint8_t kMapVersion = 1;
constexpr std::uint8_t kFlagTwoByteEntities = 0x01;
constexpr std::uint8_t kFlagProceduralLinks = 0x02;

}  // namespace

std::vector<std::uint8_t> serialize_map(const NetworkMap& map) {
    ByteWriter w;
    bool two_byte = true;
    for (const Entity& e : map.entities()) two_byte = two_byte && e.id <= 0xFFFF;
    two_byte = two_byte && map.entities().size() <= 0x10000;

    w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMapMagic), 4));
    w.u8(kMapVersion);
    std::uint8_t flags = 0;
    if (two_byte) flags |= kFlagTwoByteEntities;
    if (map.links().procedural.enabled) flags |= kFlagProceduralLinks;
    w.u8(flags);

    auto put_entity_id = [&](EntityId id) {
        if (two_byte)
            w.u16(static_cast<std::uint16_t>(id));
        else
            w.u32(id);
    };

    w.varint(map.entities().size());
    for (const Entity& e : map.entities()) {
        put_entity_id(e.id);
        w.u8(static_cast<std::uint8_t>(e.kind));
        w.str8(e.country);
    }

    w.varint(map.locations().size());
    for (const Location& loc : map.locations()) {
        w.varint(loc.id);
        w.varint(loc.size);
        put_entity_id(loc.owner);
        w.varint(loc.client_rank ? *loc.client_rank : 0);
    }

    if (map.links().procedural.enabled) {
        const auto& p = map.links().procedural;
        w.u64(p.seed);
        w.f64(p.mean_transit);
        w.u8(static_cast<std::uint8_t>(p.max_transit));
    }

    // Explicit links sorted by key for byte-stable output.
    std::vector<std::uint64_t> keys;
    keys.reserve(map.links().raw().size());
    for (const auto& kv : map.links().raw()) keys.push_back(kv.first);
    std::sort(keys.begin(), keys.end());
    w.varint(keys.size());
    for (std::uint64_t k : keys) {
        const auto& transit = map.links().raw().at(k);
        if (transit.size() > 255) throw ArgumentError("link transit set exceeds 255 entities");
        w.varint(k >> 32);
        w.varint(k & 0xFFFFFFFFu);
        w.u8(static_cast<std::uint8_t>(transit.size()));
        for (EntityId e : transit) put_entity_id(e);
    }

    w.varint(map.ip_index().size());
    for (const PrefixEntry& pe : map.ip_index()) {
        w.u32(pe.prefix.bits);
        w.u8(pe.prefix.len);
        w.varint(pe.location);
    }
    return w.take();
}

NetworkMap deserialize_map(std::span<const std::uint8_t> data) {
    ByteReader r(data);
    for (char c : kMapMagic)
        if (r.u8() != static_cast<std::uint8_t>(c)) r.fail("bad magic");
    if (r.u8() != kMapVersion) r.fail("unsupported version");
    std::uint8_t flags = r.u8();
    bool two_byte = flags & kFlagTwoByteEntities;

    auto get_entity_id = [&]() -> EntityId { return two_byte ? r.u16() : r.u32(); };

    std::uint64_t n_ent = r.varint();
    std::vector<Entity> entities;
    entities.reserve(n_ent);
    for (std::uint64_t i = 0; i < n_ent; ++i) {
        Entity e;
        e.id = get_entity_id();
        std::uint8_t kind = r.u8();
        if (kind > 1) r.fail("bad entity kind");
        e.kind = static_cast<EntityKind>(kind);
        e.country = r.str8();
        entities.push_back(std::move(e));
    }

    std::uint64_t n_loc = r.varint();
    std::vector<Location> locations;
    locations.reserve(n_loc);
    for (std::uint64_t i = 0; i < n_loc; ++i) {
        Location loc;
        loc.id = static_cast<LocationId>(r.varint());
        loc.size = r.varint();
        loc.owner = get_entity_id();
        std::uint64_t rank = r.varint();
        if (rank) loc.client_rank = static_cast<std::uint32_t>(rank);
        locations.push_back(loc);
    }

    VirtualLinkTable links;
    if (flags & kFlagProceduralLinks) {
        links.procedural.enabled = true;
        links.procedural.seed = r.u64();
        links.procedural.mean_transit = r.f64();
        links.procedural.max_transit = r.u8();
    }

    std::uint64_t n_links = r.varint();
    for (std::uint64_t i = 0; i < n_links; ++i) {
        LocationId a = static_cast<LocationId>(r.varint());
        LocationId b = static_cast<LocationId>(r.varint());
        std::uint8_t count = r.u8();
        std::vector<EntityId> transit(count);
        for (std::uint8_t j = 0; j < count; ++j) transit[j] = get_entity_id();
        links.set_link(a, b, std::move(transit));
    }

    std::uint64_t n_pref = r.varint();
    std::vector<PrefixEntry> prefixes;
    prefixes.reserve(n_pref);
    for (std::uint64_t i = 0; i < n_pref; ++i) {
        PrefixEntry pe;
        pe.prefix.bits = r.u32();
        pe.prefix.len = r.u8();
        if (pe.prefix.len > 32) r.fail("bad prefix length");
        pe.location = static_cast<LocationId>(r.varint());
        prefixes.push_back(pe);
    }
    r.expect_end();

    try {
        return NetworkMap(std::move(locations), std::move(entities), std::move(links),
                          std::move(prefixes));
    } catch (const ArgumentError& e) {
        throw FormatError(r.offset(), std::string("inconsistent map: ") + e.what());
    }
}

std::uint32_t parse_ipv4(const std::string& dotted) {
    unsigned a, b, c, d;
    char extra;
    if (std::sscanf(dotted.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &extra) != 4 || a > 255 ||
        b > 255 || c > 255 || d > 255)
        throw ArgumentError("bad IPv4 address: " + dotted);
    return (a << 24) | (b << 16) | (c << 8) | d;
}

std::string format_ipv4(std::uint32_t addr) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", addr >> 24, (addr >> 16) & 255,
                  (addr >> 8) & 255, addr & 255);
    return buf;
}

IpPrefix parse_prefix(const std::string& cidr) {
    auto slash = cidr.find('/');
    if (slash == std::string::npos) throw ArgumentError("prefix missing /len: " + cidr);
    IpPrefix p;
    p.bits = parse_ipv4(cidr.substr(0, slash));
    int len = std::stoi(cidr.substr(slash + 1));
    if (len < 0 || len > 32) throw ArgumentError("bad prefix length: " + cidr);
    p.len = static_cast<std::uint8_t>(len);
    if (len < 32) p.bits &= len == 0 ? 0u : ~((1u << (32 - len)) - 1);
    return p;
}

std::string format_prefix(const IpPrefix& p) {
    return format_ipv4(p.bits) + "/" + std::to_string(p.len);
}

}  // namespace taps
